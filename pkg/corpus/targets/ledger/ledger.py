"""A toy account ledger that only notices overdrafts after the fact."""


class OverdraftError(Exception):
    pass


class Ledger:
    OVERDRAFT_LIMIT = -2

    def open_account(self):
        self.balance = 0

    def deposit(self, n):
        self.balance = self.balance + n

    def withdraw(self, n):
        self.balance = self.balance - n
        if self.balance < self.OVERDRAFT_LIMIT:
            raise OverdraftError("balance below overdraft limit")
