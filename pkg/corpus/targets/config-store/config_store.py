"""A config store whose snapshot integrity check can only trip via raw writes."""


class StateError(Exception):
    pass


class ConfigStore:
    def __init__(self):
        self._overlay = None
        self.entries = {}

    def preload(self, key):
        self.entries.setdefault(key, "")
        return self.entries[key]

    def snapshot(self):
        if self._overlay is not None:
            raise StateError("uncommitted raw overlay")
        return dict(self.entries)

    def set_raw(self, blob):
        # Maintenance hatch: bypasses the committed-entry bookkeeping.
        self._overlay = blob
