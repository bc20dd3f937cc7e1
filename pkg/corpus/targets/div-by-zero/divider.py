"""Integer ratio helpers with no denominator validation."""


def divide(a, b):
    return a // b


def ratio_percent(a, b):
    return divide(a * 100, b)
