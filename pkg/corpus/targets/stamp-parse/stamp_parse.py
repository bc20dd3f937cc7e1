"""Clock-stamp parsing that trusts the text after the first colon."""


def parse_stamp(text):
    if ":" not in text:
        return None
    hours, minutes = text.split(":", 1)
    return int(hours) * 60 + int(minutes)


def describe(text):
    total = parse_stamp(text)
    if total is None:
        return "not a stamp"
    return f"{total} minutes"
