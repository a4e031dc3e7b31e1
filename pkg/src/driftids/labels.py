from enum import IntEnum


class Label(IntEnum):
    BENIGN = 0
    MALICIOUS = 1

    @classmethod
    def parse(cls, text):
        text = text.strip().lower()
        if text == "benign":
            return cls.BENIGN
        if text == "malicious":
            return cls.MALICIOUS
        raise ValueError(f"unknown label {text!r}")

    def __str__(self):
        return self.name.lower()


BENIGN = Label.BENIGN
MALICIOUS = Label.MALICIOUS
