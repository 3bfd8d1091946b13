from typing import Self


class QSwitchError(Exception):
    pass


class DomainError(QSwitchError, ValueError):
    pass


class ConfigError(QSwitchError):
    line: int | None

    def __init__(self: Self, msg: str, *, line: int | None = None) -> None:
        super().__init__(msg)
        self.line = line

    def __str__(self: Self) -> str:
        msg = super().__str__()
        return msg if self.line is None else f"line {self.line}: {msg}"
