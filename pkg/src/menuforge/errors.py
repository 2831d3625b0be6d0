"""Exception types raised across the package."""

from __future__ import annotations


class MenuforgeError(ValueError):
    """Base class for every error raised by menuforge."""


class DimensionMismatchError(MenuforgeError):
    def __init__(self, what: str, expected: int, got: int):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected size {expected}, got size {got}")


class InvalidBeliefError(MenuforgeError):
    pass


class EmptyMenuError(MenuforgeError):
    pass


class ZeroMassError(MenuforgeError):
    """A prior puts zero mass on some outcome; reduce the outcome space first."""


class OutsideHullError(MenuforgeError):
    """The requested belief is not a mixture of the available action beliefs."""


class NotElicitableError(MenuforgeError):
    pass


class TrivialInstanceError(MenuforgeError):
    def __init__(self, reason: str, message: str):
        self.reason = reason
        super().__init__(message)


class InfeasibleError(MenuforgeError):
    pass
