from __future__ import annotations


class CCDimError(Exception):
    """Base class for library errors."""


class InputError(CCDimError, ValueError):
    """Bad arguments or malformed input data."""


class ConfigError(InputError):
    """A system configuration failed validation."""


class ExpansionViolation(ConfigError):
    """A branch is not uniformly expanding (|f'| <= 1 was sampled)."""


class ParseError(InputError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class NumericError(CCDimError, ArithmeticError):
    """A numerical procedure failed (root finding, zero derivative, bracketing)."""


class DomainFault(NumericError):
    def __init__(self, message: str, subexpression: str | None = None):
        self.subexpression = subexpression
        if subexpression is not None:
            message = f"{message} in {subexpression!r}"
        super().__init__(message)
