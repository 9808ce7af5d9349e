"""Exception hierarchy.

Two families: :class:`ValidationError` for bad inputs or configuration (CLI
exit code 1) and :class:`NumericError` for failures of a numerical routine
on valid inputs (CLI exit code 2).
"""
from __future__ import annotations


class ProxSamplerError(Exception):
    """Base class for all package errors."""


class ValidationError(ProxSamplerError, ValueError):
    """Invalid arguments, shapes or parameter values."""


class ConfigError(ValidationError):
    """Malformed or inconsistent experiment configuration."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class CapabilityError(ValidationError):
    """The potential lacks what an operation needs (gradient or prox)."""


class UndefinedBoundError(ValidationError):
    """A rate bound was evaluated outside its domain of definition."""


class NumericError(ProxSamplerError, ArithmeticError):
    """A numerical routine failed on valid inputs."""

    def __init__(self, message: str, chain: int | None = None):
        self.chain = chain
        if chain is not None:
            message = f"chain {chain}: {message}"
        super().__init__(message)


class ConvergenceError(NumericError):
    """Iterative minimization ran out of budget before reaching tolerance."""

    def __init__(self, message: str, last_iterate=None, residual: float | None = None,
                 chain: int | None = None):
        self.last_iterate = last_iterate
        self.residual = residual
        super().__init__(message, chain=chain)


class ContractViolation(NumericError):
    """Rejection-sampling acceptance probability exceeded one."""


class RunawayRejectionError(NumericError):
    """Rejection sampler hit its trial cap without accepting."""


class DomainTooSmallError(NumericError):
    """Grid domain truncates a non-negligible amount of probability mass."""


class NumericRangeError(NumericError):
    """Underflow or overflow that invalidates a quadrature."""


class SupportError(NumericError):
    """Density has mass where the reference density vanishes."""


class MultivaluedProxError(NumericError):
    """The proximal problem has several global minimizers."""
