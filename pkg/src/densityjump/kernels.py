"""Gamma kernel and its truncated, re-normalized halves.

For a design point ``x`` and smoothing parameter ``b`` the gamma kernel is the
Gamma(x/b + 1, b) density evaluated at the data point ``u``.  Splitting it at
a cutoff ``c`` gives a left part on ``[0, c)`` and a right part on
``[c, inf)``; dividing each by its mass, ``P(x/b+1, c/b)`` and
``Q(x/b+1, c/b)``, turns both into proper kernels.

Everything is evaluated as ``exp(log numerator - log normalizer)``, so shapes
``x/b`` in the tens of thousands are fine.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateTruncationError, DomainError
from .specfun import log_reg_lower_gamma, log_reg_upper_gamma

__all__ = [
    "KernelParams",
    "log_gamma_kernel",
    "gamma_kernel",
    "trunc_kernel_minus",
    "trunc_kernel_plus",
    "truncation_weights",
]


@dataclass(frozen=True)
class KernelParams:
    """Design point ``x``, smoothing parameter ``b`` and optional cutoff ``c``."""

    x: float
    b: float
    c: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.x) and self.x >= 0):
            raise DomainError(f"design point must be finite and >= 0, got {self.x}")
        if not (np.isfinite(self.b) and self.b > 0):
            raise DomainError(f"smoothing parameter must be finite and > 0, got {self.b}")
        if self.c is not None and not (np.isfinite(self.c) and self.c > 0):
            raise DomainError(f"cutoff must be finite and > 0, got {self.c}")

    @property
    def shape(self) -> float:
        """Shape ``x/b + 1`` of the underlying gamma density."""
        return self.x / self.b + 1.0

    def require_cutoff(self) -> float:
        if self.c is None:
            raise DomainError("a cutoff is required for truncated kernels")
        return self.c


def _check_u(u):
    u = np.asarray(u, dtype=float)
    if np.any(np.isnan(u)) or np.any(u < 0):
        raise DomainError("kernel argument must be >= 0")
    return u


def log_gamma_kernel(x, b, u):
    """Log of the gamma kernel; broadcasts over ``x``, ``b`` and ``u``.

    ``u = 0`` gives ``-inf`` for ``x > 0`` and ``-log b`` for ``x = 0``.
    No validation: callers are expected to have checked their inputs.
    """
    x, b, u = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(b, dtype=float), np.asarray(u, dtype=float)
    )
    ratio = x / b
    with np.errstate(divide="ignore", invalid="ignore"):
        # xlogy keeps 0 * log(0) = 0 for the x = 0 (exponential) case
        lognum = special.xlogy(ratio, u) - u / b
    return lognum - (ratio + 1.0) * np.log(b) - special.gammaln(ratio + 1.0)


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def gamma_kernel(params: KernelParams, u):
    """Gamma kernel ``K_G(x, b)`` evaluated at ``u >= 0``."""
    u = _check_u(u)
    return _out(np.exp(log_gamma_kernel(params.x, params.b, u)))


def truncation_weights(params: KernelParams) -> tuple[float, float]:
    """Masses ``(P, Q)`` of the gamma kernel left and right of the cutoff."""
    c = params.require_cutoff()
    a, z = params.shape, c / params.b
    return float(special.gammainc(a, z)), float(special.gammaincc(a, z))


def _log_trunc(params, u, side):
    c = params.require_cutoff()
    a, z = params.shape, c / params.b
    if side == "minus":
        lognorm = log_reg_lower_gamma(a, z)
        inside = u < c
    else:
        lognorm = log_reg_upper_gamma(a, z)
        inside = u >= c
    if not np.isfinite(lognorm):
        raise DegenerateTruncationError(
            f"kernel at x={params.x}, b={params.b} has no mass on the {side} side of c={c}"
        )
    # mask before exponentiating: off-side values can overflow
    logk = np.where(inside, log_gamma_kernel(params.x, params.b, u) - lognorm, -np.inf)
    return np.exp(logk)


def trunc_kernel_minus(params: KernelParams, u):
    """Left truncated kernel: support ``[0, c)``, integrates to one."""
    return _out(_log_trunc(params, _check_u(u), "minus"))


def trunc_kernel_plus(params: KernelParams, u):
    """Right truncated kernel: support ``[c, inf)``, integrates to one.

    The cutoff itself belongs to this side.
    """
    return _out(_log_trunc(params, _check_u(u), "plus"))
