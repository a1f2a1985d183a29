"""Gamma and regularized incomplete gamma functions.

The bulk evaluations delegate to :mod:`scipy.special`, which switches between
the power series, the continued fraction and Temme's uniform asymptotic
expansion internally.  What scipy does not offer is provided here: log-space
variants that stay finite when the regularized ratios underflow, and a
safeguarded Newton inverse of ``P(a, .)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError

__all__ = [
    "SpecAccuracy",
    "DEFAULT_ACCURACY",
    "log_gamma",
    "reg_lower_gamma",
    "reg_upper_gamma",
    "log_reg_lower_gamma",
    "log_reg_upper_gamma",
    "inv_reg_lower_gamma",
]

# below this the regularized ratios are recomputed in log space
_TINY = 1e-280


@dataclass(frozen=True)
class SpecAccuracy:
    rel_tol: float = 1e-12
    max_iter: int = 500

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1e-6):
            raise DomainError(f"rel_tol must lie in (0, 1e-6), got {self.rel_tol}")
        if self.max_iter < 100:
            raise DomainError(f"max_iter must be >= 100, got {self.max_iter}")


DEFAULT_ACCURACY = SpecAccuracy()


def _check_shape(a):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise DomainError("shape parameter must be finite and > 0")
    return a


def _check_arg(z):
    z = np.asarray(z, dtype=float)
    if np.any(np.isnan(z)) or np.any(z < 0):
        raise DomainError("argument must be >= 0")
    return z


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def log_gamma(a):
    """``ln Gamma(a)`` for ``a > 0``."""
    a = _check_shape(a)
    return _out(special.gammaln(a))


def reg_lower_gamma(a, z):
    """Regularized lower incomplete gamma function ``P(a, z)``."""
    a = _check_shape(a)
    z = _check_arg(z)
    return _out(special.gammainc(a, z))


def reg_upper_gamma(a, z):
    """Regularized upper incomplete gamma function ``Q(a, z) = 1 - P(a, z)``.

    Computed directly, not by subtraction, so it keeps full relative accuracy
    in the far right tail.
    """
    a = _check_shape(a)
    z = _check_arg(z)
    return _out(special.gammaincc(a, z))


def _log_prefactor(a, z):
    # log(z^a e^{-z} / Gamma(a))
    return a * math.log(z) - z - math.lgamma(a)


def _log_lower_series(a, z, acc):
    # P(a,z) = z^a e^{-z}/Gamma(a+1) * sum_n z^n / ((a+1)...(a+n))
    term = 1.0
    total = 1.0
    ap = a
    for _ in range(acc.max_iter * 100):
        ap += 1.0
        term *= z / ap
        total += term
        if term < total * acc.rel_tol * 1e-3:
            return _log_prefactor(a, z) - math.log(a) + math.log(total)
    raise ConvergenceError(f"lower series did not converge for a={a}, z={z}")


def _log_upper_cf(a, z, acc):
    # modified Lentz evaluation of the continued fraction for Q(a,z)
    fpmin = 1e-300
    b = z + 1.0 - a
    c = 1.0 / fpmin
    d = 1.0 / b
    h = d
    for i in range(1, acc.max_iter * 100):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < fpmin:
            d = fpmin
        c = b + an / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < acc.rel_tol * 1e-3:
            return _log_prefactor(a, z) + math.log(h)
    raise ConvergenceError(f"continued fraction did not converge for a={a}, z={z}")


def log_reg_lower_gamma(a, z, accuracy: SpecAccuracy = DEFAULT_ACCURACY):
    """``ln P(a, z)``; finite wherever ``z > 0`` even if ``P`` underflows."""
    a = _check_shape(a)
    z = _check_arg(z)
    shape = np.broadcast_shapes(a.shape, z.shape)
    a, z = (np.atleast_1d(v) for v in np.broadcast_arrays(a, z))
    p = special.gammainc(a, z)
    with np.errstate(divide="ignore"):
        out = np.log(p)
    for idx in zip(*np.nonzero((p < _TINY) & (z > 0))):
        out[idx] = _log_lower_series(float(a[idx]), float(z[idx]), accuracy)
    return _out(out.reshape(shape))


def log_reg_upper_gamma(a, z, accuracy: SpecAccuracy = DEFAULT_ACCURACY):
    """``ln Q(a, z)``; finite for every finite ``z`` even if ``Q`` underflows."""
    a = _check_shape(a)
    z = _check_arg(z)
    shape = np.broadcast_shapes(a.shape, z.shape)
    a, z = (np.atleast_1d(v) for v in np.broadcast_arrays(a, z))
    q = special.gammaincc(a, z)
    with np.errstate(divide="ignore"):
        out = np.log(q)
    for idx in zip(*np.nonzero((q < _TINY) & np.isfinite(z))):
        out[idx] = _log_upper_cf(float(a[idx]), float(z[idx]), accuracy)
    return _out(out.reshape(shape))


def _initial_guess(a, p):
    # Numerical Recipes (3rd ed., 6.2.1) starting values
    x = np.empty_like(p)
    big = a > 1.0
    if np.any(big):
        ab, pb = a[big], p[big]
        pp = np.where(pb < 0.5, pb, 1.0 - pb)
        t = np.sqrt(-2.0 * np.log(pp))
        g = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t
        g = np.where(pb < 0.5, -g, g)
        x[big] = np.maximum(1e-3, ab * (1.0 - 1.0 / (9.0 * ab) - g / (3.0 * np.sqrt(ab))) ** 3)
    small = ~big
    if np.any(small):
        as_, ps = a[small], p[small]
        t = 1.0 - as_ * (0.253 + as_ * 0.12)
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = (ps / t) ** (1.0 / as_)
            hi = 1.0 - np.log1p(-(ps - t) / (1.0 - t))
        x[small] = np.where(ps < t, lo, hi)
    return x


def inv_reg_lower_gamma(a, p, accuracy: SpecAccuracy = DEFAULT_ACCURACY, tol: float = 1e-10):
    """Solve ``P(a, z) = p`` for ``z``.

    Halley-corrected Newton steps from the Numerical Recipes starting value,
    with a bracket that falls back to bisection whenever a step leaves it.
    Vectorized over ``a`` and ``p``.

    Raises
    ------
    DomainError
        If ``p`` is outside ``[0, 1)``.
    ConvergenceError
        If some element misses ``|P(a, z) - p| <= tol`` after ``max_iter`` steps.
    """
    a = _check_shape(a)
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p >= 1):
        raise DomainError("probability must lie in [0, 1)")
    a, p = np.broadcast_arrays(a, p)
    shape = a.shape
    a = a.astype(float).ravel()
    p = p.astype(float).ravel()
    # quantiles below the smallest subnormal cannot be represented
    floor = special.gammainc(a, np.nextafter(0.0, 1.0))
    if np.any((p > 0) & (p < floor)):
        raise DomainError("quantile underflows double precision for this (a, p)")

    z = np.zeros_like(p)
    live = np.flatnonzero(p > 0)
    if live.size:
        z[live] = _newton_bisect(a[live], p[live], accuracy, tol)
    return _out(z.reshape(shape))


def _newton_bisect(a, p, accuracy, tol):
    x = _initial_guess(a, p)
    lo = np.zeros_like(x)
    hi = np.full_like(x, np.inf)
    lgam = special.gammaln(a)
    active = np.arange(x.size)
    for _ in range(accuracy.max_iter):
        av, pv, xv = a[active], p[active], x[active]
        err = special.gammainc(av, xv) - pv
        below = err < 0
        lo[active] = np.where(below, np.maximum(lo[active], xv), lo[active])
        hi[active] = np.where(below, hi[active], np.minimum(hi[active], xv))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dens = np.exp((av - 1.0) * np.log(xv) - xv - lgam[active])
            u = err / dens
            step = u / (1.0 - 0.5 * np.minimum(1.0, u * ((av - 1.0) / xv - 1.0)))
        new = xv - step
        lv, hv = lo[active], hi[active]
        bad = ~np.isfinite(new) | (new <= lv) | (new >= hv)
        new = np.where(bad, np.where(np.isfinite(hv), 0.5 * (lv + hv), 2.0 * xv), new)
        hit = np.abs(err) <= 1e-3 * tol
        x[active] = np.where(hit, xv, new)
        settled = hit | (np.abs(new - xv) <= 4.0 * np.finfo(float).eps * xv)
        active = active[~settled]
        if active.size == 0:
            break
    resid = np.abs(special.gammainc(a, x) - p)
    if np.any(resid > tol):
        worst = int(np.argmax(resid))
        raise ConvergenceError(
            f"inverse did not converge: a={a[worst]}, p={p[worst]}, residual={resid[worst]:.3g}"
        )
    return x
