"""Jump-size estimation and the continuity test at a known cutoff.

The one-sided estimators average the truncated gamma kernels at the cutoff.
Their O(sqrt(b)) boundary bias is removed by a multiplicative (Terrell-Scott)
combination of two pilots at bandwidths ``b`` and ``b / delta``.  The
difference of the corrected limits, scaled by ``sqrt(n sqrt(b))`` and a
plug-in variance, is asymptotically standard normal under continuity.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import (
    DegeneratePilotError,
    DegenerateVarianceError,
    DomainError,
    OneSidedSampleError,
)
from .kernels import KernelParams, gamma_kernel, trunc_kernel_minus, trunc_kernel_plus

__all__ = [
    "Variant",
    "Sample",
    "SideCounts",
    "JumpEstimate",
    "JumpTestResult",
    "DensityCurve",
    "DegeneratePilotWarning",
    "MAX_DELTA",
    "fhat_minus",
    "fhat_plus",
    "fhat_gamma",
    "mbc_exponents",
    "mbc_combine",
    "mbc_estimate",
    "jump_estimate",
    "jump_estimate_raw",
    "lambda_factor",
    "variance_estimate",
    "jump_test",
    "density_curve",
]

# lambda(delta) loses digits to cancellation as delta -> 1
MAX_DELTA = 0.99


class Variant(str, Enum):
    """Plug-in variance estimator: corrected one-sided limits (V1) or the
    untruncated gamma-kernel estimate at the cutoff (V2)."""

    V1 = "V1"
    V2 = "V2"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise DomainError(f"unknown variance variant {value!r}; expected V1 or V2") from None


class DegeneratePilotWarning(RuntimeWarning):
    """Both pilots of a bias-corrected estimate vanished; the estimate is 0."""


class SideCounts(NamedTuple):
    n_minus: int
    n_plus: int


@dataclass(frozen=True)
class Sample:
    """Nonnegative observations kept in ascending order."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise DomainError("sample is empty")
        if not np.all(np.isfinite(v)):
            raise DomainError("sample contains non-finite values")
        if np.any(v < 0):
            raise DomainError("sample contains negative values")
        v = np.sort(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def side_counts(self, c: float) -> SideCounts:
        """Counts strictly below ``c`` and at or above ``c``."""
        k = int(np.searchsorted(self.values, c, side="left"))
        return SideCounts(k, self.n - k)

    def left(self, c: float) -> np.ndarray:
        return self.values[: self.side_counts(c).n_minus]

    def right(self, c: float) -> np.ndarray:
        return self.values[self.side_counts(c).n_minus :]

    def rescaled(self, s: float) -> "Sample":
        return Sample(self.values * s)


class JumpEstimate(NamedTuple):
    f_minus: float
    f_plus: float
    jump: float


@dataclass(frozen=True)
class JumpTestResult:
    f_minus: float
    f_plus: float
    jump: float
    variance: float
    t_stat: float
    p_value: float
    b: float
    delta: float
    variant: Variant
    alpha: float = 0.05
    n: int = 0
    n_minus: int = 0
    n_plus: int = 0

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha


@dataclass(frozen=True)
class DensityCurve:
    """Design points with estimates; ``side`` is 'left', 'right' or 'none'."""

    x: np.ndarray
    estimate: np.ndarray
    side: tuple[str, ...]

    def __len__(self):
        return len(self.side)

    def rows(self):
        return list(zip(self.x.tolist(), self.estimate.tolist(), self.side))


def _check_positive(name, v):
    if not (np.isfinite(v) and v > 0):
        raise DomainError(f"{name} must be finite and > 0, got {v}")


def _check_delta(delta):
    if not (0.0 < delta <= MAX_DELTA):
        raise DomainError(f"mixing exponent must lie in (0, {MAX_DELTA}], got {delta}")


def fhat_minus(sample: Sample, c: float, b: float, x: float | None = None) -> float:
    """Left-limit estimator: sample mean of the left truncated kernel at ``x``
    (defaults to the cutoff).  Observations at or above ``c`` add nothing."""
    _check_positive("cutoff", c)
    params = KernelParams(c if x is None else x, b, c)
    left = sample.left(c)
    if left.size == 0:
        return 0.0
    return float(np.sum(trunc_kernel_minus(params, left)) / sample.n)


def fhat_plus(sample: Sample, c: float, b: float, x: float | None = None) -> float:
    """Right-limit estimator, the mirror image of :func:`fhat_minus`."""
    _check_positive("cutoff", c)
    params = KernelParams(c if x is None else x, b, c)
    right = sample.right(c)
    if right.size == 0:
        return 0.0
    return float(np.sum(trunc_kernel_plus(params, right)) / sample.n)


def fhat_gamma(sample: Sample, b: float, x: float) -> float:
    """Plain gamma-kernel density estimate at ``x``."""
    return float(np.sum(gamma_kernel(KernelParams(x, b), sample.values)) / sample.n)


def mbc_exponents(delta: float) -> tuple[float, float]:
    """Exponents on the pilots at ``b`` and ``b/delta``; they sum to one."""
    _check_delta(delta)
    r = math.sqrt(delta)
    return 1.0 / (1.0 - r), -r / (1.0 - r)


def mbc_combine(f_b: float, f_bd: float, delta: float) -> float:
    """Multiplicative combination ``f_b**e1 * f_bd**e2`` of two pilot estimates.

    Evaluated in log space.  Returns 0 (with a :class:`DegeneratePilotWarning`)
    when both pilots vanish.
    """
    e1, e2 = mbc_exponents(delta)
    if f_b < 0 or f_bd < 0:
        raise DomainError("pilot estimates must be nonnegative")
    if f_bd == 0.0:
        if f_b == 0.0:
            warnings.warn("both pilots are zero; bias-corrected estimate set to 0", DegeneratePilotWarning, stacklevel=2)
            return 0.0
        raise DegeneratePilotError(f"oversmoothed pilot vanished while the other is {f_b:g}")
    if f_b == 0.0:
        return 0.0
    return math.exp(e1 * math.log(f_b) + e2 * math.log(f_bd))


def mbc_estimate(sample: Sample, c: float, b: float, delta: float, side: str) -> float:
    """Bias-corrected estimate of the left or right limit of the density at ``c``."""
    _check_delta(delta)
    _check_positive("smoothing parameter", b)
    if side in ("left", "minus", "-"):
        est = fhat_minus
    elif side in ("right", "plus", "+"):
        est = fhat_plus
    else:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")
    return mbc_combine(est(sample, c, b), est(sample, c, b / delta), delta)


def _require_both_sides(sample, c):
    counts = sample.side_counts(c)
    if counts.n_minus == 0 or counts.n_plus == 0:
        where = "below" if counts.n_minus == 0 else "at or above"
        raise OneSidedSampleError(f"no observations {where} the cutoff c={c}")
    return counts


def jump_estimate(sample: Sample, c: float, b: float, delta: float) -> JumpEstimate:
    """Bias-corrected limits at ``c`` and their difference (right minus left)."""
    _check_positive("cutoff", c)
    _require_both_sides(sample, c)
    fm = mbc_estimate(sample, c, b, delta, "left")
    fp = mbc_estimate(sample, c, b, delta, "right")
    return JumpEstimate(fm, fp, fp - fm)


def jump_estimate_raw(sample: Sample, c: float, b: float) -> JumpEstimate:
    """Uncorrected one-sided limits and their difference."""
    _check_positive("smoothing parameter", b)
    fm = fhat_minus(sample, c, b)
    fp = fhat_plus(sample, c, b)
    return JumpEstimate(fm, fp, fp - fm)


def lambda_factor(delta: float) -> float:
    """Variance inflation of the bias-corrected estimator relative to the
    uncorrected one; increases from 1 (delta -> 0) to 11/4 (delta -> 1)."""
    _check_delta(delta)
    r = math.sqrt(delta)
    s = math.sqrt(1.0 + delta)
    return ((1.0 + delta * r) * s - 2.0 * math.sqrt(2.0) * delta) / (s * (1.0 - r) ** 2)


def _variance_from(f_minus, f_plus, f_gamma, c, delta, variant):
    scale = lambda_factor(delta) / (math.sqrt(math.pi) * math.sqrt(c))
    if variant is Variant.V1:
        v = scale * (f_plus + f_minus)
    else:
        v = scale * 2.0 * f_gamma
    if not v > 0:
        raise DegenerateVarianceError("variance estimate is zero; too little data near the cutoff")
    return v


def variance_estimate(sample: Sample, c: float, b: float, delta: float, variant="V2") -> float:
    """Plug-in estimate of the asymptotic variance of the scaled jump estimate."""
    variant = Variant.parse(variant)
    _require_both_sides(sample, c)
    if variant is Variant.V1:
        fm, fp, _ = jump_estimate(sample, c, b, delta)
        return _variance_from(fm, fp, 0.0, c, delta, variant)
    return _variance_from(0.0, 0.0, fhat_gamma(sample, b, c), c, delta, variant)


def jump_test(sample: Sample, c: float, b: float, delta: float = 0.81, variant="V2", alpha: float = 0.05) -> JumpTestResult:
    """Two-sided test of continuity of the density at ``c``.

    Raises
    ------
    OneSidedSampleError
        No data on one side of ``c``.
    DegenerateVarianceError
        The variance estimate vanished.
    """
    variant = Variant.parse(variant)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    # parameter errors take precedence over data degeneracy
    KernelParams(c, b, c)
    counts = _require_both_sides(sample, c)
    fm, fp, jump = jump_estimate(sample, c, b, delta)
    fg = fhat_gamma(sample, b, c) if variant is Variant.V2 else 0.0
    var = _variance_from(fm, fp, fg, c, delta, variant)
    t = math.sqrt(sample.n * math.sqrt(b)) * jump / math.sqrt(var)
    p = float(min(1.0, 2.0 * stats.norm.sf(abs(t))))
    return JumpTestResult(
        f_minus=fm, f_plus=fp, jump=jump, variance=var, t_stat=t, p_value=p,
        b=b, delta=delta, variant=variant, alpha=alpha,
        n=sample.n, n_minus=counts.n_minus, n_plus=counts.n_plus,
    )


def density_curve(sample: Sample, b: float, grid, c: float | None = None) -> DensityCurve:
    """Density estimates over ``grid``.

    Without a cutoff this is the plain gamma-kernel estimator.  With one, the
    left truncated estimator is used below ``c`` and the right one above;
    a grid point equal to ``c`` yields two rows, one per one-sided limit.
    """
    grid = np.sort(np.asarray(grid, dtype=float).ravel())
    if np.any(~np.isfinite(grid)) or np.any(grid < 0):
        raise DomainError("grid points must be finite and >= 0")
    _check_positive("smoothing parameter", b)
    xs, est, side = [], [], []
    for x in grid:
        if c is None:
            xs.append(x); est.append(fhat_gamma(sample, b, x)); side.append("none")
            continue
        if x <= c:
            xs.append(x); est.append(fhat_minus(sample, c, b, x)); side.append("left")
        if x >= c:
            xs.append(x); est.append(fhat_plus(sample, c, b, x)); side.append("right")
    return DensityCurve(np.array(xs), np.array(est), tuple(side))
