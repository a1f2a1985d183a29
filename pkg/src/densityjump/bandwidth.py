"""Power-optimal choice of the smoothing parameter by sub-sampling.

Each side of the cutoff is sorted and dealt out round-robin into ``M``
sub-samples.  For every candidate ``b_k`` on a grid, the jump test is run on
each sub-sample and the fraction of rejections is the estimated power.  The
smallest power maximizer is rescaled from sub-sample size ``k`` to the full
sample size ``n`` via ``b_n = b_k * (k / n) ** q``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, OneSidedSampleError, SubsampleError
from .estim import MAX_DELTA, Sample, Variant, lambda_factor, mbc_exponents
from .specfun import log_reg_lower_gamma, log_reg_upper_gamma

__all__ = [
    "BandwidthConfig",
    "PowerCurve",
    "BandwidthSelection",
    "n_subsamples",
    "split_subsamples",
    "power_curve",
    "select_bandwidth",
]


@dataclass(frozen=True)
class BandwidthConfig:
    p: float = 0.5
    q: float = 4.0 / 9.0
    h_lo: float = 0.05
    h_hi: float = 0.50
    grid_step: float = 0.01
    alpha_crit: float = 1.96
    delta: float = 0.81
    variant: Variant = Variant.V2
    two_sided: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if not 0.4 < self.q < 1.0:
            raise DomainError(f"q must lie in (2/5, 1), got {self.q}")
        if not 0.0 < self.h_lo < self.h_hi < 1.0:
            raise DomainError(f"need 0 < h_lo < h_hi < 1, got [{self.h_lo}, {self.h_hi}]")
        if not self.grid_step > 0:
            raise DomainError(f"grid_step must be > 0, got {self.grid_step}")
        if not 0.0 < self.delta <= MAX_DELTA:
            raise DomainError(f"delta must lie in (0, {MAX_DELTA}], got {self.delta}")

    def grid(self) -> np.ndarray:
        """Arithmetic grid from ``h_lo`` to ``h_hi`` inclusive."""
        count = int(math.floor((self.h_hi - self.h_lo) / self.grid_step + 1e-9)) + 1
        return np.round(self.h_lo + self.grid_step * np.arange(count), 12)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d


@dataclass(frozen=True)
class PowerCurve:
    grid: np.ndarray
    rejections: np.ndarray  # rejection counts out of M, per grid point
    degenerate: np.ndarray  # sub-samples with an undefined statistic, per grid point
    M: int

    @property
    def power(self) -> np.ndarray:
        return self.rejections / self.M


@dataclass(frozen=True)
class BandwidthSelection:
    b_hat_n: float
    b_hat_k: float
    B_hat: float
    M: int
    k_minus: int
    k_plus: int
    n: int
    flat_flag: bool
    curve: PowerCurve = field(repr=False)

    @property
    def k(self) -> int:
        return self.k_minus + self.k_plus

    @property
    def power_curve(self) -> list[tuple[float, float]]:
        return list(zip(self.curve.grid.tolist(), self.curve.power.tolist()))


def n_subsamples(n_minus: int, n_plus: int, p: float) -> int:
    """``floor(min(n_minus**p, n_plus**p))``."""
    # the tiny guard keeps exact powers (e.g. sqrt(625)) from flooring down
    return int(math.floor(min(n_minus ** p, n_plus ** p) * (1 + 1e-12)))


def _sides(sample, c):
    counts = sample.side_counts(c)
    if counts.n_minus == 0 or counts.n_plus == 0:
        raise OneSidedSampleError(f"cannot sub-sample: one side of c={c} is empty")
    return sample.left(c), sample.right(c)


def _deal(left, right, M):
    if not 1 <= M <= min(left.size, right.size):
        raise SubsampleError(f"M={M} must lie in [1, {min(left.size, right.size)}]")
    km, kp = left.size // M, right.size // M
    # column m holds sorted positions m, m+M, m+2M, ...
    return left[: km * M].reshape(km, M), right[: kp * M].reshape(kp, M)


def split_subsamples(sample: Sample, c: float, M: int) -> list[Sample]:
    """Deal each sorted side round-robin into ``M`` disjoint sub-samples.

    Sub-sample ``m`` takes ordered positions ``m, m+M, ...`` on each side, up
    to ``n_minus // M`` and ``n_plus // M`` elements; the remainder is dropped.
    """
    left, right = _deal(*_sides(sample, c), M)
    return [Sample(np.concatenate([left[:, m], right[:, m]])) for m in range(M)]


def _log_side_sums(block, c, bs):
    """``log sum_i K_G(c, b)(X_i)`` down each column of ``block``, for every
    ``b`` in ``bs``; shape ``(len(bs), M)``."""
    ratio = c / bs
    const = (ratio + 1.0) * np.log(bs) + special.gammaln(ratio + 1.0)
    with np.errstate(divide="ignore"):
        logu = np.log(block).ravel()
    # at a fixed design point the log kernel is affine in (log u, u)
    with np.errstate(invalid="ignore"):
        logk = np.outer(ratio, logu) - np.outer(1.0 / bs, block.ravel()) - const[:, None]
    logk = logk.reshape(bs.size, *block.shape)
    top = logk.max(axis=1)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(logk - top[:, None, :]).sum(axis=1)) + top


def _subsample_stats(left, right, c, bs, cfg):
    k = left.shape[0] + right.shape[0]
    delta = cfg.delta
    e1, e2 = mbc_exponents(delta)
    pilots = (bs, bs / delta)
    sums = [(_log_side_sums(left, c, bw), _log_side_sums(right, c, bw)) for bw in pilots]

    def corrected(side, lognorm_fn):
        log_fb, log_fbd = (
            s[side] - np.asarray(lognorm_fn(c / bw + 1.0, c / bw))[:, None] - math.log(k)
            for s, bw in zip(sums, pilots)
        )
        with np.errstate(invalid="ignore"):
            logf = e1 * log_fb + e2 * log_fbd
        # a vanished oversmoothed pilot leaves the estimate undefined
        logf = np.where(np.isneginf(log_fbd) & ~np.isneginf(log_fb), np.nan, logf)
        logf = np.where(np.isneginf(log_fb) & np.isneginf(log_fbd), -np.inf, logf)
        return np.exp(logf)

    f_minus = corrected(0, log_reg_lower_gamma)
    f_plus = corrected(1, log_reg_upper_gamma)
    jump = f_plus - f_minus
    scale = lambda_factor(delta) / (math.sqrt(math.pi) * math.sqrt(c))
    if cfg.variant is Variant.V1:
        var = scale * (f_plus + f_minus)
    else:
        var = scale * 2.0 * (np.exp(sums[0][0]) + np.exp(sums[0][1])) / k
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.sqrt(k * np.sqrt(bs))[:, None] * jump / np.sqrt(var)
    return np.where(var > 0, t, np.nan)


def power_curve(sample: Sample, c: float, cfg: BandwidthConfig = BandwidthConfig(), M: int | None = None, grid=None) -> PowerCurve:
    """Estimated power of the sub-sample tests at each grid value of ``b_k``.

    Sub-samples whose statistic is undefined (vanished pilot or variance)
    count as non-rejections and are tallied in ``degenerate``.
    """
    if not (math.isfinite(c) and c > 0):
        raise DomainError(f"cutoff must be positive and finite, got {c}")
    left, right = _sides(sample, c)
    if M is None:
        M = n_subsamples(left.size, right.size, cfg.p)
    lblock, rblock = _deal(left, right, M)
    if lblock.shape[0] == 0 or rblock.shape[0] == 0:
        raise SubsampleError("a side of the sub-samples is empty after flooring")
    bs = cfg.grid() if grid is None else np.asarray(grid, dtype=float)
    if bs.size == 0 or np.any(bs <= 0):
        raise DomainError("grid must be nonempty and positive")
    t = _subsample_stats(lblock, rblock, c, bs, cfg)
    bad = ~np.isfinite(t)
    stat = np.abs(t) if cfg.two_sided else t
    hits = np.where(bad, False, stat > cfg.alpha_crit)
    return PowerCurve(bs, hits.sum(axis=1), bad.sum(axis=1), M)


def select_bandwidth(sample: Sample, c: float, cfg: BandwidthConfig = BandwidthConfig(), M: int | None = None, grid=None) -> BandwidthSelection:
    """Smallest power-maximizing ``b_k`` on the grid, rescaled to size ``n``.

    ``grid`` overrides ``cfg.grid()``; its order does not matter.
    """
    curve = power_curve(sample, c, cfg, M, grid)
    order = np.argsort(curve.grid, kind="stable")
    grid = curve.grid[order]
    hits = curve.rejections[order]
    b_k = float(grid[int(np.argmax(hits))])
    counts = sample.side_counts(c)
    km, kp = counts.n_minus // curve.M, counts.n_plus // curve.M
    k = km + kp
    B = b_k * k ** cfg.q
    return BandwidthSelection(
        b_hat_n=B * sample.n ** (-cfg.q),
        b_hat_k=b_k,
        B_hat=B,
        M=curve.M,
        k_minus=km,
        k_plus=kp,
        n=sample.n,
        flat_flag=bool(hits.min() == hits.max()),
        curve=curve,
    )
