"""Monte Carlo engine for the jump estimator and the continuity test.

Samples come from a gamma or Weibull law, optionally made discontinuous at
``c`` by re-weighting its two truncated halves: with probability
``gamma = F(c) - d`` a draw comes from the law truncated to ``[0, c)``,
otherwise from the law truncated to ``(c, inf)``.  ``d = 0`` leaves the law
unchanged.

Replication ``r`` draws from the stream ``SeedSequence(seed, spawn_key=(r,))``,
so results are identical whatever the number of worker processes, and every
``d`` in a study sees the same uniforms.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import special

from .bandwidth import BandwidthConfig, select_bandwidth
from .errors import DensityJumpError, DomainError, SimulationError
from .estim import Sample, jump_test
from .specfun import inv_reg_lower_gamma

__all__ = [
    "TargetDist",
    "Cutoff",
    "SimulationSpec",
    "CellResult",
    "dist_quantile",
    "mixture_weight",
    "sample_discontinuous",
    "replication_stream",
    "run_estimation_study",
    "run_size_power_study",
    "spec_from_mapping",
    "load_spec",
    "parse_config",
    "true_jump",
    "resolve_threads",
]

LEVELS = (0.05, 0.10)
MAX_EXCLUDED_FRACTION = 0.01


@dataclass(frozen=True)
class TargetDist:
    family: str
    shape: float
    scale: float

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in ("gamma", "weibull"):
            raise DomainError(f"unknown family {self.family!r}; expected gamma or weibull")
        object.__setattr__(self, "family", fam)
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError("shape and scale must be > 0")

    @classmethod
    def gamma(cls, shape=2.75, scale=1.0):
        return cls("gamma", shape, scale)

    @classmethod
    def weibull(cls, shape=1.75, scale=3.5):
        return cls("weibull", shape, scale)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        a, s = self.shape, self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family == "gamma":
                logf = special.xlogy(a - 1.0, x) - x / s - a * math.log(s) - special.gammaln(a)
            else:
                z = x / s
                logf = math.log(a / s) + special.xlogy(a - 1.0, z) - z ** a
        return np.where(x >= 0, np.exp(logf), 0.0)

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.family == "gamma":
            return special.gammainc(self.shape, x / self.scale)
        return -np.expm1(-((x / self.scale) ** self.shape))

    def quantile(self, p):
        return dist_quantile(self, p)

    def label(self) -> str:
        return f"{self.family}({self.shape:g},{self.scale:g})"


def dist_quantile(dist: TargetDist, p):
    """Inverse CDF; gamma by the incomplete-gamma inverse, Weibull in closed form."""
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p >= 1):
        raise DomainError("probability must lie in [0, 1)")
    if dist.family == "gamma":
        out = np.asarray(inv_reg_lower_gamma(dist.shape, p)) * dist.scale
    else:
        out = dist.scale * (-np.log1p(-p)) ** (1.0 / dist.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Cutoff:
    """Either a quantile level of the target law or an explicit value."""

    quantile: float | None = None
    value: float | None = None

    def __post_init__(self):
        if (self.quantile is None) == (self.value is None):
            raise DomainError("give exactly one of a cutoff quantile or a cutoff value")
        if self.quantile is not None and not 0.0 < self.quantile < 1.0:
            raise DomainError(f"cutoff quantile must lie in (0, 1), got {self.quantile}")
        if self.value is not None and not self.value > 0:
            raise DomainError(f"cutoff must be > 0, got {self.value}")

    def resolve(self, dist: TargetDist) -> float:
        return self.value if self.value is not None else dist_quantile(dist, self.quantile)


def mixture_weight(dist: TargetDist, c: float, d: float) -> float:
    """Probability ``F(c) - d`` of drawing from the left truncated half."""
    g = float(dist.cdf(c)) - d
    if not -1e-12 <= g <= 1 + 1e-12:
        raise DomainError(f"d={d} gives mixture weight {g:.4g} outside [0, 1]")
    return min(max(g, 0.0), 1.0)


def sample_discontinuous(dist: TargetDist, c: float, d: float, n: int, rng: np.random.Generator) -> Sample:
    """``n`` i.i.d. draws from the two-piece mixture with jump measure ``d``."""
    g = mixture_weight(dist, c, d)
    Fc = float(dist.cdf(c))
    left = rng.random(n) < g
    u = rng.random(n)
    p = np.where(left, u * Fc, Fc + u * (1.0 - Fc))
    p = np.minimum(p, np.nextafter(1.0, 0.0))
    x = np.asarray(dist_quantile(dist, p), dtype=float)
    # inversion error must not push a draw across the cutoff
    x = np.where(left, np.minimum(x, np.nextafter(c, 0.0)), np.maximum(x, np.nextafter(c, np.inf)))
    return Sample(x)


def replication_stream(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


@dataclass(frozen=True)
class SimulationSpec:
    dist: TargetDist
    cutoff: Cutoff
    n: int
    reps: int
    bandwidth: BandwidthConfig = BandwidthConfig()
    ds: tuple[float, ...] = (0.0,)
    seed: int = 0
    levels: tuple[float, ...] = LEVELS

    def __post_init__(self):
        if self.n < 10:
            raise DomainError(f"n must be >= 10, got {self.n}")
        if self.reps < 1:
            raise DomainError(f"reps must be >= 1, got {self.reps}")
        object.__setattr__(self, "ds", tuple(float(d) for d in self.ds))
        c = self.c
        for d in self.ds:
            mixture_weight(self.dist, c, d)

    @property
    def c(self) -> float:
        return self.cutoff.resolve(self.dist)

    @property
    def delta(self) -> float:
        return self.bandwidth.delta

    def with_d(self, d: float) -> "SimulationSpec":
        return replace(self, ds=(d,))


class _Outcome(NamedTuple):
    jump: float
    t_stat: float
    b: float
    b_k: float
    flat: bool


@dataclass
class CellResult:
    dist: str
    c: float
    n: int
    delta: float
    variant: str
    d: float
    reps: int
    n_excluded: int
    bias: float
    std_dev: float
    rmse: float
    rejection_rates: dict[float, float] = field(default_factory=dict)
    mean_b: float = float("nan")
    flat_fraction: float = float("nan")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["rejection_rates"] = {f"{k:g}": v for k, v in self.rejection_rates.items()}
        return d


def _one_replication(args) -> _Outcome | None:
    spec, c, d, rep = args
    rng = replication_stream(spec.seed, rep)
    sample = sample_discontinuous(spec.dist, c, d, spec.n, rng)
    cfg = spec.bandwidth
    try:
        sel = select_bandwidth(sample, c, cfg)
        res = jump_test(sample, c, sel.b_hat_n, cfg.delta, cfg.variant)
    except DensityJumpError:
        return None
    return _Outcome(res.jump, res.t_stat, sel.b_hat_n, sel.b_hat_k, sel.flat_flag)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("THREADS", "1") or 1)
    if threads < 0:
        raise DomainError("threads must be >= 0")
    return threads or (os.cpu_count() or 1)


def _run_cell(spec: SimulationSpec, d: float, threads: int | None) -> list[_Outcome | None]:
    c = spec.c
    tasks = [(spec, c, d, r) for r in range(spec.reps)]
    workers = min(resolve_threads(threads), spec.reps)
    if workers <= 1:
        return [_one_replication(t) for t in tasks]
    # map() yields in task order, so the merge is independent of scheduling
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one_replication, tasks, chunksize=max(1, spec.reps // (4 * workers))))


def _summarize(spec: SimulationSpec, d: float, outcomes, true_jump: float) -> CellResult:
    kept = [o for o in outcomes if o is not None]
    excluded = len(outcomes) - len(kept)
    if excluded > MAX_EXCLUDED_FRACTION * len(outcomes):
        raise SimulationError(
            f"{excluded} of {len(outcomes)} replications were degenerate (d={d}, n={spec.n})"
        )
    jumps = np.array([o.jump for o in kept])
    ts = np.array([o.t_stat for o in kept])
    err = jumps - true_jump
    bias = float(err.mean())
    sd = float(err.std())
    rates = {}
    for level in spec.levels:
        crit = float(special.ndtri(1.0 - level / 2.0))
        rates[level] = float(np.mean(np.abs(ts) > crit))
    return CellResult(
        dist=spec.dist.label(),
        c=spec.c,
        n=spec.n,
        delta=spec.delta,
        variant=spec.bandwidth.variant.value,
        d=d,
        reps=len(outcomes),
        n_excluded=excluded,
        bias=bias,
        std_dev=sd,
        rmse=float(math.sqrt(np.mean(err ** 2))),
        rejection_rates=rates,
        mean_b=float(np.mean([o.b for o in kept])),
        flat_fraction=float(np.mean([o.flat for o in kept])),
    )


def run_estimation_study(spec: SimulationSpec, threads: int | None = 1) -> CellResult:
    """Bias, standard deviation and RMSE of the jump estimate for a continuous
    law (``d`` is ignored and the true jump is 0).  Rejection rates of the
    same replications come along for free."""
    return _summarize(spec, 0.0, _run_cell(spec, 0.0, threads), 0.0)


def true_jump(dist: TargetDist, c: float, d: float) -> float:
    """Jump of the mixture density at ``c``: ``f(c) * d / (F(c) (1 - F(c)))``."""
    Fc = float(dist.cdf(c))
    return float(dist.pdf(c)) * d / (Fc * (1.0 - Fc))


def run_size_power_study(spec: SimulationSpec, threads: int | None = 1) -> list[CellResult]:
    """Rejection frequencies of the continuity test, one cell per ``d``."""
    c = spec.c
    return [_summarize(spec, d, _run_cell(spec, d, threads), true_jump(spec.dist, c, d)) for d in spec.ds]


_FLOAT_KEYS = {"p", "q", "h_lo", "h_hi", "grid_step", "alpha_crit", "delta"}


def _parse_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise DomainError(f"not a boolean: {v!r}")


def _floats(v) -> tuple[float, ...]:
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    return tuple(float(x) for x in str(v).split(",") if x.strip())


def spec_from_mapping(m: dict) -> SimulationSpec:
    """Build a simulation spec from flat ``key -> value`` pairs (strings are parsed).

    Recognized keys: dist, shape, scale, c_quantile | cutoff, d, n, reps,
    seed, variant, two_sided and the bandwidth-grid keys p, q, h_lo, h_hi,
    grid_step, alpha_crit, delta.
    """
    m = dict(m)
    known = {"dist", "shape", "scale", "c_quantile", "cutoff", "d", "n", "reps", "seed", "variant", "two_sided", "levels"} | _FLOAT_KEYS
    unknown = set(m) - known
    if unknown:
        raise DomainError(f"unknown simulation keys: {sorted(unknown)}")
    family = str(m.get("dist", "gamma")).lower()
    defaults = TargetDist.gamma() if family == "gamma" else TargetDist.weibull() if family == "weibull" else None
    if defaults is None:
        raise DomainError(f"unknown family {family!r}")
    dist = TargetDist(family, float(m.get("shape", defaults.shape)), float(m.get("scale", defaults.scale)))
    if m.get("cutoff") not in (None, "") and m.get("c_quantile") not in (None, ""):
        raise DomainError("give either cutoff or c_quantile, not both")
    if m.get("cutoff") not in (None, ""):
        cutoff = Cutoff(value=float(m["cutoff"]))
    else:
        cutoff = Cutoff(quantile=float(m.get("c_quantile", 0.3)))
    bw = {k: float(m[k]) for k in _FLOAT_KEYS if m.get(k) not in (None, "")}
    if m.get("variant") not in (None, ""):
        bw["variant"] = m["variant"]
    if m.get("two_sided") not in (None, ""):
        bw["two_sided"] = _parse_bool(m["two_sided"])
    kwargs = {}
    if m.get("levels") not in (None, ""):
        kwargs["levels"] = _floats(m["levels"])
    return SimulationSpec(
        dist=dist,
        cutoff=cutoff,
        n=int(m.get("n", 500)),
        reps=int(m.get("reps", 1000)),
        bandwidth=BandwidthConfig(**bw),
        ds=_floats(m.get("d", "0")) or (0.0,),
        seed=int(m.get("seed", 0)),
        **kwargs,
    )


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lower().replace("-", "_")] = value
    return out


def load_spec(path) -> SimulationSpec:
    with open(path, encoding="utf-8") as fh:
        return spec_from_mapping(parse_config(fh.read()))
