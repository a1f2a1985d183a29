"""Independent reference computations used as test oracles.

Expectations of the kernel estimators are integrals of the kernel against
the true density, evaluated by adaptive quadrature; no package code beyond
the kernels under test is involved.
"""
from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy import integrate, stats

from densityjump.kernels import KernelParams, trunc_kernel_minus, trunc_kernel_plus

GAMMA_275 = stats.gamma(2.75)


def poisson_lower(a: int, z: float) -> float:
    """P(a, z) for integer a: 1 - exp(-z) sum_{j<a} z^j / j!."""
    return 1.0 - math.exp(-z) * sum(z ** j / math.factorial(j) for j in range(a))


def mp_reg_lower(a, z, dps=50) -> float:
    with mp.workdps(dps):
        return float(mp.gammainc(mp.mpf(a), 0, mp.mpf(z), regularized=True))


def mp_lambda(delta, dps=50) -> float:
    with mp.workdps(dps):
        d = mp.mpf(delta)
        r = mp.sqrt(d)
        return float(((1 + d * r) * mp.sqrt(1 + d) - 2 * mp.sqrt(2) * d) / (mp.sqrt(1 + d) * (1 - r) ** 2))


def _quad(fn, lo, hi, centre, width):
    # split at the kernel mass so quad sees the peak
    pts = sorted({p for p in (centre - 4 * width, centre, centre + 4 * width) if lo < p < hi})
    edges = [lo, *pts, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, _ = integrate.quad(fn, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)
        total += v
    return total


def kernel_integral(fn, lo, hi, centre, width) -> float:
    """Integral of a kernel-shaped integrand, split around its peak."""
    pts = sorted({p for p in (centre - 6 * width, centre, centre + 6 * width) if lo < p < hi})
    edges = [lo, *pts, hi]
    return sum(
        integrate.quad(fn, a, b, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
        for a, b in zip(edges[:-1], edges[1:])
    )


def expected_one_sided(c, b, side, dist=GAMMA_275, power=1):
    """E[K(X)^power] for the truncated kernel at x = c, X ~ dist (zero off its side)."""
    params = KernelParams(c, b, c)
    kern = trunc_kernel_minus if side == "left" else trunc_kernel_plus
    width = math.sqrt(c * b + b * b)
    if side == "left":
        return _quad(lambda u: kern(params, u) ** power * dist.pdf(u), 0.0, c, c, width)
    upper = c + 60 * width + 10 * dist.std()
    return _quad(lambda u: kern(params, u) ** power * dist.pdf(u), c, upper, c, width)


def mbc_compose(m_b, m_bd, delta):
    r = math.sqrt(delta)
    return m_b ** (1 / (1 - r)) * m_bd ** (-r / (1 - r))


def bias_table(c, bs, delta=0.81, dist=GAMMA_275):
    """Quadrature biases at the cutoff of the raw and bias-corrected one-sided
    estimators and of their difference (the jump), for a continuous law."""
    f = float(dist.pdf(c))
    rows = []
    for b in bs:
        el, er = expected_one_sided(c, b, "left", dist), expected_one_sided(c, b, "right", dist)
        el_d = expected_one_sided(c, b / delta, "left", dist)
        er_d = expected_one_sided(c, b / delta, "right", dist)
        ml, mr = mbc_compose(el, el_d, delta), mbc_compose(er, er_d, delta)
        rows.append({
            "b": b,
            "raw_left": el - f, "raw_right": er - f, "raw_jump": er - el,
            "mbc_left": ml - f, "mbc_right": mr - f, "mbc_jump": mr - ml,
        })
    return rows


def loglog_slope(bs, ys) -> float:
    x = np.log(np.asarray(bs, dtype=float))
    y = np.log(np.abs(np.asarray(ys, dtype=float)))
    return float(np.polyfit(x, y, 1)[0])


def variance_coefficient(c, b, dist=GAMMA_275) -> float:
    """n sqrt(b) Var(fhat_minus(c)) from the first two kernel moments."""
    m1 = expected_one_sided(c, b, "left", dist)
    m2 = expected_one_sided(c, b, "left", dist, power=2)
    return math.sqrt(b) * (m2 - m1 * m1)
