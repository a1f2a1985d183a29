#!/usr/bin/env python3
"""Bias rates of the raw and bias-corrected one-sided estimators by quadrature.

For a continuous Gamma law the expected one-sided estimate at the cutoff is an
integral of the truncated kernel against the density, so biases and their
log-log slopes in ``b`` can be computed without simulation.

Example::

    python scripts/rate_separation.py --cutoffs 1.7057 2.4248 5.0
"""
from __future__ import annotations

import argparse
import math

import numpy as np
from scipy import integrate, stats

from densityjump.estim import mbc_combine
from densityjump.kernels import KernelParams, trunc_kernel_minus, trunc_kernel_plus


def expected(c, b, side, dist):
    params = KernelParams(c, b, c)
    kern = trunc_kernel_minus if side == "left" else trunc_kernel_plus
    w = math.sqrt(c * b + b * b)
    lo, hi = (0.0, c) if side == "left" else (c, c + 60 * w + 10 * dist.std())
    cuts = sorted({p for p in (c - 4 * w, c + 4 * w) if lo < p < hi})
    edges = [lo, *cuts, hi]
    return sum(
        integrate.quad(lambda u: kern(params, u) * dist.pdf(u), a, z, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
        for a, z in zip(edges[:-1], edges[1:])
    )


def slope(bs, ys):
    return float(np.polyfit(np.log(bs), np.log(np.abs(ys)), 1)[0])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shape", type=float, default=2.75)
    ap.add_argument("--cutoffs", type=float, nargs="+", default=[1.7057, 2.4248, 5.0])
    ap.add_argument("--bs", type=float, nargs="+", default=[0.32, 0.16, 0.08, 0.04, 0.02])
    ap.add_argument("--delta", type=float, default=0.81)
    ap.add_argument("--show-table", action="store_true")
    a = ap.parse_args(argv)

    dist = stats.gamma(a.shape)
    bs = np.array(a.bs)
    print(f"Gamma({a.shape:g},1), delta={a.delta:g}, b in {a.bs}")
    print(f"{'c':>8} {'raw_L':>7} {'raw_R':>7} {'raw_J':>7} {'mbc_L':>7} {'mbc_R':>7} {'mbc_J':>7}")
    for c in a.cutoffs:
        f = float(dist.pdf(c))
        cols = {k: [] for k in ("raw_L", "raw_R", "raw_J", "mbc_L", "mbc_R", "mbc_J")}
        for b in bs:
            el, er = expected(c, b, "left", dist), expected(c, b, "right", dist)
            ml = mbc_combine(el, expected(c, b / a.delta, "left", dist), a.delta)
            mr = mbc_combine(er, expected(c, b / a.delta, "right", dist), a.delta)
            for k, v in zip(cols, (el - f, er - f, er - el, ml - f, mr - f, mr - ml)):
                cols[k].append(v)
        print(f"{c:8.4f} " + " ".join(f"{slope(bs, v):7.3f}" for v in cols.values()))
        if a.show_table:
            for i, b in enumerate(bs):
                print(f"    b={b:<6g} " + " ".join(f"{cols[k][i]:+.3e}" for k in cols))


if __name__ == "__main__":
    main()
