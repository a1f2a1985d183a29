"""Command-line front end.

Subcommands ``test``, ``density``, ``bandwidth`` and ``simulate`` each write
a result document that embeds a manifest (command, resolved inputs and
parameters, tool version, seed).  ``replay`` re-executes a manifest and
reproduces the document byte for byte.

Exit codes: 0 success, 2 configuration, 3 ingestion, 4 degenerate data,
5 numerical failure, 6 output not writable.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .bandwidth import BandwidthConfig, select_bandwidth
from .errors import (
    ConvergenceError,
    DegeneratePilotError,
    DegenerateTruncationError,
    DegenerateVarianceError,
    DomainError,
    IngestionError,
    OneSidedSampleError,
    SimulationError,
    SubsampleError,
)
from .estim import Sample, Variant, density_curve, jump_test
from .simulate import (
    Cutoff,
    SimulationSpec,
    TargetDist,
    parse_config,
    run_estimation_study,
    run_size_power_study,
    spec_from_mapping,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INGEST = 3
EXIT_DEGENERATE = 4
EXIT_NUMERIC = 5
EXIT_IO = 6

POWER_DS = (0.02, 0.04, 0.06, 0.08, 0.10)

_DEGENERATE = (
    OneSidedSampleError,
    DegenerateVarianceError,
    DegeneratePilotError,
    DegenerateTruncationError,
    SubsampleError,
    SimulationError,
)


class OutputError(Exception):
    pass


# ---------------------------------------------------------------- ingestion


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_sample(path) -> Sample:
    """Read one numeric column; a single non-numeric first line is a header.

    Raises :class:`IngestionError` citing the 1-based row for non-numeric,
    non-finite or negative entries, and for files without data.
    """
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from None
    values = []
    first = True
    for lineno, row in enumerate(rows, 1):
        fields = [f.strip() for f in row]
        if not any(fields):
            continue
        if len(fields) != 1:
            raise IngestionError(f"{path}, row {lineno}: expected one column, found {len(fields)}")
        token = fields[0]
        if first and not _is_number(token):
            first = False
            continue  # header
        first = False
        if not _is_number(token):
            raise IngestionError(f"{path}, row {lineno}: not a number: {token!r}")
        v = float(token)
        if math.isnan(v):
            raise IngestionError(f"{path}, row {lineno}: value is NaN")
        if math.isinf(v):
            raise IngestionError(f"{path}, row {lineno}: value is infinite")
        if v < 0:
            raise IngestionError(f"{path}, row {lineno}: negative value {token}")
        values.append(v)
    if not values:
        raise IngestionError(f"{path}: no data rows")
    return Sample(np.array(values))


def _file_digest(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 16), b""):
                h.update(chunk)
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from None
    return h.hexdigest()


# ---------------------------------------------------------------- output


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Variant):
        return obj.value
    return obj


def dumps(doc) -> str:
    # json renders floats with repr: the shortest string that round-trips
    return json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"


def write_atomic(path, text: str) -> None:
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except (OSError, UnboundLocalError):
            pass
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None


def _emit(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _manifest(command, inputs, parameters, seed=None) -> dict:
    return {
        "command": command,
        "inputs": inputs,
        "parameters": parameters,
        "tool_version": __version__,
        "seed": seed,
    }


def _data_inputs(path) -> dict:
    p = os.path.abspath(path)
    return {"data": p, "sha256": _file_digest(p)}


# ---------------------------------------------------------------- commands


def _bandwidth_cfg(params) -> BandwidthConfig:
    keys = ("p", "q", "h_lo", "h_hi", "grid_step", "alpha_crit", "delta", "variant", "two_sided")
    return BandwidthConfig(**{k: params[k] for k in keys if params.get(k) is not None})


def _selection_doc(sel) -> dict:
    return {
        "b_hat_n": sel.b_hat_n,
        "b_hat_k": sel.b_hat_k,
        "B_hat": sel.B_hat,
        "M": sel.M,
        "k_minus": sel.k_minus,
        "k_plus": sel.k_plus,
        "k": sel.k,
        "n": sel.n,
        "flat_flag": sel.flat_flag,
        "power_curve": [
            {"b_k": b, "power": pw, "degenerate": int(dg)}
            for (b, pw), dg in zip(sel.power_curve, sel.curve.degenerate)
        ],
    }


def run_test(params: dict, inputs: dict) -> str:
    sample = read_sample(inputs["data"])
    c = params["cutoff"]
    doc = {}
    if params.get("bandwidth") is None:
        sel = select_bandwidth(sample, c, _bandwidth_cfg(params))
        b, source = sel.b_hat_n, "power_optimal"
        doc["selection"] = _selection_doc(sel)
    else:
        b, source = params["bandwidth"], "explicit"
    res = jump_test(sample, c, b, params["delta"], params["variant"], params["alpha"])
    result = {
        "c": c,
        "b": b,
        "b_source": source,
        "delta": res.delta,
        "variant": res.variant.value,
        "f_minus": res.f_minus,
        "f_plus": res.f_plus,
        "jump": res.jump,
        "variance": res.variance,
        "t_stat": res.t_stat,
        "p_value": res.p_value,
        "alpha": res.alpha,
        "reject": res.reject,
        "n": res.n,
        "n_minus": res.n_minus,
        "n_plus": res.n_plus,
    }
    return dumps({"manifest": _manifest("test", inputs, params), "result": result, **doc})


def _grid_from(params) -> np.ndarray:
    if params.get("grid") is not None:
        return np.array(params["grid"], dtype=float)
    lo, hi, count = params["grid_range"]
    count = int(count)
    if count < 1 or not hi >= lo:
        raise DomainError("grid range needs hi >= lo and count >= 1")
    return np.linspace(lo, hi, count)


def _histogram_rows(sample, width, c):
    if not width > 0:
        raise DomainError("histogram bin width must be > 0")
    # anchor bins at the cutoff so no bin straddles it
    anchor = c if c is not None else 0.0
    lo = anchor - width * math.ceil(anchor / width)
    nb = max(1, int(math.ceil((sample.values[-1] - lo) / width + 1e-12)))
    edges = lo + width * np.arange(nb + 1)
    if edges[-1] <= sample.values[-1]:
        edges = np.append(edges, edges[-1] + width)
    counts, edges = np.histogram(sample.values, bins=edges)
    dens = counts / (sample.n * width)
    return [(float(a), float(b), float(0.5 * (a + b)), int(k), float(f)) for a, b, k, f in zip(edges[:-1], edges[1:], counts, dens)]


def run_density(params: dict, inputs: dict) -> dict[str, str]:
    sample = read_sample(inputs["data"])
    curve = density_curve(sample, params["bandwidth"], _grid_from(params), params.get("cutoff"))
    out = {"curve": _csv_text(["x", "estimate", "side"], curve.rows())}
    if params.get("hist_bin_width") is not None:
        out["histogram"] = _csv_text(
            ["lo", "hi", "mid", "count", "density"],
            _histogram_rows(sample, params["hist_bin_width"], params.get("cutoff")),
        )
    return out


def run_bandwidth(params: dict, inputs: dict) -> str:
    sample = read_sample(inputs["data"])
    cfg = _bandwidth_cfg(params)
    sel = select_bandwidth(sample, params["cutoff"], cfg)
    doc = {"config": cfg.to_dict(), **_selection_doc(sel)}
    return dumps({"manifest": _manifest("bandwidth", inputs, params), "result": doc})


SIM_HEADER = [
    "table", "dist", "c", "n", "delta", "variant", "d", "reps", "excluded",
    "bias", "std_dev", "rmse", "mean_b", "level", "rejection_rate",
]


def _sim_spec(params) -> SimulationSpec:
    mapping = {k: v for k, v in params.items() if k not in ("table", "threads") and v is not None}
    return spec_from_mapping(mapping)


def run_simulate(params: dict, threads=None) -> dict[str, str]:
    spec = _sim_spec(params)
    table = params["table"]
    if table == 1:
        cells = [run_estimation_study(spec, threads)]
    else:
        cells = run_size_power_study(spec, threads)
    rows = []
    for cell in cells:
        for level, rate in cell.rejection_rates.items():
            rows.append([
                table, cell.dist, cell.c, cell.n, cell.delta, cell.variant, cell.d, cell.reps,
                cell.n_excluded, cell.bias, cell.std_dev, cell.rmse, cell.mean_b, level, rate,
            ])
    doc = {
        "manifest": _manifest("simulate", {}, params, spec.seed),
        "cells": [cell.to_dict() for cell in cells],
        "excluded": sum(cell.n_excluded for cell in cells),
    }
    return {"csv": _csv_text(SIM_HEADER, rows), "json": dumps(doc), "cells": cells}


# ---------------------------------------------------------------- parsing


def _floats(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_method_flags(p, bandwidth_choice=True):
    if bandwidth_choice:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--bandwidth", type=float, help="explicit smoothing parameter b")
        g.add_argument("--auto-bandwidth", action="store_true", help="select b by power optimality (default)")
    p.add_argument("--delta", type=float, default=0.81, help="mixing exponent (default 0.81)")
    p.add_argument("--variant", type=str.upper, choices=["V1", "V2"], default="V2")


def _add_grid_flags(p):
    p.add_argument("--p", type=float, default=0.5, dest="p_exp", help="sub-sample exponent")
    p.add_argument("--q", type=float, default=4.0 / 9.0, dest="q_exp", help="rate exponent")
    p.add_argument("--h-lo", type=float, default=0.05)
    p.add_argument("--h-hi", type=float, default=0.50)
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--crit", type=float, default=1.96, help="critical value for sub-sample rejections")
    p.add_argument("--two-sided", action="store_true", help="count |T_m| > crit instead of T_m > crit")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="densityjump", description="Jump-size estimation and continuity tests for densities on [0, inf).")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="estimate the jump at a cutoff and test continuity")
    t.add_argument("data")
    t.add_argument("--cutoff", type=float, required=True)
    _add_method_flags(t)
    t.add_argument("--alpha", type=float, default=0.05)
    _add_grid_flags(t)
    t.add_argument("--out", help="JSON output path (default stdout)")

    d = sub.add_parser("density", help="density estimates over a grid")
    d.add_argument("data")
    d.add_argument("--bandwidth", type=float, required=True)
    d.add_argument("--cutoff", type=float)
    g = d.add_mutually_exclusive_group(required=True)
    g.add_argument("--grid", type=_floats, help="explicit design points, comma-separated")
    g.add_argument("--grid-range", type=float, nargs=3, metavar=("LO", "HI", "COUNT"))
    d.add_argument("--hist-bin-width", type=float, help="also emit a histogram with this bin width")
    d.add_argument("--out", help="CSV output path (default stdout); the manifest goes to <out>.json")

    b = sub.add_parser("bandwidth", help="power-optimal smoothing parameter")
    b.add_argument("data")
    b.add_argument("--cutoff", type=float, required=True)
    _add_method_flags(b, bandwidth_choice=False)
    _add_grid_flags(b)
    b.add_argument("--out")

    s = sub.add_parser("simulate", help="Monte Carlo study of the estimator and the test")
    s.add_argument("--config", help="key = value config file; flags override it")
    s.add_argument("--table", type=int, choices=[1, 2, 3], default=1,
                   help="1: bias/sd/RMSE at d=0; 2: size at d=0; 3: power over --d")
    s.add_argument("--dist", choices=["gamma", "weibull"])
    s.add_argument("--shape", type=float)
    s.add_argument("--scale", type=float)
    cg = s.add_mutually_exclusive_group()
    cg.add_argument("--c-quantile", type=float)
    cg.add_argument("--cutoff", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--d", type=_floats, help="comma-separated jump measures (table 3)")
    s.add_argument("--delta", type=float)
    s.add_argument("--variant", type=str.upper, choices=["V1", "V2"])
    s.add_argument("--seed", type=int)
    s.add_argument("--two-sided", action="store_true", default=None)
    s.add_argument("--threads", type=int, help="worker processes; 0 = all cores (default: $THREADS or 1)")
    s.add_argument("--out", required=True, help="output prefix; writes <out>.csv and <out>.json")

    r = sub.add_parser("replay", help="re-run the manifest embedded in a result document")
    r.add_argument("document")
    r.add_argument("--out", help="output path (prefix for simulate); default stdout / original")
    r.add_argument("--threads", type=int)
    return ap


def _grid_params(a) -> dict:
    return {
        "p": a.p_exp, "q": a.q_exp, "h_lo": a.h_lo, "h_hi": a.h_hi,
        "grid_step": a.grid_step, "alpha_crit": a.crit, "two_sided": a.two_sided,
    }


def _params_from_args(a) -> tuple[dict, dict]:
    if a.command == "test":
        params = {"cutoff": a.cutoff, "bandwidth": a.bandwidth, "delta": a.delta,
                  "variant": a.variant, "alpha": a.alpha, **_grid_params(a)}
        return params, _data_inputs(a.data)
    if a.command == "density":
        params = {"bandwidth": a.bandwidth, "cutoff": a.cutoff, "grid": a.grid,
                  "grid_range": a.grid_range, "hist_bin_width": a.hist_bin_width}
        return params, _data_inputs(a.data)
    if a.command == "bandwidth":
        params = {"cutoff": a.cutoff, "delta": a.delta, "variant": a.variant, **_grid_params(a)}
        return params, _data_inputs(a.data)
    # simulate
    params = {}
    if a.config:
        try:
            with open(a.config, encoding="utf-8") as fh:
                params.update(parse_config(fh.read()))
        except OSError as exc:
            raise DomainError(f"cannot read config {a.config}: {exc.strerror}") from None
    flags = {
        "dist": a.dist, "shape": a.shape, "scale": a.scale, "c_quantile": a.c_quantile,
        "cutoff": a.cutoff, "n": a.n, "reps": a.reps, "d": a.d, "delta": a.delta,
        "variant": a.variant, "seed": a.seed, "two_sided": a.two_sided,
    }
    if a.c_quantile is not None:
        params.pop("cutoff", None)
    if a.cutoff is not None:
        params.pop("c_quantile", None)
    params.update({k: v for k, v in flags.items() if v is not None})
    if a.table in (1, 2):
        params["d"] = [0.0]
    elif "d" not in params:
        params["d"] = list(POWER_DS)
    params["table"] = a.table
    # normalize to the resolved spec so the manifest is complete
    spec = _sim_spec(params)
    return _resolved_sim_params(spec, a.table), {}


def _resolved_sim_params(spec: SimulationSpec, table: int) -> dict:
    cfg = spec.bandwidth
    params = {
        "table": table,
        "dist": spec.dist.family,
        "shape": spec.dist.shape,
        "scale": spec.dist.scale,
        "n": spec.n,
        "reps": spec.reps,
        "d": list(spec.ds),
        "seed": spec.seed,
        "levels": list(spec.levels),
        **{k: v for k, v in cfg.to_dict().items()},
    }
    if spec.cutoff.value is not None:
        params["cutoff"] = spec.cutoff.value
    else:
        params["c_quantile"] = spec.cutoff.quantile
    return params


def execute(command: str, params: dict, inputs: dict, out, threads=None) -> None:
    """Run one command with fully resolved parameters and write its outputs."""
    if command == "test":
        _emit(run_test(params, inputs), out)
    elif command == "bandwidth":
        _emit(run_bandwidth(params, inputs), out)
    elif command == "density":
        texts = run_density(params, inputs)
        _emit(texts["curve"], out)
        doc = {"manifest": _manifest("density", inputs, params)}
        if out not in (None, "-"):
            doc["outputs"] = {"curve": os.path.basename(out)}
            if "histogram" in texts:
                hist = f"{out}.hist.csv"
                write_atomic(hist, texts["histogram"])
                doc["outputs"]["histogram"] = os.path.basename(hist)
            write_atomic(f"{out}.json", dumps(doc))
        elif "histogram" in texts:
            sys.stdout.write("\n" + texts["histogram"])
    elif command == "simulate":
        res = run_simulate(params, threads)
        write_atomic(f"{out}.csv", res["csv"])
        write_atomic(f"{out}.json", res["json"])
        for cell in res["cells"]:
            rates = "  ".join(f"{lvl:g}: {r:.6g}" for lvl, r in cell.rejection_rates.items())
            print(f"{cell.dist} c={cell.c:.6g} n={cell.n} delta={cell.delta:g} d={cell.d:g} "
                  f"bias={cell.bias:.6g} sd={cell.std_dev:.6g} rmse={cell.rmse:.6g} "
                  f"reject[{rates}] excluded={cell.n_excluded}")
    else:
        raise DomainError(f"unknown command {command!r}")


def _replay(a) -> None:
    path = Path(a.document)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        man = doc["manifest"]
        command, params, inputs = man["command"], man["parameters"], man["inputs"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DomainError(f"{path} is not a result document with a manifest: {exc}") from None
    if man.get("tool_version") != __version__:
        print(f"warning: document written by version {man.get('tool_version')}, replaying with {__version__}", file=sys.stderr)
    if inputs.get("sha256") and os.path.exists(inputs["data"]) and _file_digest(inputs["data"]) != inputs["sha256"]:
        raise IngestionError(f"{inputs['data']} changed since the document was written")
    out = a.out
    if command == "simulate" and out is None:
        out = str(path.with_suffix(""))
    if command == "density" and out is None and "outputs" in doc:
        out = str(path.parent / doc["outputs"]["curve"])
    execute(command, params, inputs, out, a.threads)


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    try:
        if a.command == "replay":
            _replay(a)
        else:
            params, inputs = _params_from_args(a)
            execute(a.command, params, inputs, a.out, getattr(a, "threads", None))
    except IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except _DEGENERATE as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
