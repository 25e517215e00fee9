"""Command-line front end.

Config files are plain ``key = value`` lines; ``#`` starts a comment. Keys
are the SimulationConfig field names, ``tau_window`` takes two numbers
separated by a comma.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields as dc_fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import Run, compare, detect_reshaping
from .characteristics import HORIZON, EntranceProfile, analytic_grid, limits
from .core import SimulationConfig, build_grid
from .errors import InvalidConfig, LambdaPropError, StepUnstable

GRID_ENV = "LAMBDAPROP_DEFAULT_GRID"
FLOAT_FMT = "%.16e"

_TYPES = {f.name: f.type for f in dc_fields(SimulationConfig)}
_INT_KEYS = {"n_tau", "n_eta"}
_STR_KEYS = {"shape", "pump_table", "stokes_table"}


def _cast(key, raw):
    raw = raw.strip()
    try:
        if key == "tau_window":
            parts = [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
            if len(parts) != 2:
                raise ValueError
            return tuple(parts)
        if key in _INT_KEYS:
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if key in _STR_KEYS:
            return raw
        return float(raw)
    except ValueError:
        raise InvalidConfig(f"bad value for {key!r}: {raw!r}") from None


def _grid_override():
    raw = os.environ.get(GRID_ENV)
    if not raw:
        return None
    try:
        n_tau, per_unit = raw.split(",")
        return int(n_tau), float(per_unit)
    except ValueError:
        raise InvalidConfig(f"{GRID_ENV} must look like 'n_tau,eta_per_unit', got {raw!r}") from None


def parse_config(text: str, base: Path | None = None) -> SimulationConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise InvalidConfig(f"unknown config key {key!r}")
        values[key] = _cast(key, raw)
    missing = [k for k in ("omega_p_max", "omega_s_max", "delta") if k not in values]
    if values.get("shape") == "tabulated":
        missing = [k for k in missing if k == "delta"]
        values.setdefault("omega_p_max", 0.0)
        values.setdefault("omega_s_max", 0.0)
    if missing:
        raise InvalidConfig(f"missing config keys: {', '.join(missing)}")
    if base is not None:
        for k in ("pump_table", "stokes_table"):
            if k in values and not Path(values[k]).is_absolute():
                values[k] = str(base / values[k])
    grid = _grid_override()
    if grid is not None:
        values.setdefault("n_tau", grid[0])
        if "n_eta" not in values:
            values["n_eta"] = max(1, math.ceil(grid[1] * values.get("length", 0.0) - 1e-9))
    return SimulationConfig(**values)


def load_config(path) -> SimulationConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, base=path.parent)


def _write_csv(path, header, columns):
    """Columns share one length; floats get 17 significant digits."""
    cols = []
    fmts = []
    for c in columns:
        c = np.asarray(c)
        if c.dtype.kind in "iub":
            cols.append(c.astype(np.int64).astype(object))
            fmts.append("%d")
        elif c.dtype.kind in "OU":
            cols.append(c.astype(object))
            fmts.append("%s")
        else:
            cols.append(c.astype(float).astype(object))
            fmts.append(FLOAT_FMT)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        if cols and len(cols[0]):
            np.savetxt(fh, np.column_stack(cols), fmt=fmts, delimiter=",")


def _flat(run: Run, arr):
    n_eta, n_tau = arr.shape[:2]
    E = np.repeat(run.eta, n_tau)
    T = np.tile(run.tau, n_eta)
    return E, T


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, (np.floating, np.integer)):
        return _jsonable(x.item())
    if isinstance(x, tuple):
        return list(x)
    return x


def _limits_dict(config):
    try:
        return limits(config).as_dict(), None
    except LambdaPropError as exc:
        return None, str(exc)


def _summary(run: Run, timings=None):
    pops = run.populations
    rep, err = _limits_dict(run.config)
    out = {
        "config": {k: _jsonable(v) for k, v in run.config.as_dict().items()},
        "final_populations": [
            {"eta": float(e), "p1": float(pops[n, -1, 0]), "p2": float(pops[n, -1, 1]), "p3": float(pops[n, -1, 2])}
            for n, e in enumerate(run.eta)
        ],
        "final_p3": float(pops[-1, -1, 2]),
        "limits": rep,
    }
    if err:
        out["limits_error"] = err
    if timings is not None:
        out["timings"] = timings
    return out


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_simulation(run: Run, out: Path, timings=None, figures=False):
    out.mkdir(parents=True, exist_ok=True)
    f = run.fields
    E, T = _flat(run, f.omega_p)
    op, os_ = f.omega_p.ravel(), f.omega_s.ravel()
    _write_csv(out / "fields.csv", ["eta", "tau", "re_op", "im_op", "re_os", "im_os"],
               [E, T, op.real, op.imag, os_.real, os_.imag])
    pops = run.populations.reshape(-1, 3)
    _write_csv(out / "populations.csv", ["eta", "tau", "p1", "p2", "p3"], [E, T, *pops.T])
    proj = run.projections.reshape(-1, 3)
    _write_csv(out / "projections.csv", ["eta", "tau", "pb1", "pb2", "pd"], [E, T, *proj.T])
    _dump_json(out / "summary.json", _summary(run, timings))
    if figures:
        from . import plotting

        plotting.populations_figure(run.tau, run.eta, run.populations, out / "populations.png")
        plotting.fields_figure(run.tau, run.eta, f.omega_p, f.omega_s, out / "fields.png")
        plotting.projections_figure(run.tau, run.eta, run.projections, out / "projections.png")


def _timed_run(config):
    t0 = time.perf_counter()
    run = Run.compute(config)
    return run, {"propagate_s": time.perf_counter() - t0}


def cmd_simulate(args):
    config = load_config(args.config)
    run, timings = _timed_run(config)
    write_simulation(run, Path(args.output), timings if args.timings else None, args.figures)
    return 0


def cmd_analytic(args):
    config = load_config(args.config)
    grid = build_grid(config)
    ana = analytic_grid(EntranceProfile.from_config(config), grid.eta, grid.tau)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    E = np.repeat(grid.eta, grid.tau.size)
    T = np.tile(grid.tau, grid.eta.size)
    op, os_ = ana["omega_p"].ravel(), ana["omega_s"].ravel()
    status = ana["status"].ravel()
    cols = [E, T] + [ana[k].ravel() for k in ("zeta", "xi", "psi", "theta", "phi")]
    cols += [op.real, op.imag, os_.real, os_.imag] + [ana[k].ravel() for k in ("p1", "p2", "p3")]
    cols += [status.astype(np.int64), (status == HORIZON).astype(np.int64)]
    header = ["eta", "tau", "zeta", "xi", "psi", "theta", "phi", "re_op", "im_op", "re_os", "im_os",
              "p1", "p2", "p3", "status", "horizon"]
    _write_csv(out / "analytic.csv", header, cols)
    if args.figures:
        from . import plotting

        pops = np.stack([ana["p1"], ana["p2"], ana["p3"]], axis=-1)
        plotting.populations_figure(grid.tau, grid.eta, pops, out / "analytic.png")
    return 0


def cmd_limits(args):
    config = load_config(args.config)
    rep = limits(config).as_dict()
    sys.stdout.write(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    return 0


COMPARE_HEADER = ["eta", "final_p1", "final_p2", "final_p3", "peak_p2", "max_pd", "max_pb2", "sup_diff",
                  "horizon_tau", "pump_peaks", "stokes_peaks", "pump_tail_fraction", "pulse_order"]


def _compare_rows(run: Run):
    summaries, ana = compare(run)
    resh = detect_reshaping(run.fields)
    rows = []
    for s, r in zip(summaries, resh.rows()):
        rows.append([s.eta, s.final_p1, s.final_p2, s.final_p3, s.peak_p2, s.max_pd, s.max_pb2,
                     s.sup_diff, s.horizon_tau, r[1], r[2], r[3], r[4]])
    return rows, ana


def _rows_to_columns(rows, width):
    if not rows:
        return [np.array([], dtype=float) for _ in range(width)]
    return [np.array([r[k] for r in rows]) for k in range(width)]


def cmd_compare(args):
    config = load_config(args.config)
    run, timings = _timed_run(config)
    out = Path(args.output)
    write_simulation(run, out, timings if args.timings else None, args.figures)
    rows, ana = _compare_rows(run)
    _write_csv(out / "compare.csv", COMPARE_HEADER, _rows_to_columns(rows, len(COMPARE_HEADER)))
    if args.figures:
        from . import plotting

        plotting.populations_figure(run.tau, run.eta, run.populations, out / "compare.png", analytic=ana["p3"])
    return 0


SCAN_HEADER = ["value"] + COMPARE_HEADER


def _scan_one(config_dict, param, value, out_dir):
    changes = {param: value}
    grid = _grid_override()
    if param == "length" and grid is not None:
        changes["n_eta"] = max(1, math.ceil(grid[1] * value - 1e-9))
    config = SimulationConfig(**config_dict).replace(**changes)
    run = Run.compute(config)
    rows, _ = _compare_rows(run)
    out_dir.mkdir(parents=True, exist_ok=True)
    _dump_json(out_dir / "summary.json", _summary(run))
    return [value] + rows[-1]


def _scan_values(param, raw):
    if param not in _TYPES:
        raise InvalidConfig(f"unknown scan parameter {param!r}")
    if param == "tau_window":
        raise InvalidConfig("tau_window cannot be scanned")
    items = [v for v in (raw or "").split(",") if v.strip()]
    return [_cast(param, v) for v in items]


def cmd_scan(args):
    config = load_config(args.config)
    values = _scan_values(args.param, args.values)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    base = config.as_dict()
    jobs = max(1, int(args.jobs))
    tasks = [(base, args.param, v, out / f"value_{k:03d}") for k, v in enumerate(values)]
    if jobs == 1 or len(tasks) <= 1:
        rows = [_scan_one(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_scan_one, *zip(*tasks)))
    cols = _rows_to_columns(rows, len(SCAN_HEADER))
    if args.param in _STR_KEYS and rows:
        cols[0] = np.array([str(r[0]) for r in rows], dtype=object)
    _write_csv(out / "scan.csv", SCAN_HEADER, cols)
    if args.figures and rows:
        from . import plotting

        plotting.scan_figure([r[0] for r in rows], [r[4] for r in rows], args.param, out / "scan.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lambdaprop", description="Bright-state STIRAP propagation in a Lambda medium.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, output=True):
        sp.add_argument("--config", required=True, help="key = value config file")
        if output:
            sp.add_argument("--output", required=True, help="output directory")
            sp.add_argument("--figures", action="store_true", help="also render PNG figures")
        return sp

    s = common(sub.add_parser("simulate", help="numeric propagation"))
    s.add_argument("--timings", action="store_true", help="record wall times in summary.json")
    s.set_defaults(func=cmd_simulate)
    common(sub.add_parser("analytic", help="characteristic solution")).set_defaults(func=cmd_analytic)
    common(sub.add_parser("limits", help="propagation limits as JSON"), output=False).set_defaults(func=cmd_limits)
    s = common(sub.add_parser("compare", help="numeric vs analytic"))
    s.add_argument("--timings", action="store_true", help="record wall times in summary.json")
    s.set_defaults(func=cmd_compare)
    s = common(sub.add_parser("scan", help="one summary row per parameter value"))
    s.add_argument("--param", required=True, help="config key to vary")
    s.add_argument("--values", default="", help="comma-separated values")
    s.add_argument("--jobs", type=int, default=1, help="parallel workers")
    s.set_defaults(func=cmd_scan)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StepUnstable as exc:
        print(f"lambdaprop: solver unstable: {exc}", file=sys.stderr)
        return 2
    except (InvalidConfig, LambdaPropError, ValueError) as exc:
        print(f"lambdaprop: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
