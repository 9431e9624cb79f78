"""Command-line front end.

    contdml estimate        dose-response curve on a grid (optionally with a uniform band)
    contdml partial-effect  finite-difference partial effect on a grid
    contdml bandwidth       plug-in integrated-AMSE bandwidth from a pilot fit
    contdml simulate        Monte Carlo table on the built-in simulation design

Exit codes: 0 success, 1 runtime or data error, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from contdml.crossfit import child_seed, fit_fold_nuisances, make_folds
from contdml.data import Dataset, EstimationConfig, TreatmentGrid, dataset_from_columns
from contdml.estimators import (
    dml_theta,
    estimate_curve,
    optimal_bandwidth_integrated,
    rule_of_thumb_bandwidth,
)
from contdml.kernels import KernelSpec
from contdml.learners import LearnerSpec
from contdml.simulation import Cell, DgpSpec, run_cell
from contdml.uniform import multiplier_bootstrap


class ConfigError(Exception):
    """Invalid flags, grid, or column mapping (exit code 2)."""


class DataError(Exception):
    """Unreadable or invalid input data (exit code 1)."""


# --- input ----------------------------------------------------------------


def read_csv_dataset(path: str, outcome: str, treatments: Sequence[str],
                     covariates: Sequence[str] | str = "rest") -> tuple[Dataset, list[str]]:
    """Read a UTF-8 CSV with a header row into a Dataset.

    ``covariates="rest"`` takes every column that is neither the outcome nor a
    treatment, in header order.  Returns the dataset and the covariate names.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not valid UTF-8") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError(f"{path} has a header but no data rows")
    treatments = list(treatments)
    if covariates == "rest":
        covariates = [h for h in header if h != outcome and h not in treatments]
    else:
        covariates = list(covariates)
    wanted = [outcome, *treatments, *covariates]
    missing = [c for c in wanted if c not in header]
    if missing:
        raise ConfigError(f"column(s) not in the header of {path}: {', '.join(missing)}")
    if not covariates:
        raise ConfigError("no covariate columns selected")
    col = {h: i for i, h in enumerate(header)}
    idx = [col[c] for c in wanted]
    values = np.empty((len(body), len(idx)))
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise DataError(f"row {r} (line {r + 1}) has {len(row)} fields, expected {len(header)}")
        for j, c in enumerate(idx):
            cell = row[c].strip()
            try:
                values[r - 1, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"row {r} (line {r + 1}), column {header[c]!r}: cannot parse {cell!r} as a number"
                ) from None
    d_t = len(treatments)
    try:
        data = dataset_from_columns(values[:, 0], values[:, 1 : 1 + d_t], values[:, 1 + d_t :])
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return data, covariates


def write_csv_dataset(data: Dataset, path: str) -> None:
    """Write ``data`` as ``y, t[1..], x1..`` columns at full precision."""
    t_names = ["t"] if data.d_t == 1 else [f"t{j + 1}" for j in range(data.d_t)]
    names = ["y", *t_names, *(f"x{j + 1}" for j in range(data.d_x))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in np.column_stack([data.y, data.t_mat, data.x_mat]):
            w.writerow([_fmt(v) for v in row])


def parse_grid(text: str, d_t: int = 1) -> TreatmentGrid:
    """``lo:hi:count`` or an explicit list ``a,b,c``; for several treatments
    list points as ``a1,a2;b1,b2``."""
    text = text.strip()
    try:
        if ":" in text:
            if d_t != 1:
                raise ConfigError("lo:hi:count grids need a single treatment; list points explicitly")
            lo, hi, count = text.split(":")
            lo, hi, count = float(lo), float(hi), int(count)
            if count < 1:
                raise ConfigError("grid count must be >= 1")
            if not lo < hi:
                raise ConfigError("grid needs lo < hi")
            return TreatmentGrid.linspace(lo, hi, count)
        if d_t == 1:
            pts = np.array([float(v) for v in text.split(",")])[:, None]
        else:
            pts = np.array([[float(v) for v in p.split(",")] for p in text.split(";")])
            if pts.ndim != 2 or pts.shape[1] != d_t:
                raise ConfigError(f"each grid point needs {d_t} coordinates")
        return TreatmentGrid(pts)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc


# --- output -----------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def render(records: list[dict], header: dict, fmt: str, extra: Optional[dict] = None) -> str:
    """CSV with a leading ``# {config}`` comment line, or a JSON document."""
    if fmt == "json":
        doc = {"config": header, **(extra or {}),
               "records": [{k: _json_value(v) for k, v in r.items()} for r in records]}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    if records:
        w = csv.writer(buf, lineterminator="\n")
        keys = list(records[0])
        w.writerow(keys)
        for r in records:
            w.writerow([_fmt(r[k]) for k in keys])
    return buf.getvalue()


def _emit(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# --- argument parsing -----------------------------------------------------------


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--outcome", required=True, help="outcome column")
    p.add_argument("--treatment", required=True, action="append",
                   help="treatment column (repeat for several)")
    p.add_argument("--covariates", default="rest",
                   help="comma-separated covariate columns, or 'rest' (default)")


def _add_estimation_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", default=None, help="lo:hi:count or a,b,c (default: the median of T)")
    p.add_argument("--folds", type=int, default=5, help="cross-fitting folds L (default 5)")
    p.add_argument("--bandwidth-c", type=float, default=1.0,
                   help="h = c * sd(T) * n^-0.2 (default c = 1)")
    p.add_argument("--bandwidth", type=float, default=None, help="absolute bandwidth h (overrides -c)")
    p.add_argument("--learner", default="lasso",
                   choices=["lasso", "kernel_regression", "random_forest"])
    p.add_argument("--n-trees", type=int, default=1000, help="random forest size")
    p.add_argument("--min-leaf", type=int, default=40, help="random forest leaf size")
    p.add_argument("--kernel", default="epanechnikov", choices=["epanechnikov", "gaussian"])
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density-floor", type=float, default=1e-3)
    p.add_argument("--threads", type=int, default=None,
                   help="parallel width (default: number of CPUs); never changes results")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", default=None, help="output file (default: stdout)")
    p.add_argument("--format", default="csv", choices=["csv", "json"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contdml", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="dose-response curve with pointwise CIs")
    _add_data_args(p)
    _add_estimation_args(p)
    p.add_argument("--uniform-band", action="store_true", help="add a simultaneous band")
    p.add_argument("--bootstrap-draws", type=int, default=1000)
    _add_output_args(p)

    p = sub.add_parser("partial-effect", help="partial effect of the first treatment")
    _add_data_args(p)
    _add_estimation_args(p)
    p.add_argument("--eta", type=float, default=None, help="finite-difference step (default: h)")
    _add_output_args(p)

    p = sub.add_parser("bandwidth", help="plug-in bandwidth from a pilot fit")
    _add_data_args(p)
    _add_estimation_args(p)
    p.add_argument("--pilot-c", type=float, default=3.0, help="pilot h = c * sd(T) * n^-0.2 (default 3)")
    _add_output_args(p)

    p = sub.add_parser("simulate", help="Monte Carlo bias / RMSE / coverage table")
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--learner", default="lasso,random_forest,kernel_regression",
                   help="comma-separated learners")
    p.add_argument("--n", default="500,1000", help="comma-separated sample sizes")
    p.add_argument("--folds", default="1,5", help="comma-separated fold counts")
    p.add_argument("--bandwidth-c", default="0.5,1.0,1.5", help="comma-separated bandwidth constants")
    p.add_argument("--n-trees", type=int, default=200, help="random forest size")
    p.add_argument("--min-leaf", type=int, default=40)
    p.add_argument("--d-x", type=int, default=100, help="number of covariates")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density-floor", type=float, default=1e-3)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--record-timing", action="store_true",
                   help="fill the wall_time column (makes output run-dependent)")
    _add_output_args(p)
    return parser


# --- commands -------------------------------------------------------------------


@dataclass(frozen=True)
class Prepared:
    data: Dataset
    covariates: list
    grid: TreatmentGrid
    config: EstimationConfig
    header: dict
    threads: int


def _threads(args) -> int:
    t = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if t < 1:
        raise ConfigError("--threads must be >= 1")
    return t


def _learner(args) -> LearnerSpec:
    try:
        return LearnerSpec(args.learner, n_trees=args.n_trees, min_leaf=args.min_leaf)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _prepare(args, bandwidth_c: Optional[float] = None) -> Prepared:
    threads = _threads(args)
    cov = "rest" if args.covariates == "rest" else [c.strip() for c in args.covariates.split(",")]
    data, cov_names = read_csv_dataset(args.input, args.outcome, args.treatment, cov)
    if args.grid is None:
        grid = TreatmentGrid(np.median(data.t_mat, axis=0)[None, :])
    else:
        grid = parse_grid(args.grid, data.d_t)
    if grid.d_t != data.d_t:
        raise ConfigError("grid dimension does not match the number of treatments")
    c = args.bandwidth_c if bandwidth_c is None else bandwidth_c
    if args.bandwidth is not None and bandwidth_c is None:
        h = args.bandwidth
    else:
        h = rule_of_thumb_bandwidth(data.t_mat, c)
    learner = _learner(args)
    eta = getattr(args, "eta", None)
    try:
        config = EstimationConfig(bandwidth_h=h, n_folds=args.folds, eta=eta, alpha=args.alpha,
                                  density_floor=args.density_floor, seed=args.seed,
                                  learner=learner, kernel=args.kernel)
        config.check_against(data.n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    header = {
        "command": args.command,
        "input": args.input,
        "outcome": args.outcome,
        "treatments": list(args.treatment),
        "covariates": cov_names,
        "n": data.n,
        "grid": grid.points.tolist(),
        "folds": config.n_folds,
        "bandwidth_h": config.bandwidth_h,
        "bandwidth_c": None if args.bandwidth is not None and bandwidth_c is None else c,
        "h1": config.h1,
        "kernel": config.kernel,
        "learner": asdict(learner),
        "alpha": config.alpha,
        "density_floor": config.density_floor,
        "seed": config.seed,
    }
    return Prepared(data, cov_names, grid, config, header, threads)


def run_estimate(args) -> int:
    if args.bootstrap_draws < 100:
        raise ConfigError("--bootstrap-draws must be >= 100")
    prep = _prepare(args)
    results, psi = estimate_curve(prep.data, prep.grid, prep.config, threads=prep.threads)
    header = dict(prep.header, uniform_band=bool(args.uniform_band))
    band = None
    if args.uniform_band:
        header["bootstrap_draws"] = args.bootstrap_draws
        band = multiplier_bootstrap(psi, prep.config.bandwidth_h, prep.data.d_t, prep.config.alpha,
                                    args.bootstrap_draws, "normal", child_seed(prep.config.seed, 3),
                                    beta_hats=[r.beta_hat for r in results], grid=prep.grid)
    records = []
    for k, r in enumerate(results):
        rec = _t_columns(r.t_eval)
        rec.update(beta_hat=r.beta_hat, se=r.se, ci_lower=r.ci_lower, ci_upper=r.ci_upper,
                   bias_hat=r.bias_hat, n_effective=r.n_effective, floored_count=r.floored_count)
        if band is not None:
            rec.update(uniform_lower=band.lower[k], uniform_upper=band.upper[k])
        records.append(rec)
    extra = {"uniform_quantile": band.quantile} if band is not None else None
    _emit(render(records, header, args.format, extra), args.output)
    return 0


def _t_columns(t) -> dict:
    t = tuple(t)
    if len(t) == 1:
        return {"t": t[0]}
    return {f"t{j + 1}": v for j, v in enumerate(t)}


def run_partial_effect(args) -> int:
    prep = _prepare(args)
    cfg = prep.config
    eta = cfg.step
    step = np.zeros(prep.data.d_t)
    step[0] = eta / 2.0
    pts = np.vstack([prep.grid.points - step, prep.grid.points + step])
    both = TreatmentGrid(np.unique(pts, axis=0))
    folds = make_folds(prep.data.n, cfg.n_folds, cfg.seed)
    nuis = fit_fold_nuisances(prep.data, folds, both, cfg, prep.threads)
    kernel = KernelSpec(cfg.kernel, cfg.bandwidth_h)
    records = []
    for t in prep.grid.points:
        r, _ = dml_theta(prep.data, folds, t, eta, kernel, cfg, nuisances=nuis)
        rec = _t_columns(r.t_eval)
        rec.update(theta_hat=r.theta_hat, se=r.se, ci_lower=r.ci_lower, ci_upper=r.ci_upper,
                   eta=r.eta, variance_regime=r.variance_regime, beta_plus=r.beta_plus,
                   beta_minus=r.beta_minus)
        records.append(rec)
    header = dict(prep.header, eta=eta)
    _emit(render(records, header, args.format), args.output)
    return 0


@dataclass(frozen=True)
class BandwidthChoice:
    pilot: float
    h_star: float
    h_under: float


def bandwidth_from_constants(v_hats, b_hats, d_t: int, n: int, pilot: float) -> BandwidthChoice:
    """Integrated-AMSE bandwidth and its undersmoothed 0.8 multiple."""
    h_star = optimal_bandwidth_integrated(v_hats, b_hats, d_t, n)
    return BandwidthChoice(pilot, h_star, 0.8 * h_star)


def run_bandwidth(args) -> int:
    if not args.pilot_c > 0:
        raise ConfigError("--pilot-c must be positive")
    prep = _prepare(args, bandwidth_c=args.pilot_c)
    results, _ = estimate_curve(prep.data, prep.grid, prep.config, threads=prep.threads)
    v = [r.v_hat for r in results]
    b = [r.b_hat for r in results]
    if all(x == 0 for x in b):
        raise DataError("every estimated bias constant is zero, so no plug-in bandwidth exists; "
                        "pass --bandwidth or --bandwidth-c to use a rule-of-thumb bandwidth instead")
    choice = bandwidth_from_constants(v, b, prep.data.d_t, prep.data.n, prep.config.bandwidth_h)
    records = []
    for r in results:
        rec = _t_columns(r.t_eval)
        rec.update(v_hat=r.v_hat, b_hat=r.b_hat, pilot=choice.pilot, h_star=choice.h_star,
                   h_under=choice.h_under)
        records.append(rec)
    header = dict(prep.header, pilot_c=args.pilot_c)
    _emit(render(records, header, args.format, asdict(choice)), args.output)
    return 0


def _list(text: str, cast, name: str) -> list:
    try:
        out = [cast(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --{name} list {text!r}") from exc
    if not out:
        raise ConfigError(f"--{name} is empty")
    return out


def simulation_cells(args) -> tuple[list[Cell], dict, DgpSpec]:
    """Cells for ``simulate``: the product of the learner, n, folds and c lists."""
    kinds = _list(args.learner, str, "learner")
    ns = _list(args.n, int, "n")
    folds = _list(args.folds, int, "folds")
    cs = _list(args.bandwidth_c, float, "bandwidth-c")
    try:
        spec = DgpSpec(d_x=args.d_x)
        learners = {k: LearnerSpec(k, n_trees=args.n_trees, min_leaf=args.min_leaf) for k in kinds}
        EstimationConfig(bandwidth_h=1.0, alpha=args.alpha, density_floor=args.density_floor,
                         seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if min(ns) < 2 or min(folds) < 1 or max(folds) > min(ns) or min(cs) <= 0:
        raise ConfigError("need n >= 2, 1 <= folds <= n and positive bandwidth constants")
    cells = [Cell(n, L, c, learners[k], k) for k in kinds for n in ns for L in folds for c in cs]
    header = {
        "command": "simulate", "reps": args.reps, "learners": {k: asdict(s) for k, s in learners.items()},
        "n": ns, "folds": folds, "bandwidth_c": cs, "d_x": args.d_x, "alpha": args.alpha,
        "density_floor": args.density_floor, "seed": args.seed, "t": 0.0,
    }
    return cells, header, spec


def run_simulate(args) -> int:
    threads = _threads(args)
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    cells, header, spec = simulation_cells(args)
    records = []
    for cell in cells:
        rep = run_cell(cell, args.reps, args.seed, spec, threads, alpha=args.alpha,
                       density_floor=args.density_floor)
        records.append({
            "learner": rep.learner, "n": rep.n, "L": rep.n_folds, "c": rep.c, "bias": rep.bias,
            "rmse": rep.rmse, "coverage": rep.coverage, "n_reps": rep.n_reps, "mean_se": rep.mean_se,
            "wall_time": rep.wall_time if args.record_timing else None,
            "n_failed": rep.n_failed, "failed": rep.failed,
        })
    _emit(render(records, header, args.format), args.output)
    return 0


COMMANDS = {
    "estimate": run_estimate,
    "partial-effect": run_partial_effect,
    "bandwidth": run_bandwidth,
    "simulate": run_simulate,
}


def _join_grid(argv: Sequence[str]) -> list[str]:
    # "--grid -0.4:0.4:5" would otherwise be read as an unknown option
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--grid" and i + 1 < len(argv):
            out.append("--grid=" + argv[i + 1])
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = _join_grid(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"contdml: configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ValueError, ArithmeticError, np.linalg.LinAlgError, OSError, KeyError) as exc:
        print(f"contdml: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
