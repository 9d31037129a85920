"""Command line entry point: ``lowrank run | diagnose | fit``."""

from __future__ import annotations

import argparse
import csv
import glob
import io
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import InsufficientDecay, LowRankError
from .descent import Trajectory
from .diagnostics import assemble_augmented_hessian, fit_contraction, curvature_lower_bound
from .experiment import (
    SUMMARY_COLUMNS,
    TRAJ_COLUMNS,
    ConfigError,
    ExperimentConfig,
    build_instance,
    parse_config_text,
    parse_seeds,
    run_seed,
)
from .regularizer import PenaltyConfig

FIT_COLUMNS = ("seed", "rho_hat", "floor", "window_start", "window_end", "r_squared")


def format_value(x) -> str:
    """Shortest round-tripping text for numbers; ints stay ints."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def csv_text(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_csv(path: str) -> tuple[list[str], list[dict]]:
    """Read a file written by this module back into floats (``iter`` and ``seed`` as ints)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for rec in reader:
            row = {}
            for key, val in zip(header, rec):
                row[key] = int(val) if key in ("iter", "seed", "window_start", "window_end") else float(val)
            rows.append(row)
    return header, rows


def trajectory_rows(traj: Trajectory) -> list[dict]:
    return [{c: getattr(rec, c) for c in TRAJ_COLUMNS} for rec in traj.records]


def _seed_job(args):
    cfg, seed = args
    traj, row = run_seed(cfg, seed)
    return seed, csv_text(TRAJ_COLUMNS, trajectory_rows(traj)), row


def _workers(n_jobs: int) -> int:
    cap = os.environ.get("LOWRANK_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise ConfigError("LOWRANK_THREADS", f"not an integer: {cap!r}") from None
    return max(1, min(limit, n_jobs))


def run_experiment(cfg: ExperimentConfig) -> str:
    """Run every seed of ``cfg`` and write the CSV files; returns the output directory."""
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    jobs = [(cfg, s) for s in cfg.seeds]
    n_workers = _workers(len(jobs))
    if n_workers == 1:
        results = [_seed_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_seed_job, jobs))
    rows = []
    for seed, traj_csv, row in results:
        write_atomic(os.path.join(out, f"traj_{seed}.csv"), traj_csv)
        rows.append(row)
    rows.sort(key=lambda r: r["seed"])
    write_atomic(os.path.join(out, "summary.csv"), csv_text(SUMMARY_COLUMNS, rows))
    return out


def diagnose(cfg: ExperimentConfig, seed: int) -> list[tuple[str, object]]:
    """Curvature, noise and step-size report for one seed of a configuration."""
    inst = build_instance(cfg, seed)
    report: list[tuple[str, object]] = [
        ("model", cfg.model),
        ("seed", seed),
        ("alpha_used", inst.alpha),
        ("beta_used", inst.beta),
        ("alpha_hat", inst.curvature.alpha_hat),
        ("beta_hat", inst.curvature.beta_hat),
        ("eta", inst.eta),
        ("theorem_rho", inst.rho),
    ]
    if inst.delta_rip is not None:
        report.append(("rip_delta_hat", inst.delta_rip))
    if inst.truth is not None:
        report += [("sigma_min", inst.truth.sigma_min), ("kappa", inst.truth.kappa)]
    if inst.noise is not None:
        nz = inst.noise
        report += [("delta2", nz.delta2), ("delta_inf", nz.delta_inf), ("delta_inf_bar", nz.delta_inf_bar)]
        if inst.truth is not None:
            ratio = nz.delta_inf_bar / (inst.alpha * inst.truth.sigma_min)
            report.append(("delta_inf_bar_over_alpha_sigma", ratio))
            report.append(("delta_inf_bar_condition_holds", ratio <= 0.25))
    truth = inst.truth
    if truth is not None and truth.is_symmetric:
        dim = truth.point.U.size
        if dim <= 1000:
            H = assemble_augmented_hessian(inst.loss, truth.point, PenaltyConfig(inst.alpha, truth))
            n = truth.point.shape[0]
            report.append(("augmented_lambda_min_at_truth", float(np.linalg.eigvalsh(H / n)[0])))
            report.append(("curvature_lower_bound_at_truth", curvature_lower_bound(truth, inst.alpha, 0.0)))
    return report


def fit_directory(path: str) -> list[dict]:
    """Re-fit contraction rates for every ``traj_<seed>.csv`` in ``path``."""
    files = glob.glob(os.path.join(path, "traj_*.csv"))
    if not files:
        raise FileNotFoundError(f"no traj_<seed>.csv files in {path}")
    rows = []
    for f in files:
        m = re.fullmatch(r"traj_(\d+)\.csv", os.path.basename(f))
        if not m:
            continue
        _, recs = read_csv(f)
        dist2 = np.array([r["dist2"] for r in recs])
        try:
            fit = fit_contraction(dist2)
            row = dict(
                seed=int(m.group(1)),
                rho_hat=fit.rho_hat,
                floor=fit.floor,
                window_start=fit.fit_window[0],
                window_end=fit.fit_window[1],
                r_squared=fit.r_squared,
            )
        except InsufficientDecay:
            row = dict(seed=int(m.group(1)), rho_hat=math.nan, floor=math.nan, window_start=-1, window_end=-1, r_squared=math.nan)
        rows.append(row)
    rows.sort(key=lambda r: r["seed"])
    return rows


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lowrank", description="Factored gradient descent experiments and diagnostics.")
    sub = p.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("run", help="run experiments and write CSV trajectories")
    pr.add_argument("--config", required=True)
    pr.add_argument("--seeds", help="N, A..B or a comma list; overrides the config")
    pr.add_argument("--out", help="output directory; overrides the config")
    pd = sub.add_parser("diagnose", help="print curvature, noise and Hessian diagnostics")
    pd.add_argument("--config", required=True)
    pd.add_argument("--seed", type=int, help="seed to diagnose (default: first configured seed)")
    pf = sub.add_parser("fit", help="re-fit contraction rates from trajectory CSVs")
    pf.add_argument("--in", dest="input", required=True)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            rows = fit_directory(args.input)
            text = csv_text(FIT_COLUMNS, rows)
            write_atomic(os.path.join(args.input, "fit.csv"), text)
            sys.stdout.write(text)
            return 0
        cfg = load_config(args.config)
        if args.command == "run":
            if args.seeds:
                cfg = replace(cfg, seeds=parse_seeds(args.seeds))
            if args.out:
                cfg = replace(cfg, output_dir=args.out)
            out = run_experiment(cfg)
            print(f"wrote {len(cfg.seeds)} trajectories and summary.csv to {out}")
            return 0
        seed = args.seed if args.seed is not None else cfg.seeds[0]
        for key, val in diagnose(cfg, seed):
            print(f"{key} = {format_value(val) if isinstance(val, float) else val}")
        return 0
    except ConfigError as exc:
        print(f"lowrank: {exc}", file=sys.stderr)
        return 2
    except (LowRankError, OSError, ValueError) as exc:
        print(f"lowrank: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
