"""Command-line entry point: ``jointggm <subcommand> ...``.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import EdgeSet, MultiNetworkSample, PrecisionSet, load_sample, read_json, save_sample, true_edge_set, write_json
from .errors import NumericalError, ValidationError
from .evalkit import PairScorePanel, empirical_critical, fpr_fnr, matrix_losses, roc_area
from .hgsl import LambdaConfig, SolverOptions
from .inference import (
    TestConfig,
    critical_value,
    estimate_precision,
    results_to_json,
    statistic_matrix,
    support_recover,
    test_all_pairs,
    tune_alpha,
    write_results_csv,
)
from .nodewise import PairTable, fit_all_nodes, fits_from_json, fits_to_json, resolve_lambda
from .replicate import DEFAULT_ALPHA_GRID, SETTINGS, flatten_records, replicate, run_spec, summarize
from .simgen import SimConfig, simulate

log = logging.getLogger("jointggm")


class Manifest:
    """Collects what a command did; written last as ``manifest.json``."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.config = {k: v for k, v in vars(args).items() if k != "func"}
        self.outputs: list[str] = []
        self.start = time.perf_counter()
        self.timings: dict[str, float] = {}

    def add(self, path) -> Path:
        path = Path(path)
        self.outputs.append(str(path))
        return path

    def mark(self, label: str):
        self.timings[label] = round(time.perf_counter() - self.start, 6)

    def write(self, path) -> None:
        path = Path(path)
        self.mark("total")
        self.outputs.append(str(path))
        write_json(
            {
                "command": self.command,
                "config": self.config,
                "seed": self.config.get("seed"),
                "version": __version__,
                "timings": self.timings,
                "outputs": self.outputs,
            },
            path,
        )


def parse_signs(text: str | None, k: int | None = None):
    """``"+,+,-"``, ``"++-"`` or ``"1,1,-1"`` -> tuple of +/-1."""
    if text is None:
        return None
    tokens = [t for t in text.replace(",", " ").split()]
    if len(tokens) == 1 and set(tokens[0]) <= {"+", "-"}:
        tokens = list(tokens[0])
    signs = []
    for tok in tokens:
        if tok in ("+", "+1", "1"):
            signs.append(1)
        elif tok in ("-", "-1"):
            signs.append(-1)
        else:
            raise ValidationError(f"bad sign {tok!r}; use + or -")
    if k is not None and len(signs) != k:
        raise ValidationError(f"{len(signs)} signs given for k={k}")
    return tuple(signs)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _lambda_config(args) -> LambdaConfig:
    xi = math.inf if args.xi is None else args.xi
    return LambdaConfig(delta=args.delta, xi=xi, reps=args.lambda_reps, seed=args.seed)


def cmd_simulate(args) -> None:
    out = _out_dir(args.out)
    man = Manifest("simulate", args)
    cfg = SimConfig(k=args.k, p=args.p, n_per_class=args.n, block_size=args.block, model=args.model,
                    noise=args.noise, seed=args.seed, remainder=args.remainder)
    truth, sample = simulate(cfg)
    write_json(truth.to_json(), man.add(out / "truth.json"))
    write_json(true_edge_set(truth).to_json(), man.add(out / "edges.json"))
    paths = [man.add(out / f"class_{t}.csv") for t in range(cfg.k)]
    save_sample(sample, paths)
    man.write(out / "manifest.json")


def _read_fits(path):
    obj = read_json(path)
    return fits_from_json(obj), obj


def cmd_fit(args) -> None:
    sample = load_sample(args.sample, center=args.center)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    man = Manifest("fit", args)
    rule = args.lam if args.lam is not None else args.lambda_rule
    lam_cfg = _lambda_config(args)
    lam = resolve_lambda(sample, rule, lam_cfg)
    man.mark("lambda")
    opts = SolverOptions(max_iter=args.max_iter, tol=args.tol)
    fits = fit_all_nodes(sample, lam, opts, lam_cfg, args.residuals)
    man.mark("fit")
    not_conv = [f.j for f in fits if not f.solver_meta["converged"]]
    if not_conv:
        log.warning("nodes without convergence: %s", not_conv)
    extra = {"lambda": lam, "lambda_rule": str(rule), "n": list(sample.n),
             "node_names": list(sample.node_names) if sample.node_names else None,
             "not_converged": not_conv}
    write_json(fits_to_json(fits, extra), man.add(out))
    man.write(out.with_suffix(".manifest.json"))


def _test_config(args, k) -> TestConfig:
    return TestConfig(alpha=args.alpha, kind=args.kind, sign_vector=parse_signs(args.signs, k),
                      sided=args.sided, rho=args.rho)


def cmd_test(args) -> None:
    fits, _ = _read_fits(args.fits)
    tab = PairTable.from_fits(fits)
    cfg = _test_config(args, tab.k)
    out = _out_dir(args.out)
    man = Manifest("test", args)
    results = test_all_pairs(tab, cfg)
    write_results_csv(results, man.add(out / "results.csv"))
    write_json(results_to_json(results), man.add(out / "results.json"))
    if args.recover:
        write_json(support_recover(tab, args.rho).to_json(), man.add(out / "edges.json"))
    man.write(out / "manifest.json")


def cmd_estimate(args) -> None:
    fits, _ = _read_fits(args.fits)
    tab = PairTable.from_fits(fits)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    man = Manifest("estimate", args)
    est = estimate_precision(tab, args.alpha, args.kind, parse_signs(args.signs, tab.k), args.sided)
    write_json(est.to_json(), man.add(out))
    man.write(out.with_suffix(".manifest.json"))


def cmd_tune_alpha(args) -> None:
    fits, _ = _read_fits(args.fits)
    tab = PairTable.from_fits(fits)
    validation = load_sample(args.validation, center=args.center)
    grid = args.grid or list(DEFAULT_ALPHA_GRID)
    out = _out_dir(args.out)
    man = Manifest("tune-alpha", args)
    res = tune_alpha(tab, validation, grid, args.kind, parse_signs(args.signs, tab.k), args.sided)
    write_json(res.estimate.to_json(), man.add(out / "precision.json"))
    write_json({"alpha": res.alpha, "warning": res.warning, "table": res.table}, man.add(out / "tuning.json"))
    man.write(out / "manifest.json")
    print(f"chosen alpha: {res.alpha:.6g}")


def _write_rows(rows, path, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({c: (repr(v) if isinstance(v, float) else v) for c, v in r.items()})


def cmd_evaluate(args) -> None:
    truth = PrecisionSet.from_json(read_json(args.truth))
    out = _out_dir(args.out)
    man = Manifest("evaluate", args)
    rows = []
    if args.estimate:
        est = PrecisionSet.from_json(read_json(args.estimate))
        losses = matrix_losses(est, truth)
        for key in ("l1", "l2", "lF", "l1_mean", "l2_mean", "lF_mean"):
            rows.append({"metric": key, "value": losses[key]})
    if args.fits:
        fits, _ = _read_fits(args.fits)
        tab = PairTable.from_fits(fits)
        cfg = _test_config(args, tab.k)
        panel = PairScorePanel.from_matrix(statistic_matrix(tab, cfg), true_edge_set(truth), tab.k,
                                           cfg.kind, cfg.sided)
        crit = critical_value(tab.k, cfg)
        if cfg.kind == "linfun" and cfg.sided == "one":
            crit = -crit
        theo = fpr_fnr(panel, crit)
        emp = fpr_fnr(panel, empirical_critical(panel, cfg.alpha))
        rows += [
            {"metric": "fpr_theoretical", "value": theo["fpr"]},
            {"metric": "fnr_theoretical", "value": theo["fnr"]},
            {"metric": "fnr_empirical", "value": emp["fnr"]},
            {"metric": "roc_area", "value": roc_area(panel)},
        ]
    if not rows:
        raise ValidationError("evaluate needs --estimate and/or --fits")
    _write_rows(rows, man.add(out / "metrics.csv"), ["metric", "value"])
    man.write(out / "manifest.json")


def cmd_replicate(args) -> None:
    out = _out_dir(args.out)
    man = Manifest("replicate", args)
    settings = [args.setting] if args.setting else sorted(SETTINGS)
    summary, per_rep = [], []
    for setting in settings:
        overrides = {"noise": args.noise, "lambda_rule": args.lambda_rule, "alpha": args.alpha,
                     "lambda_config": _lambda_config(args), "block_size": args.block,
                     "remainder": args.remainder}
        if args.p is not None:
            overrides["p"] = args.p
        if args.k is not None:
            overrides["k"] = args.k
        if args.n is not None:
            overrides["n"] = args.n
        spec = run_spec(args.table, setting, **overrides)
        records = replicate(spec, args.reps, args.seed, args.jobs)
        man.mark(f"setting_{setting}")
        failed = [r["rep"] for r in records if "error" in r]
        if failed:
            log.warning("setting %d: replications failed: %s", setting, failed)
        summary += summarize(spec, records)
        per_rep += flatten_records(spec, records)
    _write_rows(summary, man.add(out / f"table{args.table}.csv"),
                ["model", "setting", "method", "metric", "mean", "se", "reps"])
    _write_rows(per_rep, man.add(out / f"table{args.table}_reps.csv"),
                ["model", "setting", "rep", "method", "metric", "value", "note"])
    man.write(out / "manifest.json")


def _add_lambda_flags(p):
    p.add_argument("--lambda-rule", choices=["theory", "sim"], default="sim")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--xi", type=float, default=None, help="prefactor tuning scalar; default infinity")
    p.add_argument("--lambda-reps", type=int, default=10000, help="Monte Carlo draws for --lambda-rule sim")


def _add_test_flags(p, with_rho=True):
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--kind", choices=["chi", "linfun"], default="chi")
    p.add_argument("--signs", default=None, help="sign vector for linfun, e.g. '++-' or '+,+,-'")
    p.add_argument("--sided", choices=["one", "two"], default="one")
    if with_rho:
        p.add_argument("--rho", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointggm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a truth precision set and samples")
    p.add_argument("--model", choices=["I", "II"], default="I")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--p", type=int, default=48)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--block", type=int, default=8)
    p.add_argument("--noise", choices=["gaussian", "laplace"], default="gaussian")
    p.add_argument("--remainder", choices=["error", "diagonal"], default="error")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit all node-wise HGSL regressions")
    p.add_argument("sample", nargs="+", help="one CSV per class")
    _add_lambda_flags(p)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="explicit penalty level")
    p.add_argument("--residuals", choices=["refit", "raw"], default="refit")
    p.add_argument("--center", action="store_true", help="center columns before fitting")
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="fits JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="test every node pair")
    p.add_argument("--fits", required=True)
    _add_test_flags(p)
    p.add_argument("--recover", action="store_true", help="also write the recovered edge set")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("estimate", help="two-step precision matrix estimate")
    p.add_argument("--fits", required=True)
    _add_test_flags(p, with_rho=False)
    p.add_argument("--out", required=True, help="precision JSON path")
    p.set_defaults(func=cmd_estimate, kind="linfun")

    p = sub.add_parser("tune-alpha", help="choose alpha on a validation sample")
    p.add_argument("--fits", required=True)
    p.add_argument("--validation", nargs="+", required=True, help="one CSV per class")
    p.add_argument("--grid", type=float, nargs="+", default=None)
    _add_test_flags(p, with_rho=False)
    p.add_argument("--center", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_tune_alpha, kind="linfun")

    p = sub.add_parser("evaluate", help="losses and edge-detection metrics against a truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--estimate", default=None)
    p.add_argument("--fits", default=None)
    _add_test_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("replicate", help="Monte Carlo replication of a results table")
    p.add_argument("--table", type=int, choices=[1, 2, 3, 4], required=True)
    p.add_argument("--setting", type=int, choices=sorted(SETTINGS), default=None)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", choices=["gaussian", "laplace"], default="gaussian")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--block", type=int, default=8)
    p.add_argument("--remainder", choices=["error", "diagonal"], default="error")
    p.add_argument("--alpha", type=float, default=0.05)
    _add_lambda_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_replicate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
