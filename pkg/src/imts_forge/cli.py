"""Command-line front end.

Exit codes: 0 success, 1 user error, 2 internal error, 3 rejected
generator (every grid point rejected, or the requested spread rejected).
Data goes to stdout or ``--out``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import traceback
from pathlib import Path

from . import __version__
from .bundle import BundleError, read_bundle, verify_bundle, write_bundle
from .dsl import DslError, RhsDomainError
from .evaluation import BASELINES, evaluate, jgd_vs_mse_correlation
from .generator import (
    DEFAULT_GRIDS,
    AllRejected,
    DatasetConfig,
    GeneratorConfig,
    RetryBudgetExhausted,
    SolverOptions,
    SpreadConfig,
    SpreadRejected,
    lorenz_protocol,
    materialize_dataset,
    optimize_spreads,
    score_config,
)
from .systems import SYSTEMS_DIR_ENV, Registry, SystemNotFoundError

EXIT_OK, EXIT_USER, EXIT_INTERNAL, EXIT_REJECTED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _diag(msg: str) -> None:
    print(msg, file=sys.stderr)


def _timing(label: str, start: float) -> None:
    _diag(f"# {label}: {time.perf_counter() - start:.2f}s")


def _registry(args) -> Registry:
    return Registry.with_builtins(args.systems_dir or os.environ.get(SYSTEMS_DIR_ENV) or None)


def _solver(args) -> SolverOptions:
    return SolverOptions(args.rtol, args.atol, args.max_steps)


def _noise_std(args) -> float:
    if args.noise_var is not None:
        if args.noise_var < 0:
            raise UsageError("--noise-var must be non-negative")
        return math.sqrt(args.noise_var)
    return args.noise_std


def _write_out(args, name: str, text: str) -> None:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / name
        if path.exists() and not args.force:
            raise UsageError(f"{path} exists (use --force to overwrite)")
        path.write_text(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_list_systems(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["name", "channels", "constants", "duration", "source"])
    reg = _registry(args)
    for name, channels, n_consts, source in reg.list():
        w.writerow([name, channels, n_consts, repr(reg.get(name).duration), source])
    return EXIT_OK


def cmd_score(args) -> int:
    spec = _registry(args).get(args.system)
    dur = args.sigma_dur if args.sigma_dur is not None else spec.duration
    cfg = GeneratorConfig(
        spec,
        SpreadConfig(args.sigma_initial, args.sigma_const, dur),
        args.eval_samples,
        args.eval_steps,
        args.score_window,
        args.seed,
        _solver(args),
    )
    res = score_config(cfg)
    out = {
        "system": spec.name,
        "spread": [cfg.spread.sigma_initial, cfg.spread.sigma_const, cfg.spread.sigma_dur],
        "accepted": res.verdict.accepted,
        "cause": res.verdict.cause,
        "detail": res.verdict.detail,
        "report": res.report.to_dict() if res.report else None,
    }
    print(json.dumps(out, sort_keys=True, indent=1))
    return EXIT_OK if res.verdict.accepted else EXIT_REJECTED


def _optimize(args, spec):
    grids = (args.grid_initial, args.grid_const, args.grid_dur)
    return optimize_spreads(
        spec,
        grids,
        args.eval_samples,
        args.eval_steps,
        args.score_window,
        args.seed,
        _solver(args),
        args.jobs,
    )


def _grid_csv(outcome) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sigma_initial", "sigma_const", "sigma_dur", "verdict", "aggregated_jgd"])
    for res in outcome.results:
        s = res.spread
        jgd = repr(res.report.aggregated_jgd) if res.report else ""
        verdict = "accepted" if res.verdict.accepted else res.verdict.cause
        w.writerow([repr(s.sigma_initial), repr(s.sigma_const), repr(s.sigma_dur), verdict, jgd])
    return buf.getvalue()


def cmd_optimize(args) -> int:
    spec = _registry(args).get(args.system)
    start = time.perf_counter()
    outcome = _optimize(args, spec)
    _timing("optimize", start)
    text = _grid_csv(outcome)
    sys.stdout.write(text)
    _write_out(args, "optimize.csv", text)
    _diag(f"rejections: {outcome.log.counts}")
    if isinstance(outcome, AllRejected):
        _diag("every grid point was rejected")
        return EXIT_REJECTED
    s = outcome.spread
    print(
        f"best,{s.sigma_initial!r},{s.sigma_const!r},{s.sigma_dur!r},"
        f"{outcome.report.aggregated_jgd!r}"
    )
    return EXIT_OK


def _dataset_config(args) -> DatasetConfig:
    return DatasetConfig(
        instances=args.instances,
        grid_steps=args.grid_steps,
        window_steps=args.window_steps,
        onset_range=args.onset_range,
        dropout=args.dropout,
        noise_std=_noise_std(args),
        master_seed=args.seed,
    )


def cmd_generate(args) -> int:
    spec = _registry(args).get(args.system)
    ds = _dataset_config(args)
    if (Path(args.out) / "manifest.json").exists() and not args.force:
        raise UsageError(f"{args.out} already contains a bundle (use --force to overwrite)")
    given = [args.sigma_initial, args.sigma_const, args.sigma_dur]
    start = time.perf_counter()
    if all(v is not None for v in given):
        spread = SpreadConfig(*given)
    elif any(v is not None for v in given):
        raise UsageError("give all of --sigma-initial, --sigma-const, --sigma-dur or none")
    else:
        outcome = _optimize(args, spec)
        if isinstance(outcome, AllRejected):
            _diag(f"every grid point was rejected: {outcome.log.counts}")
            return EXIT_REJECTED
        spread = outcome.spread
        _timing("optimize", start)
    dataset = materialize_dataset(
        spec,
        spread,
        ds,
        args.eval_samples,
        args.eval_steps,
        args.score_window,
        _solver(args),
        args.jobs,
        args.split_fraction,
    )
    digest = write_bundle(dataset, args.out, force=args.force)
    _timing("generate", start)
    print(f"{digest}  {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    dataset = read_bundle(args.bundle)
    report = evaluate(
        dataset,
        args.baseline or BASELINES,
        args.folds,
        args.split_fraction,
        args.seed,
        args.noisy_targets,
    )
    text = report.to_csv(Path(args.bundle).name)
    sys.stdout.write(text)
    _write_out(args, "evaluation.csv", text)
    _diag(report.table())
    return EXIT_OK


def cmd_lorenz_bench(args) -> int:
    start = time.perf_counter()
    dataset = lorenz_protocol(
        seed=args.seed,
        instances=args.instances,
        duration=args.duration,
        dropout=args.dropout,
        noise_std=_noise_std(args),
        eval_samples=args.eval_samples,
        eval_steps=args.eval_steps,
        score_window=args.score_window,
        solver=_solver(args),
        jobs=args.jobs,
    )
    write_bundle(dataset, Path(args.out) / "lorenz", force=args.force)
    report = evaluate(dataset, BASELINES, args.folds, seed=args.seed,
                      noisy_targets=args.noisy_targets)
    text = report.to_csv("lorenz")
    sys.stdout.write(text)
    _write_out(args, "evaluation.csv", text)
    _diag(report.table())
    _timing("lorenz-bench", start)
    return EXIT_OK


def cmd_verify(args) -> int:
    start = time.perf_counter()
    ok, recorded, fresh = verify_bundle(args.bundle, args.jobs)
    _timing("verify", start)
    print(f"{'ok' if ok else 'MISMATCH'} recorded={recorded} regenerated={fresh}")
    return EXIT_OK if ok else EXIT_USER


def cmd_report(args) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "system", "aggregated_jgd", "best_baseline", "mse_mean", "mse_std"])
    pairs = []
    for bundle in args.bundles:
        dataset = read_bundle(bundle)
        report = evaluate(dataset, BASELINES, args.folds, args.split_fraction, args.seed,
                          args.noisy_targets)
        name, _ = report.best
        mean, std = report.summary()[name]
        jgd = dataset.metadata["difficulty"]["aggregated_jgd"]
        pairs.append((jgd, mean))
        w.writerow([Path(bundle).name, dataset.metadata["system"], repr(jgd), name,
                    repr(mean), repr(std)])
    text = buf.getvalue()
    sys.stdout.write(text)
    _write_out(args, "report.csv", text)
    if len(pairs) >= 3:
        try:
            _diag(f"spearman(jgd, mse) = {jgd_vs_mse_correlation(pairs):.4f}")
        except ValueError as exc:
            _diag(f"spearman undefined: {exc}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_eval_protocol(p) -> None:
    g = p.add_argument_group("generator scoring")
    g.add_argument("--eval-samples", type=int, default=100)
    g.add_argument("--eval-steps", type=int, default=100)
    g.add_argument("--score-window", type=int, default=50)
    g.add_argument("--rtol", type=float, default=SolverOptions.rtol)
    g.add_argument("--atol", type=float, default=SolverOptions.atol)
    g.add_argument("--max-steps", type=int, default=SolverOptions.max_steps)


def _add_spread(p, required_default: bool) -> None:
    g = p.add_argument_group("spread")
    default = 0.0 if required_default else None
    fallback = None if required_default else "default: optimized over the grid"
    g.add_argument("--sigma-initial", type=float, default=default, help=fallback)
    g.add_argument("--sigma-const", type=float, default=default, help=fallback)
    g.add_argument("--sigma-dur", type=float, default=None,
                   help="absolute duration (default: the system's unit for score,"
                        " optimized over the grid for generate)")


def _add_grids(p) -> None:
    g = p.add_argument_group("spread grid")
    g.add_argument("--grid-initial", type=_floats, default=DEFAULT_GRIDS[0])
    g.add_argument("--grid-const", type=_floats, default=DEFAULT_GRIDS[1])
    g.add_argument("--grid-dur", type=_floats, default=DEFAULT_GRIDS[2],
                   help="durations in units of the system's default duration")


def _add_noise(p) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--noise-std", type=float, default=DatasetConfig.noise_std)
    g.add_argument("--noise-var", type=float, default=None,
                   help="noise variance, alternative to --noise-std (default: unset)")


def _add_eval_flags(p, split_default) -> None:
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--split-fraction", type=float, default=split_default,
                   help="history fraction of the window (default: the bundle's recorded value)")
    p.add_argument("--noisy-targets", action="store_true",
                   help="score against noisy retained values instead of ground truth")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--systems-dir", default=None,
                        help=f"extra *.ode directory (default: ${SYSTEMS_DIR_ENV} if set)")
    common.add_argument("--out", default=None,
                        help="output directory (default: none, CSV goes to stdout only; required by generate and lorenz-bench)")
    common.add_argument("--force", action="store_true")

    parser = _Parser(prog="imts-forge", description="Build and evaluate IMTS forecasting datasets from ODE systems.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("list-systems", parents=[common], help="list registered systems")
    p.set_defaults(fn=cmd_list_systems)

    p = sub.add_parser("score", parents=[common], help="score one spread configuration")
    p.add_argument("system")
    _add_spread(p, True)
    _add_eval_protocol(p)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("optimize", parents=[common], help="grid-search spreads for max JGD")
    p.add_argument("system")
    _add_grids(p)
    _add_eval_protocol(p)
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("generate", parents=[common], help="write a dataset bundle")
    p.add_argument("system")
    _add_spread(p, False)
    _add_grids(p)
    _add_eval_protocol(p)
    d = p.add_argument_group("dataset")
    d.add_argument("--instances", type=int, default=DatasetConfig.instances)
    d.add_argument("--grid-steps", type=int, default=DatasetConfig.grid_steps)
    d.add_argument("--window-steps", type=int, default=DatasetConfig.window_steps)
    d.add_argument("--onset-range", type=int, default=DatasetConfig.onset_range)
    d.add_argument("--dropout", type=float, default=DatasetConfig.dropout)
    d.add_argument("--split-fraction", type=float, default=0.5)
    _add_noise(d)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("evaluate", parents=[common], help="constant baselines on a bundle")
    p.add_argument("bundle")
    p.add_argument("--baseline", action="append", choices=BASELINES,
                   help="repeatable (default: all baselines)")
    _add_eval_flags(p, None)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("lorenz-bench", parents=[common], help="Lorenz dataset and evaluation")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--duration", type=float, default=None,
                   help="fixed duration (default: JGD-optimal over the duration grid)")
    p.add_argument("--dropout", type=float, default=DatasetConfig.dropout)
    _add_noise(p)
    _add_eval_protocol(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--noisy-targets", action="store_true")
    p.set_defaults(fn=cmd_lorenz_bench)

    p = sub.add_parser("verify", parents=[common], help="regenerate a bundle and compare")
    p.add_argument("bundle")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("report", parents=[common], help="JGD vs best-baseline MSE CSV")
    p.add_argument("bundles", nargs="+")
    _add_eval_flags(p, None)
    p.set_defaults(fn=cmd_report)

    for sp in sub.choices.values():
        _document_defaults(sp)
    return parser


def _document_defaults(parser: argparse.ArgumentParser) -> None:
    for action in parser._actions:
        if not action.option_strings or action.nargs == 0:
            continue
        if action.help and "default" in action.help:
            continue  # already documented, or shared through a parent parser
        default = action.default
        if isinstance(default, tuple):
            default = ",".join(f"{v:g}" for v in default)
        note = f"default: {default}"
        action.help = f"{action.help} ({note})" if action.help else note


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command in ("generate", "lorenz-bench") and not args.out:
            parser.error(f"{args.command} requires --out")
        if args.jobs < 1:
            parser.error("--jobs must be at least 1")
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USER
    try:
        return args.fn(args)
    except (SpreadRejected, RetryBudgetExhausted) as exc:
        _diag(f"error: {exc}")
        return EXIT_REJECTED
    except (UsageError, DslError, SystemNotFoundError, BundleError, FileNotFoundError,
            RhsDomainError, ValueError) as exc:
        _diag(f"error: {exc}")
        return EXIT_USER
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
