"""Command-line entry point.

Subcommands::

    utdctl run        --config FILE [--out DIR] [--seeds 0,1,2]
                      [--fixed-iutd X | --adaptive] [--total-steps N]
    utdctl sweep      --config FILE [--out DIR] [--workers N] [--seeds ...]
    utdctl report     --results DIR [--out DIR] [--metric iqm]
                      [--score-column return_mean] [--bootstrap B]
                      [--alpha A] [--bootstrap-seed S] [--references FILE]
    utdctl calibrate  [--env pendulum] [--episodes N] [--seed S]
                      [--horizon H] [--candidates N] [--out FILE]
    utdctl selftest

When neither ``--out`` nor the config's ``output_dir`` is set, results
land under ``$UTDCTL_OUT_ROOT/<config name>`` (default root:
``results``).
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import parse_config
from .errors import ConfigError, ReportError
from .report import calibrate_env, report_results
from .runner import RunResult, apply_overrides, run_config, run_sweep
from .selftest import run_selftest

OUT_ROOT_ENV = "UTDCTL_OUT_ROOT"


def _parse_seeds(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(part.strip()) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"--seeds must be comma-separated integers, got {raw!r}")


def _resolve_out(cli_out: str | None, cfg_out: str, config_path: str) -> str:
    if cli_out:
        return cli_out
    if cfg_out:
        return cfg_out
    root = os.environ.get(OUT_ROOT_ENV, "results")
    stem = os.path.splitext(os.path.basename(config_path))[0]
    return os.path.join(root, stem)


def _print_results(results: list[RunResult]) -> int:
    status = 0
    for r in results:
        if r.failed:
            print(f"[{r.tag}] seed {r.seed}: FAILED\n{r.message}", file=sys.stderr)
            status = 1
        elif r.diverged:
            print(f"[{r.tag}] seed {r.seed}: diverged ({r.csv_path})", file=sys.stderr)
            status = 1
        else:
            print(f"[{r.tag}] seed {r.seed}: ok ({r.csv_path})")
    return status


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    cfg = apply_overrides(
        cfg,
        fixed_iutd=args.fixed_iutd,
        adaptive=args.adaptive,
        total_steps=args.total_steps,
        seeds=_parse_seeds(args.seeds) if args.seeds else None,
    )
    out_dir = _resolve_out(args.out, cfg.output_dir, args.config)
    return _print_results(run_config(cfg, out_dir))


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    if args.seeds:
        cfg = apply_overrides(cfg, seeds=_parse_seeds(args.seeds))
    out_dir = _resolve_out(args.out, cfg.output_dir, args.config)
    workers = args.workers if args.workers > 0 else min(4, os.cpu_count() or 1)
    return _print_results(run_sweep(cfg, out_dir, workers))


def _cmd_report(args) -> int:
    out_dir = args.out or os.path.join(args.results, "report")
    payload = report_results(
        args.results, out_dir, metric=args.metric, score_column=args.score_column,
        num_bootstrap=args.bootstrap, alpha=args.alpha,
        bootstrap_seed=args.bootstrap_seed, references_path=args.references,
    )
    for tag, message in sorted(payload["errors"].items()):
        print(f"[{tag}] skipped: {message}", file=sys.stderr)
    print(f"report written to {out_dir} ({len(payload['cells'])} cells)")
    return 0


def _cmd_calibrate(args) -> int:
    out_path = args.out or f"references_{args.env}.json"
    refs = calibrate_env(args.env, args.episodes, args.seed, out_path,
                         horizon=args.horizon, n_candidates=args.candidates)
    print(f"random_ref={refs['random_ref']:.3f} oracle_ref={refs['oracle_ref']:.3f} "
          f"-> {out_path}")
    if refs["degenerate"]:
        print("warning: reference scores coincide; normalization will fail",
              file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="utdctl",
        description="Adaptive update-to-data ratio experiments: run, sweep, report.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one config over its seeds")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--out", default=None)
    run_p.add_argument("--seeds", default=None, help="comma-separated override")
    run_p.add_argument("--fixed-iutd", type=float, default=None,
                       help="freeze the ratio at this value (baseline mode)")
    run_p.add_argument("--adaptive", action="store_true",
                       help="force adaptive mode on")
    run_p.add_argument("--total-steps", type=int, default=None)
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run every cell of a sweep grid")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--out", default=None)
    sweep_p.add_argument("--seeds", default=None)
    sweep_p.add_argument("--workers", type=int, default=0,
                         help="0 = auto (min(4, cpu count))")
    sweep_p.set_defaults(func=_cmd_sweep)

    report_p = sub.add_parser("report", help="aggregate run CSVs into report files")
    report_p.add_argument("--results", required=True)
    report_p.add_argument("--out", default=None)
    report_p.add_argument("--metric", default="iqm",
                          choices=("mean", "median", "iqm", "optimality_gap"))
    report_p.add_argument("--score-column", default="return_mean",
                          choices=("return_mean", "val_loss"))
    report_p.add_argument("--bootstrap", type=int, default=2000)
    report_p.add_argument("--alpha", type=float, default=0.05)
    report_p.add_argument("--bootstrap-seed", type=int, default=0)
    report_p.add_argument("--references", default=None,
                          help="references JSON from the calibrate command")
    report_p.set_defaults(func=_cmd_report)

    cal_p = sub.add_parser("calibrate", help="estimate reference scores for an env")
    cal_p.add_argument("--env", default="pendulum")
    cal_p.add_argument("--episodes", type=int, default=100)
    cal_p.add_argument("--seed", type=int, default=0)
    cal_p.add_argument("--horizon", type=int, default=16,
                       help="oracle planner horizon (match the run config)")
    cal_p.add_argument("--candidates", type=int, default=40,
                       help="oracle planner candidate count")
    cal_p.add_argument("--out", default=None)
    cal_p.set_defaults(func=_cmd_calibrate)

    self_p = sub.add_parser("selftest", help="run built-in sanity checks")
    self_p.set_defaults(func=lambda args: run_selftest())

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
