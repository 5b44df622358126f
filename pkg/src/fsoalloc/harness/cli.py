"""Command-line entry point: ``fsoalloc run|bench|oracle|list-presets``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from fsoalloc.harness.config import SOLVERS, ConfigError, ExperimentConfig, list_presets, load_config

SOLVER_SECTION = {"sdg": "sdg", "pddl": "pddl"}


def _load(args, solver: str | None = None) -> ExperimentConfig:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if solver:
        overrides["solver"] = solver
    cfg = load_config(args.config, overrides)
    if getattr(args, "iterations", None) is not None:
        section = SOLVER_SECTION.get(cfg.solver, "baseline")
        overrides[section] = {"iterations": args.iterations}
        cfg = load_config(args.config, overrides)
    return cfg


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="preset name or .toml path, optionally +overlay (e.g. rofso10+hazy)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out-dir", type=Path, default=None, help="output directory (default: runs/<config>-<solver>-s<seed>)")
    p.add_argument("--workers", type=int, default=1, help="threads for the per-sample primal step")


def _out_dir(args, cfg: ExperimentConfig, kind: str) -> Path:
    if args.out_dir is not None:
        return args.out_dir
    return Path("runs") / f"{cfg.name}-{kind}-s{cfg.seed}"


def cmd_run(args) -> int:
    from fsoalloc.harness.runner import run

    cfg = _load(args, args.solver)
    out = _out_dir(args, cfg, cfg.solver)
    res = run(cfg, out, workers=args.workers, timing=args.timing, resume_from=args.resume)
    s = res.summary
    print(f"{cfg.name} {cfg.solver} seed={cfg.seed}: final objective {s['final_objective']:.6g}, "
          f"eval objective {s['eval']['objective_mean']:.6g}, latency {s['exec_latency_us']:.1f} us")
    print(f"wrote {res.trace_path} and {res.summary_path}")
    return 0


def cmd_bench(args) -> int:
    from fsoalloc.harness.runner import bench_execution

    cfg = _load(args)
    report = bench_execution(cfg, args.calls, args.iterations, args.workers)
    out = _out_dir(args, cfg, "bench")
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for name, stats in report["latency"].items():
        print(f"{name:10s} mean {stats['mean_us']:12.1f} us   median {stats['median_us']:12.1f} us")
    return 0


def cmd_oracle(args) -> int:
    from fsoalloc.harness.oracle import run_oracle

    cfg = _load(args)
    t0 = time.perf_counter()
    report = run_oracle(cfg, args.workers)
    report["seconds"] = time.perf_counter() - t0
    out = _out_dir(args, cfg, "oracle")
    out.mkdir(parents=True, exist_ok=True)
    (out / "oracle.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"oracle {report['oracle']['value']:.6g}  sdg {report['sdg_objective']:.6g}  "
          f"relative gap {report['relative_gap']:+.2e}  ({report['seconds']:.1f} s)")
    return 0


def cmd_list(args) -> int:
    presets, overlays = list_presets()
    print("presets:  " + ", ".join(presets))
    print("overlays: " + ", ".join(overlays))
    print("solvers:  " + ", ".join(SOLVERS))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsoalloc", description="Constrained resource allocation for FSO systems")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train/evaluate one solver and write trace.csv + summary.json")
    _common(p)
    p.add_argument("--solver", choices=SOLVERS, help="override the configured solver")
    p.add_argument("--iterations", type=int, help="override the solver's iteration budget")
    p.add_argument("--timing", action="store_true", help="add a wall-clock ms column to the trace")
    p.add_argument("--resume", type=Path, help="PDDL checkpoint to resume from")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="per-call latency of the SDG, PDDL and water-filling policies")
    _common(p)
    p.add_argument("--calls", type=int, default=200)
    p.add_argument("--iterations", type=int, default=200, help="training steps before timing")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="brute-force optimum on a few channel states vs SDG")
    _common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("list-presets", help="show shipped presets and overlays")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(err, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
