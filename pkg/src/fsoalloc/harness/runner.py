"""Run one configured experiment and write its trace, summary and checkpoint."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from fsoalloc.baselines import baseline_policy
from fsoalloc.harness.build import Streams, build_scenario
from fsoalloc.harness.config import ExperimentConfig
from fsoalloc.pddl import PddlConfig, execute_learned_policy, pddl_train
from fsoalloc.program.base import Action, Scenario
from fsoalloc.sdg import SdgConfig, TraceRow, execute_policy, sdg_run

SCHEMA_VERSION = 1
EVAL_CHUNK = 1024

log = logging.getLogger(__name__)

Policy = Callable[[np.ndarray], Action]


def sdg_config(cfg: ExperimentConfig) -> SdgConfig:
    return SdgConfig(**cfg.sdg.model_dump())


def pddl_config(cfg: ExperimentConfig) -> PddlConfig:
    fields = {f.name for f in dataclasses.fields(PddlConfig)}
    return PddlConfig(**{k: v for k, v in cfg.pddl.model_dump().items() if k in fields})


class TraceWriter:
    """Streams trace rows to CSV, flushing each row so partial runs survive."""

    def __init__(self, path: Path, n_constraints: int, with_lambdas: bool, timing: bool):
        self.path = path
        self.with_lambdas = with_lambdas
        self.timing = timing
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        header = ["iter", "objective"] + [f"c_{s + 1}" for s in range(n_constraints)]
        if with_lambdas:
            header += [f"lambda_{s + 1}" for s in range(n_constraints)]
        if timing:
            header.append("ms")
        self._w.writerow(header)

    def __call__(self, row: TraceRow) -> None:
        out = [row.iteration, repr(float(row.objective))] + [repr(float(c)) for c in row.constraints]
        if self.with_lambdas:
            out += [repr(float(x)) for x in row.lambdas]
        if self.timing:
            out.append(f"{row.ms:.3f}")
        self._w.writerow(out)
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def evaluate(scenario: Scenario, policy: Policy, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample objective and constraint values of ``policy`` on ``h``, in chunks."""
    f, c = [], []
    for start in range(0, len(h), EVAL_CHUNK):
        hc = h[start : start + EVAL_CHUNK]
        a = policy(hc)
        f.append(scenario.objective(hc, a))
        c.append(scenario.constraints(hc, a))
    return np.concatenate(f), np.concatenate(c)


def time_policy(policy: Policy, scenario: Scenario, rng: np.random.Generator, n_calls: int) -> dict:
    """Wall time of single-sample calls on fresh CSI draws, in microseconds."""
    h = scenario.sample_csi(rng, n_calls)
    for i in range(min(3, n_calls)):
        policy(h[i : i + 1])
    times = np.empty(n_calls)
    for i in range(n_calls):
        t0 = time.perf_counter()
        policy(h[i : i + 1])
        times[i] = time.perf_counter() - t0
    times *= 1e6
    return {"mean_us": float(times.mean()), "median_us": float(np.median(times)), "n_calls": n_calls}


@dataclass
class TrainedSolver:
    policy: Policy
    trace: list[TraceRow]
    lambda_star: np.ndarray | None
    window: int
    extra: dict


def train_solver(
    cfg: ExperimentConfig,
    scenario: Scenario,
    streams: Streams,
    workers: int = 1,
    on_row: Callable[[TraceRow], None] | None = None,
    checkpoint_path: Path | None = None,
    resume_from: Path | None = None,
) -> TrainedSolver:
    solver = cfg.solver
    if solver == "sdg":
        res = sdg_run(scenario, sdg_config(cfg), streams.solver, workers, on_row)
        lam = res.lambda_star
        return TrainedSolver(lambda h: execute_policy(scenario, h, lam), res.trace, lam, cfg.sdg.window, {})
    if solver == "pddl":
        res = pddl_train(
            scenario,
            pddl_config(cfg),
            streams.solver,
            resume_from=resume_from,
            checkpoint_path=checkpoint_path,
            checkpoint_every=cfg.pddl.checkpoint_every,
            on_row=on_row,
        )
        lp = res.policy
        mode, rng = cfg.pddl.execution, streams.baseline
        curve = [{"iter": e.iteration, "objective": e.objective, "constraints": e.constraints.tolist()} for e in res.evals]
        return TrainedSolver(
            lambda h: execute_learned_policy(h, lp, mode, rng),
            res.trace,
            res.lambda_star,
            cfg.pddl.window,
            {"learning_curve": curve},
        )
    base = baseline_policy(solver, scenario)
    trace = []
    for k in range(cfg.baseline.iterations):
        t0 = time.perf_counter()
        h = scenario.sample_csi(streams.solver, cfg.baseline.batch)
        a = base(h, streams.solver)
        row = TraceRow(
            k,
            float(scenario.objective(h, a).mean()),
            scenario.constraints(h, a).mean(axis=0),
            np.zeros(0),
            (time.perf_counter() - t0) * 1e3,
        )
        trace.append(row)
        if on_row is not None:
            on_row(row)
    rng = streams.baseline
    return TrainedSolver(lambda h: base(h, rng), trace, None, cfg.baseline.window, {})


@dataclass
class RunResult:
    summary: dict
    trace_path: Path
    summary_path: Path
    checkpoint_path: Path | None
    eval_objective: np.ndarray
    eval_constraints: np.ndarray


def run(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    workers: int = 1,
    timing: bool = False,
    resume_from: str | Path | None = None,
) -> RunResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    streams = Streams.from_seed(cfg.seed)
    scenario = build_scenario(cfg, streams.instance)
    trace_path = out / "trace.csv"
    ckpt = out / "policy.npz" if cfg.solver == "pddl" else None
    writer = TraceWriter(trace_path, scenario.n_constraints, cfg.solver in ("sdg", "pddl"), timing)
    t0 = time.perf_counter()
    try:
        trained = train_solver(cfg, scenario, streams, workers, writer, ckpt, resume_from)
    finally:
        writer.close()
    train_s = time.perf_counter() - t0

    h_eval = scenario.sample_csi(streams.eval, cfg.eval.samples)
    f_eval, c_eval = evaluate(scenario, trained.policy, h_eval)
    latency = time_policy(trained.policy, scenario, streams.oracle, cfg.eval.latency_calls)

    tail = trained.trace[-trained.window :]
    final_c = np.mean([r.constraints for r in tail], axis=0) if scenario.n_constraints else np.zeros(0)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.name,
        "scenario": scenario.name,
        "solver": cfg.solver,
        "seed": cfg.seed,
        "iterations": len(trained.trace),
        "window": min(trained.window, len(trained.trace)),
        "final_objective": float(np.mean([r.objective for r in tail])),
        "final_constraints": final_c.tolist(),
        "constraint_names": scenario.constraint_names,
        "lambda_star": [] if trained.lambda_star is None else trained.lambda_star.tolist(),
        "exec_latency_us": latency["mean_us"],
        "exec_latency": latency,
        "eval": {
            "samples": len(f_eval),
            "objective_mean": float(f_eval.mean()),
            "objective_stderr": float(f_eval.std(ddof=1) / np.sqrt(len(f_eval))) if len(f_eval) > 1 else 0.0,
            "constraints_mean": c_eval.mean(axis=0).tolist(),
        },
        "train_seconds": train_s,
        "instance": scenario.describe(),
        **trained.extra,
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return RunResult(summary, trace_path, summary_path, ckpt, f_eval, c_eval)


def bench_execution(cfg: ExperimentConfig, n_calls: int, iterations: int | None = None, workers: int = 1) -> dict:
    """Per-call latency of the SDG, PDDL and (RoFSO only) water-filling policies.

    Solvers are trained for ``iterations`` steps first (the configured budget
    when None); latency does not depend on how well they converged.
    """
    results = {}
    solvers = ["sdg", "pddl"] + (["waterfill"] if cfg.scenario.kind == "rofso" else [])
    for solver in solvers:
        update = {"solver": solver}
        if iterations is not None:
            update.update(
                sdg=cfg.sdg.model_copy(update={"iterations": iterations, "window": min(cfg.sdg.window, iterations)}),
                pddl=cfg.pddl.model_copy(update={"iterations": iterations, "window": min(cfg.pddl.window, iterations)}),
                baseline=cfg.baseline.model_copy(update={"iterations": 1}),
            )
        sub = cfg.model_copy(update=update)
        streams = Streams.from_seed(cfg.seed)
        scenario = build_scenario(sub, streams.instance)
        trained = train_solver(sub, scenario, streams, workers)
        # identical timing CSI for every solver
        results[solver] = time_policy(trained.policy, scenario, Streams.from_seed(cfg.seed).oracle, n_calls)
    return {"config": cfg.name, "scenario": cfg.scenario.kind, "seed": cfg.seed, "latency": results}
