"""Exhaustive reference solutions on a finite set of channel states.

With CSI restricted to K equally likely states and powers to a grid, the
sampled problem is small enough to solve outright. The RoFSO oracle
minimises the dual function over lambda (each evaluation enumerates the full
power grid for every state) and cross-checks the result with the
time-sharing linear program over per-state grid points, whose optimum the
dual value equals.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from fsoalloc.program.base import Action
from fsoalloc.program.relay import RelayScenario
from fsoalloc.program.rofso import RofsoScenario, capacity_rofso

MAX_GRID_POINTS = 2_000_000


@dataclass
class OracleResult:
    value: float
    lambda_star: float
    dual_value: float
    pure_value: float
    pure_constraint: float
    table: np.ndarray  # per-state allocation at lambda_star

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "lambda_star": self.lambda_star,
            "dual_value": self.dual_value,
            "pure_value": self.pure_value,
            "pure_constraint": self.pure_constraint,
            "table": self.table.tolist(),
        }


def power_grid(p_s: float, n: int, points: int) -> np.ndarray:
    """All grid allocations (G, n) with ``points`` levels per channel."""
    if points**n > MAX_GRID_POINTS:
        raise ValueError(f"{points}^{n} grid points exceed the enumeration limit")
    levels = np.linspace(0.0, p_s, points)
    return np.array(list(itertools.product(levels, repeat=n)))


def _upper_hull(cost: np.ndarray, value: np.ndarray) -> np.ndarray:
    """Indices of the upper concave hull of the points (cost, value)."""
    order = np.lexsort((-value, cost))
    hull: list[int] = []
    for i in order:
        if hull and cost[hull[-1]] == cost[i]:
            continue
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (cost[b] - cost[a]) * (value[i] - value[a]) - (value[b] - value[a]) * (cost[i] - cost[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


def rofso_oracle(scenario: RofsoScenario, states: np.ndarray, points: int = 200, lambda_tol: float = 1e-7) -> OracleResult:
    k = scenario.constants
    grid = power_grid(k.p_s, scenario.n, points)  # (G, N)
    cost = grid.sum(axis=1) - k.p_t  # (G,)
    # objective of every grid allocation in every state, summed term by term
    values = np.zeros((len(states), len(grid)))
    for i in range(scenario.n):
        values += scenario.omega[i] * capacity_rofso(states[:, i, None], grid[None, :, i], k)

    def dual(lam: float) -> float:
        return float(np.mean(np.max(values - lam * cost, axis=1)))

    def best(lam: float) -> np.ndarray:
        return np.argmax(values - lam * cost, axis=1)

    if np.mean(cost[best(0.0)]) <= 0:
        lam_star = 0.0
    else:
        hi = 1.0
        while np.mean(cost[best(hi)]) > 0:
            hi *= 2.0
        lam_star = float(minimize_scalar(dual, bounds=(0.0, hi), method="bounded", options={"xatol": lambda_tol}).x)
    d_star = dual(lam_star)

    # time-sharing LP restricted to per-state upper-hull points (the others are never optimal)
    hulls = [_upper_hull(cost, v) for v in values]
    n_vars = sum(len(hh) for hh in hulls)
    c_obj = np.concatenate([-values[s, hh] for s, hh in enumerate(hulls)]) / len(states)
    a_ub = np.concatenate([cost[hh] for hh in hulls])[None, :] / len(states)
    a_eq = np.zeros((len(states), n_vars))
    col = 0
    for s, hh in enumerate(hulls):
        a_eq[s, col : col + len(hh)] = 1.0
        col += len(hh)
    lp = linprog(c_obj, A_ub=a_ub, b_ub=[0.0], A_eq=a_eq, b_eq=np.ones(len(states)), bounds=(0, None), method="highs")
    if not lp.success:
        raise RuntimeError(f"time-sharing LP failed: {lp.message}")

    pick = best(lam_star)
    return OracleResult(
        value=float(-lp.fun),
        lambda_star=lam_star,
        dual_value=d_star,
        pure_value=float(values[np.arange(len(states)), pick].mean()),
        pure_constraint=float(cost[pick].mean()),
        table=grid[pick],
    )


def relay_oracle(scenario: RelayScenario, states: np.ndarray) -> OracleResult:
    """Mean over states of the best path capacity, by enumerating every path."""
    n, m = scenario.n_hops, scenario.m
    best_val = np.full(len(states), -np.inf)
    best_path = np.zeros((len(states), n), dtype=np.int64)
    for path in itertools.product(range(m), repeat=n):
        sel = np.broadcast_to(np.array(path), (len(states), n))
        v = scenario.objective(states, Action(selections=sel))
        better = v > best_val
        best_val = np.where(better, v, best_val)
        best_path[better] = path
    value = float(best_val.mean())
    return OracleResult(value, 0.0, value, value, 0.0, best_path)


def run_oracle(cfg, workers: int = 1) -> dict:
    """Oracle on ``cfg.oracle.n_states`` fading draws, plus SDG on the same states for comparison."""
    from fsoalloc.harness.build import Streams, build_scenario
    from fsoalloc.harness.runner import sdg_config
    from fsoalloc.sdg import sdg_run

    streams = Streams.from_seed(cfg.seed)
    scenario = build_scenario(cfg, streams.instance)
    states = scenario.sample_csi(streams.oracle, cfg.oracle.n_states)
    if isinstance(scenario, RofsoScenario):
        result = rofso_oracle(scenario, states, cfg.oracle.grid, cfg.oracle.lambda_tol)
    elif isinstance(scenario, RelayScenario) and scenario.n_constraints == 0:
        result = relay_oracle(scenario, states)
    else:
        raise ValueError(f"no brute-force oracle for the {scenario.name} scenario")
    scfg = sdg_config(cfg)
    sdg = sdg_run(scenario.with_csi_states(states), scfg, streams.solver, workers)
    tail = sdg.trace[-scfg.window :]
    sdg_value = float(np.mean([r.objective for r in tail]))
    return {
        "scenario": scenario.name,
        "seed": cfg.seed,
        "n_states": len(states),
        "oracle": result.as_dict(),
        "sdg_objective": sdg_value,
        "sdg_lambda_star": sdg.lambda_star.tolist(),
        "relative_gap": (sdg_value - result.value) / abs(result.value),
    }
