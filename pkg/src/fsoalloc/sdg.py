"""Model-based stochastic dual gradient solver.

Each iteration draws a CSI batch, maximises the Lagrangian per sample at the
current multipliers, and moves the multipliers along the batch-mean
constraint values: lam <- max(0, lam + eta_k * c_hat), eta_k = eta0 * gamma**k.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from fsoalloc.program.base import Action, Scenario


class NonFiniteError(RuntimeError):
    """A solver produced NaN/inf; ``trace`` holds the rows up to the failure."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


@dataclass
class DualState:
    lambdas: np.ndarray

    def __post_init__(self) -> None:
        self.lambdas = np.asarray(self.lambdas, dtype=float).reshape(-1)
        if np.any(~(self.lambdas >= 0)):
            raise ValueError("multipliers must be nonnegative")

    @classmethod
    def zeros(cls, n: int) -> "DualState":
        return cls(np.zeros(n))


@dataclass
class TraceRow:
    iteration: int
    objective: float
    constraints: np.ndarray
    lambdas: np.ndarray
    ms: float


@dataclass(frozen=True)
class SdgConfig:
    iterations: int = 5000
    eta0: float = 0.5
    gamma: float = 0.999
    batch: int = 64
    window: int = 500
    # per-constraint-group multiplier on the dual step, for constraints whose
    # values live on a very different scale than power budgets
    eta_scale: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.iterations < 1 or self.batch < 1 or self.window < 1:
            raise ValueError("iterations, batch and window must be >= 1")
        if not self.eta0 > 0:
            raise ValueError("eta0 must be > 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")


def step_scales(scenario: Scenario, eta_scale: dict) -> np.ndarray:
    unknown = set(eta_scale) - set(scenario.constraint_groups)
    if unknown:
        raise ValueError(f"eta_scale names unknown constraint groups: {sorted(unknown)}")
    return np.array([float(eta_scale.get(g, 1.0)) for g in scenario.constraint_groups])


def lagrangian(scenario: Scenario, h: np.ndarray, a: Action, lam) -> np.ndarray:
    return scenario.lagrangian(h, a, lam)


def dual_step(lam, eta, c_hat) -> DualState:
    lam = lam.lambdas if isinstance(lam, DualState) else np.asarray(lam, dtype=float)
    return DualState(np.maximum(0.0, lam + np.asarray(eta) * np.asarray(c_hat, dtype=float)))


def parallel_argmax(scenario: Scenario, h: np.ndarray, lam, workers: int = 1) -> Action:
    """Primal argmax with the batch split across threads; the result does not depend on ``workers``."""
    if workers <= 1 or len(h) < 2:
        return scenario.primal_argmax(h, lam)
    chunks = np.array_split(np.arange(len(h)), min(workers, len(h)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda idx: scenario.primal_argmax(h[idx], lam), chunks))
    return Action(
        None if parts[0].powers is None else np.concatenate([p.powers for p in parts]),
        None if parts[0].selections is None else np.concatenate([p.selections for p in parts]),
    )


def trailing_mean(values: np.ndarray, window: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values[-window:].mean(axis=0)


@dataclass
class SdgResult:
    lambda_star: np.ndarray
    final: DualState
    trace: list[TraceRow]


def sdg_run(
    scenario: Scenario,
    cfg: SdgConfig,
    rng: np.random.Generator,
    workers: int = 1,
    on_row: Callable[[TraceRow], None] | None = None,
) -> SdgResult:
    """Run the dual loop for ``cfg.iterations`` steps.

    ``lambda_star`` is the mean of the last ``cfg.window`` multiplier iterates.
    """
    scale = step_scales(scenario, cfg.eta_scale)
    state = DualState.zeros(scenario.n_constraints)
    trace: list[TraceRow] = []
    lam_hist = np.zeros((cfg.iterations, scenario.n_constraints))
    for k in range(cfg.iterations):
        t0 = time.perf_counter()
        h = scenario.sample_csi(rng, cfg.batch)
        a = parallel_argmax(scenario, h, state.lambdas, workers)
        f_hat = float(scenario.objective(h, a).mean())
        c_hat = scenario.constraints(h, a).mean(axis=0)
        row = TraceRow(k, f_hat, c_hat, state.lambdas.copy(), 0.0)
        if not (np.isfinite(f_hat) and np.all(np.isfinite(c_hat))):
            trace.append(row)
            raise NonFiniteError(f"non-finite objective or constraint at iteration {k}", trace)
        state = dual_step(state, cfg.eta0 * cfg.gamma**k * scale, c_hat)
        lam_hist[k] = state.lambdas
        row.ms = (time.perf_counter() - t0) * 1e3
        trace.append(row)
        if on_row is not None:
            on_row(row)
    lam_star = trailing_mean(lam_hist, cfg.window) if scenario.n_constraints else np.zeros(0)
    return SdgResult(lam_star, state, trace)


def execute_policy(scenario: Scenario, h: np.ndarray, lambda_star) -> Action:
    """The deployable model-based policy: the Lagrangian maximiser at lambda*."""
    return scenario.primal_argmax(h, lambda_star)
