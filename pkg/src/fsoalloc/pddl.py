"""Model-free primal-dual training of a neural policy.

The trainer only sees scalar observations f(h, r) and c(h, r) through
:class:`BlackBox`; gradients come from the likelihood-ratio estimator

    g = (1/T) sum_t [f_t - lam . c_t - b] grad_theta log pi(r_t | h_t)

with an optional batch-mean baseline b. Parameters ascend g with ADAM and
the multipliers follow lam <- max(0, lam + eta_k * mean_t c_t).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from fsoalloc import neural
from fsoalloc import policy as pol
from fsoalloc.program.base import Action, Scenario
from fsoalloc.sdg import DualState, NonFiniteError, TraceRow, dual_step, step_scales, trailing_mean


# a small output layer starts every policy near uniform choices and mid-range powers
OUTPUT_INIT_SCALE = 0.01


@dataclass(frozen=True)
class PddlConfig:
    iterations: int = 5000
    batch: int = 64
    lr: float = 1e-3
    eta0: float = 0.5
    gamma: float = 0.999
    use_baseline: bool = True
    eval_every: int = 250
    eval_batch: int = 512
    window: int = 500
    calibration_batch: int = 4096
    eta_scale: dict = field(default_factory=dict)
    # "stochastic" samples the policy at run time, needed when the optimum is a
    # randomized policy whose most likely action is poor
    execution: str = "deterministic"

    def __post_init__(self) -> None:
        if self.execution not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown execution mode {self.execution!r}")
        if self.batch < 1 or self.iterations < 1 or self.window < 1:
            raise ValueError("batch, iterations and window must be >= 1")
        if not self.lr >= 0 or not self.eta0 > 0:
            raise ValueError("lr must be >= 0 and eta0 > 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")


class BlackBox:
    """Observation interface: CSI draws and scalar evaluations, nothing else."""

    def __init__(self, scenario: Scenario):
        self._scenario = scenario

    @property
    def n_constraints(self) -> int:
        return self._scenario.n_constraints

    def sample_csi(self, rng: np.random.Generator, batch: int) -> np.ndarray:
        return self._scenario.sample_csi(rng, batch)

    def observe(self, h: np.ndarray, a: Action) -> tuple[np.ndarray, np.ndarray]:
        s = self._scenario
        return s.objective(h, a), s.constraints(h, a)


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std > 1e-12, std, 1.0))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


@dataclass
class LearnedPolicy:
    """A policy network plus the glue between CSI, distributions and Actions."""

    scenario: Scenario
    net: neural.PolicyNet
    layout: pol.PolicyLayout
    scaler: Standardizer

    def heads(self, h: np.ndarray):
        x = self.scaler(self.scenario.features(h))
        out, cache = neural.mlp_forward(self.net, x)
        return pol.heads_to_params(out.reshape(len(h), -1), self.layout), cache

    def sample(self, h: np.ndarray, rng: np.random.Generator):
        params, cache = self.heads(h)
        cats, powers = pol.sample_heads(params, self.layout, rng)
        return params, cache, cats, powers

    def act(self, h: np.ndarray, rng: np.random.Generator | None = None, mode: str = "deterministic") -> Action:
        params, _ = self.heads(h)
        if mode == "deterministic":
            cats, powers = pol.mode_heads(params, self.layout)
        elif mode == "stochastic":
            if rng is None:
                raise ValueError("stochastic execution needs an rng")
            cats, powers = pol.sample_heads(params, self.layout, rng)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        return self.scenario.assemble_action(cats, powers)


def build_policy(
    scenario: Scenario, init_rng: np.random.Generator, calib_rng: np.random.Generator, calibration_batch: int
) -> LearnedPolicy:
    layout = scenario.policy_layout()
    spec = neural.MlpSpec((layout.n_inputs, *scenario.hidden_sizes, layout.n_outputs), layout.n_groups)
    scaler = Standardizer.fit(scenario.features(scenario.sample_csi(calib_rng, calibration_batch)))
    return LearnedPolicy(scenario, neural.init_net(spec, init_rng, OUTPUT_INIT_SCALE), layout, scaler)


def policy_gradient_estimate(
    lp: LearnedPolicy, params, cache, cats, powers, f, c, lam, use_baseline: bool = True
) -> list[np.ndarray]:
    """Likelihood-ratio estimate of the Lagrangian gradient from observed f and c only."""
    f = np.asarray(f, dtype=float)
    c = np.asarray(c, dtype=float).reshape(len(f), -1)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(c))):
        raise NonFiniteError("non-finite observation in policy-gradient batch", [])
    reward = f - c @ np.asarray(lam, dtype=float) if c.shape[1] else f
    if use_baseline:
        reward = reward - reward.mean()
    active = lp.scenario.power_active(cats)
    score = pol.score_outputs(params, lp.layout, cats, powers, active)
    upstream = (reward[:, None] * score / len(f)).reshape(len(f), lp.layout.n_groups, lp.layout.n_outputs)
    return neural.mlp_backward(lp.net, cache, upstream)


@dataclass
class PddlState:
    policy: LearnedPolicy
    dual: DualState
    iteration: int = 0


def pddl_step(
    box: BlackBox,
    state: PddlState,
    cfg: PddlConfig,
    csi_rng: np.random.Generator,
    sample_rng: np.random.Generator,
    scale: np.ndarray | None = None,
) -> TraceRow:
    t0 = time.perf_counter()
    k = state.iteration
    lp = state.policy
    h = box.sample_csi(csi_rng, cfg.batch)
    params, cache, cats, powers = lp.sample(h, sample_rng)
    a = lp.scenario.assemble_action(cats, powers)
    f, c = box.observe(h, a)
    lam = state.dual.lambdas.copy()
    grads = policy_gradient_estimate(lp, params, cache, cats, powers, f, c, lam, cfg.use_baseline)
    if cfg.lr > 0:
        neural.adam_step(lp.net, grads, cfg.lr, maximize=True)
    if not lp.net.all_finite():
        raise NonFiniteError(f"network parameters became non-finite at iteration {k}", [])
    c_hat = c.mean(axis=0)
    if box.n_constraints:
        eta = cfg.eta0 * cfg.gamma**k * (1.0 if scale is None else scale)
        state.dual = dual_step(state.dual, eta, c_hat)
    state.iteration += 1
    return TraceRow(k, float(f.mean()), c_hat, lam, (time.perf_counter() - t0) * 1e3)


@dataclass
class EvalPoint:
    iteration: int
    objective: float
    constraints: np.ndarray


@dataclass
class PddlResult:
    policy: LearnedPolicy
    lambda_star: np.ndarray
    final: DualState
    trace: list[TraceRow]
    evals: list[EvalPoint]


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _set_rng_state(rng: np.random.Generator, st: dict) -> None:
    rng.bit_generator.state = st


def save_checkpoint(path, state: PddlState, csi_rng, sample_rng, lam_hist: np.ndarray) -> None:
    lp = state.policy
    extra = {
        "iteration": state.iteration,
        "lambdas": state.dual.lambdas.tolist(),
        "scaler_mean": lp.scaler.mean.tolist(),
        "scaler_std": lp.scaler.std.tolist(),
        "csi_rng": _rng_state(csi_rng),
        "sample_rng": _rng_state(sample_rng),
        "lambda_history": lam_hist[: state.iteration].tolist(),
    }
    neural.save_net(lp.net, path, extra)


def pddl_train(
    scenario: Scenario,
    cfg: PddlConfig,
    rng: np.random.Generator,
    resume_from: str | Path | None = None,
    checkpoint_path: str | Path | None = None,
    checkpoint_every: int = 0,
    on_row: Callable[[TraceRow], None] | None = None,
) -> PddlResult:
    """Train for ``cfg.iterations`` steps; ``rng`` is split into independent streams
    for initialisation, calibration, training CSI, action sampling and evaluation."""
    init_rng, calib_rng, csi_rng, sample_rng, eval_rng = rng.spawn(5)
    box = BlackBox(scenario)
    scale = step_scales(scenario, cfg.eta_scale)
    lp = build_policy(scenario, init_rng, calib_rng, cfg.calibration_batch)
    state = PddlState(lp, DualState.zeros(scenario.n_constraints))
    lam_hist = np.zeros((cfg.iterations, scenario.n_constraints))
    if resume_from is not None:
        net, extra = neural.load_net(resume_from)
        if net.spec != lp.net.spec:
            raise ValueError("checkpoint network does not match the scenario")
        lp.net = net
        lp.scaler = Standardizer(np.asarray(extra["scaler_mean"]), np.asarray(extra["scaler_std"]))
        state.dual = DualState(np.asarray(extra["lambdas"]))
        state.iteration = int(extra["iteration"])
        _set_rng_state(csi_rng, extra["csi_rng"])
        _set_rng_state(sample_rng, extra["sample_rng"])
        hist = np.asarray(extra["lambda_history"], dtype=float).reshape(state.iteration, scenario.n_constraints)
        lam_hist[: len(hist)] = hist[: cfg.iterations]
    h_eval = scenario.sample_csi(eval_rng, cfg.eval_batch)
    trace: list[TraceRow] = []
    evals: list[EvalPoint] = []
    while state.iteration < cfg.iterations:
        try:
            row = pddl_step(box, state, cfg, csi_rng, sample_rng, scale)
        except NonFiniteError as err:
            raise NonFiniteError(str(err), trace) from None
        lam_hist[row.iteration] = state.dual.lambdas
        trace.append(row)
        if on_row is not None:
            on_row(row)
        if cfg.eval_every and (state.iteration % cfg.eval_every == 0 or state.iteration == cfg.iterations):
            a = lp.act(h_eval, eval_rng, cfg.execution)
            f, c = box.observe(h_eval, a)
            evals.append(EvalPoint(state.iteration, float(f.mean()), c.mean(axis=0)))
        if checkpoint_path and checkpoint_every and state.iteration % checkpoint_every == 0:
            save_checkpoint(checkpoint_path, state, csi_rng, sample_rng, lam_hist)
    if checkpoint_path:
        save_checkpoint(checkpoint_path, state, csi_rng, sample_rng, lam_hist)
    lam_star = trailing_mean(lam_hist, cfg.window) if scenario.n_constraints else np.zeros(0)
    return PddlResult(lp, lam_star, state.dual, trace, evals)


def load_policy(scenario: Scenario, path) -> LearnedPolicy:
    net, extra = neural.load_net(path)
    layout = scenario.policy_layout()
    if net.spec.sizes[0] != layout.n_inputs or net.spec.n_groups != layout.n_groups:
        raise ValueError("checkpoint network does not match the scenario")
    scaler = Standardizer(np.asarray(extra["scaler_mean"]), np.asarray(extra["scaler_std"]))
    return LearnedPolicy(scenario, net, layout, scaler)


def execute_learned_policy(
    h: np.ndarray, lp: LearnedPolicy, mode: str = "deterministic", rng: np.random.Generator | None = None
) -> Action:
    """One forward pass and head mapping; the runtime learned policy."""
    return lp.act(h, rng, mode)

