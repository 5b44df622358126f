"""Reference policies: water-filling, equal/random power, greedy and random selection."""

from __future__ import annotations

import logging

import numpy as np

from fsoalloc.program.base import Action, Scenario
from fsoalloc.program.fronthaul import FronthaulScenario
from fsoalloc.program.relay import JointRelayScenario, RelayScenario
from fsoalloc.program.rofso import RofsoScenario

log = logging.getLogger(__name__)


def waterfill_rofso(scenario: RofsoScenario, h: np.ndarray, tol: float = 1e-5, max_iter: int = 200) -> Action:
    """Per-sample KKT allocation meeting the total budget with equality when it binds.

    Bisects, independently for every sample, on the price nu for which the
    per-channel best responses argmax w_i C_i(h_i, p) - nu p sum to P_t.
    ``tol`` is relative to P_t. The returned allocation always respects the
    budget: when the best response jumps over P_t, the feasible side is kept.
    """
    h = scenario.check_csi(h)
    p_t = scenario.constants.p_t
    batch = len(h)
    p = scenario.best_response(h, np.zeros(batch))
    binding = p.sum(axis=1) > p_t
    if not np.any(binding):
        return Action(powers=p)
    hb = h[binding]
    lo = np.zeros(len(hb))
    hi = np.ones(len(hb))
    # grow the upper bracket until the budget is met
    for _ in range(60):
        over = scenario.best_response(hb, hi).sum(axis=1) > p_t
        if not np.any(over):
            break
        lo = np.where(over, hi, lo)
        hi = np.where(over, 2.0 * hi, hi)
    p_hi = scenario.best_response(hb, hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        p_mid = scenario.best_response(hb, mid)
        over = p_mid.sum(axis=1) > p_t
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
        p_hi = np.where(over[:, None], p_hi, p_mid)
        if np.all(np.abs(p_hi.sum(axis=1) - p_t) < tol * p_t) or np.all(hi - lo < 1e-12 * hi):
            break
    gap = np.abs(p_hi.sum(axis=1) - p_t)
    if np.any(gap >= tol * p_t):
        log.warning("water-filling could not balance the budget on %d samples", int(np.sum(gap >= tol * p_t)))
    p[binding] = p_hi
    return Action(powers=p)


def equal_power(scenario: Scenario, h: np.ndarray) -> Action:
    h = scenario.check_csi(h)
    if isinstance(scenario, RofsoScenario):
        k = scenario.constants
        return Action(powers=np.full(h.shape, min(k.p_t / scenario.n, k.p_s)))
    raise TypeError(f"equal power is defined for the RoFSO scenario, not {scenario.name}")


def random_power(scenario: RofsoScenario, h: np.ndarray, rng: np.random.Generator) -> Action:
    """i.i.d. U[0, P_s] per channel, scaled down whenever the draw exceeds P_t."""
    h = scenario.check_csi(h)
    k = scenario.constants
    p = rng.uniform(0.0, k.p_s, size=h.shape)
    total = p.sum(axis=1, keepdims=True)
    return Action(powers=p * np.minimum(1.0, k.p_t / np.maximum(total, 1e-300)))


def greedy_relay(scenario: RelayScenario, h: np.ndarray, mode: str = "best") -> Action:
    """Hop by hop, pick the relay whose incoming segment has the best (or lowest) gain."""
    if mode not in ("best", "lowest"):
        raise ValueError(f"unknown greedy mode {mode!r}")
    h = scenario.check_csi(h)
    if h.ndim == 5:  # joint scenario: rank by the carrier-summed gain
        h = h.sum(axis=-1)
    pick = np.argmax if mode == "best" else np.argmin
    rows = np.arange(len(h))
    prev = np.zeros(len(h), dtype=np.int64)
    sel = np.empty((len(h), scenario.n_hops), dtype=np.int64)
    for i in range(scenario.n_hops):
        prev = pick(h[rows, i, prev, :], axis=1)
        sel[:, i] = prev
    return Action(selections=sel)


def _equal_carrier_power(k, n_carriers: int) -> float:
    return min(k.p_t / n_carriers, k.p_s)


def random_selection(scenario: Scenario, h: np.ndarray, rng: np.random.Generator) -> Action:
    """Uniform relay per hop / access node per RRH; powered scenarios use equal power."""
    h = scenario.check_csi(h)
    batch = len(h)
    if isinstance(scenario, JointRelayScenario):
        sel = rng.integers(scenario.m, size=(batch, scenario.n_hops))
        return _equal_power_joint(scenario, sel)
    if isinstance(scenario, RelayScenario):
        return Action(selections=rng.integers(scenario.m, size=(batch, scenario.n_hops)))
    if isinstance(scenario, FronthaulScenario):
        sel = rng.integers(scenario.m, size=(batch, scenario.n))
        p = _equal_carrier_power(scenario.constants, scenario.n_carriers)
        powers = np.where(scenario.association(sel)[..., None], p, 0.0)
        powers = np.broadcast_to(powers, (batch, scenario.n, scenario.m, scenario.n_carriers)).copy()
        return Action(powers=powers, selections=sel)
    raise TypeError(f"random selection is not defined for the {scenario.name} scenario")


def _equal_power_joint(scenario: JointRelayScenario, sel: np.ndarray) -> Action:
    p = _equal_carrier_power(scenario.constants, scenario.n_carriers)
    active = scenario.power_active(sel).reshape(len(sel), scenario.n_nodes, scenario.n_carriers)
    return Action(powers=np.where(active, p, 0.0), selections=sel)


def random_relay_random_power(scenario: JointRelayScenario, h: np.ndarray, rng: np.random.Generator) -> Action:
    """Uniform relay choice; each active node draws U[0, P_s] per carrier, scaled down to its budget."""
    h = scenario.check_csi(h)
    sel = rng.integers(scenario.m, size=(len(h), scenario.n_hops))
    k = scenario.constants
    p = rng.uniform(0.0, k.p_s, size=(len(h), scenario.n_nodes, scenario.n_carriers))
    total = p.sum(axis=2, keepdims=True)
    p = p * np.minimum(1.0, k.p_t / np.maximum(total, 1e-300))
    active = scenario.power_active(sel).reshape(p.shape)
    return Action(powers=np.where(active, p, 0.0), selections=sel)


def greedy_equal_power(scenario: JointRelayScenario, h: np.ndarray, mode: str = "best") -> Action:
    sel = greedy_relay(scenario, h, mode).selections
    return _equal_power_joint(scenario, sel)


BASELINES = ("waterfill", "equal_power", "random_power", "greedy", "greedy_lowest", "random")


def baseline_policy(name: str, scenario: Scenario):
    """Return ``policy(h, rng) -> Action`` for a named baseline, checking it fits the scenario."""
    if name == "waterfill" and isinstance(scenario, RofsoScenario):
        return lambda h, rng: waterfill_rofso(scenario, h)
    if name == "equal_power" and isinstance(scenario, RofsoScenario):
        return lambda h, rng: equal_power(scenario, h)
    if name == "random_power" and isinstance(scenario, RofsoScenario):
        return lambda h, rng: random_power(scenario, h, rng)
    if name == "random_power" and isinstance(scenario, JointRelayScenario):
        return lambda h, rng: random_relay_random_power(scenario, h, rng)
    if name in ("greedy", "greedy_lowest") and isinstance(scenario, RelayScenario):
        mode = "best" if name == "greedy" else "lowest"
        if isinstance(scenario, JointRelayScenario):
            return lambda h, rng: greedy_equal_power(scenario, h, mode)
        return lambda h, rng: greedy_relay(scenario, h, mode)
    if name == "random" and isinstance(scenario, (RelayScenario, FronthaulScenario)):
        return lambda h, rng: random_selection(scenario, h, rng)
    raise ValueError(f"baseline {name!r} does not apply to the {scenario.name} scenario")
