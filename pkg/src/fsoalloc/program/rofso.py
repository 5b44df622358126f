"""Power adaptation over N wavelength carriers of a DWDM radio-over-FSO link."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fsoalloc.policy import PolicyLayout
from fsoalloc.program.base import Action, RofsoConstants, Scenario, ShapeError, box_ok
from fsoalloc.program.search import maximize_bounded


def capacity_rofso(h, p, k: RofsoConstants) -> np.ndarray:
    """Per-carrier capacity in nats per channel use (natural log)."""
    h = np.asarray(h, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(h < 0) or np.any(p < 0):
        raise ValueError("gain and power must be nonnegative")
    return _capacity(h, p, k)


def _capacity(h, p, k: RofsoConstants) -> np.ndarray:
    s = k.responsivity * p * h
    signal = 0.5 * (k.omi * k.photodiode_gain * s) ** 2
    noise = (
        k.rin * s**2
        + 2.0 * k.charge * k.photodiode_gain ** (2.0 + k.excess_noise) * s
        + 4.0 * k.boltzmann * k.temperature / k.load_resistance
    )
    return np.log1p(signal / noise)


def capacity_rofso_limit(k: RofsoConstants) -> float:
    """Capacity as transmit power grows without bound."""
    return float(np.log1p(k.omi**2 * k.photodiode_gain**2 / (2.0 * k.rin)))


@dataclass(frozen=True, eq=False)
class RofsoScenario(Scenario):
    omega: np.ndarray
    constants: RofsoConstants = field(default_factory=RofsoConstants)
    grid: int = 32
    tol: float = 1e-6

    name = "rofso"
    hidden_sizes = (20, 10)

    def __post_init__(self) -> None:
        if self.link_attenuation.shape != self.omega.shape or self.omega.ndim != 1:
            raise ShapeError("omega and link attenuation must both have shape (N,)")
        if np.any((self.omega < 0) | (self.omega > 1)):
            raise ValueError("priority weights must lie in [0, 1]")

    @property
    def n(self) -> int:
        return len(self.omega)

    @property
    def p_s(self) -> float:
        return self.constants.p_s

    @property
    def constraint_names(self) -> list[str]:
        return ["total_power"]

    @property
    def constraint_groups(self) -> list[str]:
        return ["power"]

    def _powers(self, a: Action, batch: int) -> np.ndarray:
        if a.powers is None or a.powers.shape != (batch, self.n):
            got = None if a.powers is None else a.powers.shape
            raise ShapeError(f"powers must be ({batch}, {self.n}), got {got}")
        return a.powers

    def channel_capacities(self, h, a: Action) -> np.ndarray:
        h = self.check_csi(h)
        return capacity_rofso(h, self._powers(a, len(h)), self.constants)

    def objective(self, h, a: Action) -> np.ndarray:
        return self.channel_capacities(h, a) @ self.omega

    def constraints(self, h, a: Action) -> np.ndarray:
        h = self.check_csi(h)
        return (self._powers(a, len(h)).sum(axis=1) - self.constants.p_t)[:, None]

    def primal_argmax(self, h, lam) -> Action:
        """N independent scalar problems max w_i C_i(h_i, p) - lam p on [0, P_s]."""
        lam = float(np.asarray(lam, dtype=float).reshape(-1)[0]) if np.size(lam) else 0.0
        return Action(powers=self.best_response(h, lam))

    def best_response(self, h, price) -> np.ndarray:
        """Per-channel maximiser of w_i C_i(h_i, p) - price * p; ``price`` is a scalar or (B,)."""
        h = self.check_csi(h)
        if np.any(h < 0):
            raise ValueError("gains must be nonnegative")
        price = np.asarray(price, dtype=float)
        price = price.reshape(-1, 1, 1) if price.ndim else price
        w = self.omega[None, :, None]
        hh = h[..., None]
        k = self.constants

        def value(p):
            return w * _capacity(hh, p, k) - price * p

        p, _ = maximize_bounded(value, 0.0, k.p_s, h.shape, self.grid, self.tol)
        return p

    def is_feasible(self, a: Action) -> np.ndarray:
        return box_ok(a.powers, self.constants.p_s) & (a.powers.shape[1:] == (self.n,))

    def features(self, h) -> np.ndarray:
        return np.log(self.check_csi(h))[:, :, None]

    def policy_layout(self) -> PolicyLayout:
        return PolicyLayout.per_coordinate(self.n, self.constants.p_s)

    def power_active(self, categories) -> np.ndarray:
        return np.ones((len(categories), self.n), dtype=bool)

    def assemble_action(self, categories, powers) -> Action:
        return Action(powers=np.asarray(powers, dtype=float))

    def describe(self) -> dict:
        return {"scenario": self.name, "n": self.n, "omega": self.omega.tolist()}
