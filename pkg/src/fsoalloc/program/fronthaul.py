"""Wireless-backhaul fronthaul: RRHs pick an access node and split power over carriers.

CSI is ``h[i, j, l]`` for RRH i, access node j and carrier l. Selections use
``NO_SELECTION`` for an RRH that connects to nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fsoalloc.policy import PolicyLayout
from fsoalloc.program.base import NO_SELECTION, Action, LinkConstants, Scenario, ShapeError, box_ok


def capacity_fronthaul(h, p, omega, k: LinkConstants) -> np.ndarray:
    """Weighted sum over carriers (last axis) of the per-carrier link capacity."""
    s = np.asarray(p, dtype=float) * np.asarray(h, dtype=float) * k.snr_per_watt_gain
    return k.scale * np.log1p(s) @ omega


def rrh_positions(n: int, half_width_km: float, rng) -> np.ndarray:
    return rng.uniform(-half_width_km, half_width_km, size=(n, 2))


def pair_distances_km(a: np.ndarray, b: np.ndarray, min_km: float) -> np.ndarray:
    return np.maximum(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1), min_km)


@dataclass(frozen=True, eq=False)
class FronthaulScenario(Scenario):
    """Maximise the sum over RRHs of the selected link capacity.

    Constraints, in order: one power budget per (RRH, access node) pair, then
    one congestion constraint per access node. ``literal_congestion`` drops the
    association indicator from the congestion sum.
    """

    omega: np.ndarray = None
    constants: LinkConstants = field(default_factory=LinkConstants)
    literal_congestion: bool = False

    name = "fronthaul"
    hidden_sizes = (400, 200, 100)

    def __post_init__(self) -> None:
        if self.link_attenuation.ndim != 3:
            raise ShapeError("link attenuation must be (N, M, L)")
        if self.omega is None or self.omega.shape != (self.n_carriers,):
            raise ShapeError("omega must have one weight per carrier")
        if np.any(~(self.link_attenuation > 0)):
            raise ValueError("every link needs a positive attenuation")

    @property
    def n(self) -> int:
        return self.link_attenuation.shape[0]

    @property
    def m(self) -> int:
        return self.link_attenuation.shape[1]

    @property
    def n_carriers(self) -> int:
        return self.link_attenuation.shape[2]

    @property
    def p_s(self) -> float:
        return self.constants.p_s

    @property
    def constraint_names(self) -> list[str]:
        power = [f"power_rrh{i + 1}_an{j + 1}" for i in range(self.n) for j in range(self.m)]
        return power + [f"congestion_an{j + 1}" for j in range(self.m)]

    @property
    def constraint_groups(self) -> list[str]:
        return ["power"] * (self.n * self.m) + ["congestion"] * self.m

    def _parts(self, a: Action, batch: int):
        shape = (batch, self.n, self.m, self.n_carriers)
        if a.powers is None or a.powers.shape != shape:
            raise ShapeError(f"powers must be {shape}")
        if a.selections is None or a.selections.shape != (batch, self.n):
            raise ShapeError(f"selections must be ({batch}, {self.n})")
        return a.powers, a.selections

    def association(self, selections: np.ndarray) -> np.ndarray:
        """One-hot (B, N, M) association matrix; an unconnected RRH is all zeros."""
        return selections[..., None] == np.arange(self.m)

    def link_capacities(self, h, a: Action) -> np.ndarray:
        h = self.check_csi(h)
        powers, _ = self._parts(a, len(h))
        return capacity_fronthaul(h, powers, self.omega, self.constants)

    def objective(self, h, a: Action) -> np.ndarray:
        h = self.check_csi(h)
        _, sel = self._parts(a, len(h))
        cap = self.link_capacities(h, a)
        return np.einsum("bij,bij->b", self.association(sel), cap)

    def constraints(self, h, a: Action) -> np.ndarray:
        h = self.check_csi(h)
        powers, sel = self._parts(a, len(h))
        cap = self.link_capacities(h, a)
        power = powers.sum(axis=3).reshape(len(h), -1) - self.constants.p_t
        load = cap if self.literal_congestion else cap * self.association(sel)
        congestion = load.sum(axis=1) - self.constants.c_t
        return np.concatenate([power, congestion], axis=1)

    def primal_argmax(self, h, lam) -> Action:
        """Closed-form carrier powers per candidate link, then best association per RRH.

        For a fixed link (i, j) the Lagrangian separates over carriers into
        w log(1 + k p) - lam_ij p with w = (1 - nu_j) omega_l T_f B/eps, whose
        maximiser on [0, P_s] is clip(w/lam_ij - 1/k, 0, P_s). Links that are
        not chosen get zero power in both congestion variants, since extra
        capacity there only adds to the congestion penalty.
        """
        h = self.check_csi(h)
        lam = np.asarray(lam, dtype=float)
        c = self.constants
        lam_p = lam[: self.n * self.m].reshape(self.n, self.m)[..., None]
        nu = lam[self.n * self.m :]
        kappa = h * c.snr_per_watt_gain  # (B, N, M, L)
        w = ((1.0 - nu)[:, None] * self.omega[None, :] * c.scale)[None]  # (1, M, L)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(lam_p > 0, w / lam_p - 1.0 / kappa, c.p_s)
        p = np.where(w > 0, np.clip(p, 0.0, c.p_s), 0.0)
        link_value = (w * np.log1p(kappa * p) - lam_p * p).sum(axis=3)  # (B, N, M)
        best = np.argmax(link_value, axis=2)
        best_value = np.take_along_axis(link_value, best[..., None], axis=2)[..., 0]
        # connecting is worth it only if it beats staying idle (value 0)
        sel = np.where(best_value > 0, best, NO_SELECTION).astype(np.int64)
        powers = np.where(self.association(sel)[..., None], p, 0.0)
        return Action(powers=powers, selections=sel)

    def is_feasible(self, a: Action) -> np.ndarray:
        sel = a.selections
        sel_ok = np.all((sel >= NO_SELECTION) & (sel < self.m), axis=1)
        return sel_ok & box_ok(a.powers, self.constants.p_s)

    def features(self, h) -> np.ndarray:
        h = self.check_csi(h)
        return np.log(h.reshape(len(h), 1, -1))

    def policy_layout(self) -> PolicyLayout:
        n_links = self.n * self.m * self.n_carriers
        return PolicyLayout.single_net(n_links, self.n, self.m + 1, n_links, self.constants.p_s)

    def power_active(self, categories) -> np.ndarray:
        cats = np.asarray(categories)
        active = (cats[..., None] == np.arange(self.m))[..., None]
        return np.broadcast_to(active, cats.shape + (self.m, self.n_carriers)).reshape(len(cats), -1)

    def assemble_action(self, categories, powers) -> Action:
        cats = np.asarray(categories, dtype=np.int64)
        active = self.power_active(cats)
        p = np.where(active, powers, 0.0).reshape(len(cats), self.n, self.m, self.n_carriers)
        sel = np.where(cats == self.m, NO_SELECTION, cats)
        return Action(powers=p, selections=sel)

    def describe(self) -> dict:
        return {
            "scenario": self.name,
            "n": self.n,
            "m": self.m,
            "l": self.n_carriers,
            "omega": self.omega.tolist(),
            "literal_congestion": self.literal_congestion,
        }
