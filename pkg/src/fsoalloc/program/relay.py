"""Multi-hop relay networks: pure relay selection and joint relay/power allocation.

CSI is stored per segment: ``h[i, a, b]`` is the gain from node ``a`` of layer
``i`` to node ``b`` of layer ``i + 1``. Layer 0 is the transmitter and layer
N + 1 the receiver, each a single node at index 0; entries that do not
correspond to a physical link are zero and never read.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from fsoalloc.policy import PolicyLayout
from fsoalloc.program.base import Action, LinkConstants, Scenario, ShapeError, box_ok
from fsoalloc.program.search import grid_refine_max_2d


def capacity_relay_link(gains, powers, k: LinkConstants) -> np.ndarray:
    """Capacity of one amplify-and-forward path.

    ``gains`` and ``powers`` carry the N + 1 segments on their last axis
    (``powers`` may be a scalar). A segment with zero received power drives
    the capacity to its limit value 0.
    """
    s = np.asarray(powers, dtype=float) * np.asarray(gains, dtype=float) * k.snr_per_watt_gain
    with np.errstate(divide="ignore", over="ignore"):
        excess = np.expm1(np.sum(np.log1p(1.0 / s), axis=-1))
        return k.scale * np.log1p(1.0 / excess)


def two_segment_capacity(a, b, scale: float) -> np.ndarray:
    """Closed form of :func:`capacity_relay_link` for one relay.

    ``a`` and ``b`` are the per-segment SNR terms p*h*R/(e*df);
    1/((1+1/a)(1+1/b)-1) = ab/(a+b+1).
    """
    return scale * np.log1p(a * b / (a + b + 1.0))


def link_mask(n_hops: int, m: int) -> np.ndarray:
    mask = np.zeros((n_hops + 1, m, m), dtype=bool)
    mask[0, 0, :] = True
    mask[1:n_hops] = True
    mask[n_hops, :, 0] = True
    return mask


def relay_positions(n_hops: int, m: int, span_km: float, spread_km: float, rng) -> np.ndarray:
    """Relay coordinates (N, M, 2) in km between a transmitter at the origin and
    a receiver at (span, 0); each hop sits on its own vertical line with relays
    scattered laterally."""
    x = span_km * np.arange(1, n_hops + 1) / (n_hops + 1)
    pos = np.empty((n_hops, m, 2))
    pos[..., 0] = x[:, None] + rng.uniform(-0.2, 0.2, size=(n_hops, m)) * span_km / (n_hops + 1)
    pos[..., 1] = rng.uniform(-spread_km, spread_km, size=(n_hops, m))
    return pos


def relay_distances_km(positions: np.ndarray, span_km: float) -> np.ndarray:
    """Segment lengths (N+1, M, M) in km; non-links are NaN."""
    n_hops, m, _ = positions.shape
    tx = np.zeros((1, m, 2))
    tx[0, 1:] = np.nan
    rx = np.full((1, m, 2), np.nan)
    rx[0, 0] = (span_km, 0.0)
    layers = np.concatenate([tx, positions, rx])
    diff = layers[:-1, :, None, :] - layers[1:, None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    dist[~link_mask(n_hops, m)] = np.nan
    return dist


def all_paths(n_hops: int, m: int) -> np.ndarray:
    return np.array(list(itertools.product(range(m), repeat=n_hops)), dtype=np.int64).reshape(-1, n_hops)


def path_endpoints(selections: np.ndarray):
    """(from, to) node index per segment for paths shaped (..., N)."""
    sel = np.asarray(selections)
    zero = np.zeros(sel.shape[:-1] + (1,), dtype=sel.dtype)
    return np.concatenate([zero, sel], axis=-1), np.concatenate([sel, zero], axis=-1)


@dataclass(frozen=True, eq=False)
class RelayScenario(Scenario):
    """Relay selection with fixed per-segment power P; no stochastic constraint."""

    constants: LinkConstants = field(default_factory=LinkConstants)

    name = "relay"
    hidden_sizes = (200, 100)

    def __post_init__(self) -> None:
        att = self.link_attenuation
        if att.ndim != self.gain_ndim or att.shape[1] != att.shape[2]:
            raise ShapeError(f"link attenuation must be (N+1, M, M{', L' if self.gain_ndim == 4 else ''})")
        if att.shape[0] < 2:
            raise ShapeError("a relay network needs at least one hop")
        if np.any(~(att[link_mask(self.n_hops, self.m)] > 0)):
            raise ValueError("every physical link needs a positive attenuation")

    gain_ndim = 3

    @property
    def n_hops(self) -> int:
        return self.link_attenuation.shape[0] - 1

    @property
    def m(self) -> int:
        return self.link_attenuation.shape[1]

    def _selections(self, a: Action, batch: int) -> np.ndarray:
        sel = a.selections
        if sel is None or sel.shape != (batch, self.n_hops):
            raise ShapeError(f"selections must be ({batch}, {self.n_hops})")
        return sel

    def path_gains(self, h: np.ndarray, selections: np.ndarray) -> np.ndarray:
        """Gains along each selected path: (B, N+1) or (B, N+1, L)."""
        src, dst = path_endpoints(selections)
        seg = np.arange(self.n_hops + 1)
        b = np.arange(len(h))[:, None]
        return h[b, seg, src, dst]

    def objective(self, h, a: Action) -> np.ndarray:
        h = self.check_csi(h)
        g = self.path_gains(h, self._selections(a, len(h)))
        return capacity_relay_link(g, self.constants.power, self.constants)

    def primal_argmax(self, h, lam=()) -> Action:
        """Exhaustive search over all M^N paths."""
        h = self.check_csi(h)
        paths = all_paths(self.n_hops, self.m)
        src, dst = path_endpoints(paths)
        seg = np.arange(self.n_hops + 1)
        g = h[:, seg, src, dst]  # (B, P, N+1)
        cap = capacity_relay_link(g, self.constants.power, self.constants)
        return Action(selections=paths[np.argmax(cap, axis=1)])

    def is_feasible(self, a: Action) -> np.ndarray:
        sel = a.selections
        return (sel.shape[1:] == (self.n_hops,)) & np.all((sel >= 0) & (sel < self.m), axis=1)

    def _valid_mask(self) -> np.ndarray:
        return link_mask(self.n_hops, self.m)

    def features(self, h) -> np.ndarray:
        h = self.check_csi(h)
        return np.log(h[:, self._valid_mask()].reshape(len(h), 1, -1))

    def policy_layout(self) -> PolicyLayout:
        n_in = int(self._valid_mask().sum()) * (self.link_attenuation.shape[-1] if self.gain_ndim == 4 else 1)
        return PolicyLayout.single_net(n_in, self.n_hops, self.m, 0, 1.0)

    def power_active(self, categories) -> np.ndarray:
        return np.zeros((len(categories), 0), dtype=bool)

    def assemble_action(self, categories, powers) -> Action:
        return Action(selections=np.asarray(categories, dtype=np.int64))

    def describe(self) -> dict:
        return {"scenario": self.name, "n_hops": self.n_hops, "m": self.m}


@dataclass(frozen=True, eq=False)
class JointRelayScenario(RelayScenario):
    """Relay selection plus per-carrier powers at the transmitter and selected relays.

    Powers are indexed by node: 0 is the transmitter and ``1 + (i-1)*M + j``
    relay j of hop i. Each node has a total power budget P_t in expectation.
    """

    omega: np.ndarray = None
    grid: int = 64
    refine: int = 8
    chunk: int = 16

    name = "joint"
    gain_ndim = 4

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.omega is None or self.omega.shape != (self.n_carriers,):
            raise ShapeError("omega must have one weight per carrier")
        if self.n_hops != 1:
            raise ValueError("joint relay/power allocation supports a single relay hop")

    @property
    def n_carriers(self) -> int:
        return self.link_attenuation.shape[-1]

    @property
    def n_nodes(self) -> int:
        return 1 + self.n_hops * self.m

    @property
    def p_s(self) -> float:
        return self.constants.p_s

    @property
    def constraint_names(self) -> list[str]:
        return ["power_tx"] + [f"power_h{i + 1}r{j + 1}" for i in range(self.n_hops) for j in range(self.m)]

    @property
    def constraint_groups(self) -> list[str]:
        return ["power"] * self.n_nodes

    def _powers(self, a: Action, batch: int) -> np.ndarray:
        shape = (batch, self.n_nodes, self.n_carriers)
        if a.powers is None or a.powers.shape != shape:
            raise ShapeError(f"powers must be {shape}")
        return a.powers

    def path_nodes(self, selections: np.ndarray) -> np.ndarray:
        """Node index of the transmitting end of every segment, (B, N+1)."""
        hops = np.arange(self.n_hops)
        relay_nodes = 1 + hops * self.m + selections
        return np.concatenate([np.zeros((len(selections), 1), dtype=np.int64), relay_nodes], axis=1)

    def carrier_capacities(self, h, a: Action) -> np.ndarray:
        h = self.check_csi(h)
        sel = self._selections(a, len(h))
        powers = self._powers(a, len(h))
        g = self.path_gains(h, sel)  # (B, N+1, L)
        p = powers[np.arange(len(h))[:, None], self.path_nodes(sel)]  # (B, N+1, L)
        return capacity_relay_link(np.swapaxes(g, 1, 2), np.swapaxes(p, 1, 2), self.constants)

    def objective(self, h, a: Action) -> np.ndarray:
        return self.carrier_capacities(h, a) @ self.omega

    def constraints(self, h, a: Action) -> np.ndarray:
        h = self.check_csi(h)
        return self._powers(a, len(h)).sum(axis=2) - self.constants.p_t

    def primal_argmax(self, h, lam) -> Action:
        """Enumerate relays; per carrier, 2-D grid+refinement over (tx, relay) powers."""
        h = self.check_csi(h)
        lam = np.asarray(lam, dtype=float)
        k = self.constants
        kappa = k.snr_per_watt_gain
        b_total, m, n_l = len(h), self.m, self.n_carriers
        p_tx = np.empty((b_total, m, n_l))
        p_rl = np.empty((b_total, m, n_l))
        val = np.empty((b_total, m, n_l))
        w = self.omega[None, None, :, None, None] * k.scale
        lam_rl = lam[1:][None, :, None, None, None]
        for start in range(0, b_total, self.chunk):
            hc = h[start : start + self.chunk]
            g0 = hc[:, 0, 0, :, :][..., None, None] * kappa  # (b, M, L, 1, 1)
            g1 = hc[:, 1, :, 0, :][..., None, None] * kappa

            def lagr(x, y):
                a = x * g0
                b = y * g1
                return w * np.log1p(a * b / (a + b + 1.0)) - lam[0] * x - lam_rl * y

            x, y, v = grid_refine_max_2d(lagr, 0.0, k.p_s, self.grid, self.refine)
            p_tx[start : start + self.chunk] = x
            p_rl[start : start + self.chunk] = y
            val[start : start + self.chunk] = v
        j = np.argmax(val.sum(axis=2), axis=1)
        rows = np.arange(b_total)
        powers = np.zeros((b_total, self.n_nodes, n_l))
        powers[:, 0] = p_tx[rows, j]
        powers[rows, 1 + j] = p_rl[rows, j]
        return Action(powers=powers, selections=j[:, None])

    def is_feasible(self, a: Action) -> np.ndarray:
        ok_sel = super().is_feasible(a)
        shape_ok = a.powers.shape[1:] == (self.n_nodes, self.n_carriers)
        return ok_sel & shape_ok & box_ok(a.powers, self.constants.p_s)

    def _valid_mask(self) -> np.ndarray:
        return link_mask(self.n_hops, self.m)

    def features(self, h) -> np.ndarray:
        h = self.check_csi(h)
        return np.log(h[:, self._valid_mask()].reshape(len(h), 1, -1))

    def policy_layout(self) -> PolicyLayout:
        n_in = int(self._valid_mask().sum()) * self.n_carriers
        return PolicyLayout.single_net(n_in, self.n_hops, self.m, self.n_nodes * self.n_carriers, self.constants.p_s)

    def power_active(self, categories) -> np.ndarray:
        cats = np.asarray(categories)
        active = np.zeros((len(cats), self.n_nodes), dtype=bool)
        active[:, 0] = True
        active[np.arange(len(cats))[:, None], self.path_nodes(cats)[:, 1:]] = True
        return np.repeat(active, self.n_carriers, axis=1)

    def assemble_action(self, categories, powers) -> Action:
        cats = np.asarray(categories, dtype=np.int64)
        active = self.power_active(cats)
        p = np.where(active, powers, 0.0).reshape(len(cats), self.n_nodes, self.n_carriers)
        return Action(powers=p, selections=cats)

    def describe(self) -> dict:
        return {**super().describe(), "l": self.n_carriers, "omega": self.omega.tolist()}
