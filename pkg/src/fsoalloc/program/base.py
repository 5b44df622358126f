from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from fsoalloc.channel import TurbulenceParams, sample_csi

ELECTRON_CHARGE = 1.602176634e-19
BOLTZMANN = 1.380649e-23
NO_SELECTION = -1


class ShapeError(ValueError):
    pass


@dataclass
class Action:
    """A batch of resource allocations.

    ``powers`` are Watts with a leading batch axis; ``selections`` hold one
    chosen index per hop/RRH (``NO_SELECTION`` where a scenario allows it).
    Either part may be absent for scenarios that do not use it.
    """

    powers: np.ndarray | None = None
    selections: np.ndarray | None = None

    def __len__(self) -> int:
        part = self.powers if self.powers is not None else self.selections
        return 0 if part is None else len(part)

    def take(self, idx) -> "Action":
        return Action(
            None if self.powers is None else self.powers[idx],
            None if self.selections is None else self.selections[idx],
        )


@dataclass(frozen=True)
class RofsoConstants:
    omi: float = 0.15
    photodiode_gain: float = 5.0
    responsivity: float = 0.75
    rin_db_per_hz: float = -140.0
    noise_bandwidth_hz: float = 1.0
    charge: float = ELECTRON_CHARGE
    excess_noise: float = 0.5
    boltzmann: float = BOLTZMANN
    temperature: float = 300.0
    load_resistance: float = 50.0
    p_t: float = 1.5
    p_s: float = 0.3

    def __post_init__(self) -> None:
        bad = [f.name for f in dataclasses.fields(self) if f.name != "rin_db_per_hz" and not getattr(self, f.name) > 0]
        if bad:
            raise ValueError(f"constants must be > 0: {', '.join(bad)}")

    @property
    def rin(self) -> float:
        """Relative intensity noise, linear, integrated over the noise bandwidth."""
        return 10.0 ** (self.rin_db_per_hz / 10.0) * self.noise_bandwidth_hz


@dataclass(frozen=True)
class LinkConstants:
    """Constants of the relay and fronthaul capacity formulas."""

    frame_s: float = 1e-8
    bandwidth_hz: float = 5e8
    duplex: int = 1
    power: float = 0.3
    sensitivity: float = 0.75
    charge: float = ELECTRON_CHARGE
    noise_bandwidth_hz: float | None = None
    p_t: float = 1.5
    p_s: float = 0.6
    c_t: float = 50.0

    def __post_init__(self) -> None:
        if self.duplex not in (1, 2):
            raise ValueError(f"duplex must be 1 (full) or 2 (half), got {self.duplex}")
        bad = [
            f.name
            for f in dataclasses.fields(self)
            if getattr(self, f.name) is not None and not getattr(self, f.name) > 0
        ]
        if bad:
            raise ValueError(f"constants must be > 0: {', '.join(bad)}")

    @property
    def delta_f(self) -> float:
        return self.bandwidth_hz if self.noise_bandwidth_hz is None else self.noise_bandwidth_hz

    @property
    def scale(self) -> float:
        """T_f B / epsilon."""
        return self.frame_s * self.bandwidth_hz / self.duplex

    @property
    def snr_per_watt_gain(self) -> float:
        """R / (e Delta f): converts p*h into the per-segment SNR term."""
        return self.sensitivity / (self.charge * self.delta_f)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Common surface of the four FSO resource-allocation programs.

    Subclasses fill in objective, constraints, the per-sample Lagrangian
    maximiser and the policy layout. Instances are immutable; CSI is drawn
    either from the fading model or, when ``csi_states`` is set, uniformly
    from a fixed finite set of channel states.
    """

    link_attenuation: np.ndarray
    turbulence: TurbulenceParams
    csi_states: np.ndarray | None = field(default=None, kw_only=True)

    name = "scenario"
    hidden_sizes = ()

    @property
    def csi_shape(self) -> tuple[int, ...]:
        return tuple(self.link_attenuation.shape)

    @property
    def n_constraints(self) -> int:
        return len(self.constraint_names)

    @property
    def constraint_names(self) -> list[str]:
        return []

    @property
    def constraint_groups(self) -> list[str]:
        return []

    def with_csi_states(self, states: np.ndarray) -> "Scenario":
        states = np.asarray(states, dtype=float)
        if states.shape[1:] != self.csi_shape:
            raise ShapeError(f"states must be (K, {self.csi_shape}), got {states.shape}")
        return dataclasses.replace(self, csi_states=states)

    def sample_csi(self, rng: np.random.Generator, batch: int) -> np.ndarray:
        if self.csi_states is not None:
            return self.csi_states[rng.integers(len(self.csi_states), size=batch)]
        return sample_csi(self.link_attenuation, self.turbulence, rng, batch)

    def check_csi(self, h: np.ndarray) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        if h.shape[1:] != self.csi_shape:
            raise ShapeError(f"CSI batch must be (B, {self.csi_shape}), got {h.shape}")
        return h

    # evaluators -----------------------------------------------------------

    def objective(self, h: np.ndarray, a: Action) -> np.ndarray:
        raise NotImplementedError

    def constraints(self, h: np.ndarray, a: Action) -> np.ndarray:
        return np.zeros((len(h), 0))

    def lagrangian(self, h: np.ndarray, a: Action, lam: np.ndarray) -> np.ndarray:
        value = self.objective(h, a)
        if self.n_constraints:
            value = value - self.constraints(h, a) @ np.asarray(lam, dtype=float)
        return value

    def primal_argmax(self, h: np.ndarray, lam: np.ndarray) -> Action:
        raise NotImplementedError

    def is_feasible(self, a: Action) -> np.ndarray:
        raise NotImplementedError

    # policy plumbing --------------------------------------------------------

    def features(self, h: np.ndarray) -> np.ndarray:
        """Network inputs (B, G, n0): log-gains of the usable links."""
        raise NotImplementedError

    def policy_layout(self):
        raise NotImplementedError

    def power_active(self, categories: np.ndarray) -> np.ndarray:
        """Which power coordinates take effect given the sampled categories."""
        raise NotImplementedError

    def assemble_action(self, categories: np.ndarray, powers: np.ndarray) -> Action:
        """Map policy draws (category indices, flat powers) onto an Action."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"scenario": self.name}


def box_ok(powers: np.ndarray, p_s: float) -> np.ndarray:
    axes = tuple(range(1, powers.ndim))
    return np.all((powers >= 0) & (powers <= p_s) & np.isfinite(powers), axis=axes)
