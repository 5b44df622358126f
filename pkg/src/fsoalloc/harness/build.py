"""Turn a validated config into a scenario instance and its random streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fsoalloc.channel import TurbulenceParams, attenuation_array, circular_area
from fsoalloc.harness.config import ExperimentConfig
from fsoalloc.program import (
    FronthaulScenario,
    JointRelayScenario,
    LinkConstants,
    RelayScenario,
    RofsoConstants,
    RofsoScenario,
    Scenario,
)
from fsoalloc.program.fronthaul import pair_distances_km, rrh_positions
from fsoalloc.program.relay import link_mask, relay_distances_km, relay_positions


@dataclass
class Streams:
    """Independent generators derived from the experiment seed.

    ``instance`` draws priorities and geometry, ``solver`` everything a solver
    consumes while training, ``eval`` the held-out CSI and ``baseline`` the
    randomness of randomized evaluation policies. Solvers that share a seed
    therefore see the same instance and the same evaluation samples.
    """

    instance: np.random.Generator
    solver: np.random.Generator
    eval: np.random.Generator
    baseline: np.random.Generator
    oracle: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        children = np.random.SeedSequence(seed).spawn(5)
        return cls(*(np.random.Generator(np.random.PCG64(s)) for s in children))


def _attenuation(cfg: ExperimentConfig, distance_km) -> np.ndarray:
    ch = cfg.channel
    return attenuation_array(
        np.asarray(distance_km, dtype=float) * 1e3,
        ch.alpha_db_per_km,
        ch.wavelength_nm * 1e-9,
        circular_area(ch.diameter_tx_m),
        circular_area(ch.diameter_rx_m),
    )


def _link_constants(cfg: ExperimentConfig) -> LinkConstants:
    k = cfg.link
    return LinkConstants(
        frame_s=k.frame_s,
        bandwidth_hz=k.bandwidth_hz,
        duplex=k.duplex,
        power=k.power,
        sensitivity=k.sensitivity,
        noise_bandwidth_hz=k.noise_bandwidth_hz,
        p_t=k.p_t,
        p_s=k.p_s,
        c_t=k.c_t,
    )


def _rofso_constants(cfg: ExperimentConfig) -> RofsoConstants:
    k = cfg.rofso
    return RofsoConstants(
        omi=k.omi,
        photodiode_gain=k.photodiode_gain,
        responsivity=k.responsivity,
        rin_db_per_hz=k.rin_db_per_hz,
        noise_bandwidth_hz=k.noise_bandwidth_hz,
        excess_noise=k.excess_noise,
        temperature=k.temperature,
        load_resistance=k.load_resistance,
        p_t=k.p_t,
        p_s=k.p_s,
    )


def _relay_attenuation(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    sc, ch = cfg.scenario, cfg.channel
    pos = relay_positions(sc.n, sc.m, ch.span_km, ch.relay_spread_km, rng)
    dist = relay_distances_km(pos, ch.span_km)
    mask = link_mask(sc.n, sc.m)
    dist = np.maximum(np.where(mask, dist, 1.0), ch.min_distance_km)
    return np.where(mask, _attenuation(cfg, dist), 0.0)


def build_scenario(cfg: ExperimentConfig, rng: np.random.Generator) -> Scenario:
    """Draw the per-experiment quantities (priorities, positions) and build the instance."""
    sc = cfg.scenario
    turb = TurbulenceParams(sigma_x=cfg.channel.sigma_x)
    if sc.kind == "rofso":
        omega = rng.uniform(0.0, 1.0, size=sc.n)
        att = np.full(sc.n, _attenuation(cfg, cfg.channel.distance_km))
        return RofsoScenario(
            att, turb, omega=omega, constants=_rofso_constants(cfg), grid=cfg.rofso.grid, tol=cfg.rofso.tol
        )
    if sc.kind == "relay":
        return RelayScenario(_relay_attenuation(cfg, rng), turb, constants=_link_constants(cfg))
    if sc.kind == "joint":
        omega = rng.uniform(0.0, 1.0, size=sc.l)
        att = np.repeat(_relay_attenuation(cfg, rng)[..., None], sc.l, axis=-1)
        return JointRelayScenario(
            att,
            turb,
            constants=_link_constants(cfg),
            omega=omega,
            grid=cfg.link.grid,
            refine=cfg.link.refine,
        )
    if sc.kind == "fronthaul":
        omega = rng.uniform(0.0, 1.0, size=sc.l)
        rrh = rrh_positions(sc.n, cfg.channel.rrh_half_width_km, rng)
        an = rrh_positions(sc.m, cfg.channel.an_half_width_km, rng)
        dist = pair_distances_km(rrh, an, cfg.channel.min_distance_km)
        att = np.repeat(_attenuation(cfg, dist)[..., None], sc.l, axis=-1)
        return FronthaulScenario(
            att,
            turb,
            constants=_link_constants(cfg),
            omega=omega,
            literal_congestion=sc.literal_congestion,
        )
    raise ValueError(f"unknown scenario kind {sc.kind!r}")
