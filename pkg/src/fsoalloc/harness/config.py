"""Experiment configuration: TOML presets, weather overlays and validation."""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

SOLVERS = ("sdg", "pddl", "waterfill", "equal_power", "random_power", "greedy", "greedy_lowest", "random")
SOLVERS_FOR = {
    "rofso": {"sdg", "pddl", "waterfill", "equal_power", "random_power"},
    "relay": {"sdg", "pddl", "greedy", "greedy_lowest", "random"},
    "joint": {"sdg", "pddl", "greedy", "greedy_lowest", "random", "random_power"},
    "fronthaul": {"sdg", "pddl", "random"},
}


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScenarioSection(Strict):
    kind: Literal["rofso", "relay", "joint", "fronthaul"]
    n: int = Field(ge=1, description="channels (rofso), hops (relay/joint) or RRHs (fronthaul)")
    m: int = Field(1, ge=1, description="relays per hop or access nodes")
    l: int = Field(1, ge=1, description="carriers per link")
    literal_congestion: bool = False


class ChannelSection(Strict):
    alpha_db_per_km: float = Field(0.43, ge=0)
    wavelength_nm: float = Field(1550.0, gt=0)
    diameter_tx_m: float = Field(0.015, gt=0)
    diameter_rx_m: float = Field(0.05, gt=0)
    sigma_x: float = Field(0.2, ge=0)
    distance_km: float = Field(1.0, gt=0)
    span_km: float = Field(2.0, gt=0)
    relay_spread_km: float = Field(0.5, ge=0)
    rrh_half_width_km: float = Field(5.0, gt=0)
    an_half_width_km: float = Field(1.0, gt=0)
    min_distance_km: float = Field(0.1, gt=0)


class RofsoSection(Strict):
    omi: float = Field(0.15, gt=0)
    photodiode_gain: float = Field(5.0, gt=0)
    responsivity: float = Field(0.75, gt=0)
    rin_db_per_hz: float = -140.0
    noise_bandwidth_hz: float = Field(1.0, gt=0)
    excess_noise: float = Field(0.5, gt=0)
    temperature: float = Field(300.0, gt=0)
    load_resistance: float = Field(50.0, gt=0)
    p_t: float = Field(1.5, gt=0)
    p_s: float = Field(0.3, gt=0)
    grid: int = Field(32, ge=3)
    tol: float = Field(1e-6, gt=0)


class LinkSection(Strict):
    frame_s: float = Field(1e-8, gt=0)
    bandwidth_hz: float = Field(5e8, gt=0)
    duplex: Literal[1, 2] = 1
    power: float = Field(0.3, gt=0)
    sensitivity: float = Field(0.75, gt=0)
    noise_bandwidth_hz: float | None = Field(None, gt=0)
    p_t: float = Field(1.5, gt=0)
    p_s: float = Field(0.6, gt=0)
    c_t: float = Field(50.0, gt=0)
    grid: int = Field(64, ge=3)
    refine: int = Field(8, ge=1)


class SdgSection(Strict):
    iterations: int = Field(5000, ge=1)
    eta0: float = Field(0.5, gt=0)
    gamma: float = Field(0.999, gt=0, le=1)
    batch: int = Field(64, ge=1)
    window: int = Field(500, ge=1)
    eta_scale: dict[str, float] = Field(default_factory=dict)


class PddlSection(Strict):
    iterations: int = Field(5000, ge=1)
    batch: int = Field(64, ge=1)
    lr: float = Field(1e-3, ge=0)
    eta0: float = Field(0.5, gt=0)
    gamma: float = Field(0.999, gt=0, le=1)
    use_baseline: bool = True
    eval_every: int = Field(250, ge=0)
    eval_batch: int = Field(512, ge=1)
    window: int = Field(500, ge=1)
    calibration_batch: int = Field(4096, ge=2)
    checkpoint_every: int = Field(0, ge=0)
    eta_scale: dict[str, float] = Field(default_factory=dict)
    execution: Literal["deterministic", "stochastic"] = "deterministic"


class BaselineSection(Strict):
    iterations: int = Field(500, ge=1)
    batch: int = Field(64, ge=1)
    window: int = Field(500, ge=1)


class EvalSection(Strict):
    samples: int = Field(10000, ge=1)
    latency_calls: int = Field(200, ge=1)


class OracleSection(Strict):
    n_states: int = Field(8, ge=1)
    grid: int = Field(200, ge=2)
    lambda_tol: float = Field(1e-7, gt=0)


class ExperimentConfig(Strict):
    name: str = "custom"
    seed: int = Field(ge=0)
    solver: Literal[SOLVERS] = "sdg"  # type: ignore[valid-type]
    scenario: ScenarioSection
    channel: ChannelSection = ChannelSection()
    rofso: RofsoSection = RofsoSection()
    link: LinkSection = LinkSection()
    sdg: SdgSection = SdgSection()
    pddl: PddlSection = PddlSection()
    baseline: BaselineSection = BaselineSection()
    eval: EvalSection = EvalSection()
    oracle: OracleSection = OracleSection()

    @model_validator(mode="after")
    def _cross_checks(self) -> "ExperimentConfig":
        problems = []
        kind = self.scenario.kind
        if self.solver not in SOLVERS_FOR[kind]:
            problems.append(f"solver {self.solver!r} does not apply to scenario {kind!r}")
        if kind == "rofso" and (self.scenario.m != 1 or self.scenario.l != 1):
            problems.append("rofso uses n channels only; leave m and l at 1")
        if kind == "relay" and self.scenario.l != 1:
            problems.append("relay selection has a single carrier; leave l at 1")
        if kind == "joint" and self.scenario.n != 1:
            problems.append("joint relay/power allocation supports n = 1 hop")
        if self.rofso.p_s > self.rofso.p_t and kind == "rofso":
            problems.append("rofso.p_s must not exceed rofso.p_t")
        if problems:
            raise ValueError("; ".join(problems))
        return self


class ConfigError(ValueError):
    pass


PRESET_PACKAGE = "fsoalloc.harness.presets"


def _preset_dir():
    return resources.files(PRESET_PACKAGE)


def list_presets() -> tuple[list[str], list[str]]:
    root = _preset_dir()
    presets = sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))
    overlays = sorted(p.name[:-5] for p in root.joinpath("overlays").iterdir() if p.name.endswith(".toml"))
    return presets, overlays


def _read_toml(path_or_name: str, overlay: bool = False) -> dict:
    path = Path(path_or_name)
    if path.suffix == ".toml" and path.exists():
        return tomllib.loads(path.read_text())
    folder = _preset_dir().joinpath("overlays") if overlay else _preset_dir()
    res = folder.joinpath(f"{path_or_name}.toml")
    if not res.is_file():
        presets, overlays = list_presets()
        known = overlays if overlay else presets
        kind = "overlay" if overlay else "preset"
        raise ConfigError(f"unknown {kind} {path_or_name!r}; available: {', '.join(known)}")
    return tomllib.loads(res.read_text())


def deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "invalid configuration:\n" + "\n".join(lines)


def load_config(spec: str, overrides: dict | None = None) -> ExperimentConfig:
    """Load ``preset[+overlay...]`` or ``file.toml[+overlay...]`` and apply overrides."""
    head, *overlays = spec.split("+")
    data = _read_toml(head)
    for name in overlays:
        data = deep_merge(data, _read_toml(name, overlay=True))
    if overrides:
        data = deep_merge(data, overrides)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(format_errors(err)) from None
