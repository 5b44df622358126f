from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fsoalloc.harness.build import Streams, build_scenario
from fsoalloc.harness.config import load_config

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def scenario_for(preset: str, seed: int = 0, **overrides):
    cfg = load_config(preset, {"seed": seed, **overrides})
    return build_scenario(cfg, Streams.from_seed(seed).instance)


@pytest.fixture(scope="session")
def rofso10():
    return scenario_for("rofso10")


@pytest.fixture(scope="session")
def relay2x5():
    return scenario_for("relay2x5")


@pytest.fixture(scope="session")
def joint():
    return scenario_for("joint1x5x5")


@pytest.fixture(scope="session")
def fronthaul():
    return scenario_for("fronthaul5x2x5")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
