from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from d3sr.dictionary import DictionaryGrid, build_dictionary
from d3sr.geometry import RadarConfig

settings.register_profile("default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


@pytest.fixture(scope="session")
def default_cfg():
    return RadarConfig()


@pytest.fixture(scope="session")
def crab_cfg():
    return RadarConfig(crab_angle=np.deg2rad(45.0))


@pytest.fixture(scope="session")
def small_cfg():
    """6x6 array with the full-size geometry, for fast pipeline checks."""
    return replace(RadarConfig(), num_channels=6, num_pulses=6)


@pytest.fixture(scope="session")
def small_dictionary(small_cfg):
    return build_dictionary(small_cfg, DictionaryGrid.for_radar(small_cfg, 4, 4))


@pytest.fixture(scope="session")
def default_dictionary(default_cfg):
    return build_dictionary(default_cfg, DictionaryGrid.for_radar(default_cfg, 6, 6))



# --- acceptance reporting -----------------------------------------------------

ACCEPTANCE_LINES: list = []


@pytest.fixture()
def acceptance():
    """``report(number, passed, detail)`` records one PASS/FAIL line for the terminal summary."""

    def report(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
