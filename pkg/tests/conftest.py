import math

import numpy as np
import pytest

from direg.simulate import AnisoSimConfig, simulate_anisotropic_dataset


@pytest.fixture(scope="session")
def small_noisy():
    cfg = AnisoSimConfig(alpha=math.pi / 3, n_surfaces=40, side_count=31, noise_sd=0.1, seed=11)
    return simulate_anisotropic_dataset(cfg, return_clean=True)


@pytest.fixture(scope="session")
def oracle_data():
    """Noiseless sum of fBms, N=500 on the 101 grid, exact stationary increments."""
    cfg = AnisoSimConfig(alpha=math.pi / 3, h1=0.8, h2=0.5, n_surfaces=500, side_count=101,
                         noise_sd=0.0, seed=77, extension="shift")
    return simulate_anisotropic_dataset(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
