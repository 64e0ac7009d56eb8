import numpy as np
import pytest

from eflash_nmc import SimConfig


@pytest.fixture
def quiet_config():
    """Zero-noise desk config: deterministic programming, exact round trips."""
    return SimConfig(banks=1, rows_per_bank=8, erased_sigma_mv=0.0, step_sigma_mv=0.0, seed=42)


@pytest.fixture
def quiet_macro(quiet_config):
    macro = quiet_config.build_macro()
    macro.power_up()
    return macro


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
