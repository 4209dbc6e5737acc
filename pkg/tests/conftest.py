import logging
import os

import pytest

from cfsim.framework.scenario import SystemConfig


@pytest.fixture(autouse=True)
def enable_logging():
    # CommandLine.verbose() disables logging process-wide
    yield
    logging.disable(logging.NOTSET)


@pytest.fixture
def scenarios_cfg() -> str:
    return os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs", "scenarios.cfg")


@pytest.fixture
def small_config() -> SystemConfig:
    return SystemConfig(num_aps=8, num_users=3, num_drops=3, num_channel_samples=300, rng_seed=5,
                        power_control="uniform").validate()
