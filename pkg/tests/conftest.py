from dataclasses import replace

import pytest

from heps_design.domain import ConverterSpec
from heps_design.pso import SwarmConfig


@pytest.fixture
def spec():
    """The 1 kW reference converter: 200 V input, 167 uH, 20 kHz."""
    return ConverterSpec()


@pytest.fixture
def sign_spec(spec):
    return replace(spec, loss_params=replace(spec.loss_params, zvs_mode="sign"))


@pytest.fixture
def quick_swarm():
    return SwarmConfig(max_iter=15)
