from periodic_control.heat_solver import TimeGrid
from periodic_control.process_data import build_target
from periodic_control.solver import OCPConfig
from periodic_control.spectral_core import Domain1D

import numpy as np
import pytest


def make_config(numModes=4, numSteps=64, target="default", domain=None, seed=0, **kwargs):
  domain = Domain1D() if domain is None else domain
  grid = TimeGrid(1.0, numSteps)
  return OCPConfig(
    domain=domain,
    grid=grid,
    numModes=numModes,
    target=build_target(target, grid, numModes, seed),
    **kwargs,
  )


@pytest.fixture
def domain():
  return Domain1D(0.3, 0.8, 1.0)


@pytest.fixture
def fullDomain():
  return Domain1D(0.0, 1.0, 1.0)


@pytest.fixture
def smallConfig():
  return make_config()


@pytest.fixture
def rng():
  return np.random.default_rng(1234)


@pytest.fixture
def configFactory():
  return make_config
