from dataclasses import replace

from periodic_control.linear_solvers.dense_oracle import relative_deviation
from periodic_control.ocp_solver import solve_ocp
from periodic_control.sampled_solver import (
  SampledSolver,
  hold_control,
  reduced_apply_sampled,
  solve_socp,
)
from periodic_control.spectral_core import Domain1D

import numpy as np
import pytest


def test_shapes_and_tag(smallConfig):
  solution = solve_socp(smallConfig, 4, logging=False)
  assert solution.holds.shape == (4, 4)
  assert solution.control(smallConfig.grid.with_subdivision(4)).shape == (64, 4)
  assert SampledSolver(smallConfig, 4, logging=False).tag() == "sampled n=4"


def test_needs_enough_steps_per_interval(smallConfig):
  with pytest.raises(ValueError):
    SampledSolver(smallConfig, 16)


def test_matches_dense_oracle(smallConfig):
  solver = SampledSolver(smallConfig, 4, logging=False)
  assert np.prod(solver.unknown_shape()) == 16
  deviation = relative_deviation(solver.solve().holds, solver.dense_oracle_solve())
  assert deviation <= 1e-8


def test_linear_in_target(smallConfig):
  base = solve_socp(smallConfig, 4, logging=False)
  doubled = solve_socp(replace(smallConfig, target=2 * smallConfig.target), 4, logging=False)
  np.testing.assert_allclose(doubled.holds, 2 * base.holds, rtol=1e-7, atol=1e-10)
  assert doubled.cost == pytest.approx(4 * base.cost, rel=1e-7)


def test_reduced_map_symmetric_and_coercive(smallConfig, rng):
  solver = SampledSolver(smallConfig, 8, logging=False)
  for _ in range(20):
    u, v = rng.standard_normal((2,) + solver.unknown_shape())
    Au, Av = solver.reduced_apply(u), solver.reduced_apply(v)
    assert solver.inner(Au, v) == pytest.approx(solver.inner(u, Av), rel=1e-9)
    assert solver.inner(Au, u) >= solver.inner(u, u) * (1 - 1e-12)


def test_optimality_and_periodicity(smallConfig):
  solution = solve_socp(smallConfig, 8, logging=False)
  assert solution.residual <= smallConfig.cgTol * (1 + smallConfig.targetNorm)
  assert solution.periodicityResidual <= 1e-10


@pytest.mark.parametrize("n", [2, 4, 8])
def test_cost_sandwich(smallConfig, n):
  continuous = solve_ocp(smallConfig, logging=False)
  sampled = solve_socp(smallConfig, n, logging=False)
  slack = 1e-12 * max(1.0, continuous.cost)
  assert continuous.cost - slack <= sampled.cost <= 0.5 * smallConfig.targetNorm**2


def test_refinement_never_increases_cost(smallConfig):
  # Holds on (tau_{i-1}, tau_i] for n = 4 are also admissible for n = 8.
  coarse = solve_socp(smallConfig, 4, logging=False)
  fine = solve_socp(smallConfig, 8, logging=False)
  assert fine.cost <= coarse.cost + 1e-12


def test_one_hold_per_mode_when_n_is_one(configFactory):
  cfg = configFactory(numModes=2, numSteps=16, target="mode1", domain=Domain1D(0.0, 1.0, 1.0))
  solution = solve_socp(cfg, 1, logging=False)
  lam = np.pi**2
  assert solution.holds[0, 0] == pytest.approx(lam / (1 + lam**2), abs=1e-8)
  assert solution.holds[0, 1] == pytest.approx(0.0, abs=1e-12)


def test_zero_target(configFactory):
  solution = solve_socp(configFactory(target="zero"), 4, logging=False)
  assert solution.cost == 0.0
  assert solution.iterations == 0


def test_hold_control_repeats_values(smallConfig, rng):
  grid = smallConfig.grid.with_subdivision(4)
  holds = rng.standard_normal((4, 4))
  control = hold_control(holds, grid)
  np.testing.assert_array_equal(control[16:32], np.tile(holds[1], (16, 1)))
  with pytest.raises(ValueError):
    hold_control(holds[:3], grid)


def test_module_level_reduced_apply(smallConfig, rng):
  holds = rng.standard_normal((4, 4))
  np.testing.assert_allclose(
    reduced_apply_sampled(holds, smallConfig, 4),
    SampledSolver(smallConfig, 4, logging=False).reduced_apply(holds),
  )
