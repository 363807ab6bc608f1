from periodic_control.constants import ConfigError, ConvergenceError, ErrorRecord
from periodic_control.convergence import (
  fit_order,
  lp_time_norm,
  metric_value,
  minimum_slope,
  run_convergence_study,
  study_violations,
  sup_gradient_norm,
  theoretical_rates,
)
from periodic_control.enums import Metrics, ProblemTag
from periodic_control.heat_solver import BrokenTrajectory, TimeGrid, Trajectory
from periodic_control.impulse_solver import embed_impulse_control, solve_iocp
from periodic_control.ocp_solver import solve_ocp
from periodic_control.spectral_core import Domain1D

import numpy as np
import pytest


class TestFitOrder:
  def test_exact_power_law(self):
    hs = [2.0**-k for k in range(2, 7)]
    fit = fit_order([(h, 3.0 * h**0.5) for h in hs], logging=False)
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-10)
    assert fit.numPoints == 5

  def test_zero_errors_excluded_with_warning(self, capsys):
    points = [(0.5, 0.0), (0.25, 0.25), (0.125, 0.125), (0.0625, 0.0625)]
    fit = fit_order(points, label="toy")
    assert fit.numPoints == 3
    assert fit.slope == pytest.approx(1.0)
    assert "WARNING: toy: excluded 1 point(s)" in capsys.readouterr().out

  def test_too_few_points(self):
    with pytest.raises(ValueError):
      fit_order([(0.5, 1.0), (0.25, 0.5), (0.125, 0.0)], logging=False)


class TestNorms:
  def test_constant_trajectory(self):
    grid = TimeGrid(2.0, 8)
    nodes = np.tile([3.0, 4.0], (9, 1))
    trajectory = Trajectory(nodes, nodes[:-1])
    assert lp_time_norm(trajectory, 2.0, grid) == pytest.approx(5.0 * np.sqrt(2.0))
    assert lp_time_norm(trajectory, 4.0, grid) == pytest.approx(5.0 * 2.0**0.25)
    assert lp_time_norm(trajectory, np.inf, grid) == pytest.approx(5.0)

  def test_sup_norm_sees_right_limits(self):
    grid = TimeGrid(1.0, 4, 2)
    nodes = np.zeros((5, 1))
    trajectory = BrokenTrajectory(nodes, np.zeros((4, 1)), (2,), np.array([[7.0]]))
    assert lp_time_norm(trajectory, np.inf, grid) == 7.0
    assert lp_time_norm(trajectory, 1.0, grid) > 0

  def test_invalid_order_and_grid(self):
    nodes = np.zeros((5, 1))
    trajectory = Trajectory(nodes, nodes[:-1])
    with pytest.raises(ValueError):
      lp_time_norm(trajectory, 0.5, TimeGrid(1.0, 4))
    with pytest.raises(ValueError):
      lp_time_norm(trajectory, 2.0, TimeGrid(1.0, 8))

  def test_sup_gradient_norm(self, fullDomain):
    nodes = np.zeros((3, 2))
    nodes[1, 1] = 1.0
    trajectory = Trajectory(nodes, nodes[:-1])
    assert sup_gradient_norm(trajectory, fullDomain) == pytest.approx(2 * np.pi)


class TestRates:
  def test_partial_and_full_domain(self, domain, fullDomain):
    key = (ProblemTag.impulse.value, Metrics.stateSup.value)
    assert theoretical_rates(domain)[key] == 0.25
    assert theoretical_rates(fullDomain)[key] == 0.5
    assert theoretical_rates(domain)[(ProblemTag.sampled.value, Metrics.cost.value)] == 1.0

  def test_minimum_slopes(self):
    assert minimum_slope(ProblemTag.impulse.value, 0.5) == pytest.approx(0.45)
    assert minimum_slope(ProblemTag.sampled.value, 1.0) == pytest.approx(0.9)

  def test_metric_value(self):
    record = ErrorRecord(
      ProblemTag.sampled.value, 4, 0.25, 1.0, {2.0: 2.0, 4.0: 3.0, np.inf: 4.0}, -5.0, 1.0, 6.0, 3, 7.0
    )
    assert metric_value(record, Metrics.stateL4.value) == 3.0
    assert metric_value(record, Metrics.cost.value) == 5.0
    assert metric_value(record, Metrics.stateH1Sup.value) == 7.0
    with pytest.raises(ValueError):
      metric_value(record, "bogus")


class TestStudyViolations:
  def test_valid(self):
    assert study_violations(512, [4, 8, 16, 32, 64]) == []

  def test_every_problem_reported(self):
    problems = study_violations(96, [1, 3, 5, 64])
    assert any("n must be >= 2" in p for p in problems)
    assert any("n=5 does not divide" in p for p in problems)
    assert any("needs at least 512 time steps" in p for p in problems)

  def test_too_few_distinct_values(self):
    assert len(study_violations(512, [4, 4, 8, 16])) == 1

  def test_study_raises_config_error(self, configFactory):
    with pytest.raises(ConfigError) as info:
      run_convergence_study(configFactory(numSteps=64), [3, 4, 8], logging=False)
    assert len(info.value.violations) >= 2


def test_zero_target_is_degenerate(configFactory):
  report = run_convergence_study(
    configFactory(numSteps=128, target="zero"), [2, 4, 8, 16], logging=False
  )
  assert report.degenerate
  assert report.passed
  assert report.checks == []
  assert all(r.controlErrorL2 == 0 and r.costGap == 0 for r in report.records)


def test_small_study_records(configFactory):
  report = run_convergence_study(configFactory(numSteps=128), [16, 2, 8, 4], logging=False)
  assert [(r.problemTag, r.n) for r in report.records] == [
    (tag, n) for tag in (ProblemTag.impulse.value, ProblemTag.sampled.value) for n in (2, 4, 8, 16)
  ]
  assert report.config["nList"] == [2, 4, 8, 16]
  assert report.sampledCostGapNonnegative
  sampled = [r for r in report.records if r.problemTag == ProblemTag.sampled.value]
  assert sampled[-1].controlErrorL2 < sampled[0].controlErrorL2
  assert all(np.isnan(r.stateErrorH1Sup) for r in report.records if r.problemTag == ProblemTag.impulse.value)
  assert len(report.checks) == len(theoretical_rates(Domain1D()))


def test_parallel_matches_sequential(configFactory):
  nList = [2, 4, 8, 16]
  cfg = configFactory(numSteps=128)
  sequential = run_convergence_study(cfg, nList, logging=False)
  parallel = run_convergence_study(cfg, nList, logging=False, parallel=True, maxWorkers=2)
  for a, b in zip(sequential.records, parallel.records):
    assert (a.problemTag, a.n) == (b.problemTag, b.n)
    assert a.controlErrorL2 == b.controlErrorL2
    assert a.costGap == b.costGap


def test_parallel_failure_reports_the_failing_solve(configFactory, monkeypatch):
  def failing_solve(cfg, n, **kwargs):
    raise ConvergenceError(1.0, 5, f"impulse n={n}")

  monkeypatch.setattr("periodic_control.convergence.solve_iocp", failing_solve)
  with pytest.raises(ConvergenceError, match="impulse n=") as info:
    run_convergence_study(
      configFactory(numSteps=128), [2, 4, 8, 16], logging=False, parallel=True, maxWorkers=2
    )
  assert info.value.iterations == 5


def test_impulse_control_error_concentrates_on_first_interval(configFactory):
  # The impulse control vanishes on (0, tau_1], so the whole baseline control there is error.
  cfg = configFactory(numModes=8, numSteps=256)
  baseline = solve_ocp(cfg, logging=False)
  shares = []
  for n in [4, 8]:
    grid = cfg.grid.with_subdivision(n)
    impulse = solve_iocp(cfg, n, logging=False)
    diff = baseline.control - embed_impulse_control(impulse.impulses, grid)
    first = grid.stepsPerInterval
    np.testing.assert_array_equal(diff[:first], baseline.control[:first])
    shares.append(np.sum(diff[:first] ** 2) / np.sum(diff**2))
  assert shares[0] >= 0.5
  assert shares[1] > shares[0]


@pytest.mark.slow
def test_default_study_meets_rates(configFactory):
  report = run_convergence_study(configFactory(numModes=32, numSteps=512), logging=False)
  impulseControl = (ProblemTag.impulse.value, Metrics.control.value)
  failed = [
    (check.problemTag, check.metric, check.fit.slope)
    for check in report.checks
    if not check.passed and (check.problemTag, check.metric) != impulseControl
  ]
  assert failed == []
  assert report.sampledCostGapNonnegative

  # The impulse control error is dominated by the first interval at coarse n and only reaches
  # its h^(1/2) regime on the finest subdivisions.
  control = next(check for check in report.checks if (check.problemTag, check.metric) == impulseControl)
  assert control.fit.slope >= 0.4
  errors = {r.n: r.controlErrorL2 for r in report.records if r.problemTag == ProblemTag.impulse.value}
  assert np.log2(errors[32] / errors[64]) >= 0.45
