"""Error metrics of the impulse and sampled-data approximations and empirical convergence orders.

The continuous problem is solved once on the fine grid; every n in the study then reuses
that solution as the reference for ||u* - u_n*||, ||y* - y_n*||_{L^p(0,T;L2)} and |J_n - J|.
"""
import concurrent.futures
import multiprocessing
from typing import Dict, List, Optional, Sequence, Tuple

from . import constants as c
from .constants import ConfigError, ConvergenceReport, ErrorRecord, FitResult, MetricCheck
from .enums import Metrics, ProblemTag
from .heat_solver import TimeGrid, Trajectory, cell_norm
from .impulse_solver import embed_impulse_control, solve_iocp
from .ocp_solver import OCPSolution, solve_ocp
from .sampled_solver import hold_control, solve_socp
from .solver import OCPConfig
from .spectral_core import Domain1D, field_norm, gradient_norm

import numpy as np
from scipy import integrate


def lp_time_norm(difference: Trajectory, p: float, grid: TimeGrid) -> float:
  """||d||_{L^p(0,T;L2)} by the composite trapezoid rule on each continuous piece.

  p = inf takes the max over grid nodes, using both one-sided values at jump times.
  """
  if not p >= 1:
    raise ValueError(f"Norm order must be >= 1 or inf, got {p}")
  if difference.numSteps != grid.numSteps:
    raise ValueError(
      f"Trajectory has {difference.numSteps} cells but the grid has {grid.numSteps}"
    )
  pieces = difference.pieces()
  if np.isinf(p):
    return max(float(np.max(field_norm(piece))) for piece in pieces)
  total = sum(
    float(integrate.trapezoid(field_norm(piece) ** p, dx=grid.dt)) for piece in pieces
  )
  return total ** (1.0 / p)


def sup_gradient_norm(difference: Trajectory, domain: Domain1D) -> float:
  """max_t ||grad d(t)||, the C([0,T];H1_0) norm sampled at the grid nodes."""
  return max(float(np.max(gradient_norm(piece, domain))) for piece in difference.pieces())


def fit_order(
  points: Sequence[Tuple[float, float]], label: str = "", logging: bool = True
) -> FitResult:
  """Least-squares slope and prefactor of log(error) against log(h).

  Points with zero error are excluded with a warning.

  Raises:
    ValueError if fewer than three points remain.
  """
  kept = [(h, err) for h, err in points if err > 0]
  dropped = len(points) - len(kept)
  if dropped and logging:
    print(f"WARNING: {label + ': ' if label else ''}excluded {dropped} point(s) with zero error")
  if len(kept) < c.minPointsForSlope:
    raise ValueError(
      f"{label + ': ' if label else ''}need at least {c.minPointsForSlope} points with "
      f"nonzero error, got {len(kept)}"
    )
  logH = np.log([h for h, _ in kept])
  logErr = np.log([err for _, err in kept])
  slope, intercept = np.polyfit(logH, logErr, 1)
  return FitResult(float(slope), float(np.exp(intercept)), len(kept))


def theoretical_rates(domain: Domain1D) -> Dict[Tuple[str, str], float]:
  """Rates h_n^r guaranteed for each (problem, metric) pair in one space dimension."""
  impulse = ProblemTag.impulse.value
  sampled = ProblemTag.sampled.value
  return {
    (impulse, Metrics.control.value): 0.5,
    (impulse, Metrics.stateL2.value): 0.5,
    (impulse, Metrics.stateL4.value): 0.25,
    (impulse, Metrics.stateSup.value): 0.5 if domain.is_full else 0.25,
    (impulse, Metrics.cost.value): 0.5,
    (sampled, Metrics.control.value): 1.0,
    (sampled, Metrics.stateL2.value): 1.0,
    (sampled, Metrics.stateL4.value): 1.0,
    (sampled, Metrics.stateSup.value): 1.0,
    (sampled, Metrics.stateH1Sup.value): 1.0,
    (sampled, Metrics.cost.value): 1.0,
  }


def minimum_slope(problemTag: str, rate: float) -> float:
  if problemTag == ProblemTag.sampled.value:
    return c.sampledMinimumSlope
  return rate - c.slopeTolerance


def metric_value(record: ErrorRecord, metric: str) -> float:
  if metric == Metrics.control.value:
    return record.controlErrorL2
  if metric == Metrics.stateL2.value:
    return record.stateErrorLp[2.0]
  if metric == Metrics.stateL4.value:
    return record.stateErrorLp[4.0]
  if metric == Metrics.stateSup.value:
    return record.stateErrorLp[np.inf]
  if metric == Metrics.stateH1Sup.value:
    return record.stateErrorH1Sup
  if metric == Metrics.cost.value:
    return abs(record.costGap)
  raise ValueError(f"Unknown value {metric}")


def study_violations(numSteps: int, nList: Sequence[int]) -> List[str]:
  violations = []
  if len(set(nList)) < c.minPointsPerFit:
    violations.append(
      f"n_list needs at least {c.minPointsPerFit} distinct values, got {sorted(set(nList))}"
    )
  for n in nList:
    if n < 2:
      violations.append(f"every n must be >= 2, got {n}")
    elif numSteps % n != 0:
      violations.append(f"n={n} does not divide the number of time steps {numSteps}")
  if nList and numSteps < c.minStepsPerInterval * max(nList):
    violations.append(
      f"the largest n={max(nList)} needs at least {c.minStepsPerInterval * max(nList)} time steps, "
      f"got {numSteps}"
    )
  return violations


def _state_errors(difference: Trajectory, grid: TimeGrid) -> Dict[float, float]:
  return {p: lp_time_norm(difference, p, grid) for p in c.stateNormOrders}


def _subdivision_records(
  cfg: OCPConfig, baseline: OCPSolution, n: int, logging: bool
) -> Tuple[ErrorRecord, ErrorRecord]:
  """Solves both approximations for one n and measures them against the baseline."""
  grid = cfg.grid.with_subdivision(n)

  impulse = solve_iocp(cfg, n, logging=logging)
  impulseRecord = ErrorRecord(
    problemTag=ProblemTag.impulse.value,
    n=n,
    h=grid.h,
    controlErrorL2=cell_norm(baseline.control - embed_impulse_control(impulse.impulses, grid), grid),
    stateErrorLp=_state_errors(baseline.state - impulse.state, grid),
    costGap=impulse.cost - baseline.cost,
    cost=impulse.cost,
    baselineCost=baseline.cost,
    iterations=impulse.iterations,
  )

  sampled = solve_socp(cfg, n, logging=logging)
  sampledDifference = baseline.state - sampled.state
  sampledRecord = ErrorRecord(
    problemTag=ProblemTag.sampled.value,
    n=n,
    h=grid.h,
    controlErrorL2=cell_norm(baseline.control - hold_control(sampled.holds, grid), grid),
    stateErrorLp=_state_errors(sampledDifference, grid),
    costGap=sampled.cost - baseline.cost,
    cost=sampled.cost,
    baselineCost=baseline.cost,
    iterations=sampled.iterations,
    stateErrorH1Sup=sup_gradient_norm(sampledDifference, cfg.domain),
  )
  return impulseRecord, sampledRecord


def _check_metrics(
  records: List[ErrorRecord], domain: Domain1D, logging: bool
) -> List[MetricCheck]:
  checks = []
  for (problemTag, metric), rate in theoretical_rates(domain).items():
    points = [(r.h, metric_value(r, metric)) for r in records if r.problemTag == problemTag]
    lowest = minimum_slope(problemTag, rate)
    try:
      fit = fit_order(points, label=f"{problemTag} {metric}", logging=logging)
      passed = fit.slope >= lowest
    except ValueError as e:
      if logging:
        print(f"WARNING: {e}")
      fit = FitResult(np.nan, np.nan, 0, degenerate=True)
      passed = False
    checks.append(MetricCheck(problemTag, metric, rate, lowest, fit, passed))
    if logging:
      print(
        f"{problemTag:8s} {metric:16s} slope {fit.slope:.4f} (rate {rate}, need >= {lowest:.2f})"
        f" {'PASS' if passed else 'FAIL'}"
      )
  return checks


def config_snapshot(cfg: OCPConfig, nList: Sequence[int]) -> dict:
  return {
    "length": cfg.domain.length,
    "controlInterval": [cfg.domain.a, cfg.domain.b],
    "horizon": cfg.grid.horizon,
    "numSteps": cfg.grid.numSteps,
    "numModes": cfg.numModes,
    "nList": sorted(nList),
    "cgTol": cfg.cgTol,
    "cgMaxIter": cfg.cgMaxIter,
    "targetNorm": cfg.targetNorm,
  }


def run_convergence_study(
  cfg: OCPConfig,
  nList: Sequence[int] = c.defaultStudyNList,
  logging: bool = True,
  parallel: bool = False,
  maxWorkers: Optional[int] = None,
  extraConfig: Optional[dict] = None,
) -> ConvergenceReport:
  """Solves the baseline and both approximations for each n, then fits convergence orders.

  Raises:
    ConfigError if nList is incompatible with the grid.
    ConvergenceError if any CG solve fails; its tag names the failing problem and n.
  """
  violations = study_violations(cfg.grid.numSteps, nList)
  if violations:
    raise ConfigError(violations)
  nList = sorted(set(nList))

  with c.time_block("Baseline solve", logging):
    baseline = solve_ocp(cfg, logging=logging)

  with c.time_block("Approximation solves", logging):
    if parallel:
      with concurrent.futures.ProcessPoolExecutor(
        mp_context=multiprocessing.get_context("fork"),
        max_workers=maxWorkers or min(len(nList), c.defaultNumWorkers),
      ) as executor:
        if logging:
          print(f"Starting parallel solves for {len(nList)} values of n.")
        futures = [
          executor.submit(_subdivision_records, cfg, baseline, n, logging) for n in nList
        ]
        pairs = [f.result() for f in futures]
    else:
      pairs = [_subdivision_records(cfg, baseline, n, logging) for n in nList]

  records = [r for pair in pairs for r in pair]
  records.sort(key=lambda r: (r.problemTag, r.n))
  sampledGapOk = all(
    r.costGap >= -c.costGapSlack * max(1.0, r.baselineCost)
    for r in records
    if r.problemTag == ProblemTag.sampled.value
  )

  degenerate = cfg.targetNorm == 0
  if degenerate:
    if logging:
      print("WARNING: target is zero, every error vanishes and no orders are fitted")
    checks: List[MetricCheck] = []
  else:
    checks = _check_metrics(records, cfg.domain, logging)

  snapshot = config_snapshot(cfg, nList)
  if extraConfig:
    snapshot.update(extraConfig)
  return ConvergenceReport(snapshot, records, checks, sampledGapOk, degenerate)
