"""Desk-scale experiments for the auxiliary estimates behind the convergence rates.

- compare3: a source (1/delta) chi_omega u spread over (T1, T1 + delta) versus the same
  field injected at T1; ||z - w||_{L^p(T1,T2;L2)} should shrink like delta^{1/p}.
- intuitive: free decay from chi_omega z0; ||z(s) - z(T1)|| shrinks like (s - T1)^{1/4} when
  omega is a proper subinterval and like (s - T1)^{1/2} (or faster) when omega = Omega.
- mollifier: ||chi^eps - chi||_{L^p} ~ eps^{1/p} and ||d/dx chi^eps||_{L^p} ~ eps^{-(1 - 1/p)}.
"""
from typing import Optional, Sequence

from . import constants as c
from .constants import LemmaResult
from .convergence import fit_order, lp_time_norm
from .heat_solver import HeatSemigroup, TimeGrid
from .spectral_core import (
  Domain1D,
  SpectralField,
  apply_indicator,
  coupling_matrix,
  eigenvalues,
  indicator_samples,
  lp_norm_sampled,
  mollify_indicator,
)

import numpy as np
import pandas as pd


def _slope_key(kind: str, p: float) -> str:
  return f"{kind}_p{p:g}"


def default_deltas(horizon: float = c.defaultHorizon) -> list:
  return [horizon * 2.0**-k for k in c.defaultDeltaExponents]


def default_epsilons() -> list:
  return [2.0**-k for k in c.defaultEpsilonExponents]


def experiment_compare3(
  u: SpectralField,
  domain: Domain1D,
  deltaList: Optional[Sequence[float]] = None,
  pList: Sequence[float] = c.defaultCompareNormOrders,
  T1: float = c.compareT1,
  T2: float = c.compareT2,
  logging: bool = True,
) -> LemmaResult:
  """Measures ||z - w||_{L^p(T1,T2;L2)} for each delta and fits its order in delta.

  The local grid on (T1, T2) uses dt = min(delta) / compareStepsPerMinDelta, so every
  T1 + delta is a grid node.

  Raises:
    ValueError if T1 + max(delta) >= T2 or a delta is not a multiple of the grid step.
  """
  deltaList = sorted(default_deltas(T2 - T1) if deltaList is None else deltaList)
  if not deltaList or deltaList[0] <= 0:
    raise ValueError(f"Every delta must be positive, got {deltaList}")
  if not T1 + deltaList[-1] < T2:
    raise ValueError(f"Need T1 + max(delta) < T2, got T1={T1}, max(delta)={deltaList[-1]}, T2={T2}")
  if any(not p >= 1 or np.isinf(p) for p in pList):
    raise ValueError(f"Norm orders must be finite and >= 1, got {list(pList)}")

  dt = deltaList[0] / c.compareStepsPerMinDelta
  numSteps = int(round((T2 - T1) / dt))
  if not np.isclose(numSteps * dt, T2 - T1, rtol=1e-12, atol=0.0):
    raise ValueError(f"T2 - T1 = {T2 - T1} is not a multiple of the step {dt}")
  grid = TimeGrid(T2 - T1, numSteps)
  semigroup = HeatSemigroup(domain, len(u))
  injected = apply_indicator(semigroup.coupling, u)

  # w: free decay from chi_omega u.
  w = semigroup.solve_forward(injected, np.zeros((numSteps, semigroup.numModes)), grid)
  rows = []
  for delta in deltaList:
    activeSteps = int(round(delta / grid.dt))
    if not np.isclose(activeSteps * grid.dt, delta, rtol=1e-9, atol=0.0):
      raise ValueError(f"delta={delta} is not a multiple of the grid step {grid.dt}")
    source = np.zeros((numSteps, semigroup.numModes))
    source[:activeSteps] = injected / delta
    z = semigroup.solve_forward(np.zeros(semigroup.numModes), source, grid)
    difference = z - w
    for p in pList:
      rows.append({c.normOrderKey: p, c.deltaKey: delta, c.errorKey: lp_time_norm(difference, p, grid)})
  table = pd.DataFrame(rows, columns=c.compareLemmaColumns)

  slopes, minimumSlopes = {}, {}
  for p in pList:
    subset = table[table[c.normOrderKey] == p]
    key = _slope_key("error", p)
    slopes[key] = fit_order(
      list(zip(subset[c.deltaKey], subset[c.errorKey])), label=f"compare3 {key}", logging=logging
    ).slope
    minimumSlopes[key] = 1.0 / p - c.slopeTolerance
    if logging:
      print(f"compare3 p={p:g}: slope {slopes[key]:.4f} (need >= {minimumSlopes[key]:.2f})")
  return LemmaResult("compare3", table, slopes, minimumSlopes)


def experiment_intuitive(
  z0: SpectralField,
  domain: Domain1D,
  offsets: Sequence[float] = c.defaultIntuitiveOffsets,
  numModes: int = c.defaultIntuitiveNumModes,
  logging: bool = True,
) -> LemmaResult:
  """||z(s) - z(T1)|| for z(T1) = chi_omega z0 and free decay, at each offset s - T1.

  Per mode the distance is (1 - e^{-lambda_k (s - T1)}) |c_k| with c = chi_omega z0, so the
  values are exact up to the truncation at numModes.

  Raises:
    ValueError if numModes is below minIntuitiveNumModes or an offset leaves the tested range.
  """
  if numModes < c.minIntuitiveNumModes:
    raise ValueError(
      f"Need at least {c.minIntuitiveNumModes} modes to resolve chi_omega, got {numModes}"
    )
  low, high = c.intuitiveOffsetRange
  for offset in offsets:
    if not low <= offset <= high:
      raise ValueError(f"Offset s - T1 must lie in [{low}, {high}], got {offset}")
  coeffs = np.zeros(numModes)
  z0 = np.asarray(z0, dtype=np.float64)
  coeffs[: min(len(z0), numModes)] = z0[:numModes]
  start = apply_indicator(coupling_matrix(domain, numModes), coeffs)
  lambdas = eigenvalues(numModes, domain)

  rows = []
  for offset in sorted(offsets):
    distance = float(np.linalg.norm(-np.expm1(-lambdas * offset) * start))
    rows.append({c.offsetKey: offset, c.errorKey: distance})
  table = pd.DataFrame(rows, columns=c.intuitiveLemmaColumns)

  fit = fit_order(list(zip(table[c.offsetKey], table[c.errorKey])), label="intuitive", logging=logging)
  lowest = c.intuitiveFullDomainMinSlope if domain.is_full else c.intuitivePartialDomainMinSlope
  if logging:
    print(f"intuitive: slope {fit.slope:.4f} (need >= {lowest:.2f})")
  return LemmaResult("intuitive", table, {"error": fit.slope}, {"error": lowest})


def experiment_mollifier(
  domain: Domain1D,
  epsList: Optional[Sequence[float]] = None,
  pList: Sequence[float] = c.defaultMollifierNormOrders,
  gridPoints: int = c.defaultMollifierGridPoints,
  logging: bool = True,
) -> LemmaResult:
  """Distance ||chi^eps - chi||_{L^p} and gradient norm ||d/dx chi^eps||_{L^p} against eps.

  p = inf contributes a distance fit only; its gradient norm scales exactly like 1/eps.
  """
  epsList = sorted(default_epsilons() if epsList is None else epsList)
  for eps in epsList:
    if not 0 < eps < domain.width / 2:
      raise ValueError(f"Mollifier width must satisfy 0 < eps < (b-a)/2, got {eps}")

  rows = []
  for eps in epsList:
    mollified = mollify_indicator(domain, eps, gridPoints)
    exact = indicator_samples(domain, mollified.grid)
    for p in pList:
      rows.append(
        {
          c.normOrderKey: p,
          c.epsilonKey: eps,
          c.distanceKey: lp_norm_sampled(mollified.values - exact, p, mollified.spacing),
          c.gradientKey: lp_norm_sampled(mollified.gradient, p, mollified.spacing),
        }
      )
  table = pd.DataFrame(rows, columns=c.mollifierLemmaColumns)

  slopes, minimumSlopes, maximumSlopes = {}, {}, {}
  for p in pList:
    subset = table[table[c.normOrderKey] == p]
    inverse = 0.0 if np.isinf(p) else 1.0 / p
    distanceKey = _slope_key(c.distanceKey, p)
    slopes[distanceKey] = fit_order(
      list(zip(subset[c.epsilonKey], subset[c.distanceKey])), label=distanceKey, logging=logging
    ).slope
    minimumSlopes[distanceKey] = inverse - c.slopeTolerance
    if not np.isinf(p):
      gradientKey = _slope_key(c.gradientKey, p)
      slopes[gradientKey] = fit_order(
        list(zip(subset[c.epsilonKey], subset[c.gradientKey])), label=gradientKey, logging=logging
      ).slope
      maximumSlopes[gradientKey] = -(1.0 - inverse) + c.slopeTolerance
    if logging:
      print(
        f"mollifier p={p:g}: distance slope {slopes[distanceKey]:.4f}"
        + (f", gradient slope {slopes[_slope_key(c.gradientKey, p)]:.4f}" if not np.isinf(p) else "")
      )
  return LemmaResult("mollifier", table, slopes, minimumSlopes, maximumSlopes)
