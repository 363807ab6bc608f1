from contextlib import contextmanager
from dataclasses import dataclass, field
import os
import time
from typing import Dict, List

import numpy as np
import pandas as pd


# Default number of worker processes for parallel per-n solves if os.cpu_count() is
# unavailable and no value is specified.
defaultNumWorkers = os.cpu_count() or 8

# Problem defaults
defaultLength = 1.0
defaultControlInterval = (0.3, 0.8)
defaultHorizon = 1.0
defaultNumModes = 64
defaultNumSteps = 512
defaultSubdivision = 4
defaultSeed = 0

# Conjugate gradient
defaultCgTol = 1e-10
defaultCgMaxIter = 500
cgPrintInterval = 5

# Exponentials exp(-x) with x above this threshold are flushed to zero.
decayExponentCutoff = 700.0
# Below this argument the phi-functions switch to their Taylor series.
phiSeriesThreshold = 1e-4
# phi_1(2x) - phi_1(x)^2 loses digits to cancellation below this argument.
spreadSeriesThreshold = 1e-2

# Invariant tolerances
periodicityTolerance = 1e-10
symmetryTolerance = 1e-9
# Slack on the sign check J(sampled) - J(continuous) >= 0, relative to max(1, J).
costGapSlack = 1e-12

# Time grids: every sampling interval must hold at least this many fine cells.
minStepsPerInterval = 8

# Dense KKT oracle size limit (number of scalar unknowns).
maxOracleUnknowns = 512
# Relative control deviation accepted between CG and the dense oracle.
oracleTolerance = 1e-8
# Problem size used by the oracle command unless overridden.
oracleNumModes = 4
oracleNumSteps = 64
oracleSubdivision = 4

# Convergence study
defaultStudyNumModes = 32
defaultStudyNList = [4, 8, 16, 32, 64]
studyStepsPerFinestInterval = 8
minPointsPerFit = 4
minPointsForSlope = 3
slopeTolerance = 0.05
sampledMinimumSlope = 0.9
stateNormOrders = [2.0, 4.0, np.inf]

# Default target y_d(t, x) = phi_1(x) (1 + cos(2 pi t / T)) + 0.3 phi_2(x) sin(2 pi t / T)
defaultTargetSecondModeWeight = 0.3

# Mollifier
mollifierSimpsonNodes = 201
minMollifierGridPoints = 16
defaultMollifierGridPoints = 2**16 + 1
defaultEpsilonExponents = [4, 5, 6, 7, 8, 9, 10]
defaultMollifierNormOrders = [1.0, 2.0, 4.0]

# Lemma experiments
compareT1 = 0.0
compareT2 = 1.0
defaultDeltaExponents = [4, 5, 6, 7, 8, 9, 10]
defaultCompareNormOrders = [2.0, 4.0]
compareStepsPerMinDelta = 16
defaultCompareNumModes = 64
defaultIntuitiveNumModes = 256
minIntuitiveNumModes = 256
defaultIntuitiveOffsets = [1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2]
intuitiveOffsetRange = (1e-4, 1e-2)
intuitiveFullDomainMinSlope = 0.45
intuitivePartialDomainMinSlope = 0.2

# Output file names
ocpControlOutputPath = "ocp_control.csv"
ocpStateOutputPath = "ocp_state.csv"
ocpAdjointOutputPath = "ocp_adjoint.csv"
ocpReportOutputPath = "ocp_report.json"
impulseControlOutputPath = "impulse_control.csv"
impulseStateOutputPath = "impulse_state.csv"
impulseAdjointOutputPath = "impulse_adjoint.csv"
impulseReportOutputPath = "impulse_report.json"
sampledControlOutputPath = "sampled_control.csv"
sampledStateOutputPath = "sampled_state.csv"
sampledAdjointOutputPath = "sampled_adjoint.csv"
sampledReportOutputPath = "sampled_report.json"
convergenceCsvOutputPath = "convergence.csv"
convergenceJsonOutputPath = "convergence.json"
compareLemmaOutputPath = "lemma_compare3.csv"
intuitiveLemmaOutputPath = "lemma_intuitive.csv"
mollifierLemmaOutputPath = "lemma_mollifier.csv"
lemmasJsonOutputPath = "lemmas.json"
oracleCsvOutputPath = "oracle.csv"
oracleJsonOutputPath = "oracle.json"

csvFloatFormat = "%.17g"

# CSV Column Names
timeKey = "t"
cellStartKey = "tStart"
cellEndKey = "tEnd"
sideKey = "side"
impulseIndexKey = "impulseIndex"
holdIndexKey = "holdIndex"
tauKey = "tau"
nKey = "n"
hKey = "h"
problemTagKey = "problem"
controlErrorKey = "controlErrorL2"
stateErrorL2Key = "stateErrorL2"
stateErrorL4Key = "stateErrorL4"
stateErrorSupKey = "stateErrorSup"
stateErrorH1SupKey = "stateErrorH1Sup"
costGapKey = "costGap"
costKey = "cost"
baselineCostKey = "baselineCost"
iterationsKey = "iterations"
deltaKey = "delta"
offsetKey = "offset"
epsilonKey = "epsilon"
normOrderKey = "p"
errorKey = "error"
distanceKey = "distance"
gradientKey = "gradient"
solverKey = "solver"
unknownsKey = "unknowns"
deviationKey = "maxRelativeDeviation"

# Node value just before / just after a jump.
leftLimitSide = "left"
rightLimitSide = "right"


def mode_key(k: int) -> str:
  return "c" + str(k)


def mode_keys(numModes: int) -> List[str]:
  return [mode_key(k) for k in range(1, numModes + 1)]


convergenceCsvColumns = [
  problemTagKey,
  nKey,
  hKey,
  controlErrorKey,
  stateErrorL2Key,
  stateErrorL4Key,
  stateErrorSupKey,
  stateErrorH1SupKey,
  costGapKey,
  costKey,
  baselineCostKey,
  iterationsKey,
]
compareLemmaColumns = [normOrderKey, deltaKey, errorKey]
intuitiveLemmaColumns = [offsetKey, errorKey]
mollifierLemmaColumns = [normOrderKey, epsilonKey, distanceKey, gradientKey]
oracleColumns = [solverKey, unknownsKey, deviationKey]


@contextmanager
def time_block(label, logging: bool = True):
  start = time.time()
  try:
    yield
  finally:
    end = time.time()
    if logging:
      print(f"{label} elapsed time: {end - start:.2f} secs ({((end-start)/60.0):.2f} mins)")


class ConvergenceError(RuntimeError):
  """Raised when conjugate gradients fails to reach the requested tolerance.

  The constructor arguments are kept as `args` so the error survives the trip back from a
  worker process.
  """

  def __init__(self, residual: float, iterations: int, tag: str = "") -> None:
    super().__init__(residual, iterations, tag)
    self.residual = residual
    self.iterations = iterations
    self.tag = tag

  def __str__(self) -> str:
    return (
      f"{self.tag + ': ' if self.tag else ''}CG did not converge after {self.iterations} "
      f"iterations (residual {self.residual:.3e})"
    )


class ConfigError(ValueError):
  """Aggregates every violation found while validating a run configuration."""

  def __init__(self, violations: List[str]) -> None:
    self.violations = list(violations)
    super().__init__(self.violations)

  def __str__(self) -> str:
    return "Invalid configuration:\n  " + "\n  ".join(self.violations)


@dataclass
class FitResult:
  slope: float
  prefactor: float
  numPoints: int
  degenerate: bool = False


@dataclass
class ErrorRecord:
  problemTag: str
  n: int
  h: float
  controlErrorL2: float
  stateErrorLp: Dict[float, float]
  costGap: float
  cost: float
  baselineCost: float
  iterations: int
  stateErrorH1Sup: float = np.nan


@dataclass
class MetricCheck:
  problemTag: str
  metric: str
  theoreticalRate: float
  minimumSlope: float
  fit: FitResult
  passed: bool


@dataclass
class ConvergenceReport:
  config: dict
  records: List[ErrorRecord]
  checks: List[MetricCheck]
  sampledCostGapNonnegative: bool
  degenerate: bool

  @property
  def passed(self) -> bool:
    return self.degenerate or (
      all(check.passed for check in self.checks) and self.sampledCostGapNonnegative
    )


@dataclass
class LemmaResult:
  name: str
  table: pd.DataFrame
  slopes: Dict[str, float]
  minimumSlopes: Dict[str, float]
  maximumSlopes: Dict[str, float] = field(default_factory=dict)

  @property
  def passed(self) -> bool:
    lowerOk = all(
      self.slopes[key] >= bound for key, bound in self.minimumSlopes.items() if key in self.slopes
    )
    upperOk = all(
      self.slopes[key] <= bound for key, bound in self.maximumSlopes.items() if key in self.slopes
    )
    return lowerOk and upperOk


@dataclass
class OracleComparison:
  solverName: str
  unknowns: int
  maxRelativeDeviation: float
