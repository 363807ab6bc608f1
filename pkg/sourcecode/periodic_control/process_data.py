"""Run configuration, tracking targets and on-disk output formats."""
from dataclasses import asdict, dataclass, field
import json
import os
from typing import Any, Dict, List, Optional, Tuple

from . import constants as c
from .constants import ConfigError, ConvergenceReport, ErrorRecord, LemmaResult
from .convergence import study_violations
from .enums import Commands, Targets
from .heat_solver import TimeGrid, Trajectory
from .solver import OCPConfig
from .spectral_core import Domain1D

import numpy as np
import pandas as pd
import yaml


# Accepted keys per configuration-file section, mapped to RunConfig attributes.
_configSections = {
  "problem": {
    "length": "length",
    "control_interval": "controlInterval",
    "horizon": "horizon",
    "modes": "numModes",
    "timesteps": "numSteps",
    "n": "n",
    "target": "target",
    "seed": "seed",
    "cg_tol": "cgTol",
    "cg_max_iter": "cgMaxIter",
  },
  "study": {
    "n_list": "nList",
    "parallel": "parallel",
    "workers": "maxWorkers",
  },
  "lemmas": {
    "delta_exponents": "deltaExponents",
    "compare_p": "compareNormOrders",
    "compare_t1": "compareT1",
    "compare_t2": "compareT2",
    "compare_modes": "compareNumModes",
    "intuitive_modes": "intuitiveNumModes",
    "intuitive_offsets": "intuitiveOffsets",
    "epsilon_exponents": "epsilonExponents",
    "mollifier_p": "mollifierNormOrders",
    "mollifier_grid_points": "mollifierGridPoints",
  },
  "output": {
    "dir": "outDir",
    "quiet": "quiet",
  },
}


@dataclass
class RunConfig:
  """Everything a command needs; numModes, numSteps and n fall back to per-command defaults."""

  command: Commands = Commands.solve
  length: float = c.defaultLength
  controlInterval: Tuple[float, float] = c.defaultControlInterval
  horizon: float = c.defaultHorizon
  numModes: Optional[int] = None
  numSteps: Optional[int] = None
  n: Optional[int] = None
  target: str = Targets.default.value
  seed: int = c.defaultSeed
  cgTol: float = c.defaultCgTol
  cgMaxIter: int = c.defaultCgMaxIter
  nList: List[int] = field(default_factory=lambda: list(c.defaultStudyNList))
  parallel: bool = False
  maxWorkers: Optional[int] = None
  deltaExponents: List[int] = field(default_factory=lambda: list(c.defaultDeltaExponents))
  compareNormOrders: List[float] = field(default_factory=lambda: list(c.defaultCompareNormOrders))
  compareT1: float = c.compareT1
  compareT2: float = c.compareT2
  compareNumModes: int = c.defaultCompareNumModes
  intuitiveNumModes: int = c.defaultIntuitiveNumModes
  intuitiveOffsets: List[float] = field(default_factory=lambda: list(c.defaultIntuitiveOffsets))
  epsilonExponents: List[int] = field(default_factory=lambda: list(c.defaultEpsilonExponents))
  mollifierNormOrders: List[float] = field(
    default_factory=lambda: list(c.defaultMollifierNormOrders)
  )
  mollifierGridPoints: int = c.defaultMollifierGridPoints
  outDir: str = "."
  quiet: bool = False

  @property
  def logging(self) -> bool:
    return not self.quiet

  def resolved_num_modes(self) -> int:
    if self.numModes is not None:
      return self.numModes
    if self.command == Commands.converge:
      return c.defaultStudyNumModes
    if self.command == Commands.oracle:
      return c.oracleNumModes
    return c.defaultNumModes

  def resolved_num_steps(self) -> int:
    if self.numSteps is not None:
      return self.numSteps
    if self.command == Commands.converge and self.nList:
      return c.studyStepsPerFinestInterval * max(self.nList)
    if self.command == Commands.oracle:
      return c.oracleNumSteps
    return c.defaultNumSteps

  def resolved_subdivision(self) -> int:
    if self.n is not None:
      return self.n
    if self.command == Commands.oracle:
      return c.oracleSubdivision
    return c.defaultSubdivision

  def deltas(self) -> List[float]:
    return [self.horizon * 2.0**-k for k in self.deltaExponents]

  def epsilons(self) -> List[float]:
    return [2.0**-k for k in self.epsilonExponents]

  def domain(self) -> Domain1D:
    return Domain1D(self.controlInterval[0], self.controlInterval[1], self.length)

  def grid(self) -> TimeGrid:
    return TimeGrid(self.horizon, self.resolved_num_steps())

  def violations(self) -> List[str]:
    """Every problem with this configuration, in a stable order."""
    problems = []
    a, b = self.controlInterval
    if not self.length > 0:
      problems.append(f"length must be positive, got {self.length}")
    elif not 0 <= a < b <= self.length:
      problems.append(f"control interval must satisfy 0 <= a < b <= L, got ({a}, {b})")
    if not self.horizon > 0:
      problems.append(f"horizon must be positive, got {self.horizon}")
    numModes, numSteps, n = (
      self.resolved_num_modes(),
      self.resolved_num_steps(),
      self.resolved_subdivision(),
    )
    if numModes < 1:
      problems.append(f"modes must be >= 1, got {numModes}")
    if numSteps < 1:
      problems.append(f"timesteps must be >= 1, got {numSteps}")
    if not self.cgTol > 0:
      problems.append(f"cg_tol must be positive, got {self.cgTol}")
    if self.cgMaxIter < 1:
      problems.append(f"cg_max_iter must be >= 1, got {self.cgMaxIter}")
    if self.seed < 0:
      problems.append(f"seed must be >= 0, got {self.seed}")
    if self.target not in [t.value for t in Targets]:
      problems.append(f"target must be one of {[t.value for t in Targets]}, got {self.target}")

    if self.command in (Commands.impulse, Commands.sampled, Commands.oracle) and numSteps >= 1:
      problems.extend(self._subdivision_violations(n, numSteps))
    if self.command == Commands.converge and numSteps >= 1:
      problems.extend(study_violations(numSteps, self.nList))
    if self.command == Commands.oracle:
      for label, unknowns in (
        ("continuous", numModes * numSteps),
        ("impulse", (n - 1) * numModes),
        ("sampled", n * numModes),
      ):
        if unknowns > c.maxOracleUnknowns:
          problems.append(
            f"{label} oracle needs {unknowns} unknowns, limit is {c.maxOracleUnknowns}"
          )
    if self.command == Commands.lemmas:
      problems.extend(self._lemma_violations())
    return problems

  def _subdivision_violations(self, n: int, numSteps: int) -> List[str]:
    problems = []
    if self.command in (Commands.impulse, Commands.oracle) and n < 2:
      problems.append(f"n must be >= 2 for impulse problems, got {n}")
    if n < 1:
      problems.append(f"n must be >= 1, got {n}")
    elif numSteps % n != 0:
      problems.append(f"n={n} does not divide the number of time steps {numSteps}")
    elif self.command in (Commands.sampled, Commands.oracle) and numSteps // n < c.minStepsPerInterval:
      problems.append(
        f"sampled problems need at least {c.minStepsPerInterval} time steps per interval, "
        f"got {numSteps // n}"
      )
    return problems

  def _lemma_violations(self) -> List[str]:
    problems = []
    width = self.controlInterval[1] - self.controlInterval[0]
    for eps in self.epsilons():
      if not eps < width / 2:
        problems.append(f"mollifier eps={eps} must be below (b-a)/2 = {width / 2}")
    if self.mollifierGridPoints < c.minMollifierGridPoints:
      problems.append(
        f"mollifier grid needs at least {c.minMollifierGridPoints} points, got {self.mollifierGridPoints}"
      )
    if self.deltaExponents and not self.compareT1 + max(self.deltas()) < self.compareT2:
      problems.append(
        f"compare3 needs T1 + max(delta) < T2, got T1={self.compareT1}, T2={self.compareT2}"
      )
    if self.intuitiveNumModes < c.minIntuitiveNumModes:
      problems.append(
        f"intuitive experiment needs at least {c.minIntuitiveNumModes} modes, got {self.intuitiveNumModes}"
      )
    low, high = c.intuitiveOffsetRange
    for offset in self.intuitiveOffsets:
      if not low <= offset <= high:
        problems.append(f"intuitive offset {offset} outside [{low}, {high}]")
    for p in list(self.compareNormOrders) + list(self.mollifierNormOrders):
      if not p >= 1:
        problems.append(f"norm order must be >= 1, got {p}")
    return problems

  def validate(self) -> None:
    """Raises ConfigError listing every violation at once."""
    problems = self.violations()
    if problems:
      raise ConfigError(problems)

  def snapshot(self) -> Dict[str, Any]:
    out = asdict(self)
    for executionOnly in ("outDir", "quiet", "parallel", "maxWorkers"):
      out.pop(executionOnly)
    out["command"] = self.command.name
    out["numModes"] = self.resolved_num_modes()
    out["numSteps"] = self.resolved_num_steps()
    out["n"] = self.resolved_subdivision()
    out["controlInterval"] = list(self.controlInterval)
    return out


def load_config(path: Optional[str], command: Commands, overrides: Dict[str, Any]) -> RunConfig:
  """Reads a YAML file (if given) and applies command-line overrides on top.

  Raises:
    ConfigError for a missing or unreadable file, unknown keys or invalid values.
  """
  values: Dict[str, Any] = {}
  if path is not None:
    if not os.path.isfile(path):
      raise ConfigError([f"config file not found: {path}"])
    try:
      with open(path, "r", encoding="utf-8") as handle:
        document = yaml.safe_load(handle)
    except yaml.YAMLError as e:
      raise ConfigError([f"cannot parse {path}: {e}"])
    if document is None:
      document = {}
    if not isinstance(document, dict):
      raise ConfigError([f"{path} must hold a mapping of sections, got {type(document).__name__}"])
    problems = []
    for section, entries in document.items():
      if section not in _configSections or not isinstance(entries, dict):
        problems.append(f"unknown config section [{section}]")
        continue
      for key, value in entries.items():
        if key not in _configSections[section]:
          problems.append(f"unknown key {key} in [{section}]")
        else:
          values[_configSections[section][key]] = value
    if problems:
      raise ConfigError(problems)
  values.update({k: v for k, v in overrides.items() if v is not None})
  if "controlInterval" in values:
    interval = values["controlInterval"]
    if not isinstance(interval, (list, tuple)) or len(interval) != 2:
      raise ConfigError([f"control_interval must be a pair [a, b], got {interval}"])
    values["controlInterval"] = (float(interval[0]), float(interval[1]))
  try:
    cfg = RunConfig(command=command, **values)
    cfg.validate()
  except TypeError as e:
    raise ConfigError([f"invalid value type: {e}"])
  return cfg


def build_target(
  kind: str, grid: TimeGrid, numModes: int, seed: int = c.defaultSeed
) -> np.ndarray:
  """Cell values of y_d, shape (numSteps, numModes).

  default: y_d = phi_1 (1 + cos(2 pi t / T)) + 0.3 phi_2 sin(2 pi t / T), stored as exact
    time-means over each cell.
  zero: y_d = 0.
  mode1: y_d = phi_1 at all times.
  random: modal coefficients uniform on (-1, 1) from numpy's PCG64 generator seeded with seed.
  """
  target = np.zeros((grid.numSteps, numModes))
  if kind == Targets.zero.value:
    return target
  if kind == Targets.mode1.value:
    target[:, 0] = 1.0
    return target
  if kind == Targets.random.value:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(grid.numSteps, numModes))
  if kind == Targets.default.value:
    frequency = 2.0 * np.pi / grid.horizon
    times = grid.times
    cosMeans = np.diff(np.sin(frequency * times)) / (frequency * grid.dt)
    sinMeans = -np.diff(np.cos(frequency * times)) / (frequency * grid.dt)
    target[:, 0] = 1.0 + cosMeans
    if numModes >= 2:
      target[:, 1] = c.defaultTargetSecondModeWeight * sinMeans
    return target
  raise ValueError(f"Unknown value {kind}")


def build_ocp_config(cfg: RunConfig) -> OCPConfig:
  grid = cfg.grid()
  numModes = cfg.resolved_num_modes()
  return OCPConfig(
    domain=cfg.domain(),
    grid=grid,
    numModes=numModes,
    target=build_target(cfg.target, grid, numModes, cfg.seed),
    cgTol=cfg.cgTol,
    cgMaxIter=cfg.cgMaxIter,
  )


def write_csv(df: pd.DataFrame, path: str) -> None:
  """Writes df without its index, floats with 17 significant digits."""
  assert path is not None
  assert df.to_csv(path, index=False, header=True, float_format=c.csvFloatFormat) is None


def _jsonable(value: Any) -> Any:
  if isinstance(value, dict):
    return {str(k): _jsonable(v) for k, v in value.items()}
  if isinstance(value, (list, tuple)):
    return [_jsonable(v) for v in value]
  if isinstance(value, (np.floating, float)):
    value = float(value)
    return value if np.isfinite(value) else None
  if isinstance(value, np.integer):
    return int(value)
  if isinstance(value, np.bool_):
    return bool(value)
  return value


def write_json(payload: Dict[str, Any], path: str) -> None:
  """Sorted keys, two-space indent, shortest round-trip floats, NaN and inf as null."""
  with open(path, "w", encoding="utf-8") as handle:
    json.dump(_jsonable(payload), handle, sort_keys=True, indent=2, allow_nan=False)
    handle.write("\n")


def trajectory_frame(trajectory: Trajectory, grid: TimeGrid) -> pd.DataFrame:
  """One row per grid node; jump nodes get a left-limit row and a right-limit row."""
  modeKeys = c.mode_keys(trajectory.numModes)
  times = grid.times
  if not trajectory.is_broken:
    df = pd.DataFrame(trajectory.nodes, columns=modeKeys)
    df.insert(0, c.timeKey, times)
    return df
  rows = []
  for m in range(grid.numSteps + 1):
    if m in trajectory.jumpNodes:
      rows.append([times[m], c.leftLimitSide] + list(trajectory.nodes[m]))
      rows.append([times[m], c.rightLimitSide] + list(trajectory.right_limit(m)))
    else:
      rows.append([times[m], ""] + list(trajectory.nodes[m]))
  return pd.DataFrame(rows, columns=[c.timeKey, c.sideKey] + modeKeys)


def cell_frame(values: np.ndarray, grid: TimeGrid) -> pd.DataFrame:
  """One row per cell (t_m, t_{m+1}] of a piecewise-constant function."""
  modeKeys = c.mode_keys(values.shape[1])
  df = pd.DataFrame(values, columns=modeKeys)
  df.insert(0, c.cellEndKey, grid.times[1:])
  df.insert(0, c.cellStartKey, grid.times[:-1])
  return df


def impulse_frame(impulses: np.ndarray, grid: TimeGrid) -> pd.DataFrame:
  """Row i-1 holds u_{i-1,n}, applied at tau_{i-1}, for i = 2..n."""
  modeKeys = c.mode_keys(impulses.shape[1])
  df = pd.DataFrame(impulses, columns=modeKeys)
  df.insert(0, c.tauKey, [grid.tau(i) for i in range(1, grid.subdivision)])
  df.insert(0, c.impulseIndexKey, list(range(1, grid.subdivision)))
  return df


def hold_frame(holds: np.ndarray, grid: TimeGrid) -> pd.DataFrame:
  """Row i-1 holds v_{i,n}, active on (tau_{i-1}, tau_i]."""
  modeKeys = c.mode_keys(holds.shape[1])
  df = pd.DataFrame(holds, columns=modeKeys)
  df.insert(0, c.cellEndKey, [grid.tau(i) for i in range(1, grid.subdivision + 1)])
  df.insert(0, c.cellStartKey, [grid.tau(i - 1) for i in range(1, grid.subdivision + 1)])
  df.insert(0, c.holdIndexKey, list(range(1, grid.subdivision + 1)))
  return df


def convergence_frame(records: List[ErrorRecord]) -> pd.DataFrame:
  rows = [
    {
      c.problemTagKey: r.problemTag,
      c.nKey: r.n,
      c.hKey: r.h,
      c.controlErrorKey: r.controlErrorL2,
      c.stateErrorL2Key: r.stateErrorLp[2.0],
      c.stateErrorL4Key: r.stateErrorLp[4.0],
      c.stateErrorSupKey: r.stateErrorLp[np.inf],
      c.stateErrorH1SupKey: r.stateErrorH1Sup,
      c.costGapKey: r.costGap,
      c.costKey: r.cost,
      c.baselineCostKey: r.baselineCost,
      c.iterationsKey: r.iterations,
    }
    for r in records
  ]
  return pd.DataFrame(rows, columns=c.convergenceCsvColumns)


def convergence_payload(report: ConvergenceReport) -> Dict[str, Any]:
  return {
    "config": report.config,
    "degenerate": report.degenerate,
    "sampledCostGapNonnegative": report.sampledCostGapNonnegative,
    "passed": report.passed,
    "checks": [
      {
        "problem": check.problemTag,
        "metric": check.metric,
        "theoreticalRate": check.theoreticalRate,
        "minimumSlope": check.minimumSlope,
        "slope": check.fit.slope,
        "prefactor": check.fit.prefactor,
        "numPoints": check.fit.numPoints,
        "degenerate": check.fit.degenerate,
        "passed": check.passed,
      }
      for check in report.checks
    ],
  }


def lemma_payload(result: LemmaResult) -> Dict[str, Any]:
  return {
    "slopes": result.slopes,
    "minimumSlopes": result.minimumSlopes,
    "maximumSlopes": result.maximumSlopes,
    "passed": result.passed,
  }
