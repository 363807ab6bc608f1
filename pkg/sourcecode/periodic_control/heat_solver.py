"""Exact modal propagation of the Dirichlet heat semigroup on a uniform time grid.

Sources are piecewise constant in time: the value stored for cell m acts on (t_m, t_{m+1}].
Each step uses the exponential-integrator functions phi_1 and phi_2, so a constant source is
integrated without any time-discretization error.  Every trajectory carries its nodal values
together with the exact time-mean over each cell; adjoint right-hand sides are built from
those means.  Solver trajectories also carry the exact spread int (y - mean)^2 over each cell,
which completes the tracking integral of the reported costs.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

from . import constants as c
from .spectral_core import (
  CouplingMatrix,
  Domain1D,
  SpectralField,
  apply_indicator,
  coupling_matrix,
  eigenvalues,
  spectral_field,
)

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
  """Uniform grid t_m = m T / N_t carrying the subdivision tau_i = i T / n."""

  horizon: float
  numSteps: int
  subdivision: int = 1

  def __post_init__(self):
    violations = self.violations()
    if violations:
      raise ValueError("; ".join(violations))

  def violations(self) -> List[str]:
    problems = []
    if not self.horizon > 0:
      problems.append(f"horizon T must be positive, got {self.horizon}")
    if self.numSteps < 1:
      problems.append(f"number of time steps must be >= 1, got {self.numSteps}")
    if self.subdivision < 1:
      problems.append(f"subdivision n must be >= 1, got {self.subdivision}")
    elif self.numSteps % self.subdivision != 0:
      problems.append(
        f"subdivision n={self.subdivision} must divide the number of time steps {self.numSteps}"
      )
    return problems

  @property
  def dt(self) -> float:
    return self.horizon / self.numSteps

  @property
  def h(self) -> float:
    return self.horizon / self.subdivision

  @property
  def stepsPerInterval(self) -> int:
    return self.numSteps // self.subdivision

  @property
  def times(self) -> np.ndarray:
    return np.linspace(0.0, self.horizon, self.numSteps + 1)

  def tau(self, i: int) -> float:
    return i * self.h

  def tau_node(self, i: int) -> int:
    """Grid index of tau_i."""
    return i * self.stepsPerInterval

  def with_subdivision(self, n: int) -> "TimeGrid":
    return TimeGrid(self.horizon, self.numSteps, n)


@dataclass(frozen=True, eq=False)
class Trajectory:
  """Nodal values y(t_m), shape (N_t+1, K), and exact cell means, shape (N_t, K).

  jumpNodes lists the grid indices where the trajectory jumps; at those nodes `nodes` holds
  the value before the jump (the piece ending there) and `jumpValues` the value after it.
  cellSpread, shape (N_t, K), holds int_{cell} (y_k - mean_k)^2 dt. It is only known for
  trajectories produced by a solve, so sums and differences drop it.
  """

  nodes: np.ndarray
  cellMeans: np.ndarray
  jumpNodes: Tuple[int, ...] = ()
  jumpValues: Optional[np.ndarray] = None
  cellSpread: Optional[np.ndarray] = None

  def __post_init__(self):
    assert self.nodes.shape[0] == self.cellMeans.shape[0] + 1, "one more node than cells"
    assert self.nodes.shape[1] == self.cellMeans.shape[1], "nodes and means share K"
    if self.jumpNodes:
      assert self.jumpValues is not None and self.jumpValues.shape == (
        len(self.jumpNodes),
        self.nodes.shape[1],
      ), "one jump value per jump node"
    if self.cellSpread is not None:
      assert self.cellSpread.shape == self.cellMeans.shape, "one spread per cell mean"

  @property
  def numModes(self) -> int:
    return self.nodes.shape[1]

  @property
  def numSteps(self) -> int:
    return self.cellMeans.shape[0]

  @property
  def is_broken(self) -> bool:
    return len(self.jumpNodes) > 0

  def right_limit(self, m: int) -> np.ndarray:
    if m in self.jumpNodes:
      return self.jumpValues[self.jumpNodes.index(m)]
    return self.nodes[m]

  def pieces(self) -> List[np.ndarray]:
    """Nodal values of each continuous piece, starting from the value after its jump."""
    breaks = [0] + [m for m in self.jumpNodes if 0 < m < self.numSteps] + [self.numSteps]
    out = []
    for start, end in zip(breaks[:-1], breaks[1:]):
      piece = self.nodes[start : end + 1].copy()
      piece[0] = self.right_limit(start)
      out.append(piece)
    return out

  def periodicity_residual(self) -> float:
    """||y(T) - y(0)|| / max(1, ||y(0)||)."""
    start = self.right_limit(0)
    return float(
      np.linalg.norm(self.nodes[-1] - start) / max(1.0, float(np.linalg.norm(start)))
    )

  def _combine(self, other: "Trajectory", sign: float) -> "Trajectory":
    if self.nodes.shape != other.nodes.shape:
      raise ValueError(f"Trajectory shape mismatch: {self.nodes.shape} vs {other.nodes.shape}")
    jumpNodes = tuple(sorted(set(self.jumpNodes) | set(other.jumpNodes)))
    jumpValues = None
    if jumpNodes:
      jumpValues = np.array(
        [self.right_limit(m) + sign * other.right_limit(m) for m in jumpNodes]
      )
    cls = BrokenTrajectory if jumpNodes else Trajectory
    return cls(
      self.nodes + sign * other.nodes,
      self.cellMeans + sign * other.cellMeans,
      jumpNodes,
      jumpValues,
    )

  def __add__(self, other: "Trajectory") -> "Trajectory":
    return self._combine(other, 1.0)

  def __sub__(self, other: "Trajectory") -> "Trajectory":
    return self._combine(other, -1.0)

  def scaled(self, factor: float) -> "Trajectory":
    return type(self)(
      factor * self.nodes,
      factor * self.cellMeans,
      self.jumpNodes,
      None if self.jumpValues is None else factor * self.jumpValues,
      None if self.cellSpread is None else factor**2 * self.cellSpread,
    )


class BrokenTrajectory(Trajectory):
  """Impulse-system state y_n(t) = y_{i,n}(t) on (tau_{i-1}, tau_i], with jumps at tau_1..tau_{n-1}."""


def phi1(x: np.ndarray) -> np.ndarray:
  """(1 - e^{-x}) / x, with phi1(0) = 1."""
  x = np.asarray(x, dtype=np.float64)
  small = x < c.phiSeriesThreshold
  safe = np.where(small, 1.0, x)
  return np.where(small, 1.0 - x / 2.0 + x * x / 6.0, -np.expm1(-safe) / safe)


def phi2(x: np.ndarray) -> np.ndarray:
  """(x - 1 + e^{-x}) / x^2, with phi2(0) = 1/2."""
  x = np.asarray(x, dtype=np.float64)
  small = x < c.phiSeriesThreshold
  safe = np.where(small, 1.0, x)
  return np.where(
    small, 0.5 - x / 6.0 + x * x / 24.0, (safe + np.expm1(-safe)) / (safe * safe)
  )


def phi_spread(x: np.ndarray) -> np.ndarray:
  """phi1(2x) - phi1(x)^2, the variance of e^{-x s} for s uniform on [0, 1]."""
  x = np.asarray(x, dtype=np.float64)
  series = x * x / 12.0 - x**3 / 12.0 + 17.0 * x**4 / 360.0
  return np.where(x < c.spreadSeriesThreshold, series, phi1(2.0 * x) - phi1(x) ** 2)


def repeat_over_intervals(intervalValues: np.ndarray, grid: TimeGrid) -> np.ndarray:
  """Cell values of a function that is constant on each (tau_{i-1}, tau_i]."""
  if intervalValues.shape[0] != grid.subdivision:
    raise ValueError(
      f"Expected {grid.subdivision} interval values, got {intervalValues.shape[0]}"
    )
  return np.repeat(intervalValues, grid.stepsPerInterval, axis=0)


def interval_integrals(cellValues: np.ndarray, grid: TimeGrid) -> np.ndarray:
  """int_{tau_{i-1}}^{tau_i} of a piecewise-constant function given its cell values."""
  if cellValues.shape[0] != grid.numSteps:
    raise ValueError(f"Expected {grid.numSteps} cell values, got {cellValues.shape[0]}")
  blocks = cellValues.reshape(grid.subdivision, grid.stepsPerInterval, -1)
  return grid.dt * blocks.sum(axis=1)


def cell_norm(cellValues: np.ndarray, grid: TimeGrid) -> float:
  """L2(0,T;L2) norm of a piecewise-constant-in-time function."""
  return float(np.sqrt(grid.dt * np.sum(cellValues**2)))


def cell_inner(first: np.ndarray, second: np.ndarray, grid: TimeGrid) -> float:
  return float(grid.dt * np.sum(first * second))


def tracking_integral(state: Trajectory, target: np.ndarray, grid: TimeGrid) -> float:
  """int ||y - y_d||^2 dt for a target that is constant on each cell.

  Splits into sum dt ||mean - y_d||^2 plus the cell spread of y, so it is exact whenever the
  state carries its spread and reduces to the cell-mean functional otherwise.
  """
  if state.cellMeans.shape != target.shape:
    raise ValueError(f"State has shape {state.cellMeans.shape}, target has {target.shape}")
  total = cell_norm(state.cellMeans - target, grid) ** 2
  if state.cellSpread is not None:
    total += float(np.sum(state.cellSpread))
  return total


class HeatSemigroup:
  """Propagator of dy/dt = Delta y + f on span{phi_1..phi_K}, diagonal in the sine basis."""

  def __init__(self, domain: Domain1D, numModes: int = c.defaultNumModes) -> None:
    self.domain = domain
    self.numModes = numModes
    self.lambdas = eigenvalues(numModes, domain)
    self.coupling: CouplingMatrix = coupling_matrix(domain, numModes)

  def decay(self, t: float) -> np.ndarray:
    """e^{-lambda_k t}, flushed to 0 where lambda_k t exceeds the cutoff."""
    exponent = self.lambdas * t
    return np.where(
      exponent > c.decayExponentCutoff, 0.0, np.exp(-np.minimum(exponent, c.decayExponentCutoff))
    )

  def _check_field(self, field: SpectralField, label: str) -> SpectralField:
    field = spectral_field(field)
    if field.shape[-1] != self.numModes:
      raise ValueError(f"{label} has {field.shape[-1]} modes, expected {self.numModes}")
    return field

  def _check_source(self, source: np.ndarray, grid: TimeGrid, label: str = "source") -> None:
    spectral_field(source)
    if source.shape != (grid.numSteps, self.numModes):
      raise ValueError(
        f"{label} has shape {source.shape}, expected {(grid.numSteps, self.numModes)}"
      )

  def propagate_free(self, y0: SpectralField, t: float) -> SpectralField:
    """e^{t Delta} y0."""
    if t < 0:
      raise ValueError(f"Propagation time must be >= 0, got {t}")
    y0 = self._check_field(y0, "initial state")
    return self.decay(t) * y0

  def step_with_source(self, y: SpectralField, fCell: SpectralField, dt: float) -> SpectralField:
    """Exact solution after dt of y' = -lambda y + f with f constant on the cell."""
    if not dt > 0:
      raise ValueError(f"Step size must be positive, got {dt}")
    y = self._check_field(y, "state")
    fCell = self._check_field(fCell, "source")
    return self.decay(dt) * y + dt * phi1(self.lambdas * dt) * fCell

  def solve_forward(self, y0: SpectralField, source: np.ndarray, grid: TimeGrid) -> Trajectory:
    y0 = self._check_field(y0, "initial state")
    self._check_source(source, grid)
    dt = grid.dt
    x = self.lambdas * dt
    decay = self.decay(dt)
    gain = dt * phi1(x)
    meanStateWeight = phi1(x)
    meanSourceWeight = dt * phi2(x)

    nodes = np.empty((grid.numSteps + 1, self.numModes))
    means = np.empty((grid.numSteps, self.numModes))
    nodes[0] = y0
    for m in range(grid.numSteps):
      means[m] = meanStateWeight * nodes[m] + meanSourceWeight * source[m]
      nodes[m + 1] = decay * nodes[m] + gain * source[m]
    # y(t_m + s) = f/lambda + (y(t_m) - f/lambda) e^{-lambda s} on each cell
    offsets = nodes[:-1] - source / self.lambdas
    spread = dt * offsets**2 * phi_spread(x)
    return Trajectory(nodes, means, cellSpread=spread)

  def _periodic_gain(self, horizon: float) -> np.ndarray:
    """(1 - e^{-lambda_k T})^{-1}, finite for every k since lambda_k T > 0."""
    return 1.0 / (1.0 - self.decay(horizon))

  def solve_periodic(self, source: np.ndarray, grid: TimeGrid) -> Trajectory:
    """Unique solution with y(0) = y(T): y(0) = (I - e^{T Delta})^{-1} Phi, Phi = y(T) from rest."""
    self._check_source(source, grid)
    fromRest = self.solve_forward(np.zeros(self.numModes), source, grid)
    y0 = self._periodic_gain(grid.horizon) * fromRest.nodes[-1]
    return self.solve_forward(y0, source, grid)

  def solve_periodic_adjoint(self, rhs: np.ndarray, grid: TimeGrid) -> Trajectory:
    """Periodic solution of dp/dt + Delta p = rhs.

    With s = T - t, q(s) = p(T - s) solves dq/ds - Delta q = -rhs(T - s).
    """
    self._check_source(rhs, grid, "adjoint right-hand side")
    reversed_ = self.solve_periodic(-rhs[::-1], grid)
    return Trajectory(
      reversed_.nodes[::-1].copy(),
      reversed_.cellMeans[::-1].copy(),
      cellSpread=reversed_.cellSpread[::-1].copy(),
    )

  def solve_impulse_periodic(self, impulses: np.ndarray, grid: TimeGrid) -> BrokenTrajectory:
    """Free decay with jumps chi_omega u_{i-1,n} at tau_{i-1}, i = 2..n, and y(0) = y(T).

    y_{1,n}(0) = (I - e^{T Delta})^{-1} sum_{j=2}^{n} e^{(T - tau_{j-1}) Delta} chi_omega u_{j-1,n}.
    """
    n = grid.subdivision
    if n < 2:
      raise ValueError(f"Impulse problems need n >= 2, got {n}")
    if impulses.shape != (n - 1, self.numModes):
      raise ValueError(f"Impulses have shape {impulses.shape}, expected {(n - 1, self.numModes)}")
    jumps = apply_indicator(self.coupling, impulses)
    y0 = np.zeros(self.numModes)
    for j in range(2, n + 1):
      y0 += self.decay(grid.horizon - grid.tau(j - 1)) * jumps[j - 2]
    y0 *= self._periodic_gain(grid.horizon)

    stepsPerInterval = grid.stepsPerInterval
    decayTable = np.array([self.decay(k * grid.dt) for k in range(stepsPerInterval + 1)])
    meanWeight = phi1(self.lambdas * grid.dt)
    spreadWeight = grid.dt * phi_spread(self.lambdas * grid.dt)

    nodes = np.empty((grid.numSteps + 1, self.numModes))
    means = np.empty((grid.numSteps, self.numModes))
    spread = np.empty((grid.numSteps, self.numModes))
    jumpNodes = tuple(grid.tau_node(i - 1) for i in range(2, n + 1))
    jumpValues = np.empty((n - 1, self.numModes))
    nodes[0] = y0
    for i in range(1, n + 1):
      s = grid.tau_node(i - 1)
      start = y0 if i == 1 else nodes[s] + jumps[i - 2]
      if i > 1:
        jumpValues[i - 2] = start
      piece = start[None, :] * decayTable
      nodes[s + 1 : s + stepsPerInterval + 1] = piece[1:]
      means[s : s + stepsPerInterval] = meanWeight * piece[:-1]
      spread[s : s + stepsPerInterval] = spreadWeight * piece[:-1] ** 2
    return BrokenTrajectory(nodes, means, jumpNodes, jumpValues, spread)

  def energy_balance(
    self, trajectory: Trajectory, source: np.ndarray, grid: TimeGrid
  ) -> Tuple[float, float]:
    """(int ||grad y||^2 dt, int <f, y> dt) over one period of a continuous trajectory.

    The first integral uses the composite trapezoid rule on the nodes, the second is exact.
    Periodic solutions satisfy int ||grad y||^2 = int <f, y>.
    """
    self._check_source(source, grid)
    gradSquared = np.sum(self.lambdas * trajectory.nodes**2, axis=1)
    dissipation = float(grid.dt * (gradSquared.sum() - 0.5 * (gradSquared[0] + gradSquared[-1])))
    work = cell_inner(source, trajectory.cellMeans, grid)
    return dissipation, work
