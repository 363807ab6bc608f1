"""Impulse approximation of the periodic control problem.

The control acts as jumps chi_omega u_{i-1,n} of the state at tau_{i-1}, i = 2..n, and the
cost penalizes 1/h_n sum ||u_{i-1,n}||^2.  Optimality: u_{i-1,n} = h_n chi_omega p_n(tau_{i-1}).
"""
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from .heat_solver import (
  BrokenTrajectory,
  TimeGrid,
  Trajectory,
  repeat_over_intervals,
  tracking_integral,
)
from .linear_solvers.conjugate_gradient import CGResult
from .solver import OCPConfig, ReducedSolver
from .spectral_core import apply_indicator

import numpy as np


@dataclass
class ImpulseSolution:
  n: int
  impulses: np.ndarray
  state: BrokenTrajectory
  adjoint: Trajectory
  cost: float
  iterations: int
  residual: float
  periodicityResidual: float
  objectiveHistory: List[float] = field(default_factory=list)

  @property
  def unknowns(self) -> np.ndarray:
    return self.impulses


def impulse_cost(
  state: BrokenTrajectory, impulses: np.ndarray, target: np.ndarray, grid: TimeGrid
) -> float:
  """J_n = 1/2 (sum_i int ||y_{i,n} - y_d||^2 + (1/h_n) sum ||u_{i-1,n}||^2).

  Exact on each free-decay piece when the state carries its cell spread.
  """
  if state.cellMeans.shape != target.shape:
    raise ValueError(f"State has shape {state.cellMeans.shape}, target has {target.shape}")
  if impulses.shape != (grid.subdivision - 1, target.shape[1]):
    raise ValueError(
      f"Impulses have shape {impulses.shape}, expected {(grid.subdivision - 1, target.shape[1])}"
    )
  tracking = tracking_integral(state, target, grid)
  return 0.5 * (tracking + float(np.sum(impulses**2)) / grid.h)


def embed_impulse_control(impulses: np.ndarray, grid: TimeGrid) -> np.ndarray:
  """u_n(t) = u_{i-1,n} / h_n on (tau_{i-1}, tau_i], with u_{0,n} = 0 on the first interval."""
  if impulses.shape[0] != grid.subdivision - 1:
    raise ValueError(
      f"Expected {grid.subdivision - 1} impulses for n={grid.subdivision}, got {impulses.shape[0]}"
    )
  intervalValues = np.vstack([np.zeros((1, impulses.shape[1])), impulses / grid.h])
  return repeat_over_intervals(intervalValues, grid)


class ImpulseSolver(ReducedSolver):
  """CG on A_n(U)_i = u_{i-1} - h_n chi_omega p_hom(tau_{i-1}) in the (1/h_n)-weighted inner product."""

  def __init__(self, cfg: OCPConfig, n: int, logging: bool = True) -> None:
    if n < 2:
      raise ValueError(f"Impulse problems need n >= 2, got {n}")
    super().__init__(cfg, logging)
    self._grid = cfg.grid.with_subdivision(n)

  @property
  def grid(self) -> TimeGrid:
    return self._grid

  @property
  def n(self) -> int:
    return self._grid.subdivision

  def tag(self) -> str:
    return f"impulse n={self.n}"

  def unknown_shape(self) -> Tuple[int, int]:
    return (self.n - 1, self.cfg.numModes)

  def inner(self, first: np.ndarray, second: np.ndarray) -> float:
    return float(np.sum(first * second)) / self.grid.h

  def residual_norm(self, residual: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(residual, axis=1)))

  def impulse_nodes(self) -> List[int]:
    """Grid indices of tau_1..tau_{n-1}."""
    return [self.grid.tau_node(i - 1) for i in range(2, self.n + 1)]

  def state_of(self, impulses: np.ndarray) -> BrokenTrajectory:
    return self.semigroup.solve_impulse_periodic(impulses, self.grid)

  def adjoint_of(self, rhs: np.ndarray) -> Trajectory:
    return self.semigroup.solve_periodic_adjoint(rhs, self.grid)

  def _impulse_feedback(self, adjoint: Trajectory) -> np.ndarray:
    return self.grid.h * apply_indicator(
      self.semigroup.coupling, adjoint.nodes[self.impulse_nodes()]
    )

  def reduced_apply(self, impulses: np.ndarray) -> np.ndarray:
    if impulses.shape != self.unknown_shape():
      raise ValueError(f"Impulses have shape {impulses.shape}, expected {self.unknown_shape()}")
    adjoint = self.adjoint_of(self.state_of(impulses).cellMeans)
    return impulses - self._impulse_feedback(adjoint)

  def right_hand_side(self) -> np.ndarray:
    return self._impulse_feedback(self.adjoint_of(-self.cfg.target))

  def _build_solution(self, result: CGResult) -> ImpulseSolution:
    impulses = result.solution
    state = self.state_of(impulses)
    adjoint = self.adjoint_of(state.cellMeans - self.cfg.target)
    residual = self.residual_norm(impulses - self._impulse_feedback(adjoint))
    periodicity = max(state.periodicity_residual(), adjoint.periodicity_residual())
    self._check_periodic(periodicity, "state/adjoint")
    return ImpulseSolution(
      n=self.n,
      impulses=impulses,
      state=state,
      adjoint=adjoint,
      cost=impulse_cost(state, impulses, self.cfg.target, self.grid),
      iterations=result.iterations,
      residual=residual,
      periodicityResidual=periodicity,
      objectiveHistory=result.objectiveHistory,
    )


def reduced_apply_impulse(impulses: np.ndarray, cfg: OCPConfig, n: int) -> np.ndarray:
  return ImpulseSolver(cfg, n, logging=False).reduced_apply(impulses)


def solve_iocp(
  cfg: OCPConfig,
  n: int,
  tol: Optional[float] = None,
  initialGuess: Optional[np.ndarray] = None,
  logging: bool = True,
) -> ImpulseSolution:
  if tol is not None:
    cfg = replace(cfg, cgTol=tol)
  return ImpulseSolver(cfg, n, logging=logging).solve(initialGuess)
