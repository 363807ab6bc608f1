"""Periodic optimal control problem with distributed control on omega.

Minimizes J(y, u) = 1/2 int ||y - y_d||^2 + 1/2 int ||u||^2 subject to
y' = Delta y + chi_omega u and y(0) = y(T), over controls that are constant on each cell of
the time grid.  The optimality system is u = chi_omega p with the periodic adjoint
p' + Delta p = y - y_d.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .heat_solver import TimeGrid, Trajectory, cell_inner, cell_norm, tracking_integral
from .linear_solvers.conjugate_gradient import CGResult
from .solver import OCPConfig, ReducedSolver
from .spectral_core import apply_indicator

import numpy as np


@dataclass
class OCPSolution:
  control: np.ndarray
  state: Trajectory
  adjoint: Trajectory
  cost: float
  iterations: int
  residual: float
  periodicityResidual: float
  objectiveHistory: List[float] = field(default_factory=list)

  @property
  def unknowns(self) -> np.ndarray:
    return self.control


def cost(state: Trajectory, control: np.ndarray, target: np.ndarray, grid: TimeGrid) -> float:
  """J = 1/2 int ||y - y_d||^2 dt + 1/2 int ||u||^2 dt.

  The tracking term is exact for piecewise-constant y_d when the state carries its cell
  spread. CG minimizes the cell-mean functional, which omits that spread, so the last entry
  of the objective history sits below J by 1/2 sum of the spread.
  """
  if control.shape != target.shape or state.cellMeans.shape != target.shape:
    raise ValueError(
      f"Shape mismatch: state {state.cellMeans.shape}, control {control.shape}, target {target.shape}"
    )
  return 0.5 * tracking_integral(state, target, grid) + 0.5 * cell_norm(control, grid) ** 2


class OCPSolver(ReducedSolver):
  """CG on A(u) = u - chi_omega p_hom(u), where p_hom is the adjoint driven by y(u) alone."""

  @property
  def grid(self) -> TimeGrid:
    return self.cfg.grid

  def unknown_shape(self) -> Tuple[int, int]:
    return (self.grid.numSteps, self.cfg.numModes)

  def inner(self, first: np.ndarray, second: np.ndarray) -> float:
    return cell_inner(first, second, self.grid)

  def residual_norm(self, residual: np.ndarray) -> float:
    return cell_norm(residual, self.grid)

  def state_of(self, control: np.ndarray) -> Trajectory:
    return self.semigroup.solve_periodic(
      apply_indicator(self.semigroup.coupling, control), self.grid
    )

  def adjoint_of(self, rhs: np.ndarray) -> Trajectory:
    return self.semigroup.solve_periodic_adjoint(rhs, self.grid)

  def reduced_apply(self, control: np.ndarray) -> np.ndarray:
    if control.shape != self.unknown_shape():
      raise ValueError(f"Control has shape {control.shape}, expected {self.unknown_shape()}")
    adjoint = self.adjoint_of(self.state_of(control).cellMeans)
    return control - apply_indicator(self.semigroup.coupling, adjoint.cellMeans)

  def right_hand_side(self) -> np.ndarray:
    adjoint = self.adjoint_of(-self.cfg.target)
    return apply_indicator(self.semigroup.coupling, adjoint.cellMeans)

  def _build_solution(self, result: CGResult) -> OCPSolution:
    control = result.solution
    state = self.state_of(control)
    adjoint = self.adjoint_of(state.cellMeans - self.cfg.target)
    residual = self.residual_norm(
      control - apply_indicator(self.semigroup.coupling, adjoint.cellMeans)
    )
    periodicity = max(state.periodicity_residual(), adjoint.periodicity_residual())
    self._check_periodic(periodicity, "state/adjoint")
    return OCPSolution(
      control=control,
      state=state,
      adjoint=adjoint,
      cost=cost(state, control, self.cfg.target, self.grid),
      iterations=result.iterations,
      residual=residual,
      periodicityResidual=periodicity,
      objectiveHistory=result.objectiveHistory,
    )


def reduced_apply(control: np.ndarray, cfg: OCPConfig) -> np.ndarray:
  return OCPSolver(cfg, logging=False).reduced_apply(control)


def solve_ocp(
  cfg: OCPConfig, initialGuess: Optional[np.ndarray] = None, logging: bool = True
) -> OCPSolution:
  return OCPSolver(cfg, logging=logging).solve(initialGuess)
