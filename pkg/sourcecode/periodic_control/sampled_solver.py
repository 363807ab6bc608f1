"""Sampled-data (zero-order hold) approximation: u = v_{i,n} on (tau_{i-1}, tau_i]."""
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from . import constants as c
from .heat_solver import TimeGrid, Trajectory, interval_integrals, repeat_over_intervals
from .linear_solvers.conjugate_gradient import CGResult
from .ocp_solver import cost
from .solver import OCPConfig, ReducedSolver
from .spectral_core import apply_indicator

import numpy as np


@dataclass
class SampledSolution:
  n: int
  holds: np.ndarray
  state: Trajectory
  adjoint: Trajectory
  cost: float
  iterations: int
  residual: float
  periodicityResidual: float
  objectiveHistory: List[float] = field(default_factory=list)

  @property
  def unknowns(self) -> np.ndarray:
    return self.holds

  def control(self, grid: TimeGrid) -> np.ndarray:
    return hold_control(self.holds, grid)


def hold_control(holds: np.ndarray, grid: TimeGrid) -> np.ndarray:
  """f_n(t) = v_{i,n} for t in (tau_{i-1}, tau_i]."""
  return repeat_over_intervals(holds, grid)


class SampledSolver(ReducedSolver):
  """CG on A(V)_i = v_i - (1/h_n) chi_omega int_{tau_{i-1}}^{tau_i} p_hom dt, weight h_n."""

  def __init__(self, cfg: OCPConfig, n: int, logging: bool = True) -> None:
    super().__init__(cfg, logging)
    self._grid = cfg.grid.with_subdivision(n)
    if self._grid.stepsPerInterval < c.minStepsPerInterval:
      raise ValueError(
        f"Sampled problems need at least {c.minStepsPerInterval} time steps per interval, "
        f"got {self._grid.stepsPerInterval} for n={n}"
      )

  @property
  def grid(self) -> TimeGrid:
    return self._grid

  @property
  def n(self) -> int:
    return self._grid.subdivision

  def tag(self) -> str:
    return f"sampled n={self.n}"

  def unknown_shape(self) -> Tuple[int, int]:
    return (self.n, self.cfg.numModes)

  def inner(self, first: np.ndarray, second: np.ndarray) -> float:
    return self.grid.h * float(np.sum(first * second))

  def residual_norm(self, residual: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(residual, axis=1)))

  def state_of(self, holds: np.ndarray) -> Trajectory:
    source = apply_indicator(self.semigroup.coupling, hold_control(holds, self.grid))
    return self.semigroup.solve_periodic(source, self.grid)

  def adjoint_of(self, rhs: np.ndarray) -> Trajectory:
    return self.semigroup.solve_periodic_adjoint(rhs, self.grid)

  def _hold_feedback(self, adjoint: Trajectory) -> np.ndarray:
    averages = interval_integrals(adjoint.cellMeans, self.grid) / self.grid.h
    return apply_indicator(self.semigroup.coupling, averages)

  def reduced_apply(self, holds: np.ndarray) -> np.ndarray:
    if holds.shape != self.unknown_shape():
      raise ValueError(f"Holds have shape {holds.shape}, expected {self.unknown_shape()}")
    adjoint = self.adjoint_of(self.state_of(holds).cellMeans)
    return holds - self._hold_feedback(adjoint)

  def right_hand_side(self) -> np.ndarray:
    return self._hold_feedback(self.adjoint_of(-self.cfg.target))

  def _build_solution(self, result: CGResult) -> SampledSolution:
    holds = result.solution
    state = self.state_of(holds)
    adjoint = self.adjoint_of(state.cellMeans - self.cfg.target)
    residual = self.residual_norm(holds - self._hold_feedback(adjoint))
    periodicity = max(state.periodicity_residual(), adjoint.periodicity_residual())
    self._check_periodic(periodicity, "state/adjoint")
    return SampledSolution(
      n=self.n,
      holds=holds,
      state=state,
      adjoint=adjoint,
      cost=cost(state, hold_control(holds, self.grid), self.cfg.target, self.grid),
      iterations=result.iterations,
      residual=residual,
      periodicityResidual=periodicity,
      objectiveHistory=result.objectiveHistory,
    )


def reduced_apply_sampled(holds: np.ndarray, cfg: OCPConfig, n: int) -> np.ndarray:
  return SampledSolver(cfg, n, logging=False).reduced_apply(holds)


def solve_socp(
  cfg: OCPConfig,
  n: int,
  tol: Optional[float] = None,
  initialGuess: Optional[np.ndarray] = None,
  logging: bool = True,
) -> SampledSolution:
  if tol is not None:
    cfg = replace(cfg, cgTol=tol)
  return SampledSolver(cfg, n, logging=logging).solve(initialGuess)
