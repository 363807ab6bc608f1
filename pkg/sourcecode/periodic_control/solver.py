from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass
import time
from typing import Optional, Tuple

from . import constants as c
from .heat_solver import HeatSemigroup, TimeGrid, cell_norm
from .linear_solvers.conjugate_gradient import CGResult, ConjugateGradient
from .linear_solvers.dense_oracle import dense_solve
from .spectral_core import Domain1D, spectral_field

import numpy as np


@dataclass(frozen=True, eq=False)
class OCPConfig:
  """Problem data shared by the continuous, impulse and sampled-data solvers.

  target holds y_d as cell values on the fine grid, shape (numSteps, numModes).
  """

  domain: Domain1D
  grid: TimeGrid
  numModes: int
  target: np.ndarray
  cgTol: float = c.defaultCgTol
  cgMaxIter: int = c.defaultCgMaxIter

  def __post_init__(self):
    object.__setattr__(self, "target", spectral_field(self.target))
    if not self.cgTol > 0:
      raise ValueError(f"cg_tol must be positive, got {self.cgTol}")
    if self.cgMaxIter < 1:
      raise ValueError(f"cg_max_iter must be >= 1, got {self.cgMaxIter}")
    if self.numModes < 1:
      raise ValueError(f"Number of modes must be >= 1, got {self.numModes}")
    if self.target.shape != (self.grid.numSteps, self.numModes):
      raise ValueError(
        f"Target has shape {self.target.shape}, expected {(self.grid.numSteps, self.numModes)}"
      )

  @property
  def targetNorm(self) -> float:
    """||y_d||_{L2(0,T;L2)}."""
    return cell_norm(self.target, self.grid)


class ReducedSolver(ABC):
  """Base class for solvers of a reduced PMP optimality map A x = b.

  Subclasses describe their control space (shape, inner product, residual norm), the linear
  part A and the right-hand side b; `solve` runs conjugate gradients and hands the converged
  control to `_build_solution`, which rebuilds state and adjoint through the same code path.
  """

  def __init__(self, cfg: OCPConfig, logging: bool = True) -> None:
    self._cfg = cfg
    self._logging = logging
    self._semigroup = HeatSemigroup(cfg.domain, cfg.numModes)

  @property
  def cfg(self) -> OCPConfig:
    return self._cfg

  @property
  def semigroup(self) -> HeatSemigroup:
    return self._semigroup

  @contextmanager
  def time_block(self, label):
    start = time.time()
    try:
      yield
    finally:
      end = time.time()
      if self._logging:
        print(
          f"{self.get_name()} {label} elapsed time: {end - start:.2f} secs ({((end-start)/60.0):.2f} mins)"
        )

  def get_name(self) -> str:
    return type(self).__name__

  @property
  @abstractmethod
  def grid(self) -> TimeGrid:
    """Time grid carrying the subdivision used by this solver."""

  @abstractmethod
  def unknown_shape(self) -> Tuple[int, int]:
    """Shape of the control unknowns."""

  @abstractmethod
  def inner(self, first: np.ndarray, second: np.ndarray) -> float:
    """Inner product on the control space in which the reduced map is self-adjoint."""

  @abstractmethod
  def residual_norm(self, residual: np.ndarray) -> float:
    """Norm of b - A x in which the optimality residual is reported."""

  @abstractmethod
  def reduced_apply(self, control: np.ndarray) -> np.ndarray:
    """Linear part A of the optimality map (target set to zero)."""

  @abstractmethod
  def right_hand_side(self) -> np.ndarray:
    """b, built from the adjoint driven by -y_d with zero control."""

  @abstractmethod
  def _build_solution(self, result: CGResult):
    """Rebuilds state, adjoint and cost from a converged control."""

  def tag(self) -> str:
    return self.get_name()

  def solve(self, initialGuess: Optional[np.ndarray] = None):
    """Solves the reduced optimality system by conjugate gradients.

    Raises:
      ConvergenceError if CG does not reach cgTol * (1 + ||y_d||) within cgMaxIter iterations.
    """
    cg = ConjugateGradient(self._cfg.cgTol, self._cfg.cgMaxIter, logging=self._logging)
    with self.time_block("solve"):
      rhs = self.right_hand_side()
      result = cg.solve(
        self.reduced_apply,
        rhs,
        self.inner,
        initialGuess=initialGuess,
        residualNorm=self.residual_norm,
        scale=1.0 + self._cfg.targetNorm,
        objectiveOffset=0.5 * self._cfg.targetNorm**2,
        tag=self.tag(),
      )
      return self._build_solution(result)

  def dense_oracle_solve(self, maxUnknowns: int = c.maxOracleUnknowns) -> np.ndarray:
    """Optimal control from a dense factorization of the assembled reduced map."""
    with self.time_block("dense oracle"):
      return dense_solve(self.reduced_apply, self.right_hand_side(), maxUnknowns)

  def _check_periodic(self, residual: float, label: str) -> None:
    assert residual <= c.periodicityTolerance, (
      f"{self.tag()} {label} periodicity residual {residual:.3e} exceeds tolerance"
    )
