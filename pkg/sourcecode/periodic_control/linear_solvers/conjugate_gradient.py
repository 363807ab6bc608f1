from dataclasses import dataclass, field
from typing import Callable, List, Optional

from .. import constants as c
from ..constants import ConvergenceError

import numpy as np


LinearMap = Callable[[np.ndarray], np.ndarray]
InnerProduct = Callable[[np.ndarray, np.ndarray], float]


@dataclass
class CGResult:
  solution: np.ndarray
  iterations: int
  residual: float
  objectiveHistory: List[float] = field(default_factory=list)


class ConjugateGradient:
  """Matrix-free conjugate gradients for A x = b with A self-adjoint and coercive.

  Vectors may have any shape; all geometry comes from the supplied inner product, so the
  reduced maps can keep their natural time weights (dt, 1/h or h).
  """

  def __init__(
    self,
    tol: float = c.defaultCgTol,
    maxIter: int = c.defaultCgMaxIter,
    printInterval: int = c.cgPrintInterval,
    logging: bool = True,
    refreshInterval: int = 50,
  ) -> None:
    if not tol > 0:
      raise ValueError(f"CG tolerance must be positive, got {tol}")
    if maxIter < 1:
      raise ValueError(f"CG iteration limit must be >= 1, got {maxIter}")
    self._tol = tol
    self._maxIter = maxIter
    self._printInterval = printInterval
    self._logging = logging
    self._refreshInterval = refreshInterval

  def _print_progress(self, tag: str, iteration: int, residual: float, objective: float) -> None:
    if self._logging:
      print(f"{tag} CG iteration {iteration}: residual {residual:.3e}, objective {objective:.12g}")

  def solve(
    self,
    apply: LinearMap,
    rhs: np.ndarray,
    inner: InnerProduct,
    initialGuess: Optional[np.ndarray] = None,
    residualNorm: Optional[Callable[[np.ndarray], float]] = None,
    scale: float = 1.0,
    objectiveOffset: float = 0.0,
    tag: str = "",
  ) -> CGResult:
    """Runs CG until residualNorm(b - A x) <= tol * scale.

    The recorded objective is q(x) = 1/2 <A x, x> - <b, x> + objectiveOffset, evaluated as
    -1/2 <x, b + r> + objectiveOffset; it is nonincreasing along the iterates.

    Raises:
      ConvergenceError if the tolerance is not met within maxIter iterations.
    """
    if residualNorm is None:
      residualNorm = lambda r: float(np.sqrt(max(inner(r, r), 0.0)))
    threshold = self._tol * scale

    x = np.zeros_like(rhs) if initialGuess is None else np.array(initialGuess, dtype=np.float64)
    if x.shape != rhs.shape:
      raise ValueError(f"Initial guess has shape {x.shape}, expected {rhs.shape}")
    r = rhs - apply(x) if initialGuess is not None else rhs.copy()
    objective = lambda: -0.5 * inner(x, rhs + r) + objectiveOffset
    history = [objective()]

    direction = r.copy()
    rr = inner(r, r)
    residual = residualNorm(r)
    iteration = 0
    while residual > threshold and iteration < self._maxIter:
      Ad = apply(direction)
      curvature = inner(direction, Ad)
      assert curvature > 0, f"{tag} operator is not positive definite (curvature {curvature})"
      alpha = rr / curvature
      x = x + alpha * direction
      iteration += 1
      if iteration % self._refreshInterval == 0:
        r = rhs - apply(x)
      else:
        r = r - alpha * Ad
      rrNew = inner(r, r)
      direction = r + (rrNew / rr) * direction
      rr = rrNew
      residual = residualNorm(r)
      history.append(objective())
      if iteration % self._printInterval == 0:
        self._print_progress(tag, iteration, residual, history[-1])

    trueResidual = residualNorm(rhs - apply(x))
    if self._logging:
      print(f"{tag} CG finished after {iteration} iterations, residual {trueResidual:.3e}")
    if trueResidual > threshold:
      raise ConvergenceError(trueResidual, iteration, tag)
    return CGResult(x, iteration, trueResidual, history)
