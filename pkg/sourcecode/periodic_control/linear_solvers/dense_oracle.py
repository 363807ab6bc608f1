"""Brute-force ground truth for the reduced optimality maps at small sizes."""
from typing import Callable, Tuple

from .. import constants as c

import numpy as np
from scipy import linalg


def assemble_dense_operator(
  apply: Callable[[np.ndarray], np.ndarray],
  shape: Tuple[int, ...],
  maxUnknowns: int = c.maxOracleUnknowns,
) -> np.ndarray:
  """Coordinate matrix of a linear map, one column per unit vector.

  Raises:
    ValueError if the number of unknowns exceeds maxUnknowns.
  """
  size = int(np.prod(shape))
  if size > maxUnknowns:
    raise ValueError(f"Dense oracle limited to {maxUnknowns} unknowns, got {size}")
  matrix = np.empty((size, size))
  basisVector = np.zeros(size)
  for j in range(size):
    basisVector[j] = 1.0
    matrix[:, j] = apply(basisVector.reshape(shape)).ravel()
    basisVector[j] = 0.0
  return matrix


def operator_asymmetry(matrix: np.ndarray) -> float:
  """max |A - A^T| relative to max |A|."""
  scale = max(float(np.max(np.abs(matrix))), np.finfo(float).tiny)
  return float(np.max(np.abs(matrix - matrix.T)) / scale)


def dense_solve(
  apply: Callable[[np.ndarray], np.ndarray],
  rhs: np.ndarray,
  maxUnknowns: int = c.maxOracleUnknowns,
) -> np.ndarray:
  """Solves A x = b by Cholesky on the assembled matrix.

  The reduced maps are self-adjoint in inner products that are scalar multiples of the
  Euclidean one, so their coordinate matrices are symmetric positive definite.
  """
  matrix = assemble_dense_operator(apply, rhs.shape, maxUnknowns)
  assert operator_asymmetry(matrix) <= c.symmetryTolerance, "assembled operator is not symmetric"
  solution = linalg.solve(matrix, rhs.ravel(), assume_a="pos")
  return solution.reshape(rhs.shape)


def relative_deviation(candidate: np.ndarray, reference: np.ndarray) -> float:
  """||candidate - reference|| / ||reference||, absolute when the reference vanishes."""
  gap = float(np.linalg.norm(candidate - reference))
  size = float(np.linalg.norm(reference))
  return gap / size if size > 0 else gap
