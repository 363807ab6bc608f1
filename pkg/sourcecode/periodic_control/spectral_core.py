"""Spatial side of the solver: the interval, its Dirichlet sine basis and the control region.

Every spatial function is stored as its coefficient vector in the orthonormal basis
phi_k(x) = sqrt(2/L) sin(k pi x / L), so the L2(Omega) norm of a field is the Euclidean norm
of its coefficients.  Stacks of fields (trajectories) keep the mode index on the last axis.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

from . import constants as c

import numpy as np
from scipy import integrate


# Coefficient vector (or stack of coefficient vectors, modes on the last axis).
SpectralField = np.ndarray


@dataclass(frozen=True)
class Domain1D:
  """Omega = (0, length) with control region omega = (a, b)."""

  a: float = c.defaultControlInterval[0]
  b: float = c.defaultControlInterval[1]
  length: float = c.defaultLength

  def __post_init__(self):
    if not self.length > 0:
      raise ValueError(f"Domain length must be positive, got {self.length}")
    if not (0 <= self.a < self.b <= self.length):
      raise ValueError(
        f"Control interval must satisfy 0 <= a < b <= L, got ({self.a}, {self.b}) with L={self.length}"
      )

  @property
  def is_full(self) -> bool:
    """True when omega = Omega, which selects the trivial-case code paths."""
    return self.a == 0 and self.b == self.length

  @property
  def width(self) -> float:
    return self.b - self.a


@dataclass(frozen=True)
class CouplingMatrix:
  """Gram matrix M[j][k] = int_omega phi_j phi_k dx realizing multiplication by chi_omega."""

  entries: np.ndarray
  domain: Domain1D

  @property
  def numModes(self) -> int:
    return self.entries.shape[0]


@dataclass(frozen=True)
class MollifiedIndicator:
  """Samples of chi_omega^eps and of its derivative on a uniform grid of [0, L]."""

  epsilon: float
  grid: np.ndarray
  values: np.ndarray
  gradient: np.ndarray

  @property
  def spacing(self) -> float:
    return float(self.grid[1] - self.grid[0])


def spectral_field(coeffs) -> SpectralField:
  """Validates coefficients and returns them as a float array."""
  field = np.asarray(coeffs, dtype=np.float64)
  if not np.all(np.isfinite(field)):
    raise ValueError("Spectral field coefficients must be finite")
  return field


def field_norm(field: SpectralField) -> Union[float, np.ndarray]:
  """L2(Omega) norm (Parseval), computed along the mode axis."""
  return np.linalg.norm(field, axis=-1)


def eigenvalue(k: int, domain: Domain1D) -> float:
  """Returns lambda_k = (k pi / L)^2, the k-th eigenvalue of the Dirichlet Laplacian (sign flipped)."""
  if k < 1:
    raise ValueError(f"Eigenvalue index must be >= 1, got {k}")
  return (k * np.pi / domain.length) ** 2


def eigenvalues(numModes: int, domain: Domain1D) -> np.ndarray:
  if numModes < 1:
    raise ValueError(f"Number of modes must be >= 1, got {numModes}")
  return (np.arange(1, numModes + 1) * np.pi / domain.length) ** 2


def gradient_norm(field: SpectralField, domain: Domain1D) -> Union[float, np.ndarray]:
  """H1_0 seminorm ||grad y|| = (sum_k lambda_k c_k^2)^(1/2), along the mode axis."""
  lambdas = eigenvalues(field.shape[-1], domain)
  return np.sqrt(np.sum(lambdas * field**2, axis=-1))


def _sine_antiderivative(m: np.ndarray, x: float, length: float) -> np.ndarray:
  """int_0^x cos(m pi s / L) ds, with the m = 0 case equal to x."""
  safe = np.where(m == 0, 1, m)
  return np.where(m == 0, x, length / (safe * np.pi) * np.sin(safe * np.pi * x / length))


def coupling_matrix(domain: Domain1D, numModes: int = c.defaultNumModes) -> CouplingMatrix:
  """Closed-form Gram matrix of chi_omega in the sine basis.

  Uses 2 sin(jt) sin(kt) = cos((j-k)t) - cos((j+k)t), integrated exactly over (a, b).
  """
  if numModes < 1:
    raise ValueError(f"Number of modes must be >= 1, got {numModes}")
  if domain.is_full:
    return CouplingMatrix(np.eye(numModes), domain)
  k = np.arange(1, numModes + 1)
  diff = k[:, None] - k[None, :]
  total = k[:, None] + k[None, :]
  L = domain.length
  entries = (
    _sine_antiderivative(diff, domain.b, L)
    - _sine_antiderivative(diff, domain.a, L)
    - _sine_antiderivative(total, domain.b, L)
    + _sine_antiderivative(total, domain.a, L)
  ) / L
  # Exact symmetrization removes rounding asymmetry between the (j, k) and (k, j) evaluations.
  entries = 0.5 * (entries + entries.T)
  return CouplingMatrix(entries, domain)


def apply_indicator(M: CouplingMatrix, f: SpectralField) -> SpectralField:
  """Coefficients of chi_omega f projected back onto the basis; accepts stacks of fields."""
  f = spectral_field(f)
  if f.shape[-1] != M.numModes:
    raise ValueError(f"Dimension mismatch: field has {f.shape[-1]} modes, matrix has {M.numModes}")
  if M.domain.is_full:
    return f.copy()
  return f @ M.entries


@lru_cache(maxsize=None)
def bump_normalization() -> float:
  """Constant c with int_{-1}^{1} c exp(1 / (s^2 - 1)) ds = 1."""
  mass, _ = integrate.quad(lambda s: np.exp(1.0 / (s * s - 1.0)), -1.0, 1.0, epsabs=1e-14)
  return 1.0 / mass


def bump(s: np.ndarray) -> np.ndarray:
  """Standard mollifier eta(s): smooth, even, supported in (-1, 1), unit mass."""
  s = np.asarray(s, dtype=np.float64)
  out = np.zeros_like(s)
  inside = np.abs(s) < 1
  out[inside] = bump_normalization() * np.exp(1.0 / (s[inside] ** 2 - 1.0))
  return out


def scaled_bump(x: np.ndarray, epsilon: float) -> np.ndarray:
  """eta_eps(x) = eta(x / eps) / eps."""
  return bump(np.asarray(x) / epsilon) / epsilon


def mollify_indicator(
  domain: Domain1D,
  epsilon: float,
  gridPoints: int = c.defaultMollifierGridPoints,
  simpsonNodes: int = c.mollifierSimpsonNodes,
) -> MollifiedIndicator:
  """Samples chi_omega^eps = eta_eps * chi_omega on a uniform grid of [0, L].

  chi_omega^eps(x) = int_{s_lo}^{s_hi} eta(s) ds with s_lo = max(-1, (x-b)/eps) and
  s_hi = min(1, (x-a)/eps); only points within eps of the boundary of omega need quadrature.
  The derivative is exact: eta_eps(x - a) - eta_eps(x - b).
  """
  if not (0 < epsilon < domain.width / 2):
    raise ValueError(
      f"Mollifier width must satisfy 0 < eps < (b-a)/2 = {domain.width / 2}, got {epsilon}"
    )
  if gridPoints < c.minMollifierGridPoints:
    raise ValueError(f"Need at least {c.minMollifierGridPoints} grid points, got {gridPoints}")

  x = np.linspace(0.0, domain.length, gridPoints)
  values = np.zeros_like(x)
  values[(x - domain.a >= epsilon) & (domain.b - x >= epsilon)] = 1.0

  nearBoundary = (np.abs(x - domain.a) < epsilon) | (np.abs(x - domain.b) < epsilon)
  lower = np.maximum(-1.0, (x[nearBoundary] - domain.b) / epsilon)
  upper = np.minimum(1.0, (x[nearBoundary] - domain.a) / epsilon)
  upper = np.maximum(upper, lower)
  fractions = np.linspace(0.0, 1.0, simpsonNodes)
  nodes = lower[:, None] + (upper - lower)[:, None] * fractions[None, :]
  spacing = (upper - lower) / (simpsonNodes - 1)
  values[nearBoundary] = integrate.simpson(bump(nodes), dx=1.0, axis=1) * spacing
  np.clip(values, 0.0, 1.0, out=values)

  gradient = scaled_bump(x - domain.a, epsilon) - scaled_bump(x - domain.b, epsilon)
  return MollifiedIndicator(epsilon, x, values, gradient)


def indicator_samples(domain: Domain1D, grid: np.ndarray) -> np.ndarray:
  """chi_omega on the grid (omega is open, so boundary points get 0)."""
  return ((grid > domain.a) & (grid < domain.b)).astype(np.float64)


def lp_norm_sampled(values: np.ndarray, p: float, spacing: float) -> float:
  """Composite-trapezoid L^p norm of uniformly sampled values; p = inf gives the max."""
  if not p >= 1:
    raise ValueError(f"Norm order must be >= 1 or inf, got {p}")
  magnitudes = np.abs(np.asarray(values, dtype=np.float64))
  if np.isinf(p):
    return float(np.max(magnitudes))
  return float(integrate.trapezoid(magnitudes**p, dx=spacing) ** (1.0 / p))
