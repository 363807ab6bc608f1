import pickle

from periodic_control.constants import ConfigError, ConvergenceError
from periodic_control.linear_solvers.conjugate_gradient import ConjugateGradient
from periodic_control.linear_solvers.dense_oracle import (
  assemble_dense_operator,
  dense_solve,
  operator_asymmetry,
  relative_deviation,
)

import numpy as np
import pytest


def _spd_matrix(rng, size=12):
  factor = rng.standard_normal((size, size))
  return np.eye(size) + factor @ factor.T / size


def _euclidean(first, second):
  return float(np.sum(first * second))


class TestConjugateGradient:
  def test_matches_direct_solve(self, rng):
    A = _spd_matrix(rng)
    b = rng.standard_normal(12)
    result = ConjugateGradient(tol=1e-12, logging=False).solve(lambda x: A @ x, b, _euclidean)
    np.testing.assert_allclose(result.solution, np.linalg.solve(A, b), rtol=1e-9, atol=1e-11)
    assert result.residual <= 1e-12
    assert result.iterations <= 12 + 2

  def test_objective_is_nonincreasing(self, rng):
    A = _spd_matrix(rng)
    b = rng.standard_normal(12)
    history = ConjugateGradient(tol=1e-12, logging=False).solve(
      lambda x: A @ x, b, _euclidean
    ).objectiveHistory
    assert np.all(np.diff(history) <= 1e-12)
    exact = np.linalg.solve(A, b)
    assert history[-1] == pytest.approx(-0.5 * b @ exact, rel=1e-9)

  def test_works_on_matrix_shaped_unknowns(self, rng):
    A = _spd_matrix(rng, 6)
    b = rng.standard_normal((3, 2))
    apply = lambda x: (A @ x.ravel()).reshape(3, 2)
    result = ConjugateGradient(tol=1e-12, logging=False).solve(apply, b, _euclidean)
    np.testing.assert_allclose(result.solution.ravel(), np.linalg.solve(A, b.ravel()), rtol=1e-9)

  def test_exact_initial_guess_needs_no_iterations(self, rng):
    A = _spd_matrix(rng)
    exact = rng.standard_normal(12)
    result = ConjugateGradient(tol=1e-10, logging=False).solve(
      lambda x: A @ x, A @ exact, _euclidean, initialGuess=exact
    )
    assert result.iterations == 0

  def test_zero_right_hand_side(self):
    result = ConjugateGradient(logging=False).solve(lambda x: 2 * x, np.zeros(4), _euclidean)
    assert result.iterations == 0
    np.testing.assert_array_equal(result.solution, 0.0)

  def test_iteration_cap_raises(self, rng):
    A = _spd_matrix(rng, 40)
    with pytest.raises(ConvergenceError) as info:
      ConjugateGradient(tol=1e-14, maxIter=1, logging=False).solve(
        lambda x: A @ x, rng.standard_normal(40), _euclidean, tag="toy"
      )
    assert info.value.iterations == 1
    assert "toy" in str(info.value)

  def test_errors_survive_pickling(self):
    error = pickle.loads(pickle.dumps(ConvergenceError(2.5e-3, 17, "impulse n=8")))
    assert (error.residual, error.iterations, error.tag) == (2.5e-3, 17, "impulse n=8")
    assert str(error) == "impulse n=8: CG did not converge after 17 iterations (residual 2.500e-03)"
    configError = pickle.loads(pickle.dumps(ConfigError(["first problem", "second problem"])))
    assert configError.violations == ["first problem", "second problem"]
    assert "second problem" in str(configError)

  def test_indefinite_operator_is_rejected(self):
    with pytest.raises(AssertionError):
      ConjugateGradient(logging=False).solve(lambda x: -x, np.ones(3), _euclidean)

  @pytest.mark.parametrize("tol,maxIter", [(0.0, 10), (1e-8, 0)])
  def test_invalid_settings(self, tol, maxIter):
    with pytest.raises(ValueError):
      ConjugateGradient(tol=tol, maxIter=maxIter)

  def test_progress_is_printed(self, rng, capsys):
    A = _spd_matrix(rng)
    ConjugateGradient(tol=1e-12, printInterval=1).solve(lambda x: A @ x, np.ones(12), _euclidean, tag="toy")
    out = capsys.readouterr().out
    assert "toy CG iteration 1" in out
    assert "toy CG finished" in out


class TestDenseOracle:
  def test_assembles_matrix(self, rng):
    A = _spd_matrix(rng, 5)
    np.testing.assert_allclose(assemble_dense_operator(lambda x: A @ x, (5,)), A)

  def test_size_limit(self):
    with pytest.raises(ValueError):
      assemble_dense_operator(lambda x: x, (4, 4), maxUnknowns=15)

  def test_solve(self, rng):
    A = _spd_matrix(rng, 6)
    b = rng.standard_normal((2, 3))
    solution = dense_solve(lambda x: (A @ x.ravel()).reshape(2, 3), b)
    np.testing.assert_allclose(solution.ravel(), np.linalg.solve(A, b.ravel()), rtol=1e-12)

  def test_asymmetric_operator_is_rejected(self):
    A = np.array([[2.0, 1.0], [0.0, 2.0]])
    assert operator_asymmetry(A) == pytest.approx(0.5)
    with pytest.raises(AssertionError):
      dense_solve(lambda x: A @ x, np.ones(2))

  def test_relative_deviation(self):
    assert relative_deviation(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)
    assert relative_deviation(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_deviation(np.full(1, 2.0), np.zeros(1)) == 2.0
