import json
import os

from periodic_control import constants as c
from periodic_control.constants import ConvergenceError
from periodic_control.runner import main

import pandas as pd
import pytest


def _run(argv):
  with pytest.raises(SystemExit) as info:
    main(argv)
  return info.value.code


def _read_json(outDir, name):
  with open(os.path.join(outDir, name)) as handle:
    return json.load(handle)


def test_solve_writes_outputs(tmp_path):
  out = str(tmp_path)
  assert _run(["solve", "--modes", "4", "--timesteps", "64", "--out", out, "--quiet"]) == 0
  report = _read_json(out, c.ocpReportOutputPath)
  assert 0 < report["cost"] < report["zeroControlCost"]
  assert report["periodicityResidual"] <= 1e-10
  state = pd.read_csv(os.path.join(out, c.ocpStateOutputPath))
  assert list(state.columns) == [c.timeKey, "c1", "c2", "c3", "c4"]
  assert len(state) == 65
  assert len(pd.read_csv(os.path.join(out, c.ocpControlOutputPath))) == 64


def test_solve_zero_target(tmp_path):
  out = str(tmp_path)
  argv = ["solve", "--modes", "4", "--timesteps", "64", "--target", "zero", "--out", out, "--quiet"]
  assert _run(argv) == 0
  assert _read_json(out, c.ocpReportOutputPath)["cost"] == 0
  control = pd.read_csv(os.path.join(out, c.ocpControlOutputPath))
  assert (control[c.mode_keys(4)] == 0).all().all()


@pytest.mark.parametrize(
  "command,files",
  [
    ("impulse", [c.impulseControlOutputPath, c.impulseStateOutputPath, c.impulseReportOutputPath]),
    ("sampled", [c.sampledControlOutputPath, c.sampledStateOutputPath, c.sampledReportOutputPath]),
  ],
)
def test_approximations(tmp_path, command, files):
  out = str(tmp_path)
  assert _run([command, "--modes", "4", "--timesteps", "64", "-n", "4", "--out", out, "--quiet"]) == 0
  for name in files:
    assert os.path.isfile(os.path.join(out, name))


def test_oracle_defaults(tmp_path):
  out = str(tmp_path)
  assert _run(["oracle", "--out", out, "--quiet"]) == 0
  table = pd.read_csv(os.path.join(out, c.oracleCsvOutputPath))
  assert list(table[c.unknownsKey]) == [256, 12, 16]
  assert (table[c.deviationKey] <= 1e-8).all()
  assert _read_json(out, c.oracleJsonOutputPath)["passed"]


def test_oracle_zero_target(tmp_path):
  out = str(tmp_path)
  assert _run(["oracle", "--target", "zero", "--out", out, "--quiet"]) == 0
  assert _read_json(out, c.oracleJsonOutputPath)["maxRelativeDeviation"] == 0


def test_oracle_oversize_is_config_error(tmp_path, capsys):
  out = str(tmp_path / "never")
  assert _run(["oracle", "--modes", "8", "--timesteps", "128", "--out", out]) == 2
  assert "unknowns" in capsys.readouterr().err
  assert not os.path.exists(out)


def test_missing_config_file(tmp_path, capsys):
  assert _run(["solve", "--config", str(tmp_path / "absent.yaml"), "--out", str(tmp_path)]) == 2
  assert "not found" in capsys.readouterr().err


def test_bad_n_list_is_config_error(tmp_path):
  assert _run(["converge", "--n-list", "3,4,8,16", "--timesteps", "128", "--out", str(tmp_path)]) == 2
  assert _run(["converge", "--n-list", "4,x", "--out", str(tmp_path)]) == 2


def test_nonconvergence_exit_code(tmp_path, capsys):
  config = tmp_path / "tight.yaml"
  config.write_text("problem:\n  cg_tol: 1.0e-14\n  cg_max_iter: 1\n")
  argv = ["solve", "--config", str(config), "--modes", "4", "--timesteps", "64", "--out", str(tmp_path), "--quiet"]
  assert _run(argv) == 3
  assert "did not converge" in capsys.readouterr().err


def test_converge_zero_target_is_degenerate(tmp_path):
  out = str(tmp_path)
  argv = ["converge", "--modes", "4", "--timesteps", "128", "--n-list", "2,4,8,16", "--target", "zero"]
  assert _run(argv + ["--out", out, "--quiet"]) == 0
  payload = _read_json(out, c.convergenceJsonOutputPath)
  assert payload["degenerate"]
  assert payload["checks"] == []
  assert len(pd.read_csv(os.path.join(out, c.convergenceCsvOutputPath))) == 8


def test_converge_is_byte_identical(tmp_path):
  argv = ["converge", "--modes", "4", "--timesteps", "128", "--n-list", "2,4,8,16", "--quiet"]
  first, second = str(tmp_path / "first"), str(tmp_path / "second")
  codes = {_run(argv + ["--out", first]), _run(argv + ["--out", second, "--parallel"])}
  # The impulse control error misses h^(1/2) on these coarse subdivisions.
  assert codes == {4}
  checks = _read_json(first, c.convergenceJsonOutputPath)["checks"]
  failed = [(check["problem"], check["metric"]) for check in checks if not check["passed"]]
  assert ("impulse", "controlErrorL2") in failed
  for name in (c.convergenceCsvOutputPath, c.convergenceJsonOutputPath):
    with open(os.path.join(first, name), "rb") as a, open(os.path.join(second, name), "rb") as b:
      assert a.read() == b.read()


def test_parallel_converge_failure_exit_code(tmp_path, monkeypatch, capsys):
  def failing_solve(cfg, n, **kwargs):
    raise ConvergenceError(1.0, 5, f"impulse n={n}")

  monkeypatch.setattr("periodic_control.convergence.solve_iocp", failing_solve)
  argv = ["converge", "--modes", "4", "--timesteps", "128", "--n-list", "2,4,8,16", "--parallel"]
  assert _run(argv + ["--out", str(tmp_path), "--quiet"]) == 3
  assert "impulse n=" in capsys.readouterr().err


def test_lemmas(tmp_path):
  out = str(tmp_path)
  assert _run(["lemmas", "--out", out, "--quiet"]) == 0
  payload = _read_json(out, c.lemmasJsonOutputPath)
  assert set(payload["experiments"]) == {"compare3", "intuitive", "mollifier"}
  for name in (c.compareLemmaOutputPath, c.intuitiveLemmaOutputPath, c.mollifierLemmaOutputPath):
    assert os.path.isfile(os.path.join(out, name))
