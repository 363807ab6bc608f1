"""Runs one command end to end: build the problem, solve, check, write outputs.

Every cmd_* function expects a validated RunConfig and returns an ExitCodes member; solver
failures propagate as ConvergenceError so the caller can map them to an exit status.
"""
import os
from typing import Any, Callable, Dict, List

from . import constants as c
from .constants import OracleComparison
from .convergence import run_convergence_study
from .enums import Commands, ExitCodes
from .impulse_solver import ImpulseSolver
from .lemmas import experiment_compare3, experiment_intuitive, experiment_mollifier
from .linear_solvers.dense_oracle import relative_deviation
from .ocp_solver import OCPSolver
from .process_data import (
  RunConfig,
  build_ocp_config,
  cell_frame,
  convergence_frame,
  convergence_payload,
  hold_frame,
  impulse_frame,
  lemma_payload,
  trajectory_frame,
  write_csv,
  write_json,
)
from .sampled_solver import SampledSolver
from .solver import ReducedSolver

import numpy as np
import pandas as pd


def _output_path(cfg: RunConfig, name: str) -> str:
  return os.path.join(cfg.outDir, name)


def _solution_report(cfg: RunConfig, solution, targetNorm: float) -> Dict[str, Any]:
  return {
    "config": cfg.snapshot(),
    "cost": solution.cost,
    "zeroControlCost": 0.5 * targetNorm**2,
    "iterations": solution.iterations,
    "residual": solution.residual,
    "periodicityResidual": solution.periodicityResidual,
  }


def cmd_solve(cfg: RunConfig) -> ExitCodes:
  ocpConfig = build_ocp_config(cfg)
  solution = OCPSolver(ocpConfig, logging=cfg.logging).solve()
  grid = ocpConfig.grid
  write_csv(cell_frame(solution.control, grid), _output_path(cfg, c.ocpControlOutputPath))
  write_csv(trajectory_frame(solution.state, grid), _output_path(cfg, c.ocpStateOutputPath))
  write_csv(trajectory_frame(solution.adjoint, grid), _output_path(cfg, c.ocpAdjointOutputPath))
  write_json(
    _solution_report(cfg, solution, ocpConfig.targetNorm),
    _output_path(cfg, c.ocpReportOutputPath),
  )
  return ExitCodes.success


def cmd_impulse(cfg: RunConfig) -> ExitCodes:
  ocpConfig = build_ocp_config(cfg)
  solver = ImpulseSolver(ocpConfig, cfg.resolved_subdivision(), logging=cfg.logging)
  solution = solver.solve()
  grid = solver.grid
  write_csv(impulse_frame(solution.impulses, grid), _output_path(cfg, c.impulseControlOutputPath))
  write_csv(trajectory_frame(solution.state, grid), _output_path(cfg, c.impulseStateOutputPath))
  write_csv(trajectory_frame(solution.adjoint, grid), _output_path(cfg, c.impulseAdjointOutputPath))
  write_json(
    _solution_report(cfg, solution, ocpConfig.targetNorm),
    _output_path(cfg, c.impulseReportOutputPath),
  )
  return ExitCodes.success


def cmd_sampled(cfg: RunConfig) -> ExitCodes:
  ocpConfig = build_ocp_config(cfg)
  solver = SampledSolver(ocpConfig, cfg.resolved_subdivision(), logging=cfg.logging)
  solution = solver.solve()
  grid = solver.grid
  write_csv(hold_frame(solution.holds, grid), _output_path(cfg, c.sampledControlOutputPath))
  write_csv(trajectory_frame(solution.state, grid), _output_path(cfg, c.sampledStateOutputPath))
  write_csv(trajectory_frame(solution.adjoint, grid), _output_path(cfg, c.sampledAdjointOutputPath))
  write_json(
    _solution_report(cfg, solution, ocpConfig.targetNorm),
    _output_path(cfg, c.sampledReportOutputPath),
  )
  return ExitCodes.success


def cmd_converge(cfg: RunConfig) -> ExitCodes:
  ocpConfig = build_ocp_config(cfg)
  report = run_convergence_study(
    ocpConfig,
    cfg.nList,
    logging=cfg.logging,
    parallel=cfg.parallel,
    maxWorkers=cfg.maxWorkers,
    extraConfig={"target": cfg.target, "seed": cfg.seed},
  )
  write_csv(convergence_frame(report.records), _output_path(cfg, c.convergenceCsvOutputPath))
  write_json(convergence_payload(report), _output_path(cfg, c.convergenceJsonOutputPath))
  return ExitCodes.success if report.passed else ExitCodes.acceptanceFailure


def cmd_lemmas(cfg: RunConfig) -> ExitCodes:
  domain = cfg.domain()
  firstMode = np.zeros(cfg.compareNumModes)
  firstMode[0] = 1.0
  with c.time_block("compare3", cfg.logging):
    compare = experiment_compare3(
      firstMode,
      domain,
      cfg.deltas(),
      cfg.compareNormOrders,
      cfg.compareT1,
      cfg.compareT2,
      logging=cfg.logging,
    )
  with c.time_block("intuitive", cfg.logging):
    intuitive = experiment_intuitive(
      np.array([1.0]), domain, cfg.intuitiveOffsets, cfg.intuitiveNumModes, logging=cfg.logging
    )
  with c.time_block("mollifier", cfg.logging):
    mollifier = experiment_mollifier(
      domain,
      cfg.epsilons(),
      cfg.mollifierNormOrders,
      cfg.mollifierGridPoints,
      logging=cfg.logging,
    )
  write_csv(compare.table, _output_path(cfg, c.compareLemmaOutputPath))
  write_csv(intuitive.table, _output_path(cfg, c.intuitiveLemmaOutputPath))
  write_csv(mollifier.table, _output_path(cfg, c.mollifierLemmaOutputPath))
  results = [compare, intuitive, mollifier]
  write_json(
    {
      "config": cfg.snapshot(),
      "experiments": {r.name: lemma_payload(r) for r in results},
      "passed": all(r.passed for r in results),
    },
    _output_path(cfg, c.lemmasJsonOutputPath),
  )
  return ExitCodes.success if all(r.passed for r in results) else ExitCodes.acceptanceFailure


def compare_with_oracle(solver: ReducedSolver) -> OracleComparison:
  """Relative deviation between the CG control and the dense-factorization control."""
  cgSolution = solver.solve()
  oracle = solver.dense_oracle_solve()
  return OracleComparison(
    solverName=solver.tag(),
    unknowns=int(np.prod(solver.unknown_shape())),
    maxRelativeDeviation=relative_deviation(cgSolution.unknowns, oracle),
  )


def cmd_oracle(cfg: RunConfig) -> ExitCodes:
  ocpConfig = build_ocp_config(cfg)
  n = cfg.resolved_subdivision()
  solvers: List[ReducedSolver] = [
    OCPSolver(ocpConfig, logging=cfg.logging),
    ImpulseSolver(ocpConfig, n, logging=cfg.logging),
    SampledSolver(ocpConfig, n, logging=cfg.logging),
  ]
  comparisons = [compare_with_oracle(solver) for solver in solvers]
  table = pd.DataFrame(
    [
      {c.solverKey: r.solverName, c.unknownsKey: r.unknowns, c.deviationKey: r.maxRelativeDeviation}
      for r in comparisons
    ],
    columns=c.oracleColumns,
  )
  worst = max(r.maxRelativeDeviation for r in comparisons)
  passed = worst <= c.oracleTolerance
  if cfg.logging:
    print(table.to_string(index=False))
  write_csv(table, _output_path(cfg, c.oracleCsvOutputPath))
  write_json(
    {
      "config": cfg.snapshot(),
      "maxRelativeDeviation": worst,
      "tolerance": c.oracleTolerance,
      "passed": passed,
    },
    _output_path(cfg, c.oracleJsonOutputPath),
  )
  return ExitCodes.success if passed else ExitCodes.acceptanceFailure


_commandTable: Dict[Commands, Callable[[RunConfig], ExitCodes]] = {
  Commands.solve: cmd_solve,
  Commands.impulse: cmd_impulse,
  Commands.sampled: cmd_sampled,
  Commands.converge: cmd_converge,
  Commands.lemmas: cmd_lemmas,
  Commands.oracle: cmd_oracle,
}


def run_command(cfg: RunConfig) -> ExitCodes:
  """Dispatches a validated configuration to its command."""
  os.makedirs(cfg.outDir, exist_ok=True)
  with c.time_block(f"Command {cfg.command.name}", cfg.logging):
    return _commandTable[cfg.command](cfg)
