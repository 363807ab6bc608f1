import argparse
import sys

from .constants import ConfigError, ConvergenceError
from .enums import Commands, ExitCodes, Targets, n_list_from_csv
from .process_data import load_config
from .run_analysis import run_command


def parse_args(argv=None):
  parser = argparse.ArgumentParser("Periodic Heat Control")
  parser.add_argument(
    "command",
    choices=[command.name for command in Commands],
    help="solve | impulse | sampled | converge | lemmas | oracle",
  )
  parser.add_argument("--config", default=None, help="YAML configuration file")
  parser.add_argument("-o", "--out", default=None, dest="outDir", help="directory for output files")
  parser.add_argument("--seed", default=None, type=int, help="seed for the random target")
  parser.add_argument(
    "--n-list",
    default=None,
    type=n_list_from_csv,
    dest="nList",
    help="CSV list of subdivision counts for the convergence study.",
  )
  parser.add_argument("--modes", default=None, type=int, dest="numModes", help="number of modes K")
  parser.add_argument(
    "--timesteps", default=None, type=int, dest="numSteps", help="number of time steps N_t"
  )
  parser.add_argument(
    "-n", default=None, type=int, dest="n", help="subdivision count for impulse/sampled/oracle"
  )
  parser.add_argument(
    "--target",
    default=None,
    choices=[target.value for target in Targets],
    help="tracking target y_d",
  )
  parser.add_argument(
    "--quiet",
    help="Suppress progress output.",
    action="store_true",
    dest="quiet",
  )
  parser.add_argument(
    "--parallel",
    help="Run the per-n solves of the convergence study in a process pool.",
    action="store_true",
    dest="parallel",
  )
  parser.set_defaults(quiet=None, parallel=None)

  return parser.parse_args(argv)


def main(argv=None):
  args = parse_args(argv)
  overrides = {
    key: getattr(args, key)
    for key in ("outDir", "seed", "nList", "numModes", "numSteps", "n", "target", "quiet", "parallel")
  }

  try:
    cfg = load_config(args.config, Commands[args.command], overrides)
  except ConfigError as e:
    print(e, file=sys.stderr)
    sys.exit(ExitCodes.configError.value)

  try:
    code = run_command(cfg)
  except ConvergenceError as e:
    print(e, file=sys.stderr)
    sys.exit(ExitCodes.solverFailure.value)

  if code == ExitCodes.acceptanceFailure and cfg.logging:
    print("Acceptance checks failed; see the JSON report for details.")
  sys.exit(code.value)


if __name__ == "__main__":
  main()
