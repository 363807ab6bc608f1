from enum import Enum, auto
from typing import List


class Commands(Enum):
  """Exhaustive list of command-line subcommands."""

  solve = auto()
  impulse = auto()
  sampled = auto()
  converge = auto()
  lemmas = auto()
  oracle = auto()


class ProblemTag(Enum):
  """Approximating problems compared against the continuous optimal control problem."""

  impulse = "impulse"
  sampled = "sampled"


class Targets(Enum):
  """Built-in choices for the tracking target y_d."""

  default = "default"
  zero = "zero"
  mode1 = "mode1"
  random = "random"


class Metrics(Enum):
  """Error metrics fitted by the convergence study."""

  control = "controlErrorL2"
  stateL2 = "stateErrorL2"
  stateL4 = "stateErrorL4"
  stateSup = "stateErrorSup"
  stateH1Sup = "stateErrorH1Sup"
  cost = "costGap"


class ExitCodes(Enum):
  success = 0
  configError = 2
  solverFailure = 3
  acceptanceFailure = 4


def n_list_from_csv(csv: str) -> List[int]:
  """Converts a CSV of subdivision counts to a list of ints.

  Args:
    csv: CSV string such as "4,8,16".

  Returns:
    List of ints in the given order.

  Raises:
    ValueError if csv contains a token which is not an integer.
  """
  values = []
  for value in csv.split(","):
    try:
      values.append(int(value))
    except ValueError:
      raise ValueError(f"Unknown value {value}")
  return values

