#!/usr/bin/env python3
"""Solve the periodic heat control problem and its impulse and sampled-data approximations.

Example Usage:
  # Continuous problem with the default target, outputs written to data/.
  python main.py solve --out data

  # Convergence study over five subdivisions, per-n solves in parallel.
  python main.py converge --n-list 4,8,16,32,64 --modes 32 --timesteps 512 --parallel --out data

  # Dense-oracle check of all three solvers at a small size.
  python main.py oracle --config ../configs/oracle.yaml --out data
"""

from periodic_control.runner import main


if __name__ == "__main__":
  main()
