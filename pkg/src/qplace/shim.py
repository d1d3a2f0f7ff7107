"""Loopback external solver: reads a QUBO exchange document on stdin and
answers with the exact minimum. Usable as ``--external-cmd "python -m qplace.shim"``.
"""
import json
import sys

from .qubo import QuboProblem
from .solvers import solve_exhaustive


def main() -> int:
    problem = QuboProblem.from_json(json.load(sys.stdin))
    res = solve_exhaustive(problem)
    json.dump({"x": res.best_x.tolist(), "objective": res.best_objective}, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
