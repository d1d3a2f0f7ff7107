"""FPGA placement as an unbalanced quadratic assignment problem, solved by
cyclic expansion over small cycle-selection QUBOs."""

__version__ = "0.1.0"
