"""Hierarchical paper-wrapping stack: planner, sub-task-aware chunking policy,
residual RL over admittance control, and a planar quasi-static paper simulator."""

__version__ = "0.1.0"
