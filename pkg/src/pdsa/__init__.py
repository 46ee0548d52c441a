"""Probabilistic dynamic security assessment of transmission grids.

Quantifies the risk (frequency x cost) of cascading outages under
load/renewable variability, N-1/N-2 line contingencies and uncertain
protection behaviour, with per-contingency statistical error bounds and
linear-classifier explanations of critical contingencies.
"""

__version__ = "0.1.0"
