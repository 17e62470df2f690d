"""
rfim_lab - Numerical laboratory for the two-dimensional random-field Ising model

Exact ground states by min-cut, exact and Monte Carlo Gibbs states, disorder
averages of the order parameter, surface tensions and disagreement
percolation, hierarchical (curdling) constructions and an experiment harness
that writes reproducible CSV / JSON records.
"""

__version__ = "0.1.0"
