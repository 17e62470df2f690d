"""
rfim_lab Tests

This package contains tests for the random-field Ising model laboratory:
geometry, disorder, exact solvers, estimators and the experiment harness.
"""
