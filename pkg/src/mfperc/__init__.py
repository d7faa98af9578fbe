"""Numerical checks of mean-field percolation inequalities on finite transitive weighted graphs."""

__version__ = "0.1.0"
