"""Dual curvature measures of C-coconvex polytopes and the L_p dual Minkowski problem."""
__version__ = "0.1.0"
