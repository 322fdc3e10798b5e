"""Exact computations on the p-adic Berkovich line: disk points, graphs of discs,
symbolic dendrite coordinates, shift operators and Schottky boundary dynamics."""

from .padic import INF, Magnitude, PrimeContext, valuation
from .points import BerkPoint, big_metric, disk, gauss_point, join, small_metric

__version__ = "0.1.0"
