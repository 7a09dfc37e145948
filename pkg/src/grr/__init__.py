"""Exact obstruction computations, tree-orbit combinatorics, rotation cubatures
and subspace searches for round or vanishing restrictions of polynomials."""

from .polyring import (LinearFormSet, PolySyntaxError, Ring, RingMismatch, SparsePoly,
                       compose_linear, format_poly, parse_poly, proportional_scalar)

__version__ = "0.1.0"
