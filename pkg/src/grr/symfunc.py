"""Schur polynomials and Schur-basis expansion.

The cohomology of the Grassmannian of k-planes in n-space is modelled as
symmetric polynomials in k roots modulo the complete homogeneous
polynomials h_j, j > n - k; the classes s_lambda with lambda inside the
k x (n-k) rectangle form a basis of the quotient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import permutations

from .polyring import Ring, SparsePoly, monomials_of_degree

Partition = tuple  # weakly decreasing positive ints; () is the empty partition


def make_partition(parts) -> Partition:
    parts = tuple(int(p) for p in parts if p != 0)
    if any(p < 0 for p in parts):
        raise ValueError(f"negative part in {parts}")
    if any(a < b for a, b in zip(parts, parts[1:])):
        raise ValueError(f"{parts} is not weakly decreasing")
    return parts


class NotSymmetric(ValueError):
    pass


@dataclass
class SchurExpansion:
    k: int
    ring: Ring
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = {make_partition(lam): c for lam, c in self.coeffs.items() if c != 0}
        for lam in self.coeffs:
            if len(lam) > self.k:
                raise ValueError(f"partition {lam} has more than {self.k} parts")

    def is_zero(self) -> bool:
        return not self.coeffs

    def degree(self) -> int:
        return max((sum(lam) for lam in self.coeffs), default=-1)

    def __add__(self, other: "SchurExpansion") -> "SchurExpansion":
        if (self.k, self.ring) != (other.k, other.ring):
            raise ValueError("incompatible expansions")
        out = dict(self.coeffs)
        for lam, c in other.coeffs.items():
            v = out.get(lam, 0) + c
            out[lam] = v % 2 if self.ring is Ring.GF2 else v
        return SchurExpansion(self.k, self.ring, out)

    def to_poly(self) -> SparsePoly:
        out = SparsePoly.zero(self.ring, self.k)
        for lam, c in self.coeffs.items():
            out = out + schur_polynomial(lam, self.k, self.ring).scale(c)
        return out

    def sorted_items(self):
        return sorted(self.coeffs.items(), key=lambda lc: (sum(lc[0]), lc[0]), reverse=True)

    def to_json(self):
        """[[partition, coeff], ...]; rational coefficients as "p/q" strings."""
        def enc(c):
            if isinstance(c, Fraction):
                return c.numerator if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
            return c
        return [[list(lam), enc(c)] for lam, c in self.sorted_items()]


@lru_cache(maxsize=None)
def complete_homogeneous(r: int, k: int, ring: Ring) -> SparsePoly:
    if r < 0:
        return SparsePoly.zero(ring, k)
    return SparsePoly(ring, k, {m: 1 for m in monomials_of_degree(k, r)})


def _det(matrix):
    """Cofactor expansion along the first row; entries are SparsePoly."""
    n = len(matrix)
    if n == 1:
        return matrix[0][0]
    total = None
    for j in range(n):
        entry = matrix[0][j]
        if entry.is_zero():
            continue
        minor = [row[:j] + row[j + 1:] for row in matrix[1:]]
        term = entry * _det(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total if total is not None else matrix[0][0].scale(0)


@lru_cache(maxsize=None)
def schur_polynomial(lam: Partition, k: int, ring: Ring = Ring.QQ) -> SparsePoly:
    """s_lambda(t_1..t_k) by the Jacobi-Trudi determinant det(h_{lam_i - i + j})."""
    lam = make_partition(lam)
    ring = Ring(ring)
    if len(lam) > k:
        return SparsePoly.zero(ring, k)
    if not lam:
        return SparsePoly.constant(ring, k, 1)
    ell = len(lam)
    mat = [[complete_homogeneous(lam[i] - i + j, k, ring) for j in range(ell)] for i in range(ell)]
    return _det(mat)


def is_symmetric(f: SparsePoly) -> bool:
    k = f.nvars
    if k == 1:
        return True
    swap = [1, 0] + list(range(2, k))
    cycle = [(i + 1) % k for i in range(k)]
    return f.permute_vars(swap) == f and f.permute_vars(cycle) == f


def expand_in_schur(f: SparsePoly, k: int | None = None) -> SchurExpansion:
    """Peel off c * s_lambda for the graded-lex leading monomial until nothing is left."""
    k = f.nvars if k is None else k
    if k != f.nvars:
        raise ValueError(f"polynomial has {f.nvars} variables, expected {k}")
    if f.ring.exact:
        if not is_symmetric(f):
            raise NotSymmetric("input is not symmetric in its variables")
    else:
        _check_float_symmetric(f)
    coeffs = {}
    rest = f
    while not rest.is_zero():
        mono, c = rest.leading_term()
        lam = make_partition(mono)
        if tuple(sorted(mono, reverse=True)) != mono:
            raise NotSymmetric(f"leading monomial {mono} is not a partition")
        coeffs[lam] = c
        rest = rest - schur_polynomial(lam, k, f.ring).scale(c)
        if not f.ring.exact:
            rest = rest.cleanup(1e-12)
    return SchurExpansion(k, f.ring, coeffs)


def _check_float_symmetric(f: SparsePoly, tol: float = 1e-9):
    scale = max((abs(c) for c in f.terms.values()), default=0.0)
    for perm in ([1, 0] + list(range(2, f.nvars)), [(i + 1) % f.nvars for i in range(f.nvars)]):
        if f.nvars == 1:
            return
        diff = f.permute_vars(perm) - f
        if any(abs(c) > tol * scale for c in diff.terms.values()):
            raise NotSymmetric("input is not symmetric in its variables")


def expand_by_alternant(f: SparsePoly) -> SchurExpansion:
    """Independent route: c_lambda is the coefficient of t^(lambda+delta) in f * Vandermonde."""
    k = f.nvars
    vand = SparsePoly.constant(f.ring, k, 1)
    for i in range(k):
        for j in range(i + 1, k):
            vand = vand * (SparsePoly.var(f.ring, k, i) - SparsePoly.var(f.ring, k, j))
    prod = f * vand
    delta = tuple(k - 1 - i for i in range(k))
    coeffs = {}
    for mono, c in prod.terms.items():
        if all(a > b for a, b in zip(mono, mono[1:])):
            coeffs[make_partition(tuple(a - b for a, b in zip(mono, delta)))] = c
    return SchurExpansion(k, f.ring, coeffs)


def truncate_to_grassmannian(E: SchurExpansion, n: int) -> SchurExpansion:
    """Keep the partitions inside the k x (n - k) rectangle."""
    if n < E.k:
        raise ValueError(f"n = {n} is smaller than k = {E.k}")
    return SchurExpansion(E.k, E.ring, {lam: c for lam, c in E.coeffs.items()
                                        if not lam or lam[0] <= n - E.k})


def elementary_symmetric(j: int, k: int, ring: Ring = Ring.QQ) -> SparsePoly:
    return schur_polynomial((1,) * j, k, ring)


def symmetrize(f: SparsePoly) -> SparsePoly:
    """Sum of f over all permutations of its variables (used to build test inputs)."""
    out = SparsePoly.zero(f.ring, f.nvars)
    for perm in permutations(range(f.nvars)):
        out = out + f.permute_vars(perm)
    return out
