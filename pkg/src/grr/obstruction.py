"""Characteristic-class obstructions for sections of symmetric powers of
canonical bundles, the Pontryagin square-root obstruction, and invariant
quadratic forms of the torus-by-cyclic group acting on R^(2 p^alpha).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement

import sympy

from . import exactla
from .polyring import Ring, SparsePoly, monomials_of_degree
from .symfunc import SchurExpansion, expand_in_schur, truncate_to_grassmannian

DEGREE_CAP = 32


class DegreeCapExceeded(ValueError):
    pass


# weight systems


@dataclass(frozen=True)
class WeightSystem:
    """A multiset of integer linear forms in k roots, each stored as a coefficient tuple."""

    k: int
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(tuple(int(c) for c in w) for w in self.weights))
        if any(len(w) != self.k for w in self.weights):
            raise ValueError(f"every weight must have {self.k} coefficients")

    @property
    def zero_count(self) -> int:
        return sum(1 for w in self.weights if not any(w))

    def __len__(self):
        return len(self.weights)

    def as_polys(self, ring: Ring = Ring.QQ) -> list[SparsePoly]:
        return [SparsePoly.linear(ring, w) for w in self.weights]

    def product(self, ring: Ring = Ring.QQ) -> SparsePoly:
        out = SparsePoly.constant(ring, self.k, 1)
        for w in self.weights:
            if ring is Ring.GF2:
                w = tuple(c % 2 for c in w)
            out = out * SparsePoly.linear(ring, w)
            if out.is_zero():
                break
        return out


def multi_indices(d: int, k: int) -> list[tuple]:
    """All (i_1..i_k) >= 0 with sum d, in decreasing lex order."""
    return monomials_of_degree(k, d)


def symmetric_power_weights(d: int, k: int) -> WeightSystem:
    """Weights i_1 t_1 + ... + i_k t_k of the d-th symmetric power, one per multi-index."""
    if d < 1 or k < 1:
        raise ValueError("d and k must be positive")
    return WeightSystem(k, tuple(multi_indices(d, k)))


def symmetric_power_of(ws: WeightSystem, d: int) -> WeightSystem:
    """Weights of the d-th symmetric power of a bundle given by its weights."""
    out = []
    for combo in combinations_with_replacement(range(len(ws.weights)), d):
        out.append(tuple(sum(ws.weights[i][j] for i in combo) for j in range(ws.k)))
    return WeightSystem(ws.k, tuple(out))


def oriented_weights(rank: int) -> WeightSystem:
    """Complexified weights +-t_1, ..., +-t_r of an oriented real bundle of even rank 2r."""
    if rank % 2:
        raise ValueError("only even ranks are handled")
    r = rank // 2
    out = []
    for i in range(r):
        e = [0] * r
        e[i] = 1
        out.append(tuple(e))
        out.append(tuple(-c for c in e))
    return WeightSystem(r, tuple(out))


# top classes and survival


def top_sw_class(ws: WeightSystem) -> SchurExpansion:
    """Top Stiefel-Whitney class: the product of all weights mod 2, in the Schur basis."""
    return expand_in_schur(ws.product(Ring.GF2), ws.k)


def top_chern_class(ws: WeightSystem) -> SchurExpansion:
    """Top Chern class: the integer product of all weights, in the Schur basis."""
    return expand_in_schur(ws.product(Ring.QQ), ws.k)


def survives_in(cls: SchurExpansion, n: int) -> bool:
    return not truncate_to_grassmannian(cls, n).is_zero()


def _top_class(d: int, k: int, field: str) -> SchurExpansion:
    ws = symmetric_power_weights(d, k)
    if field in ("real", "real-mod-2", "GF2"):
        return top_sw_class(ws)
    if field in ("complex", "CC"):
        return top_chern_class(ws)
    raise ValueError(f"unknown field {field!r}; use 'real' or 'complex'")


@lru_cache(maxsize=None)
def _cached_top(d, k, field):
    return _top_class(d, k, field)


def minimal_n(d: int, k: int, field: str = "real") -> int | None:
    """Least n for which the top class survives in the Grassmannian of k-planes in n-space.

    None means the class already vanishes on the infinite Grassmannian, so
    there is no obstruction at any n.
    """
    cls = _cached_top(d, k, field)
    if cls.is_zero():
        return None
    return k + min(lam[0] if lam else 0 for lam in cls.coeffs)


# bound formulas


def _positive(**kw):
    for name, v in kw.items():
        if v < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")


def _odd(d):
    if d % 2 == 0:
        raise ValueError(f"degree must be odd, got {d}")


def multichoose(k: int, r: int) -> int:
    """Number of size-r multisets from k types, C(r+k-1, r), with multichoose(0, 0) = 1."""
    if k == 0:
        return int(r == 0)
    return math.comb(r + k - 1, r)


def bound_thm4(d: int, k: int) -> int:
    _positive(d=d, k=k)
    _odd(d)
    return k + multichoose(k, d)


def bound_thm5(d: int, k: int, m: int) -> int:
    _positive(d=d, k=k, m=m)
    _odd(d)
    return k + m * sum(multichoose(k, delta) for delta in range(1, d + 1, 2))


def bound_thm6(d: int, k: int) -> int:
    _positive(d=d, k=k)
    return k + multichoose(k, d)


def bound_thm7(d: int, k: int, m: int) -> int:
    _positive(d=d, k=k, m=m)
    return k + m * math.comb(d + k, d)


def bound_lower(d: int, k: int) -> int:
    """Smallest integer n >= k + C(d+k-1, d)/k."""
    _positive(d=d, k=k)
    return k + -(-multichoose(k, d) // k)


def bound_remark_quadratic(k: int) -> int:
    _positive(k=k)
    return 2 * k - 1


def binomial_identity_check(d: int, k: int) -> bool:
    """sum_{delta=0}^{d} C(delta+k-1, k-1) == C(d+k, k), exactly."""
    if d < 0 or k < 0:
        raise ValueError("d and k must be nonnegative")
    return sum(multichoose(k, delta) for delta in range(d + 1)) == math.comb(d + k, k)


def obstruction_report(d: int, k: int, field: str = "real") -> dict:
    cls = _cached_top(d, k, field)
    if field.startswith("real"):
        thm = bound_thm4(d, k) if d % 2 else None
    else:
        thm = bound_thm6(d, k)
    return {
        "d": d,
        "k": k,
        "field": field,
        "top_class": cls.to_json(),
        "minimal_n": minimal_n(d, k, field),
        "thm_bound": thm,
        "lower_bound": bound_lower(d, k),
    }


# Pontryagin classes from weights


@dataclass
class PontryaginData:
    total_p: SparsePoly
    euler: SparsePoly
    trivial_rank: int
    pairs: int

    @property
    def top(self) -> SparsePoly:
        """The top Pontryagin class p_{4r}, a polynomial of degree 2r in the roots."""
        return self.total_p.homogeneous_part(2 * self.pairs)

    def component(self, dim: int) -> SparsePoly:
        """p_dim, indexed by cohomological dimension (roots have dimension 2)."""
        if dim % 4:
            return SparsePoly.zero(Ring.QQ, self.total_p.nvars)
        return self.total_p.homogeneous_part(dim // 2)


def _canonical_sign(w):
    first = next(c for c in w if c)
    return w if first > 0 else tuple(-c for c in w)


def pontryagin_from_weights(ws: WeightSystem) -> PontryaginData:
    """Total Pontryagin class prod (1 + w^2) over one weight from each +-pair."""
    counts = Counter(ws.weights)
    zeros = counts.pop((0,) * ws.k, 0)
    reps = []
    for w in sorted(counts):
        if _canonical_sign(w) != w:
            continue
        neg = tuple(-c for c in w)
        if counts[w] != counts.get(neg, 0):
            raise ValueError(f"weight {w} is not paired with its negative")
        reps.extend([w] * counts[w])
    for w in counts:
        if _canonical_sign(w) != w and tuple(-c for c in w) not in counts:
            raise ValueError(f"weight {w} is not paired with its negative")
    one = SparsePoly.constant(Ring.QQ, ws.k, 1)
    total = one
    euler = one
    for w in reps:
        lin = SparsePoly.linear(Ring.QQ, w)
        total = total * (one + lin * lin)
        euler = euler * lin
    if zeros:
        euler = euler.scale(0)
    return PontryaginData(total, euler, zeros, len(reps))


# graded rings given by generators and relations


def _weighted_monomials(degrees, D):
    out = []

    def rec(i, remaining, acc):
        if i == len(degrees):
            if remaining == 0:
                out.append(tuple(acc))
            return
        for a in range(remaining // degrees[i] + 1):
            acc.append(a)
            rec(i + 1, remaining - a * degrees[i], acc)
            acc.pop()

    rec(0, D, [])
    out.sort(reverse=True)
    return out


@dataclass
class PresentedRing:
    """Q[generators]/(relations), graded by generator degrees.

    ``ambient`` optionally realises generators as polynomials in root
    variables (roots of degree ``root_degree``); generators without an image
    are simply absent from the mapping.
    """

    names: list
    degrees: list
    relations: list = field(default_factory=list)
    ambient: dict | None = None
    root_degree: int = 2

    def __post_init__(self):
        self.ngens = len(self.names)
        self._components = {}
        for r in self.relations:
            if r.nvars != self.ngens or r.ring is not Ring.QQ:
                raise ValueError("relations must be QQ polynomials in the generators")
            if len({self.weight(m) for m in r.terms}) > 1:
                raise ValueError(f"relation {r} is not homogeneous")

    @classmethod
    def free(cls, names, degrees):
        return cls(list(names), list(degrees))

    def gen(self, name) -> SparsePoly:
        return SparsePoly.var(Ring.QQ, self.ngens, self.names.index(name))

    def weight(self, mono) -> int:
        return sum(a * d for a, d in zip(mono, self.degrees))

    def element_degree(self, elem: SparsePoly) -> int:
        degs = {self.weight(m) for m in elem.terms}
        if len(degs) > 1:
            raise ValueError("element is not homogeneous")
        return degs.pop() if degs else 0

    def monomials(self, D: int):
        if D > DEGREE_CAP:
            raise DegreeCapExceeded(f"degree {D} exceeds the cap {DEGREE_CAP}")
        return _weighted_monomials(self.degrees, D)

    def _component(self, D: int):
        if D in self._components:
            return self._components[D]
        monos = self.monomials(D)
        index = {m: i for i, m in enumerate(monos)}
        rows = []
        for r in self.relations:
            e = self.element_degree(r)
            if e > D:
                continue
            for m in self.monomials(D - e):
                row = [Fraction(0)] * len(monos)
                for rm, c in r.terms.items():
                    row[index[tuple(a + b for a, b in zip(rm, m))]] += c
                rows.append(row)
        red, pivots = exactla.rref(rows) if rows else ([], [])
        basis = [m for i, m in enumerate(monos) if i not in set(pivots)]
        comp = (monos, index, red, pivots, basis)
        self._components[D] = comp
        return comp

    def quotient_basis(self, D: int):
        return self._component(D)[4]

    def coordinates(self, elem: SparsePoly, D: int | None = None) -> list:
        """Coordinates of the class of ``elem`` on ``quotient_basis(D)``."""
        if D is None:
            D = self.element_degree(elem)
        monos, index, red, pivots, basis = self._component(D)
        v = [Fraction(0)] * len(monos)
        for m, c in elem.terms.items():
            if self.weight(m) != D:
                raise ValueError("element is not homogeneous of the stated degree")
            v[index[m]] += c
        for row, pc in zip(red, pivots):
            if v[pc]:
                f = v[pc]
                v = [a - f * b for a, b in zip(v, row)]
        return [v[index[m]] for m in basis]

    def reduce(self, elem: SparsePoly, D: int | None = None) -> SparsePoly:
        if D is None:
            D = self.element_degree(elem)
        coords = self.coordinates(elem, D)
        return SparsePoly(Ring.QQ, self.ngens, dict(zip(self.quotient_basis(D), coords)))

    def is_zero(self, elem: SparsePoly, D: int | None = None) -> bool:
        return not any(self.coordinates(elem, D))

    def to_ambient(self, elem: SparsePoly) -> SparsePoly:
        if self.ambient is None:
            raise ValueError("ring has no ambient realisation")
        nroots = next(iter(self.ambient.values())).nvars
        out = SparsePoly.zero(Ring.QQ, nroots)
        for m, c in elem.terms.items():
            term = SparsePoly.constant(Ring.QQ, nroots, c)
            for name, a in zip(self.names, m):
                if a:
                    if name not in self.ambient:
                        raise ValueError(f"generator {name} has no ambient image")
                    term = term * self.ambient[name] ** a
            out = out + term
        return out

    def lift_ambient(self, poly: SparsePoly, D: int) -> SparsePoly | None:
        """Express a root polynomial through the generators that have ambient images."""
        if self.ambient is None:
            raise ValueError("ring has no ambient realisation")
        usable = [m for m in self.monomials(D)
                  if all(a == 0 or name in self.ambient for name, a in zip(self.names, m))]
        if not usable:
            return None if not poly.is_zero() else SparsePoly.zero(Ring.QQ, self.ngens)
        images = [self.to_ambient(SparsePoly(Ring.QQ, self.ngens, {m: 1})) for m in usable]
        support = sorted(set().union(poly.terms, *(im.terms for im in images)), reverse=True)
        rows = [[im.terms.get(s, 0) for im in images] for s in support]
        rhs = [poly.terms.get(s, 0) for s in support]
        sol = exactla.solve(rows, rhs)
        if sol is None:
            return None
        return SparsePoly(Ring.QQ, self.ngens, dict(zip(usable, sol)))


def grassmannian_g12_4() -> PresentedRing:
    """Rational model used for oriented 4-planes in R^12: e = ab, p = a^2 + b^2, c of degree 8,
    with relations ec = 0 and c^2 = p^4."""
    ring = PresentedRing(["e", "p", "c"], [4, 4, 8])
    e, p, c = ring.gen("e"), ring.gen("p"), ring.gen("c")
    ring.relations = [e * c, c * c - p ** 4]
    ab = SparsePoly(Ring.QQ, 2, {(1, 1): 1})
    a2b2 = SparsePoly(Ring.QQ, 2, {(2, 0): 1, (0, 2): 1})
    ring.ambient = {"e": ab, "p": a2b2}
    ring.__post_init__()
    return ring


@dataclass
class SquareRoots:
    rational: list
    real_irrational: int = 0
    complex_only: int = 0
    positive_dimensional: bool = False

    @property
    def exists(self) -> bool:
        return bool(self.rational)


def all_square_roots(target: SparsePoly, R: PresentedRing, half_degree: int) -> SquareRoots:
    """Solve u^2 = target in the degree-``half_degree`` component of R, exactly.

    The unknowns are the coordinates of u on a quotient basis; squaring and
    reducing gives a quadratic system over Q which is solved symbolically.
    """
    D = 2 * half_degree
    if D > DEGREE_CAP:
        raise DegreeCapExceeded(f"degree {D} exceeds the cap {DEGREE_CAP}")
    if not target.is_zero() and R.element_degree(target) != D:
        raise ValueError(f"target is not of degree {D}")
    basis = R.quotient_basis(half_degree)
    tcoords = R.coordinates(target, D) if not target.is_zero() else [Fraction(0)] * len(R.quotient_basis(D))
    xs = sympy.symbols(f"u0:{len(basis)}")
    exprs = [-sympy.Rational(t.numerator, t.denominator) for t in tcoords]
    for i, bi in enumerate(basis):
        for j in range(i, len(basis)):
            prod = SparsePoly(Ring.QQ, R.ngens, {tuple(a + b for a, b in zip(bi, basis[j])): 1 if i == j else 2})
            for pos, c in enumerate(R.coordinates(prod, D)):
                if c:
                    exprs[pos] += sympy.Rational(c.numerator, c.denominator) * xs[i] * xs[j]
    eqs = [e for e in exprs if e != 0]
    if not eqs:
        return SquareRoots([SparsePoly.zero(Ring.QQ, R.ngens)], positive_dimensional=bool(basis))
    sols = sympy.solve(eqs, xs, dict=True)
    out = SquareRoots([])
    seen = set()
    for sol in sols:
        if any(x not in sol for x in xs):
            out.positive_dimensional = True
        vals = [sympy.nsimplify(sol.get(x, 0)) for x in xs]
        if all(v.is_rational for v in vals):
            key = tuple(vals)
            if key in seen:
                continue
            seen.add(key)
            terms = {b: Fraction(int(v.p), int(v.q)) for b, v in zip(basis, vals)}
            out.rational.append(SparsePoly(Ring.QQ, R.ngens, terms))
        elif all(v.is_real for v in vals):
            out.real_irrational += 1
        else:
            out.complex_only += 1
    out.rational.sort(key=lambda u: (u.is_zero() or u.leading_term()[1] < 0, str(u)))
    return out


def sqrt_in_presented_ring(target: SparsePoly, R: PresentedRing, half_degree: int) -> SparsePoly | None:
    """A rational square root of ``target`` in R (positive leading coefficient first), or None."""
    roots = all_square_roots(target, R, half_degree)
    return roots.rational[0] if roots.rational else None


def _rational_sqrt(c) -> Fraction | None:
    c = Fraction(c)
    if c < 0:
        return None
    p, q = math.isqrt(c.numerator), math.isqrt(c.denominator)
    if p * p == c.numerator and q * q == c.denominator:
        return Fraction(p, q)
    return None


def poly_sqrt(f: SparsePoly) -> SparsePoly | None:
    """Square root in a free polynomial ring over Q by leading-term extraction, or None."""
    if f.ring is not Ring.QQ:
        raise ValueError("poly_sqrt works over QQ")
    if f.is_zero():
        return f
    mono, c = f.leading_term()
    if any(a % 2 for a in mono):
        return None
    r = _rational_sqrt(c)
    if r is None:
        return None
    lead_mono = tuple(a // 2 for a in mono)
    g = SparsePoly(Ring.QQ, f.nvars, {lead_mono: r})
    for _ in range(f.degree() ** f.nvars + len(f) + 2):
        rest = f - g * g
        if rest.is_zero():
            return g
        rm, rc = rest.leading_term()
        new = tuple(a - b for a, b in zip(rm, lead_mono))
        if any(a < 0 for a in new) or not (sum(new), new) < (sum(lead_mono), lead_mono):
            return None
        g = g + SparsePoly(Ring.QQ, f.nvars, {new: Fraction(rc) / (2 * r)})
    return None


# invariant quadratic forms


@dataclass
class InvariantQuadratics:
    k: int
    dim_T: int
    dim_G: int
    basis_T: list
    basis_G: list


def _sym_basis(k):
    return [(i, j) for i in range(k) for j in range(i, k)]


def _constraint_rows(k, transform):
    """Rows of the linear map a -> entries of transform(S(a)) on the upper triangle."""
    pairs = _sym_basis(k)
    cols = []
    for (i, j) in pairs:
        S = [[Fraction(0)] * k for _ in range(k)]
        if i == j:
            S[i][i] = Fraction(1)
        else:
            S[i][j] = S[j][i] = Fraction(1, 2)
        T = transform(S)
        cols.append([T[a][b] for (a, b) in pairs])
    return [list(r) for r in zip(*cols)]


def _matmul(A, B):
    # the generators are very sparse, so skip zero entries
    out = [[Fraction(0)] * len(B[0]) for _ in A]
    for row, o in zip(A, out):
        for a, brow in zip(row, B):
            if a:
                for j, b in enumerate(brow):
                    if b:
                        o[j] += a * b
    return out


def _transpose(A):
    return [list(r) for r in zip(*A)]


def _forms_from_vectors(k, vectors):
    pairs = _sym_basis(k)
    out = []
    for v in vectors:
        terms = {}
        for (i, j), c in zip(pairs, v):
            e = [0] * k
            e[i] += 1
            e[j] += 1
            terms[tuple(e)] = c
        out.append(SparsePoly(Ring.QQ, k, terms))
    return out


def block_rotation_generator(k: int, block: int):
    J = [[Fraction(0)] * k for _ in range(k)]
    J[2 * block][2 * block + 1] = Fraction(-1)
    J[2 * block + 1][2 * block] = Fraction(1)
    return J


def block_cycle(k: int):
    """Permutation matrix sending plane L_b to L_{b+1} cyclically."""
    blocks = k // 2
    P = [[Fraction(0)] * k for _ in range(k)]
    for b in range(blocks):
        nb = (b + 1) % blocks
        P[2 * nb][2 * b] = Fraction(1)
        P[2 * nb + 1][2 * b + 1] = Fraction(1)
    return P


def invariant_forms(k: int, lie_generators=(), finite_generators=()) -> list[SparsePoly]:
    """Quadratic forms x^T S x annihilated by each Lie generator and fixed by each finite one."""
    rows = []
    for J in lie_generators:
        rows += _constraint_rows(k, lambda S, J=J: [[a + b for a, b in zip(r1, r2)]
                                                    for r1, r2 in zip(_matmul(_transpose(J), S), _matmul(S, J))])
    for P in finite_generators:
        rows += _constraint_rows(k, lambda S, P=P: [[a - b for a, b in zip(r1, r2)]
                                                    for r1, r2 in zip(_matmul(_matmul(_transpose(P), S), P), S)])
    return _forms_from_vectors(k, exactla.nullspace(rows, len(_sym_basis(k))))


def invariant_quadratic_space(p: int, alpha: int) -> InvariantQuadratics:
    """Invariant quadratic forms on R^(2 p^alpha) under the block torus T and T x| Z_(p^alpha)."""
    if p < 2 or any(p % q == 0 for q in range(2, math.isqrt(p) + 1)):
        raise ValueError(f"{p} is not prime")
    blocks = p ** alpha
    k = 2 * blocks
    lie = [block_rotation_generator(k, b) for b in range(blocks)]
    basis_T = invariant_forms(k, lie)
    basis_G = invariant_forms(k, lie, [block_cycle(k)])
    return InvariantQuadratics(k, len(basis_T), len(basis_G), basis_T, basis_G)
