"""Sparse multivariate polynomials over GF(2), the rationals, the reals and
the complex numbers.

Monomials are exponent tuples. Terms are kept in a plain dict and every
operation returns a new polynomial; nothing is mutated after construction.
Ordering for display and leading terms is graded lexicographic.
"""

from __future__ import annotations

import enum
import math
import re
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

Monomial = tuple  # tuple[int, ...] of exponents, one per variable


class Ring(enum.Enum):
    GF2 = "GF2"
    QQ = "QQ"
    RR = "RR"
    CC = "CC"

    @property
    def exact(self) -> bool:
        return self in (Ring.GF2, Ring.QQ)


class RingMismatch(ValueError):
    pass


class PolySyntaxError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at offset {pos}")
        self.pos = pos


def _coerce(ring: Ring, c):
    """Convert a scalar into the canonical coefficient type of ``ring``."""
    if ring is Ring.GF2:
        if isinstance(c, Fraction):
            if c.denominator % 2 == 0:
                raise ValueError(f"{c} has no image in GF(2)")
            c = c.numerator
        if isinstance(c, (float, complex)) or not float(c).is_integer():
            raise TypeError(f"cannot coerce {c!r} into GF(2)")
        return int(c) % 2
    if ring is Ring.QQ:
        if isinstance(c, (bool, int, np.integer)):
            return int(c)
        if isinstance(c, Fraction):
            return c.numerator if c.denominator == 1 else c
        raise TypeError(f"inexact coefficient {c!r} in an exact ring; convert explicitly")
    if ring is Ring.RR:
        if isinstance(c, (complex, np.complexfloating)):
            raise TypeError(f"complex coefficient {c!r} in the real ring")
        return float(c)
    return complex(c)


def grlex_key(mono: Monomial):
    return (sum(mono), mono)


def monomials_of_degree(nvars: int, d: int) -> list[Monomial]:
    """All exponent tuples of total degree ``d``, in decreasing graded-lex order."""
    out = []
    for combo in combinations_with_replacement(range(nvars), d):
        e = [0] * nvars
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    out.sort(reverse=True)
    return out


class SparsePoly:
    """Multivariate polynomial with a fixed number of variables and ring."""

    __slots__ = ("ring", "nvars", "terms")

    def __init__(self, ring: Ring, nvars: int, terms: Mapping[Monomial, object] | None = None):
        if nvars < 1:
            raise ValueError("nvars must be positive")
        self.ring = Ring(ring)
        self.nvars = nvars
        clean = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != nvars:
                raise ValueError(f"monomial {mono} does not have {nvars} exponents")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in {mono}")
            c = _coerce(self.ring, c)
            if c != 0:
                clean[mono] = c
        self.terms = clean

    # construction helpers

    @classmethod
    def zero(cls, ring: Ring, nvars: int) -> "SparsePoly":
        return cls(ring, nvars)

    @classmethod
    def constant(cls, ring: Ring, nvars: int, c) -> "SparsePoly":
        return cls(ring, nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, ring: Ring, nvars: int, i: int) -> "SparsePoly":
        """The i-th coordinate, zero-based."""
        e = [0] * nvars
        e[i] = 1
        return cls(ring, nvars, {tuple(e): 1})

    @classmethod
    def linear(cls, ring: Ring, coeffs: Sequence) -> "SparsePoly":
        n = len(coeffs)
        terms = {}
        for i, c in enumerate(coeffs):
            e = [0] * n
            e[i] = 1
            terms[tuple(e)] = c
        return cls(ring, n, terms)

    @classmethod
    def quadratic_form(cls, ring: Ring, nvars: int) -> "SparsePoly":
        """Q = x1^2 + ... + xn^2."""
        return cls(ring, nvars, {tuple(2 if j == i else 0 for j in range(nvars)): 1
                                 for i in range(nvars)})

    # basic protocol

    def _like(self, terms) -> "SparsePoly":
        p = object.__new__(SparsePoly)
        p.ring, p.nvars, p.terms = self.ring, self.nvars, terms
        return p

    def _check(self, other: "SparsePoly"):
        if not isinstance(other, SparsePoly):
            raise TypeError(f"expected SparsePoly, got {type(other).__name__}")
        if other.ring is not self.ring:
            raise RingMismatch(f"ring mismatch: {self.ring.value} vs {other.ring.value}")
        if other.nvars != self.nvars:
            raise RingMismatch(f"variable count mismatch: {self.nvars} vs {other.nvars}")

    def _lift(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            self._check(other)
            return other
        return SparsePoly.constant(self.ring, self.nvars, other)

    def __eq__(self, other):
        if isinstance(other, SparsePoly):
            return (self.ring is other.ring and self.nvars == other.nvars
                    and self.terms == other.terms)
        if other == 0:
            return not self.terms
        return NotImplemented

    def __hash__(self):
        return hash((self.ring, self.nvars, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"SparsePoly({self.ring.value}, {self.nvars}, {format_poly(self)!r})"

    def __str__(self):
        return format_poly(self)

    # arithmetic

    def _add_terms(self, other_terms, sign):
        out = dict(self.terms)
        gf2 = self.ring is Ring.GF2
        for mono, c in other_terms.items():
            v = out.get(mono, 0)
            v = (v + c) % 2 if gf2 else (v + c if sign > 0 else v - c)
            if v == 0:
                out.pop(mono, None)
            else:
                out[mono] = v
        return self._like(out)

    def __add__(self, other):
        return self._add_terms(self._lift(other).terms, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._add_terms(self._lift(other).terms, -1)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        if self.ring is Ring.GF2:
            return self
        return self._like({m: -c for m, c in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, SparsePoly):
            return self.scale(other)
        self._check(other)
        out: dict = {}
        gf2 = self.ring is Ring.GF2
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        if gf2:
            out = {m: c % 2 for m, c in out.items()}
        return self._like({m: c for m, c in out.items() if c != 0})

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, c) -> "SparsePoly":
        c = _coerce(self.ring, c)
        if c == 0:
            return self._like({})
        if self.ring is Ring.GF2:
            return self
        return self._like({m: v * c for m, v in self.terms.items() if v * c != 0})

    def __pow__(self, e: int):
        if not isinstance(e, int) or e < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = SparsePoly.constant(self.ring, self.nvars, 1)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    # structure

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(m) for m in self.terms), default=-1)

    def is_homogeneous(self, d: int | None = None) -> bool:
        degs = {sum(m) for m in self.terms}
        if not degs:
            return True
        return len(degs) == 1 and (d is None or degs == {d})

    def homogeneous_part(self, d: int) -> "SparsePoly":
        return self._like({m: c for m, c in self.terms.items() if sum(m) == d})

    def sorted_terms(self) -> list:
        return sorted(self.terms.items(), key=lambda mc: grlex_key(mc[0]), reverse=True)

    def leading_term(self):
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        mono = max(self.terms, key=grlex_key)
        return mono, self.terms[mono]

    def coefficient(self, mono: Monomial):
        return self.terms.get(tuple(mono), 0)

    def permute_vars(self, perm: Sequence[int]) -> "SparsePoly":
        """Substitute x_i -> x_{perm[i]} (zero-based)."""
        out = {}
        for mono, c in self.terms.items():
            e = [0] * self.nvars
            for i, a in enumerate(mono):
                e[perm[i]] += a
            out[tuple(e)] = c
        return self._like(out)

    def diff(self, i: int) -> "SparsePoly":
        out = {}
        for mono, c in self.terms.items():
            a = mono[i]
            if a == 0:
                continue
            e = list(mono)
            e[i] -= 1
            out[tuple(e)] = c * a if self.ring is not Ring.GF2 else (c * a) % 2
        return self._like({m: c for m, c in out.items() if c != 0})

    def evaluate(self, point: Sequence):
        total = 0
        for mono, c in self.terms.items():
            v = c
            for x, a in zip(point, mono):
                if a:
                    v = v * x ** a
            total = total + v
        if self.ring is Ring.GF2:
            return total % 2
        return total

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorised evaluation at the rows of ``points`` (floating point)."""
        points = np.asarray(points)
        if not self.terms:
            return np.zeros(points.shape[0], dtype=points.dtype if np.iscomplexobj(points) else float)
        E = np.array(list(self.terms.keys()), dtype=int)
        c = np.array([complex(v) if self.ring is Ring.CC else float(v) for v in self.terms.values()])
        mono = np.prod(points[:, None, :] ** E[None, :, :], axis=2)
        return mono @ c

    def coeff_norm(self) -> float:
        return math.sqrt(sum(abs(complex(c)) ** 2 for c in self.terms.values()))

    def to_ring(self, ring: Ring) -> "SparsePoly":
        """Explicit ring conversion (e.g. QQ -> GF2 reduction, QQ -> RR)."""
        ring = Ring(ring)
        if ring is self.ring:
            return self
        if ring is Ring.RR:
            if self.ring is Ring.CC:
                if any(complex(c).imag for c in self.terms.values()):
                    raise ValueError("polynomial has non-real coefficients")
                return SparsePoly(ring, self.nvars, {m: complex(c).real for m, c in self.terms.items()})
            return SparsePoly(ring, self.nvars, {m: float(c) for m, c in self.terms.items()})
        if ring is Ring.CC:
            return SparsePoly(ring, self.nvars, {m: complex(c) for m, c in self.terms.items()})
        if ring is Ring.GF2:
            if not self.ring.exact:
                raise TypeError("reduce mod 2 only from an exact ring")
            return SparsePoly(ring, self.nvars, self.terms)
        if self.ring is Ring.GF2:
            return SparsePoly(ring, self.nvars, self.terms)
        return SparsePoly(ring, self.nvars, {m: Fraction(c).limit_denominator(10 ** 12)
                                             if isinstance(c, float) else c
                                             for m, c in self.terms.items()})

    def cleanup(self, rel_tol: float = 1e-14) -> "SparsePoly":
        """Drop float coefficients below ``rel_tol`` times the largest one."""
        if self.ring.exact or not self.terms:
            return self
        top = max(abs(c) for c in self.terms.values())
        return self._like({m: c for m, c in self.terms.items() if abs(c) >= rel_tol * top})

    def homogeneous_coeffs(self, d: int | None = None) -> np.ndarray:
        """Coefficient vector in the graded-lex basis of degree-``d`` monomials."""
        if d is None:
            d = max(self.degree(), 0)
        if not self.is_homogeneous(d):
            raise ValueError(f"polynomial is not homogeneous of degree {d}")
        dtype = complex if self.ring is Ring.CC else float
        return np.array([self.terms.get(m, 0) for m in monomials_of_degree(self.nvars, d)], dtype=dtype)

    @classmethod
    def from_homogeneous_coeffs(cls, ring, nvars, d, coeffs) -> "SparsePoly":
        return cls(ring, nvars, dict(zip(monomials_of_degree(nvars, d), coeffs)))


def compose_linear(f: SparsePoly, M) -> SparsePoly:
    """Return ``x -> f(M x)``; ``M`` has ``f.nvars`` rows, one per old variable."""
    rows = [list(r) for r in (M.tolist() if isinstance(M, np.ndarray) else M)]
    if len(rows) != f.nvars:
        raise ValueError(f"substitution has {len(rows)} rows, polynomial has {f.nvars} variables")
    new_n = len(rows[0]) if rows else 0
    if any(len(r) != new_n for r in rows) or new_n < 1:
        raise ValueError("ragged or empty substitution matrix")
    images = [SparsePoly.linear(f.ring, r) for r in rows]
    powers: dict = {}

    def power(i, a):
        key = (i, a)
        if key not in powers:
            powers[key] = images[i] if a == 1 else power(i, a - 1) * images[i]
        return powers[key]

    out = SparsePoly.zero(f.ring, new_n)
    for mono, c in f.terms.items():
        term = SparsePoly.constant(f.ring, new_n, c)
        for i, a in enumerate(mono):
            if a:
                term = term * power(i, a)
        out = out + term
    return out


def proportional_scalar(f: SparsePoly, g: SparsePoly, tol: float = 1e-10):
    """Return ``c`` with ``f = c*g`` (exactly, or within ``tol*|f|`` for floats); else None."""
    f._check(g)
    if g.is_zero():
        raise ValueError("reference polynomial is identically zero")
    if f.is_zero():
        return 0
    if f.ring.exact:
        mono, lead = g.leading_term()
        fc = f.terms.get(mono, 0)
        if f.ring is Ring.GF2:
            c = fc
        else:
            c = Fraction(fc) / Fraction(lead)
            c = c.numerator if c.denominator == 1 else c
        return c if f == g.scale(c) else None
    monos = set(f.terms) | set(g.terms)
    fv = np.array([f.terms.get(m, 0) for m in monos])
    gv = np.array([g.terms.get(m, 0) for m in monos])
    c = np.vdot(gv, fv) / np.vdot(gv, gv)
    if np.linalg.norm(fv - c * gv) <= tol * np.linalg.norm(fv):
        return complex(c) if f.ring is Ring.CC else float(np.real(c))
    return None


class LinearFormSet:
    """An ordered list of linear forms in ``k`` variables, stored as coefficient rows."""

    def __init__(self, matrix):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.k = self.matrix.shape[1]

    def __len__(self):
        return self.matrix.shape[0]

    def forms(self) -> list[SparsePoly]:
        return [SparsePoly.linear(Ring.RR, row) for row in self.matrix]

    def rank(self, tol: float = 1e-10) -> int:
        return int(np.linalg.matrix_rank(self.matrix, tol=tol * max(1.0, np.abs(self.matrix).max())))

    def spans(self) -> bool:
        return self.rank() == self.k

    def values(self, points: np.ndarray) -> np.ndarray:
        """Form values at the rows of ``points`` (shape P x m)."""
        return np.asarray(points) @ self.matrix.T

    def to_json(self):
        return self.matrix.tolist()

    @classmethod
    def from_json(cls, data):
        return cls(np.array(data, dtype=float))


# text format

_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN = re.compile(
    rf"\s*(?:(?P<complex>\((?:[^()]*)\))|(?P<num>{_NUM}(?:/\d+)?)|x(?P<var>\d+)|(?P<op>[-+*^]))"
)


def _tokenize(text: str):
    pos = 0
    toks = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise PolySyntaxError(f"unexpected character {text[start]!r}", start)
        start = m.start() + (len(m.group(0)) - len(m.group(0).lstrip()))
        kind = m.lastgroup
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", None, len(text)))
    return toks


def _parse_complex(body: str, pos: int) -> complex:
    inner = body[1:-1].replace(" ", "")
    if not inner or "j" in inner or inner.count("i") > 1:
        raise PolySyntaxError(f"malformed complex coefficient {body!r}", pos)
    try:
        return complex(inner.replace("i", "j"))
    except ValueError:
        raise PolySyntaxError(f"malformed complex coefficient {body!r}", pos) from None


def _parse_number(tok: str):
    if "/" in tok:
        p, q = tok.split("/")
        if "." in p or "e" in p.lower():
            raise ValueError
        return Fraction(int(p), int(q))
    if any(ch in tok for ch in ".eE"):
        return float(tok)
    return int(tok)


def parse_poly(text: str, nvars: int | None = None, ring: Ring | str | None = None) -> SparsePoly:
    """Parse the ``3*x1^2*x2 - 1/2*x3 + (1+2i)*x1`` grammar.

    The ring defaults to QQ, RR if a decimal appears, CC if a complex
    coefficient appears. ``nvars`` defaults to the largest variable index.
    """
    toks = _tokenize(text)
    terms: list = []
    i = 0
    max_var = 0
    kinds = set()

    def peek():
        return toks[i]

    while True:
        kind, val, pos = peek()
        sign = 1
        if terms or kind == "op":
            if kind == "op" and val in "+-":
                sign = -1 if val == "-" else 1
                i += 1
            elif terms:
                raise PolySyntaxError("expected '+' or '-'", pos)
            else:
                raise PolySyntaxError(f"unexpected {val!r}", pos)
        kind, val, pos = peek()
        coeff = 1
        have_coeff = False
        if kind == "num":
            try:
                coeff = _parse_number(val)
            except (ValueError, ZeroDivisionError):
                raise PolySyntaxError(f"bad number {val!r}", pos) from None
            kinds.add(type(coeff))
            have_coeff = True
            i += 1
        elif kind == "complex":
            coeff = _parse_complex(val, pos)
            kinds.add(complex)
            have_coeff = True
            i += 1
        factors = []
        kind, val, pos = peek()
        if have_coeff and kind == "op" and val == "*":
            i += 1
            kind, val, pos = peek()
            if kind != "var":
                raise PolySyntaxError("expected variable after '*'", pos)
        while kind == "var":
            idx = int(val)
            if idx < 1:
                raise PolySyntaxError("variable indices start at 1", pos)
            i += 1
            e = 1
            kind, val, pos = peek()
            if kind == "op" and val == "^":
                i += 1
                kind, val, pos = peek()
                if kind != "num" or not val.isdigit():
                    raise PolySyntaxError("expected integer exponent", pos)
                e = int(val)
                i += 1
            factors.append((idx, e))
            max_var = max(max_var, idx)
            kind, val, pos = peek()
            if kind == "op" and val == "*":
                i += 1
                kind, val, pos = peek()
                if kind != "var":
                    raise PolySyntaxError("expected variable after '*'", pos)
        if not have_coeff and not factors:
            raise PolySyntaxError("expected a term", pos)
        terms.append((sign, coeff, factors))
        kind, val, pos = peek()
        if kind == "end":
            break
        if not (kind == "op" and val in "+-"):
            raise PolySyntaxError(f"unexpected {val!r}", pos)

    if nvars is None:
        nvars = max(max_var, 1)
    elif max_var > nvars:
        raise ValueError(f"variable x{max_var} out of range for {nvars} variables")
    if ring is None:
        ring = Ring.CC if complex in kinds else Ring.RR if float in kinds else Ring.QQ
    ring = Ring(ring)
    out = SparsePoly.zero(ring, nvars)
    for sign, coeff, factors in terms:
        e = [0] * nvars
        for idx, a in factors:
            e[idx - 1] += a
        if ring is Ring.GF2:
            coeff = _coerce(ring, coeff)
        elif ring is Ring.QQ and isinstance(coeff, (float, complex)):
            raise TypeError("inexact coefficient in an exact ring")
        out = out + SparsePoly(ring, nvars, {tuple(e): coeff if sign > 0 or ring is Ring.GF2 else -coeff})
    return out


def _fmt_coeff(c, ring: Ring) -> str:
    if ring is Ring.CC:
        c = complex(c)
        return f"({c.real!r}{'+' if c.imag >= 0 or math.isnan(c.imag) else '-'}{abs(c.imag)!r}i)"
    if isinstance(c, Fraction):
        return f"{c.numerator}/{c.denominator}"
    return repr(c) if isinstance(c, float) else str(c)


def format_poly(f: SparsePoly) -> str:
    if f.is_zero():
        return "0"
    parts = []
    for n, (mono, c) in enumerate(f.sorted_terms()):
        negative = f.ring in (Ring.QQ, Ring.RR) and c < 0
        mag = -c if negative else c
        factors = "*".join(f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(mono) if a)
        if factors and mag == 1 and f.ring is not Ring.CC:
            body = factors
        elif factors:
            body = f"{_fmt_coeff(mag, f.ring)}*{factors}"
        else:
            body = _fmt_coeff(mag, f.ring)
        if n == 0:
            parts.append(f"-{body}" if negative else body)
        else:
            parts.append(f"- {body}" if negative else f"+ {body}")
    return " ".join(parts)


def full_homogeneous_count(k: int, d: int) -> int:
    """Number of degree-d monomials in k variables, C(k+d-1, d)."""
    return math.comb(k + d - 1, d)


def polys_from_text(lines: Iterable[str], nvars: int | None = None) -> list[SparsePoly]:
    """Parse one polynomial per non-blank, non-comment line, sharing a variable count."""
    texts = [ln.strip() for ln in lines if ln.strip() and not ln.strip().startswith("#")]
    if nvars is None:
        found = [int(v) for t in texts for v in re.findall(r"x(\d+)", t)]
        nvars = max(found, default=1)
    return [parse_poly(t, nvars=nvars) for t in texts]
