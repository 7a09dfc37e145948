"""Numerical coordinates for homogeneous forms of fixed degree.

A form of degree d in k variables is identified with its coefficient vector
on the monomial basis (graded-lex order). Coefficients of a form that is
only available as a function are recovered by interpolation at a fixed,
well-conditioned set of points on the unit sphere.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .polyring import Ring, SparsePoly, monomials_of_degree


def multinomial(mono) -> int:
    out = math.factorial(sum(mono))
    for a in mono:
        out //= math.factorial(a)
    return out


class HomogeneousBasis:
    def __init__(self, k: int, d: int, oversample: int = 3, seed: int = 20240611):
        self.k = k
        self.d = d
        self.monos = monomials_of_degree(k, d)
        self.dim = len(self.monos)
        self.E = np.array(self.monos, dtype=int).reshape(self.dim, k)
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((oversample * self.dim + 2, k))
        self.X = X / np.linalg.norm(X, axis=1, keepdims=True)
        self.V = self.vandermonde(self.X)
        self.pinv = np.linalg.pinv(self.V)
        # Bombieri inner product <f, g> = sum f_a g_a a!/d!; it is O(k)-invariant
        self.bombieri = np.array([1.0 / multinomial(m) for m in self.monos])
        self.sqrt_bombieri = np.sqrt(self.bombieri)
        self.q = self.vector(SparsePoly.quadratic_form(Ring.QQ, k) ** (d // 2)) if d % 2 == 0 else None

    def vandermonde(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points)
        out = np.ones((points.shape[0], self.dim), dtype=points.dtype)
        for j in range(self.k):
            powers = points[:, j:j + 1] ** np.arange(self.d + 1)
            out *= powers[:, self.E[:, j]]
        return out

    def vector(self, f: SparsePoly) -> np.ndarray:
        if f.nvars != self.k:
            raise ValueError(f"expected {self.k} variables, got {f.nvars}")
        dtype = complex if f.ring is Ring.CC else float
        out = np.zeros(self.dim, dtype=dtype)
        index = self.index
        for mono, c in f.terms.items():
            if sum(mono) != self.d:
                raise ValueError(f"term {mono} is not of degree {self.d}")
            out[index[mono]] = complex(c) if dtype is complex else float(c)
        return out

    @property
    def index(self):
        if not hasattr(self, "_index"):
            self._index = {m: i for i, m in enumerate(self.monos)}
        return self._index

    def poly(self, vec, ring: Ring = Ring.RR) -> SparsePoly:
        return SparsePoly(ring, self.k, {m: c for m, c in zip(self.monos, vec) if c != 0})

    def coeffs_from_values(self, values: np.ndarray) -> np.ndarray:
        """Coefficients from values at ``self.X`` (first axis indexes the points)."""
        return np.tensordot(self.pinv, values, axes=(1, 0))

    def bnorm(self, vec) -> float:
        return float(np.sqrt(np.sum(self.bombieri * np.abs(vec) ** 2)))

    def round_distance(self, vec) -> float:
        """Bombieri distance from vec to the line through Q^(d/2)."""
        w = self.sqrt_bombieri
        c = w * vec
        qn = w * self.q
        qn = qn / np.linalg.norm(qn)
        return float(np.linalg.norm(c - qn * np.vdot(qn, c)))

    def round_residual(self, vec, floor: float = 0.0) -> float:
        """round_distance relative to max(|vec|_B, floor)."""
        denom = max(self.bnorm(vec), floor)
        if denom == 0:
            return 0.0
        return self.round_distance(vec) / denom

    def round_scalar(self, vec) -> float:
        return float(np.real(np.vdot(self.q * self.bombieri, vec) / np.sum(self.bombieri * self.q ** 2)))


@lru_cache(maxsize=None)
def basis(k: int, d: int) -> HomogeneousBasis:
    return HomogeneousBasis(k, d)


def coeff_round_residual(vec: np.ndarray, qvec: np.ndarray) -> tuple[float, float]:
    """Plain coefficient 2-norm version: (scalar, |vec - scalar q| / |vec|)."""
    lam = float(np.dot(vec, qvec) / np.dot(qvec, qvec))
    nrm = np.linalg.norm(vec)
    if nrm == 0:
        return 0.0, 0.0
    return lam, float(np.linalg.norm(vec - lam * qvec) / nrm)
