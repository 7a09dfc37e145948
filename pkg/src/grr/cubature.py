"""Rotation averages of even forms and finite cubatures that reproduce them.

The averaging lemma: for even forms f_1..f_l in k variables there are
finitely many similarity transforms sigma_i (rotation times a nonnegative
scale) with sum_i f_j(sigma_i x) proportional to Q^(deg f_j / 2) for every j.
Here they are found by sampling Haar rotations, solving a nonnegative least
squares problem for the exact rotation average, and pruning the support by
Caratheodory's theorem. The recursive construction of linear forms stacks
rotated copies of a block of forms, one stage per level of the binary tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares, nnls

from . import exactla
from .homogeneous import basis
from .polyring import LinearFormSet, Ring, SparsePoly, compose_linear
from .sylowtree import (InvariantCoefficients, enumerate_orbits, key_string,
                        orbit_of, representative)

# restarts of the nonlinear pass that squeezes a cubature into a fixed count
COMPRESSION_TRIALS = 12


class CubatureFailure(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CaratheodoryDegenerate(RuntimeError):
    pass


# similarity transforms


@dataclass
class SimilarityTransform:
    rotation: np.ndarray
    scale: float

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.scale = float(self.scale)
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")
        k = self.rotation.shape[0]
        if self.rotation.shape != (k, k):
            raise ValueError("rotation must be square")
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(k), atol=1e-10):
            raise ValueError("rotation is not orthogonal")
        if np.linalg.det(self.rotation) < 0:
            raise ValueError("rotation has determinant -1")

    @classmethod
    def zero(cls, k: int) -> "SimilarityTransform":
        return cls(np.eye(k), 0.0)

    @classmethod
    def identity(cls, k: int) -> "SimilarityTransform":
        return cls(np.eye(k), 1.0)

    @property
    def k(self) -> int:
        return self.rotation.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.scale * self.rotation

    def is_zero(self) -> bool:
        return self.scale == 0.0

    def apply(self, f: SparsePoly) -> SparsePoly:
        """x -> f(sigma x)."""
        return compose_linear(f.to_ring(Ring.RR) if f.ring.exact else f, self.matrix)

    def to_json(self):
        return {"rotation": self.rotation.ravel().tolist(), "scale": self.scale}

    @classmethod
    def from_json(cls, data, k=None):
        rot = np.asarray(data["rotation"], dtype=float)
        k = k or int(round(math.sqrt(rot.size)))
        return cls(rot.reshape(k, k), data["scale"])


def haar_rotation(k: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of SO(k): QR of a Gaussian matrix with sign fixes."""
    G = rng.standard_normal((k, k))
    Qm, R = np.linalg.qr(G)
    Qm = Qm * np.sign(np.diag(R))
    if np.linalg.det(Qm) < 0:
        Qm[:, 0] = -Qm[:, 0]
    return Qm


# exact sphere averages


def _double_factorial_odd(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def sphere_moment(mono, k: int) -> Fraction:
    """Mean of x^mono over the unit sphere in R^k (the rotation average coefficient)."""
    if any(a % 2 for a in mono):
        return Fraction(0)
    half = [a // 2 for a in mono]
    num = 1
    for b in half:
        num *= _double_factorial_odd(2 * b - 1)
    den = 1
    for j in range(sum(half)):
        den *= k + 2 * j
    return Fraction(num, den)


@dataclass
class SphereAverage:
    c: object
    certificate: SparsePoly


def sphere_average(f: SparsePoly, k: int | None = None) -> SphereAverage:
    """c with the SO(k)-average of f equal to c Q^(d/2)."""
    k = f.nvars if k is None else k
    if k != f.nvars:
        raise ValueError("variable count mismatch")
    if f.is_zero():
        return SphereAverage(0, f)
    if not f.is_homogeneous():
        raise ValueError("sphere_average needs a homogeneous polynomial")
    d = f.degree()
    exact = f.ring.exact
    if d % 2:
        return SphereAverage(Fraction(0) if exact else 0.0, SparsePoly.zero(f.ring, k))
    total = Fraction(0) if exact else 0.0
    for mono, coef in f.terms.items():
        m = sphere_moment(mono, k)
        total += coef * m if exact else coef * float(m)
    qpow = SparsePoly.quadratic_form(f.ring, k) ** (d // 2)
    return SphereAverage(total, qpow.scale(total))


# Caratheodory


def caratheodory_reduce(points, weights, tol: float = 1e-13, minimal: bool = False):
    """Prune a nonnegative combination to at most D+1 points with the same weighted sum.

    Returns (indices, weights). With ``minimal`` the pruning continues until
    the surviving points are affinely independent. Fraction inputs are
    handled exactly.
    """
    weights = list(weights)
    if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
        raise ValueError("weights must be nonnegative with at least one positive")
    exact = all(isinstance(w, (int, Fraction)) for w in weights) and all(
        isinstance(x, (int, Fraction)) for p in points for x in p)
    if exact:
        return _caratheodory_exact(points, weights, minimal)
    P = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    n, D = P.shape
    active = [i for i in range(n) if w[i] > 0]
    if not minimal and len(active) <= D + 1:
        return active, w[active]
    while True:
        A = np.vstack([P[active].T, np.ones(len(active))])
        if len(active) <= 1:
            break
        _, s, Vt = np.linalg.svd(A)
        scale = s[0] if s.size else 1.0
        rank = int(np.sum(s > 1e-11 * scale))
        if (minimal and rank == len(active)) or (not minimal and len(active) <= D + 1):
            break
        v = Vt[-1]
        if not np.any(v > tol):
            v = -v
        pos = v > tol
        if not np.any(pos):
            raise CaratheodoryDegenerate("no usable pivot in the null vector")
        wa = w[active]
        ratios = np.where(pos, wa / np.where(pos, v, 1.0), np.inf)
        j = int(np.argmin(ratios))
        wa = wa - ratios[j] * v
        wa[j] = 0.0
        wa[np.abs(wa) < 1e-15 * wa.max()] = 0.0
        w[active] = np.maximum(wa, 0.0)
        active = [i for i in active if w[i] > 0]
    return active, w[active]


def _caratheodory_exact(points, weights, minimal):
    w = [Fraction(x) for x in weights]
    D = len(points[0])
    active = [i for i in range(len(w)) if w[i] > 0]
    while True:
        rows = [[Fraction(points[i][j]) for i in active] for j in range(D)] + [[Fraction(1)] * len(active)]
        null = exactla.nullspace(rows, len(active))
        if not null or (not minimal and len(active) <= D + 1):
            break
        v = null[0]
        if not any(x > 0 for x in v):
            v = [-x for x in v]
        j = min((i for i in range(len(active)) if v[i] > 0), key=lambda i: w[active[i]] / v[i])
        t = w[active[j]] / v[j]
        for i in range(len(active)):
            w[active[i]] -= t * v[i]
        w[active[j]] = Fraction(0)
        active = [i for i in active if w[i] > 0]
    return active, [w[i] for i in active]


# the averaging lemma


def _check_even_form(f: SparsePoly) -> int:
    if f.ring is Ring.CC or f.ring is Ring.GF2:
        raise ValueError("cubature works with real or rational forms")
    if f.is_zero():
        return 0
    if not f.is_homogeneous():
        raise ValueError("input polynomial is not homogeneous")
    d = f.degree()
    if d % 2:
        raise ValueError("input polynomial has odd degree")
    return d


def _sample_block(B, fs, rotations):
    """Coefficient vectors of f(rho x) for every rotation; shape (len(fs), nrot, D)."""
    out = np.empty((len(fs), len(rotations), B.dim))
    for r, rho in enumerate(rotations):
        pts = B.X @ rho.T
        vals = np.stack([f.evaluate_many(pts) for f in fs], axis=1)
        out[:, r, :] = B.coeffs_from_values(vals).T
    return out


def _premultiplied(f, d):
    e = (d - f.degree()) // 2
    return f * SparsePoly.quadratic_form(Ring.RR, f.nvars) ** e if e else f


def _to_rr(f):
    return f.to_ring(Ring.RR) if f.ring is not Ring.RR else f


def cubature_residuals(polys, transforms) -> list[float]:
    """Bombieri distance of sum_i f(sigma_i x) from the line of Q^(deg/2), per input.

    The distance is divided by sum_i |f(sigma_i x)|_B = sum_i s_i^d |f|_B, the
    size of the summands, so inputs whose average vanishes are handled too.
    """
    out = []
    for f in polys:
        f = _to_rr(f)
        if f.is_zero():
            out.append(0.0)
            continue
        d = f.degree()
        B = basis(f.nvars, d)
        total = np.zeros(B.dim)
        for t in transforms:
            if t.is_zero():
                continue
            pts = B.X @ t.rotation.T
            total += t.scale ** d * B.coeffs_from_values(f.evaluate_many(pts))
        norm_terms = sum(t.scale ** d for t in transforms) * B.bnorm(B.vector(f))
        out.append(B.round_distance(total) / norm_terms if norm_terms else 0.0)
    return out


@dataclass
class Lemma2Result:
    transforms: list
    residuals: list
    samples_used: int
    refined: bool = False


def _nonround_residual_fn(Bs, fs, degs, rotations0, free_rotations):
    k = rotations0[0].shape[0]
    npar = k * (k - 1) // 2
    iu = np.triu_indices(k, 1)
    dmax = max(degs)

    def rotations(z):
        out = []
        for i, rho in enumerate(rotations0):
            if not free_rotations:
                out.append(rho)
                continue
            S = np.zeros((k, k))
            S[iu] = z[i * npar:(i + 1) * npar]
            S = S - S.T
            out.append(expm(S) @ rho)
        return out

    vecs = [B.vector(f) for f, B in zip(fs, Bs)]
    scales = [B.bnorm(v) for v, B in zip(vecs, Bs)]
    qns = [B.sqrt_bombieri * B.q / np.linalg.norm(B.sqrt_bombieri * B.q) for B in Bs]

    def fn(params):
        n = len(rotations0)
        s = params[-n:]
        rots = rotations(params[:-n])
        res = []
        for v, deg, B, qn, scale in zip(vecs, degs, Bs, qns, scales):
            total = np.zeros(B.dim)
            for rho, si in zip(rots, s):
                total += si ** deg * (B.pinv @ (B.vandermonde(B.X @ rho.T) @ v))
            c = B.sqrt_bombieri * total
            res.append((c - qn * (qn @ c)) / scale)
        res.append(np.array([np.sum(s ** dmax) - 1.0]))
        return np.concatenate(res)

    return fn, rotations, npar


def _refine(fs, degs, rotations, scales, free_rotations, tol, max_nfev=2000):
    k = rotations[0].shape[0]
    Bs = [basis(k, d) for d in degs]
    fn, rot_of, npar = _nonround_residual_fn(Bs, fs, degs, rotations, free_rotations)
    nr = len(rotations) * npar if free_rotations else 0
    x0 = np.concatenate([np.zeros(nr), np.asarray(scales, dtype=float)])
    sol = least_squares(fn, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    s = np.abs(sol.x[-len(rotations):])
    return rot_of(sol.x[:-len(rotations)]), s, float(np.max(np.abs(sol.fun[:-1]))) if sol.fun.size > 1 else 0.0


def lemma2(polys, k: int | None = None, seed: int = 0, tol: float = 1e-8,
           max_count: int | None = None, budget_doublings: int = 6) -> Lemma2Result:
    """The averaging lemma with its diagnostics; see ``build_lemma2_cubature``."""
    polys = [_to_rr(f) for f in polys]
    if not polys:
        raise ValueError("need at least one polynomial")
    k = polys[0].nvars if k is None else k
    if any(f.nvars != k for f in polys):
        raise ValueError("all polynomials must have k variables")
    degs = [_check_even_form(f) for f in polys]

    active = []
    for f, dj in zip(polys, degs):
        if f.is_zero() or dj == 0:
            continue
        B = basis(k, dj)
        if B.round_residual(B.vector(f)) <= 1e-3 * tol:
            continue
        active.append((f, dj))
    if not active:
        return Lemma2Result([SimilarityTransform.identity(k)], [0.0] * len(polys), 0)

    d = max(dj for _, dj in active)
    B = basis(k, d)
    F = [_premultiplied(f, d) for f, _ in active]
    targets = []
    for Fj in F:
        c = float(sphere_average(Fj).c)
        targets.append(c * B.q)
    norms = [max(np.linalg.norm(t), np.linalg.norm(B.vector(Fj))) for t, Fj in zip(targets, F)]
    b = np.concatenate([t / nj for t, nj in zip(targets, norms)] + [np.ones(1)])

    rng = np.random.default_rng(seed)
    rotations = []
    nsamp = 4 * (B.dim + 1)
    for attempt in range(budget_doublings + 1):
        while len(rotations) < nsamp:
            rotations.append(haar_rotation(k, rng))
        block = _sample_block(B, F, rotations)
        A = np.vstack([np.concatenate([block[j].T / norms[j] for j in range(len(F))], axis=0),
                       np.ones((1, len(rotations)))])
        w, rnorm = nnls(A, b, maxiter=50 * A.shape[1])
        if rnorm <= 1e-3 * tol:
            break
        nsamp *= 2
    else:
        raise CubatureFailure("nonnegative feasibility residual stayed above tolerance",
                              {"residual": float(rnorm), "samples": len(rotations)})

    support = np.flatnonzero(w > 0)
    pts = A[:-1, support].T
    idx, wr = caratheodory_reduce(pts, w[support], minimal=True)
    chosen = [rotations[support[i]] for i in idx]
    wr = np.asarray(wr, dtype=float)
    wr = wr / wr.sum()
    scales = wr ** (1.0 / d)
    refined = False

    mixed = len({dj for _, dj in active}) > 1
    too_many = max_count is not None and len(chosen) > max_count
    if mixed or too_many:
        refined = True
        fs = [f for f, _ in active]
        ds = [dj for _, dj in active]
        if too_many:
            best = None
            order = np.argsort(-wr)
            trial_rng = np.random.default_rng([seed, 1])
            for trial in range(COMPRESSION_TRIALS):
                if trial == 0:
                    pick = [chosen[i] for i in order[:max_count]]
                else:
                    pick = [haar_rotation(k, trial_rng) for _ in range(max_count)]
                s0 = np.full(max_count, (1.0 / max_count) ** (1.0 / max(ds)))
                rots, s, err = _refine(fs, ds, pick, s0, True, tol, max_nfev=600)
                if best is None or err < best[2]:
                    best = (rots, s, err)
                if err <= 1e-3 * tol:
                    break
            chosen, scales, _ = best
        else:
            chosen, scales, _ = _refine(fs, ds, chosen, scales, False, tol)
            if max(cubature_residuals(fs, [SimilarityTransform(r, s) for r, s in zip(chosen, scales)])) > tol:
                chosen, scales, _ = _refine(fs, ds, chosen, scales, True, tol)

    transforms = [SimilarityTransform(r, s) for r, s in zip(chosen, scales)]
    if all(t.is_zero() for t in transforms):
        raise CubatureFailure("all transforms are zero")
    residuals = cubature_residuals(polys, transforms)
    if max(residuals) > tol:
        raise CubatureFailure("proportionality residual above tolerance",
                              {"residuals": residuals, "count": len(transforms), "samples": len(rotations)})
    if max_count is not None and len(transforms) > max_count:
        raise CubatureFailure("cubature needs more transforms than available",
                              {"count": len(transforms), "max_count": max_count})
    return Lemma2Result(transforms, residuals, len(rotations), refined)


def build_lemma2_cubature(polys, k: int | None = None, seed: int = 0, tol: float = 1e-8,
                          max_count: int | None = None) -> list[SimilarityTransform]:
    """Similarity transforms sigma_i with sum_i f_j(sigma_i x) proportional to Q^(deg f_j/2).

    Count is at most l * C(k+d-1, d). Polynomials that are already round
    are ignored; when degrees differ the folded scales are adjusted by a
    nonlinear least-squares pass.
    """
    return lemma2(polys, k, seed, tol, max_count).transforms


def universal_cubature(k: int, d: int, seed: int = 0, tol: float = 1e-8) -> list[SimilarityTransform]:
    """One list of transforms that rounds every form of degree d (d even) at once."""
    if d % 2:
        raise ValueError("degree must be even")
    monos = [SparsePoly(Ring.RR, k, {m: 1.0}) for m in basis(k, d).monos]
    return build_lemma2_cubature(monos, k, seed, tol)


# recursive construction of linear forms


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


def _next_pow2(n):
    return 1 << max(0, (n - 1).bit_length())


@dataclass
class ConstructionSchedule:
    k: int
    d: int
    sizes: tuple | None = None

    def __post_init__(self):
        if self.d % 2 or self.d < 2:
            raise ValueError("d must be even and positive")
        if self.sizes is not None:
            self.sizes = tuple(int(s) for s in self.sizes)
            if len(self.sizes) != self.delta + 1:
                raise ValueError(f"schedule needs {self.delta + 1} sizes for d = {self.d}")
            if self.sizes[0] != 1 or not all(_is_pow2(s) for s in self.sizes):
                raise ValueError("sizes must be powers of two starting at 1")
            if any(a >= b for a, b in zip(self.sizes, self.sizes[1:])):
                raise ValueError("sizes must increase")

    @property
    def delta(self) -> int:
        return self.d // 2

    @property
    def dynamic(self) -> bool:
        return self.sizes is None

    @property
    def heights(self):
        return None if self.sizes is None else tuple(s.bit_length() - 1 for s in self.sizes)

    def a_priori_bound(self) -> int:
        """The schedule-free size bound 2k C(k+d-1, d)^d, for comparison only."""
        return 2 * self.k * math.comb(self.k + self.d - 1, self.d) ** self.d

    @classmethod
    def parse(cls, k, d, text: str | None):
        if text in (None, "", "auto"):
            return cls(k, d, None)
        return cls(k, d, tuple(int(s) for s in text.replace(",", " ").split()))


def orbit_values(rep, h: int, Y: np.ndarray) -> np.ndarray:
    """g_U evaluated at the rows of Y (values of the 2^h variables)."""
    sq = Y ** 2
    total = np.zeros(Y.shape[0])
    for img in orbit_of(rep, h):
        term = np.ones(Y.shape[0])
        for i, c in img.items():
            term = term * sq[:, i - 1] ** c
        total += term
    return total


def _phi_coeffs(L, rep, h, k, deg):
    B = basis(k, deg)
    return B, B.coeffs_from_values(orbit_values(rep, h, B.X @ L.T))


@dataclass
class RecursiveConstruction:
    forms: LinearFormSet
    sizes: tuple
    stage_counts: list
    residuals: dict
    max_residual: float
    a_priori_bound: int

    def to_json(self):
        return {"sizes": list(self.sizes), "stage_counts": self.stage_counts,
                "max_residual": self.max_residual, "a_priori_bound": self.a_priori_bound,
                "forms": self.forms.to_json()}


class StageFailure(RuntimeError):
    def __init__(self, message, stage, orbit=None, diagnostics=None):
        super().__init__(message)
        self.stage = stage
        self.orbit = orbit
        self.diagnostics = diagnostics or {}


def coefficient_residual(vec, qvec) -> float:
    nrm = np.linalg.norm(vec)
    if nrm == 0:
        return 0.0
    lam = vec @ qvec / (qvec @ qvec)
    return float(np.linalg.norm(vec - lam * qvec) / nrm)


def round_residuals(L: np.ndarray, delta: int, h: int) -> dict:
    """Residual of g_U(l(x)) against Q^#U for every orbit U with #U <= delta at height h."""
    k = L.shape[1]
    out = {}
    for dp in range(1, delta + 1):
        for e in enumerate_orbits(dp, h):
            B, c = _phi_coeffs(L, e.representative, h, k, 2 * dp)
            out[key_string(e.key)] = coefficient_residual(c, B.q)
    return out


def build_recursive_forms(k: int, d: int, schedule: ConstructionSchedule | None = None,
                          seed: int = 0, tol: float = 1e-7) -> RecursiveConstruction:
    """m = s_delta linear forms with every g_U(l(x)) proportional to Q^#U, #U <= d/2."""
    schedule = schedule or ConstructionSchedule(k, d)
    if (schedule.k, schedule.d) != (k, d):
        raise ValueError("schedule was made for different (k, d)")
    delta = d // 2
    rng = np.random.default_rng([seed, 0])
    s1 = schedule.sizes[1] if schedule.sizes else _next_pow2(k)
    if s1 < k:
        raise StageFailure(f"first block size {s1} cannot hold {k} spanning forms", 0)
    L = np.zeros((s1, k))
    L[:k] = haar_rotation(k, rng)
    sizes = [1, s1]
    counts = [k]
    for i in range(1, delta):
        si = L.shape[0]
        hi = si.bit_length() - 1
        phis = []
        for dp in range(1, delta + 1):
            for e in enumerate_orbits(dp, hi):
                B, c = _phi_coeffs(L, e.representative, hi, k, 2 * dp)
                phis.append(B.poly(c))
        room = schedule.sizes[i + 1] // si if schedule.sizes else None
        try:
            res = lemma2(phis, k, seed=seed + 7919 * i, tol=tol * 1e-1, max_count=room)
        except CubatureFailure as exc:
            raise StageFailure(f"stage {i}: {exc}", i, diagnostics=exc.diagnostics) from exc
        n = len(res.transforms)
        if room is None:
            room = _next_pow2(n)
        blocks = [L @ t.matrix for t in res.transforms]
        blocks += [np.zeros_like(L)] * (room - n)
        L = np.vstack(blocks)
        sizes.append(L.shape[0])
        counts.append(n)
    h = L.shape[0].bit_length() - 1
    residuals = round_residuals(L, delta, h)
    worst = max(residuals.values())
    forms = LinearFormSet(L)
    if worst > tol:
        bad = max(residuals, key=residuals.get)
        raise StageFailure(f"final residual {worst:.3g} above {tol}", delta, bad, {"residuals": residuals})
    if not forms.spans():
        raise StageFailure("forms do not span the dual space", delta)
    return RecursiveConstruction(forms, tuple(sizes), counts, residuals, worst, schedule.a_priori_bound())


@dataclass
class RoundCheck:
    scalar: float
    residual: float


def verify_round_restriction(a: InvariantCoefficients, L: LinearFormSet) -> RoundCheck:
    """Substitute y_i = l_i(x) into sum_S a_S y^(2S) and compare with Q^delta."""
    M = np.asarray(L.matrix, dtype=float)
    if M.shape[0] != 2 ** a.h:
        raise ValueError(f"need {2 ** a.h} forms, got {M.shape[0]}")
    k = M.shape[1]
    B = basis(k, 2 * a.delta)
    total = np.zeros(B.dim)
    scale = 0.0
    for key, coef in a.values.items():
        c = B.coeffs_from_values(orbit_values(representative(key, a.h), a.h, B.X @ M.T))
        total += coef * c
        scale += abs(coef) * np.linalg.norm(c)
    lam = float(total @ B.q / (B.q @ B.q))
    if scale == 0:
        return RoundCheck(0.0, 0.0)
    return RoundCheck(lam, float(np.linalg.norm(total - lam * B.q) / scale))
