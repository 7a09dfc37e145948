"""Searching for k-dimensional subspaces on which polynomials become round
(a multiple of Q^(d/2)) or vanish, over the reals and over the complex
numbers, plus the exact construction for a single quadratic form.

Frames are k x n matrices with orthonormal rows; the subspace is their row
span and the restriction of f is u -> f(A^T u). Residuals use the Bombieri
norm on coefficient vectors, which is invariant under orthogonal changes of
variables, so they depend on the subspace and not on the chosen frame.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .homogeneous import basis
from .polyring import Ring, SparsePoly, compose_linear

MODES = ("even-round", "odd-zero")


@dataclass
class Frame:
    rows: np.ndarray

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows))
        G = self.rows @ self.rows.conj().T
        if not np.allclose(G, np.eye(self.k), atol=1e-10):
            raise ValueError("frame rows are not orthonormal")

    @property
    def k(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    def to_json(self):
        if np.iscomplexobj(self.rows):
            return [[[z.real, z.imag] for z in row] for row in self.rows.tolist()]
        return self.rows.tolist()


@dataclass
class SearchReport:
    frame: Frame | None
    residual: float
    restarts_used: int
    mode: str
    seed: int
    success: bool
    history: list = field(default_factory=list)

    def to_json(self):
        return {"mode": self.mode, "n": self.frame.n if self.frame else None,
                "k": self.frame.k if self.frame else None, "residual": self.residual,
                "frame": self.frame.to_json() if self.frame else None, "seed": self.seed,
                "restarts": self.restarts_used, "success": self.success}


def orthonormalize(A: np.ndarray) -> np.ndarray:
    """Polar retraction: the orthonormal frame closest to A with the same row span."""
    U, _, Vh = np.linalg.svd(A, full_matrices=False)
    return U @ Vh


def random_frame(k: int, n: int, rng: np.random.Generator, complex_: bool = False) -> np.ndarray:
    G = rng.standard_normal((k, n))
    if complex_:
        G = G + 1j * rng.standard_normal((k, n))
    return orthonormalize(G)


def restrict(f: SparsePoly, A) -> SparsePoly:
    """f restricted to the row span of A, as a polynomial in the frame coordinates."""
    rows = A.rows if isinstance(A, Frame) else np.atleast_2d(np.asarray(A))
    if rows.shape[1] != f.nvars:
        raise ValueError(f"frame has {rows.shape[1]} columns, polynomial has {f.nvars} variables")
    if f.ring.exact:
        f = f.to_ring(Ring.CC if np.iscomplexobj(rows) else Ring.RR)
    elif f.ring is Ring.RR and np.iscomplexobj(rows):
        f = f.to_ring(Ring.CC)
    return compose_linear(f, rows.T)


class _Target:
    """Per-polynomial data: coefficient extraction and its Jacobian with respect to the frame."""

    def __init__(self, f: SparsePoly, k: int, mode: str):
        if not f.is_homogeneous() or f.is_zero():
            raise ValueError("search inputs must be nonzero homogeneous polynomials")
        self.ring = Ring.CC if f.ring is Ring.CC else Ring.RR
        self.f = f if f.ring is self.ring else f.to_ring(self.ring)
        self.d = f.degree()
        self.mode = mode
        if mode == "even-round" and self.d % 2:
            raise ValueError("even-round mode needs even degree")
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.B = basis(k, self.d)
        self.grads = [self.f.diff(j) for j in range(f.nvars)]
        nb = basis(f.nvars, self.d)
        self.fnorm = nb.bnorm(nb.vector(self.f))
        w = self.B.sqrt_bombieri
        if mode == "even-round":
            qn = w * self.B.q
            self.qn = qn / np.linalg.norm(qn)

    def coeffs(self, A):
        P = self.B.X @ A
        return self.B.coeffs_from_values(self.f.evaluate_many(P))

    def coeffs_and_jac(self, A):
        """c (D,) and dc/dA (D, k, n)."""
        X = self.B.X
        P = X @ A
        vals = self.f.evaluate_many(P)
        G = np.stack([g.evaluate_many(P) for g in self.grads], axis=1)  # N x n
        J = X[:, :, None] * G[:, None, :]
        c = self.B.coeffs_from_values(vals)
        dc = np.tensordot(self.B.pinv, J, axes=(1, 0))
        return c, dc

    def vector(self, A, jac=False):
        """Residual vector whose norm is the reported residual (and its Jacobian)."""
        w = self.B.sqrt_bombieri
        if jac:
            c, dc = self.coeffs_and_jac(A)
            dc = w[:, None, None] * dc
        else:
            c = self.coeffs(A)
        ct = w * c
        if self.mode == "odd-zero":
            r = ct / self.fnorm
            return (r, dc / self.fnorm) if jac else r
        perp = ct - self.qn * (self.qn @ ct)
        nrm = np.linalg.norm(ct)
        floor = 1e-6 * self.fnorm
        if nrm < floor:
            r = perp / floor
            if not jac:
                return r
            dperp = dc - np.einsum("i,j,jkl->ikl", self.qn, self.qn, dc)
            return r, dperp / floor
        r = perp / nrm
        if not jac:
            return r
        dperp = dc - np.einsum("i,j,jkl->ikl", self.qn, self.qn, dc)
        dn = np.einsum("i,ikl->kl", ct, dc) / nrm
        return r, dperp / nrm - np.einsum("i,kl->ikl", perp, dn) / nrm ** 2


def residual(f: SparsePoly, A, mode: str) -> float:
    """Normalised distance of f|_V from the line of Q^(d/2) (even-round) or from 0 (odd-zero)."""
    rows = A.rows if isinstance(A, Frame) else np.atleast_2d(np.asarray(A))
    if rows.shape[1] != f.nvars:
        raise ValueError("frame and polynomial dimensions differ")
    t = _Target(f, rows.shape[0], mode)
    return float(np.linalg.norm(t.vector(rows)))


def residual_and_grad(f: SparsePoly, A: np.ndarray, mode: str):
    """residual^2 and its gradient with respect to the ambient frame entries."""
    t = _Target(f, A.shape[0], mode)
    r, J = t.vector(A, jac=True)
    return float(r @ r), 2 * np.einsum("i,ikl->kl", r, J)


def _complement(A):
    """Orthonormal rows spanning the orthogonal complement of the row span of A."""
    k, n = A.shape
    _, _, Vh = np.linalg.svd(A, full_matrices=True)
    return Vh[k:]


def _stack(targets, A):
    rs, Js = [], []
    for t in targets:
        r, J = t.vector(A, jac=True)
        rs.append(r)
        Js.append(J.reshape(J.shape[0], -1))
    return np.concatenate(rs), np.vstack(Js)


def _max_res(targets, A):
    return max(float(np.linalg.norm(t.vector(A))) for t in targets)


def _gauss_newton(targets, A, tol, iters, complex_=False):
    k, n = A.shape
    r, _ = _stack(targets, A)
    obj = float(np.vdot(r, r).real)
    for _ in range(iters):
        if _max_res(targets, A) <= tol * 1e-2 or n == k:
            break
        r, J = _stack(targets, A)
        C = _complement(A)
        # directions Z = Bm C, Bm of shape (k, n - k)
        Jb = np.einsum("ikn,mn->ikm", J.reshape(-1, k, n), C).reshape(J.shape[0], -1)
        step = np.linalg.lstsq(Jb, -r, rcond=None)[0]
        Z = step.reshape(k, n - k) @ C
        grad = Jb.conj().T @ r
        slope = -2 * float(np.real(np.vdot(grad, step)))
        t = 1.0
        accepted = False
        while t > 1e-10:
            An = orthonormalize(A + t * Z)
            rn = np.concatenate([tt.vector(An) for tt in targets])
            on = float(np.vdot(rn, rn).real)
            if on <= obj - 1e-4 * t * abs(slope):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        A, obj = An, on
    return A


def _restart_seed(seed, idx):
    return np.random.default_rng([seed, idx])


def _run_restarts(targets, k, n, restarts, seed, tol, iters, complex_):
    """Restart i starts from a frame drawn from stream (seed, i); chunks of GRR_THREADS run
    concurrently but are merged in index order, so the result does not depend on threads."""
    threads = max(1, int(os.environ.get("GRR_THREADS", "1") or 1))

    def one(idx):
        A0 = random_frame(k, n, _restart_seed(seed, idx), complex_)
        A = _gauss_newton(targets, A0, tol, iters, complex_)
        return idx, A, _max_res(targets, A)

    best = None
    history = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, restarts, threads):
            chunk = range(start, min(restarts, start + threads))
            results = list(pool.map(one, chunk)) if threads > 1 else [one(i) for i in chunk]
            for i, A, res in results:
                history.append(res)
                if best is None or res < best[2]:
                    best = (i, A, res)
                if res <= tol:
                    return best, i + 1, history
    return best, restarts, history


def search(fs, k: int, mode: str, restarts: int = 100, seed: int = 0, tol: float = 1e-8,
           iters: int = 200) -> SearchReport:
    """Random restarts of Gauss-Newton on the Grassmannian; reports the best frame found.

    The objective is the sum of squared residual vectors; the reported
    residual is the largest per-polynomial residual. A residual above tol
    means "not found", never "does not exist".
    """
    fs = list(fs) if isinstance(fs, (list, tuple)) else [fs]
    n = fs[0].nvars
    if any(f.nvars != n for f in fs):
        raise ValueError("all polynomials must share the ambient dimension")
    if n < k:
        raise ValueError("n must be at least k")
    if any(f.ring is Ring.CC for f in fs):
        raise ValueError("use complex_search for complex coefficients")
    targets = [_Target(f, k, mode) for f in fs]
    (i, A, res), used, history = _run_restarts(targets, k, n, restarts, seed, tol, iters, False)
    return SearchReport(Frame(A), res, used, mode, seed, res <= tol, history)


def complex_search(fs, k: int, restarts: int = 100, seed: int = 0, tol: float = 1e-10,
                   iters: int = 200) -> SearchReport:
    """Search for a complex k-subspace on which every f vanishes (unitary frames)."""
    fs = list(fs) if isinstance(fs, (list, tuple)) else [fs]
    n = fs[0].nvars
    if n < k:
        raise ValueError("n must be at least k")
    fs = [f.to_ring(Ring.CC) if f.ring is not Ring.CC else f for f in fs]
    targets = [_Target(f, k, "odd-zero") for f in fs]
    (i, A, res), used, history = _run_restarts(targets, k, n, restarts, seed, tol, iters, True)
    return SearchReport(Frame(A), res, used, "complex-zero", seed, res <= tol, history)


# quadratic forms


@dataclass
class QuadraticRound:
    frame: Frame
    value: float
    residual: float


def exact_round_quadratic(Asym, k: int) -> QuadraticRound:
    """A k-frame on which the quadratic form x^T A x equals lambda |x|^2, for n >= 2k - 1.

    Take the top 2k - 1 eigenvalues mu_1 >= ... >= mu_(2k-1), keep the
    eigenvector of the median mu_k and mix each pair (mu_i, mu_(2k-i))
    so that its Rayleigh quotient is exactly mu_k.
    """
    A = np.asarray(Asym, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T):
        raise ValueError("matrix must be square and symmetric")
    if n < 2 * k - 1:
        raise ValueError(f"need n >= 2k - 1 = {2 * k - 1}, got n = {n}")
    A = (A + A.T) / 2
    mu, V = np.linalg.eigh(A)
    mu, V = mu[::-1], V[:, ::-1]
    lam = mu[k - 1]
    rows = [V[:, k - 1]]
    for i in range(k - 1):
        j = 2 * k - 2 - i
        gap = mu[i] - mu[j]
        c2 = 1.0 if gap <= 0 else min(1.0, max(0.0, (lam - mu[j]) / gap))
        rows.append(np.sqrt(c2) * V[:, i] + np.sqrt(1 - c2) * V[:, j])
    F = np.array(rows)
    restricted = F @ A @ F.T
    scale = max(1.0, np.abs(mu).max())
    res = float(np.linalg.norm(restricted - lam * np.eye(k), 2) / scale)
    return QuadraticRound(Frame(F), float(lam), res)


def quadratic_residual(Asym, frame) -> float:
    F = frame.rows if isinstance(frame, Frame) else np.asarray(frame)
    R = F @ np.asarray(Asym) @ F.T
    lam = np.trace(R) / R.shape[0]
    return float(np.linalg.norm(R - lam * np.eye(R.shape[0]), 2) / max(1.0, np.abs(np.linalg.eigvalsh(Asym)).max()))


def random_form(n: int, d: int, rng: np.random.Generator, complex_: bool = False) -> SparsePoly:
    """Gaussian coefficients on every monomial of degree d."""
    B = basis(n, d)
    c = rng.standard_normal(B.dim)
    if complex_:
        c = c + 1j * rng.standard_normal(B.dim)
        return SparsePoly(Ring.CC, n, dict(zip(B.monos, c)))
    return SparsePoly(Ring.RR, n, dict(zip(B.monos, c)))
