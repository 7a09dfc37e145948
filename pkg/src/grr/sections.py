"""Projections and sections of convex polytopes, their Lowner (circumscribed)
and John (inscribed) ellipsoids, and a search over k-planes for a plane on
which the chosen ellipsoid of every body is a Euclidean ball.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .roundsearch import Frame, SearchReport, orthonormalize, random_frame


class DegenerateBody(ValueError):
    pass


class NotInterior(ValueError):
    pass


@dataclass
class Polytope:
    vertices: np.ndarray
    facets: list | None = None  # list of (unit normal, offset): normal . x <= offset
    degenerate: bool = False

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @classmethod
    def from_vertices(cls, vertices, with_facets: bool = True) -> "Polytope":
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        if V.shape[1] == 1:
            lo, hi = V.min(), V.max()
            if hi - lo <= 0:
                return cls(V, None, True)
            return cls(np.array([[lo], [hi]]), [(np.array([1.0]), hi), (np.array([-1.0]), -lo)])
        centered = V - V.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-10 * max(1.0, np.abs(V).max())) < V.shape[1]:
            return cls(V, None, True)
        hull = ConvexHull(V)
        verts = V[hull.vertices]
        facets = _facets_from_equations(hull.equations) if with_facets else None
        return cls(verts, facets)

    @classmethod
    def from_halfspaces(cls, normals, offsets, interior=None) -> "Polytope":
        N = np.atleast_2d(np.asarray(normals, dtype=float))
        b = np.asarray(offsets, dtype=float)
        norms = np.linalg.norm(N, axis=1)
        N, b = N / norms[:, None], b / norms
        if interior is None:
            interior, r = chebyshev_center(N, b)
            if r <= 0:
                raise DegenerateBody("halfspaces have empty interior")
        if np.any(N @ interior >= b):
            raise NotInterior("point is not interior")
        if N.shape[1] == 1:
            hi = min(bi / a for a, bi in zip(N[:, 0], b) if a > 0)
            lo = max(bi / a for a, bi in zip(N[:, 0], b) if a < 0)
            return cls(np.array([[lo], [hi]]), [(np.array([1.0]), hi), (np.array([-1.0]), -lo)])
        hs = HalfspaceIntersection(np.hstack([N, -b[:, None]]), np.asarray(interior, dtype=float))
        P = cls.from_vertices(hs.intersections)
        return P

    @classmethod
    def cube(cls, n: int, half: float = 1.0) -> "Polytope":
        V = np.array(np.meshgrid(*[[-half, half]] * n)).reshape(n, -1).T
        facets = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            facets += [(e, half), (-e, half)]
        return cls(V, facets)

    def contains(self, x, tol: float = 1e-9) -> bool:
        if self.facets is None:
            return in_hull_lp(self.vertices, x, tol)
        return all(a @ x <= b + tol for a, b in self.facets)

    def to_json(self):
        out = {"vertices": self.vertices.tolist()}
        if self.facets is not None:
            out["facets"] = [{"normal": a.tolist(), "offset": float(b)} for a, b in self.facets]
        return out

    @classmethod
    def from_json(cls, data) -> "Polytope":
        facets = None
        if data.get("facets"):
            facets = [(np.asarray(f["normal"], dtype=float), float(f["offset"])) for f in data["facets"]]
        if facets is None:
            return cls.from_vertices(data["vertices"])
        return cls(np.asarray(data["vertices"], dtype=float), facets)


def _facets_from_equations(eq):
    out = {}
    for row in eq:
        a, off = row[:-1], -row[-1]
        nrm = np.linalg.norm(a)
        a, off = a / nrm, off / nrm
        key = tuple(np.round(np.append(a, off), 9))
        out.setdefault(key, (a, off))
    return list(out.values())


def chebyshev_center(N, b):
    """Largest ball in {x : N x <= b} (rows of N of unit length)."""
    k = N.shape[1]
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A = np.hstack([N, np.ones((N.shape[0], 1))])
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * k + [(0, None)], method="highs")
    if res.status == 3:
        raise DegenerateBody("polytope is unbounded")
    if not res.success:
        raise DegenerateBody(res.message)
    return res.x[:k], res.x[-1]


def in_hull_lp(V, x, tol: float = 1e-9) -> bool:
    """Membership in conv(V) by a feasibility linear program."""
    V = np.asarray(V, dtype=float)
    m = V.shape[0]
    A_eq = np.vstack([V.T, np.ones((1, m))])
    b_eq = np.append(np.asarray(x, dtype=float), 1.0)
    res = linprog(np.zeros(m), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * m, method="highs")
    return bool(res.success)


@dataclass
class Ellipsoid:
    """{x : (x - c)^T S (x - c) <= 1}."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.shape = np.asarray(self.shape, dtype=float)
        self.shape = (self.shape + self.shape.T) / 2
        try:
            np.linalg.cholesky(self.shape)
        except np.linalg.LinAlgError as exc:
            raise ValueError("ellipsoid shape is not positive definite") from exc

    @property
    def dim(self) -> int:
        return self.center.size

    def contains(self, x, tol: float = 1e-9) -> bool:
        v = np.asarray(x) - self.center
        return float(v @ self.shape @ v) <= 1 + tol

    def gauge(self, X) -> np.ndarray:
        V = np.atleast_2d(X) - self.center
        return np.einsum("ij,jk,ik->i", V, self.shape, V)

    def volume_factor(self) -> float:
        return float(np.linalg.det(self.shape) ** -0.5)

    def to_json(self):
        return {"center": self.center.tolist(), "shape": self.shape.ravel().tolist(),
                "ball_residual": ball_residual(self)}


def ball_residual(E: Ellipsoid) -> float:
    w = np.linalg.eigvalsh(E.shape)
    return float(w[-1] / w[0] - 1.0)


# projections and sections


def _rows(A):
    return A.rows if isinstance(A, Frame) else np.atleast_2d(np.asarray(A, dtype=float))


def project(P, A):
    """Orthogonal projection onto the row span of A, in frame coordinates."""
    F = _rows(A)
    if isinstance(P, Ellipsoid):
        Sinv = np.linalg.inv(P.shape)
        return Ellipsoid(F @ P.center, np.linalg.inv(F @ Sinv @ F.T))
    img = P.vertices @ F.T
    if F.shape[0] <= 3:
        return Polytope.from_vertices(img)
    centered = img - img.mean(axis=0)
    deg = np.linalg.matrix_rank(centered, tol=1e-10 * max(1.0, np.abs(img).max())) < F.shape[0]
    return Polytope(img, None, deg)


def section(P, A, x) -> Polytope:
    """The slice of P by the affine plane x + rowspan(A), in frame coordinates."""
    F = _rows(A)
    x = np.asarray(x, dtype=float)
    if isinstance(P, Ellipsoid):
        v = x - P.center
        if v @ P.shape @ v >= 1:
            raise NotInterior("point is not interior to the ellipsoid")
        # (F^T u + v)^T S (F^T u + v) <= 1
        S2 = F @ P.shape @ F.T
        c = -np.linalg.solve(S2, F @ P.shape @ v)
        rhs = 1 - v @ P.shape @ v + c @ S2 @ c
        return Ellipsoid(c, S2 / rhs)
    if P.facets is None:
        raise ValueError("section needs a facet description")
    N = np.array([a for a, _ in P.facets])
    b = np.array([o for _, o in P.facets])
    slack = b - N @ x
    scale = max(1.0, np.abs(b).max())
    if np.any(slack <= 1e-12 * scale):
        raise NotInterior("point lies on or outside the boundary")
    NF = N @ F.T
    keep = np.linalg.norm(NF, axis=1) > 1e-14
    if np.any(~keep & (slack <= 0)):
        raise NotInterior("point is not interior")
    return Polytope.from_halfspaces(NF[keep], slack[keep], np.zeros(F.shape[0]))


# Lowner ellipsoid


def _lift(P):
    return np.hstack([P, np.ones((P.shape[0], 1))])


def lowner_mvee(points, eps: float = 1e-7, max_iter: int = 100000, polish: bool = True) -> Ellipsoid:
    """Minimum-volume enclosing ellipsoid.

    Barycentric coordinate ascent with away steps (Wolfe-Atwood with the
    Todd-Yildirim modification), stopped when max_i g_i <= (n+1)(1+eps);
    this certifies volume within (1+eps)^((n+1)/2) of optimal. The weights
    are then polished by Newton's method on the near-active points and the
    ellipsoid is rescaled so that every point is contained.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = P.shape
    centered = P - P.mean(axis=0)
    if m < n + 1 or np.linalg.matrix_rank(centered, tol=1e-10 * max(1.0, np.abs(P).max())) < n:
        raise DegenerateBody("points do not span their ambient space affinely")
    q = _lift(P)
    N = n + 1
    u = np.full(m, 1.0 / m)
    for it in range(max_iter):
        M = q.T @ (u[:, None] * q)
        g = np.einsum("ij,jk,ik->i", q, np.linalg.inv(M), q)
        j = int(np.argmax(g))
        supp = np.flatnonzero(u > 0)
        i = supp[int(np.argmin(g[supp]))]
        eps_plus = g[j] / N - 1
        eps_minus = 1 - g[i] / N
        if eps_plus <= eps and eps_minus <= eps:
            break
        if eps_plus >= eps_minus:
            step = (g[j] - N) / (N * (g[j] - 1))
            u *= 1 - step
            u[j] += step
        else:
            step = (N - g[i]) / (N * (g[i] - 1))
            step = min(step, u[i] / (1 - u[i]))
            u *= 1 + step
            u[i] -= step
            u[u < 1e-300] = 0.0
    if polish:
        u = _polish_weights(q, u, N)
    return _ellipsoid_from_weights(P, u)


def _polish_weights(q, u, N, iters: int = 30):
    Minv = np.linalg.inv(q.T @ (u[:, None] * q))
    g = np.einsum("ij,jk,ik->i", q, Minv, q)
    act = np.flatnonzero(g >= N * (1 - 1e-3))
    if act.size == 0:
        return u
    v = u[act].copy()
    v = np.maximum(v, 1e-12)
    v /= v.sum()
    for _ in range(iters):
        M = q[act].T @ (v[:, None] * q[act])
        Minv = np.linalg.inv(M)
        K = q[act] @ Minv @ q[act].T
        F = np.diag(K) - N
        if np.max(np.abs(F)) < 1e-14 * N:
            break
        J = -(K ** 2)
        Jf = np.vstack([J, np.ones((1, act.size))])
        Ff = np.append(F, v.sum() - 1)
        dv = np.linalg.lstsq(Jf, -Ff, rcond=None)[0]
        t = 1.0
        while np.any(v + t * dv < 0) and t > 1e-8:
            t *= 0.5
        v = v + t * dv
        if t < 1e-8:
            break
    uu = np.zeros_like(u)
    uu[act] = v
    if np.any(uu < -1e-14):
        return u
    uu = np.maximum(uu, 0)
    Mn = q.T @ (uu[:, None] * q)
    try:
        gn = np.einsum("ij,jk,ik->i", q, np.linalg.inv(Mn), q)
    except np.linalg.LinAlgError:
        return u
    g_old = np.einsum("ij,jk,ik->i", q, np.linalg.inv(q.T @ (u[:, None] * q)), q)
    return uu / uu.sum() if gn.max() <= g_old.max() else u


def _ellipsoid_from_weights(P, u):
    n = P.shape[1]
    c = u @ P
    R = P - c
    Sigma = R.T @ (u[:, None] * R)
    S = np.linalg.inv(Sigma) / n
    gauge = np.einsum("ij,jk,ik->i", R, S, R)
    S = S / gauge.max()
    return Ellipsoid(c, S)


def mvee_certificate(points, E: Ellipsoid) -> float:
    """Optimality gap of an enclosing ellipsoid from its contact points.

    Fits weights u >= 0 on points with gauge close to 1 so that
    sum u_i (p_i - c) = 0 and sum u_i (p_i - c)(p_i - c)^T = S^-1 / n; the
    returned value is the relative residual of that fit (zero at the optimum).
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n = P.shape[1]
    g = E.gauge(P)
    act = np.flatnonzero(g >= 1 - 1e-6)
    if act.size == 0:
        return float("inf")
    R = P[act] - E.center
    iu = np.triu_indices(n)
    cols = [np.concatenate([np.outer(r, r)[iu], r]) for r in R]
    target = np.concatenate([(np.linalg.inv(E.shape) / n)[iu], np.zeros(n)])
    _, rn = nnls(np.array(cols).T, target)
    return float(rn / np.linalg.norm(target))


# John ellipsoid


def _sym_basis(k):
    out = []
    for i in range(k):
        for j in range(i, k):
            E = np.zeros((k, k))
            E[i, j] = E[j, i] = 1.0
            out.append(E)
    return out


def john_inscribed(P: Polytope, tol: float = 1e-9, max_iter: int = 200) -> Ellipsoid:
    """Maximum-volume inscribed ellipsoid {B u + d : |u| <= 1} of an H-polytope (k <= 3).

    Log-barrier interior-point method on -log det B with constraints
    |B a_i| + a_i . d <= b_i, Newton steps with feasibility-preserving
    backtracking, barrier weight decreased geometrically.
    """
    if isinstance(P, Ellipsoid):
        return P
    if P.facets is None:
        raise ValueError("john_inscribed needs a facet description")
    N = np.array([a for a, _ in P.facets])
    b = np.array([o for _, o in P.facets])
    k = N.shape[1]
    if k > 3:
        raise ValueError("john_inscribed is offered for k <= 3")
    d, r = chebyshev_center(N, b)
    if r <= 1e-12:
        raise DegenerateBody("polytope is lower-dimensional")
    Es = _sym_basis(k)
    nb = len(Es)
    theta = np.zeros(nb)
    for p, E in enumerate(Es):
        if np.count_nonzero(E) == 1:
            theta[p] = 0.5 * r
    x = np.concatenate([theta, d])

    def unpack(x):
        B = sum(t * E for t, E in zip(x[:nb], Es))
        return B, x[nb:]

    def slack(x):
        B, dd = unpack(x)
        return b - N @ dd - np.linalg.norm(N @ B, axis=1)

    def feasible(x):
        B, _ = unpack(x)
        if np.any(np.linalg.eigvalsh(B) <= 0):
            return False
        return bool(np.all(slack(x) > 0))

    def value(x, mu):
        B, _ = unpack(x)
        return -np.linalg.slogdet(B)[1] - mu * np.sum(np.log(slack(x)))

    def derivs(x, mu):
        B, dd = unpack(x)
        Binv = np.linalg.inv(B)
        V = N @ B  # rows v_i = B a_i
        nv = np.linalg.norm(V, axis=1)
        s = b - N @ dd - nv
        grad = np.zeros(nb + k)
        H = np.zeros((nb + k, nb + k))
        for p, Ep in enumerate(Es):
            grad[p] = -np.trace(Binv @ Ep)
            for q_, Eq in enumerate(Es):
                H[p, q_] = np.trace(Binv @ Ep @ Binv @ Eq)
        for i in range(N.shape[0]):
            a = N[i]
            Pm = np.stack([E @ a for E in Es], axis=1)  # k x nb, d(B a)/d theta
            u = V[i] / nv[i]
            ds = np.concatenate([-(u @ Pm), -a])
            grad += -mu * ds / s[i]
            hs = np.zeros((nb + k, nb + k))
            hs[:nb, :nb] = -(Pm.T @ (np.eye(k) - np.outer(u, u)) @ Pm) / nv[i]
            H += mu * np.outer(ds, ds) / s[i] ** 2 - mu * hs / s[i]
        return grad, H

    mu = 1.0
    total = 0
    while True:
        for _ in range(50):
            total += 1
            gr, H = derivs(x, mu)
            try:
                step = -np.linalg.solve(H, gr)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(H, gr, rcond=None)[0]
            dec = float(-gr @ step)
            if dec / 2 <= 1e-14:
                break
            t = 1.0
            f0 = value(x, mu)
            while t > 1e-12:
                xn = x + t * step
                if feasible(xn) and value(xn, mu) <= f0 - 0.25 * t * dec:
                    break
                t *= 0.5
            if t <= 1e-12:
                break
            x = xn
            if total > max_iter * 5:
                break
        if mu * N.shape[0] < tol * 1e-2 or total > max_iter * 5:
            break
        mu *= 0.1
    B, dd = unpack(x)
    S = np.linalg.inv(B @ B)
    return Ellipsoid(dd, S)


def john_factor(E: Ellipsoid) -> np.ndarray:
    """The symmetric positive B with E = {B u + c : |u| <= 1}."""
    w, U = np.linalg.eigh(E.shape)
    return U @ np.diag(w ** -0.5) @ U.T


def john_kkt_residual(P: Polytope, E: Ellipsoid, active_tol: float = 1e-6) -> float:
    """Relative residual of the optimality conditions for the inscribed ellipsoid.

    Stationarity reads sum_i lam_i a_i = 0 and
    B^-1 = sum_i lam_i (B a_i a_i^T + a_i a_i^T B) / (2 |B a_i|), lam >= 0,
    over facets touching E. The multipliers are fitted by nonnegative least squares.
    """
    N = np.array([a for a, _ in P.facets])
    b = np.array([o for _, o in P.facets])
    B = john_factor(E)
    k = B.shape[0]
    s = b - N @ E.center - np.linalg.norm(N @ B, axis=1)
    act = np.flatnonzero(s <= active_tol * max(1.0, np.abs(b).max()))
    if act.size == 0:
        return float("inf")
    iu = np.triu_indices(k)
    cols = []
    for i in act:
        a = N[i]
        G = (np.outer(B @ a, a) + np.outer(a, B @ a)) / (2 * np.linalg.norm(B @ a))
        cols.append(np.concatenate([G[iu], a]))
    Amat = np.array(cols).T
    target = np.concatenate([np.linalg.inv(B)[iu], np.zeros(k)])
    lam, rn = nnls(Amat, target)
    return float(rn / np.linalg.norm(target))


def tangency_count(P: Polytope, E: Ellipsoid, tol: float = 1e-6) -> int:
    N = np.array([a for a, _ in P.facets])
    b = np.array([o for _, o in P.facets])
    B = john_factor(E)
    s = b - N @ E.center - np.linalg.norm(N @ B, axis=1)
    return int(np.sum(np.abs(s) <= tol * max(1.0, np.abs(b).max())))


# searching for round projections or sections


def _body_ellipsoid(body, F, mode, x, which):
    piece = project(body, F) if mode == "projection" else section(body, F, x)
    if isinstance(piece, Ellipsoid):
        return piece
    if piece.degenerate:
        raise DegenerateBody("projection is not full-dimensional")
    if which == "lowner":
        return lowner_mvee(piece.vertices, eps=1e-10)
    if which == "john":
        return john_inscribed(piece)
    raise ValueError(f"unknown ellipsoid {which!r}")


def _shape_vector(E: Ellipsoid):
    """Trace-normalised shape minus identity, as an orthonormal coordinate vector."""
    S = E.shape
    k = S.shape[0]
    T = S * (k / np.trace(S)) - np.eye(k)
    iu = np.triu_indices(k, 1)
    return np.concatenate([np.diag(T), np.sqrt(2) * T[iu]])


def section_residuals(bodies, F, mode="projection", x=None, ellipsoid="lowner"):
    return [ball_residual(_body_ellipsoid(b, F, mode, x, ellipsoid)) for b in bodies]


def _vec(bodies, F, mode, x, which):
    return np.concatenate([_shape_vector(_body_ellipsoid(b, F, mode, x, which)) for b in bodies])


def search_section_subspace(bodies, k: int, mode: str = "projection", x=None, ellipsoid: str = "lowner",
                            restarts: int = 100, seed: int = 0, tol: float = 1e-6,
                            iters: int = 60, fd_step: float = 1e-7) -> SearchReport:
    """Restarts plus Gauss-Newton with finite-difference Jacobians on the Grassmannian.

    The objective is the trace-free part of the trace-normalised ellipsoid
    shape, stacked over bodies; the reported residual is the largest
    ball_residual. The ellipsoid map is only piecewise smooth, so a restart
    that stalls simply moves on to the next one.
    """
    bodies = list(bodies)
    n = bodies[0].dim
    if mode not in ("projection", "section"):
        raise ValueError("mode must be 'projection' or 'section'")
    if mode == "section" and x is None:
        raise ValueError("section mode needs an interior point x")
    if ellipsoid == "john" and k > 3:
        raise ValueError("john ellipsoids are offered for k <= 3")
    threads = max(1, int(os.environ.get("GRR_THREADS", "1") or 1))

    def evaluate(F):
        try:
            return _vec(bodies, F, mode, x, ellipsoid)
        except (DegenerateBody, NotInterior, QhullError, np.linalg.LinAlgError, ValueError):
            return None

    def report_res(F):
        try:
            return max(section_residuals(bodies, F, mode, x, ellipsoid))
        except (DegenerateBody, NotInterior, QhullError, np.linalg.LinAlgError, ValueError):
            return float("inf")

    def descend(F):
        r = evaluate(F)
        if r is None:
            return F
        obj = r @ r
        for _ in range(iters):
            if report_res(F) <= tol * 1e-2:
                break
            _, _, Vh = np.linalg.svd(F, full_matrices=True)
            C = Vh[k:]
            cols = []
            for a in range(k):
                for c in range(n - k):
                    Z = np.zeros_like(F)
                    Z[a] = C[c]
                    rp = evaluate(orthonormalize(F + fd_step * Z))
                    rm = evaluate(orthonormalize(F - fd_step * Z))
                    if rp is None or rm is None:
                        return F
                    cols.append((rp - rm) / (2 * fd_step))
            J = np.array(cols).T
            step = np.linalg.lstsq(J, -r, rcond=None)[0]
            Zs = step.reshape(k, n - k) @ C
            slope = float(r @ J @ step)
            t = 1.0
            moved = False
            while t > 1e-8:
                Fn = orthonormalize(F + t * Zs)
                rn = evaluate(Fn)
                if rn is not None and rn @ rn <= obj + 1e-4 * t * slope:
                    moved = True
                    break
                t *= 0.5
            if not moved:
                break
            F, r, obj = Fn, rn, rn @ rn
        return F

    def one(idx):
        F0 = random_frame(k, n, np.random.default_rng([seed, idx]))
        F = descend(F0)
        return idx, F, report_res(F)

    best = None
    history = []
    used = restarts
    with ThreadPoolExecutor(max_workers=threads) as pool:
        done = False
        for start in range(0, restarts, threads):
            chunk = range(start, min(restarts, start + threads))
            results = list(pool.map(one, chunk)) if threads > 1 else [one(i) for i in chunk]
            for i, F, res in results:
                history.append(res)
                if best is None or res < best[2]:
                    best = (i, F, res)
                if res <= tol:
                    used = i + 1
                    done = True
                    break
            if done:
                break
    _, F, res = best
    return SearchReport(Frame(F), float(res), used, f"{mode}-{ellipsoid}", seed, res <= tol, history)


def random_symmetric_polytope(n: int, nvert: int, rng: np.random.Generator) -> Polytope:
    """Convex hull of +-v for nvert/2 uniform unit vectors v (all of them are vertices)."""
    half = rng.standard_normal((nvert // 2, n))
    half /= np.linalg.norm(half, axis=1, keepdims=True)
    return Polytope.from_vertices(np.vstack([half, -half]))


def regular_simplex(n: int) -> np.ndarray:
    """Vertices of a regular simplex in R^n centred at 0 with circumradius 1."""
    E = np.eye(n + 1) - 1.0 / (n + 1)
    U, _, _ = np.linalg.svd(E)
    V = E @ U[:, :n]
    return V / np.linalg.norm(V[0])
