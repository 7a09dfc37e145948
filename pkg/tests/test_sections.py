import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from grr import sections as sc
from grr.cubature import haar_rotation
from grr.roundsearch import random_frame


def lp_member(V, x):
    """Oracle: x is a convex combination of the rows of V (minimise the l1 defect)."""
    m, n = V.shape
    # variables: weights w (m), positive and negative defects (n each)
    c = np.concatenate([np.zeros(m), np.ones(2 * n)])
    A_eq = np.hstack([np.vstack([V.T, np.ones((1, m))]),
                      np.vstack([np.eye(n), np.zeros((1, n))]),
                      np.vstack([-np.eye(n), np.zeros((1, n))])])
    res = linprog(c, A_eq=A_eq, b_eq=np.append(x, 1.0), bounds=[(0, None)] * (m + 2 * n), method="highs")
    return res.fun < 1e-9


# projections and sections


def test_cube_projection_is_square():
    P = sc.project(sc.Polytope.cube(3), np.eye(3)[:2])
    assert not P.degenerate
    assert sorted(map(tuple, np.round(P.vertices, 12))) == [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    assert len(P.facets) == 4


def test_simplex_projection_membership():
    rng = np.random.default_rng(0)
    V = sc.regular_simplex(4)
    F = random_frame(2, 4, rng)
    P = sc.project(sc.Polytope.from_vertices(V), F)
    img = V @ F.T
    for u in rng.uniform(-1.2, 1.2, size=(200, 2)):
        assert P.contains(u, tol=1e-12) == lp_member(img, u)


def test_segment_projection_is_degenerate():
    seg = sc.Polytope(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    assert sc.project(seg, np.array([[0.0, 1.0]])).degenerate


def test_cube_section_is_square():
    P = sc.section(sc.Polytope.cube(3), np.eye(3)[[0, 2]], np.zeros(3))
    assert sorted(map(tuple, np.round(P.vertices, 12))) == [(-1, -1), (-1, 1), (1, -1), (1, 1)]


def test_simplex_section_near_vertex_is_triangle():
    V = sc.regular_simplex(3)
    P = sc.Polytope.from_vertices(V)
    v = V[0]
    F = np.linalg.svd(v[None, :])[2][1:]
    S = sc.section(P, F, 0.9 * v)
    assert len(S.facets) == 3 and len(S.vertices) == 3
    # oracle: intersect the three facets through v with the plane, pairwise
    N = np.array([a for a, _ in P.facets])
    b = np.array([o for _, o in P.facets])
    near = [i for i in range(4) if abs(N[i] @ v - b[i]) < 1e-9]
    assert len(near) == 3
    corners = []
    for i in range(3):
        for j in range(i + 1, 3):
            A = np.array([N[near[i]] @ F.T, N[near[j]] @ F.T])
            rhs = np.array([b[near[i]], b[near[j]]]) - np.array([N[near[i]], N[near[j]]]) @ (0.9 * v)
            corners.append(np.linalg.solve(A, rhs))
    got = sorted(map(tuple, np.round(S.vertices, 9)))
    assert got == sorted(map(tuple, np.round(corners, 9)))


def test_section_boundary_point_raises():
    with pytest.raises(sc.NotInterior):
        sc.section(sc.Polytope.cube(3), np.eye(3)[:2], np.array([1.0, 0.0, 0.0]))
    with pytest.raises(sc.NotInterior):
        sc.section(sc.Ellipsoid(np.zeros(2), np.eye(2)), np.eye(2)[:1], np.array([0.0, 1.0]))


def test_ellipsoid_projection_and_section():
    S = np.diag([1.0, 4.0, 9.0])
    E = sc.Ellipsoid(np.zeros(3), S)
    assert np.allclose(sc.project(E, np.eye(3)[:2]).shape, np.diag([1.0, 4.0]))
    # slice at height x3 = 1/6: 1 - 9/36 = 3/4 of the radius squared
    sec = sc.section(E, np.eye(3)[:2], np.array([0.0, 0.0, 1 / 6]))
    assert np.allclose(sec.shape, np.diag([1.0, 4.0]) / 0.75) and np.allclose(sec.center, 0)


def test_polytope_json_round_trip():
    P = sc.Polytope.cube(2)
    Q = sc.Polytope.from_json(P.to_json())
    assert np.allclose(P.vertices, Q.vertices) and len(Q.facets) == 4
    R = sc.Polytope.from_json({"vertices": [[0, 0], [1, 0], [0, 1]]})
    assert len(R.facets) == 3


# Lowner ellipsoid


def test_lowner_simplex_is_circumscribed_ball():
    for n in (2, 3, 4):
        E = sc.lowner_mvee(sc.regular_simplex(n))
        # circumradius 1 by construction
        assert np.allclose(E.shape, np.eye(n), atol=1e-6) and np.allclose(E.center, 0, atol=1e-6)


def test_lowner_circle():
    t = np.linspace(0, 2 * np.pi, 17)[:-1]
    pts = np.stack([3 + 2 * np.cos(t), -1 + 2 * np.sin(t)], axis=1)
    E = sc.lowner_mvee(pts)
    assert np.allclose(E.center, [3, -1], atol=1e-7)
    assert np.allclose(E.shape, np.eye(2) / 4, atol=1e-7)
    assert sc.ball_residual(E) < 1e-6


def test_lowner_box_with_certificate():
    box = np.array([[a, b] for a in (-1, 1) for b in (-2, 2)], dtype=float)
    E = sc.lowner_mvee(box)
    assert np.all(E.gauge(box) <= 1 + 1e-9)
    assert sc.mvee_certificate(box, E) < 1e-6
    semi = np.sort(1 / np.sqrt(np.linalg.eigvalsh(E.shape)))
    assert semi == pytest.approx([math.sqrt(2), 2 * math.sqrt(2)], rel=1e-6)
    # an enclosing ellipse through all four corners that is not of least area fails it
    other = sc.Ellipsoid(np.zeros(2), np.diag([2 / 3, 1 / 12]))
    assert np.allclose(other.gauge(box), 1)
    assert sc.mvee_certificate(box, other) > 1e-3


def test_lowner_rejects_flat_input():
    with pytest.raises(sc.DegenerateBody):
        sc.lowner_mvee(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 4), st.integers(0, 10 ** 6))
def test_lowner_contains_and_is_equivariant(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((3 * n + 3, n))
    E = sc.lowner_mvee(pts, eps=1e-10)
    assert np.all(E.gauge(pts) <= 1 + 1e-9)
    R = haar_rotation(n, rng)
    t = rng.standard_normal(n)
    E2 = sc.lowner_mvee(pts @ R.T + t, eps=1e-10)
    assert np.allclose(E2.center, R @ E.center + t, atol=1e-8)
    assert np.allclose(E2.shape, R @ E.shape @ R.T, atol=1e-8 * max(1.0, np.abs(E.shape).max()))


def test_lowner_continuity():
    rng = np.random.default_rng(4)
    pts = rng.standard_normal((12, 3))
    E = sc.lowner_mvee(pts, eps=1e-12)
    for eta in (1e-7, 1e-6):
        E2 = sc.lowner_mvee(pts + eta * rng.standard_normal(pts.shape), eps=1e-12)
        assert np.linalg.norm(E2.shape - E.shape, 2) <= 100 * eta * np.linalg.norm(E.shape, 2)


# John ellipsoid


def test_john_square_is_unit_disk():
    E = sc.john_inscribed(sc.Polytope.cube(2))
    assert np.allclose(E.shape, np.eye(2), atol=1e-8) and np.allclose(E.center, 0, atol=1e-8)


def test_john_hexagon_kkt():
    rng = np.random.default_rng(11)
    half = rng.standard_normal((3, 2))
    P = sc.Polytope.from_vertices(np.vstack([half, -half]))
    E = sc.john_inscribed(P)
    assert sc.john_kkt_residual(P, E) <= 1e-8
    N = np.array([a for a, _ in P.facets])
    b = np.array([o for _, o in P.facets])
    B = sc.john_factor(E)
    assert np.all(b - N @ E.center - np.linalg.norm(N @ B, axis=1) >= -1e-9)
    assert np.allclose(E.center, 0, atol=1e-8)


def test_john_triangle_touches_three_sides():
    P = sc.Polytope.from_vertices([[0.0, 0.0], [3.0, 0.0], [0.5, 2.0]])
    E = sc.john_inscribed(P)
    assert sc.tangency_count(P, E) == 3
    # the inscribed ellipse of maximal area is centred at the centroid
    assert np.allclose(E.center, [7 / 6, 2 / 3], atol=1e-7)


def test_john_kkt_detects_suboptimal():
    P = sc.Polytope.cube(2)
    assert sc.john_kkt_residual(P, sc.Ellipsoid(np.zeros(2), np.diag([1.0, 4.0]))) > 1e-3


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 3), st.integers(0, 10 ** 6))
def test_john_symmetric_body_is_centred(n, seed):
    P = sc.random_symmetric_polytope(n, 4 * n + 2, np.random.default_rng(seed))
    E = sc.john_inscribed(P)
    assert np.allclose(E.center, 0, atol=1e-8)
    assert sc.john_kkt_residual(P, E) <= 1e-6


# ball residual


def test_ball_residual_zero_iff_multiple_of_identity():
    assert sc.ball_residual(sc.Ellipsoid(np.zeros(3), 2.5 * np.eye(3))) < 1e-12
    assert sc.ball_residual(sc.Ellipsoid(np.zeros(2), np.diag([1.0, 1.0 + 1e-6]))) > 1e-7
    with pytest.raises(ValueError):
        sc.Ellipsoid(np.zeros(2), np.diag([1.0, -1.0]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.floats(0.01, 100), st.integers(0, 10 ** 6))
def test_ball_residual_rotation_invariant(n, scale, seed):
    rng = np.random.default_rng(seed)
    R = haar_rotation(n, rng)
    assert sc.ball_residual(sc.Ellipsoid(np.zeros(n), scale * R @ R.T)) < 1e-12
    w = rng.uniform(0.5, 2.0, n)
    E = sc.Ellipsoid(np.zeros(n), R @ np.diag(w) @ R.T)
    assert sc.ball_residual(E) == pytest.approx(w.max() / w.min() - 1, abs=1e-10)


def test_ellipsoid_json():
    data = sc.Ellipsoid(np.zeros(2), np.diag([1.0, 2.0])).to_json()
    assert set(data) == {"center", "shape", "ball_residual"}
    assert data["shape"] == [1.0, 0.0, 0.0, 2.0] and data["ball_residual"] == pytest.approx(1.0)


# search


def test_ball_body_is_round_everywhere():
    ball = sc.Ellipsoid(np.zeros(4), np.eye(4))
    rng = np.random.default_rng(0)
    for _ in range(5):
        F = random_frame(2, 4, rng)
        assert sc.section_residuals([ball], F)[0] < 1e-12
        assert sc.section_residuals([ball], F, "section", np.zeros(4))[0] < 1e-12
    rep = sc.search_section_subspace([ball], 2, restarts=2)
    assert rep.success and rep.restarts_used == 1


def test_search_single_body_r5():
    P = sc.random_symmetric_polytope(5, 20, np.random.default_rng(3))
    rep = sc.search_section_subspace([P], 2, restarts=50, seed=0)
    assert rep.success and rep.residual <= 1e-6
    assert max(sc.section_residuals([P], rep.frame)) == pytest.approx(rep.residual)


def test_search_two_bodies_r8():
    rng = np.random.default_rng(5)
    bodies = [sc.random_symmetric_polytope(8, 20, rng) for _ in range(2)]
    rep = sc.search_section_subspace(bodies, 2, restarts=50, seed=0, tol=1e-4)
    assert rep.success and max(sc.section_residuals(bodies, rep.frame)) <= 1e-4


def test_search_john_section():
    rep = sc.search_section_subspace([sc.Polytope.cube(3)], 2, "section", np.zeros(3), "john",
                                     restarts=20, seed=0)
    assert rep.success and rep.residual <= 1e-6 and rep.mode == "section-john"


def test_search_validation():
    P = sc.Polytope.cube(4)
    with pytest.raises(ValueError):
        sc.search_section_subspace([P], 2, "section")
    with pytest.raises(ValueError):
        sc.search_section_subspace([P], 4, ellipsoid="john")
    with pytest.raises(ValueError):
        sc.search_section_subspace([P], 2, mode="shadow")
