import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grr import roundsearch as rs
from grr.cubature import haar_rotation
from grr.polyring import Ring, SparsePoly, parse_poly


# frames and restriction


def test_frame_validation_and_json():
    with pytest.raises(ValueError):
        rs.Frame(np.array([[1.0, 1.0, 0.0]]))
    F = rs.Frame(np.eye(3)[:2])
    assert (F.k, F.n) == (2, 3) and F.to_json() == [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    Z = rs.Frame(np.array([[1, 1j]]) / math.sqrt(2))
    assert Z.to_json()[0][1] == pytest.approx([0.0, 1 / math.sqrt(2)])


def test_restrict_examples():
    rng = np.random.default_rng(0)
    A = rs.random_frame(3, 6, rng)
    q = rs.restrict(SparsePoly.quadratic_form(Ring.QQ, 6), A).cleanup(1e-13)
    qk = SparsePoly.quadratic_form(Ring.RR, 3)
    assert set(q.terms) == set(qk.terms)
    assert all(abs(q.terms[m] - 1.0) < 1e-12 for m in q.terms)
    assert rs.restrict(parse_poly("x1^2", 2), np.array([[0.0, 1.0]])).cleanup().is_zero()
    f = parse_poly("x1^4 + x2^4 + x3^4 + x4^4", 4)
    B = rs.random_frame(2, 4, rng)
    g = rs.restrict(f, B)
    for u in rng.standard_normal((10, 2)):
        assert g.evaluate(u) == pytest.approx(f.evaluate(B.T @ u), rel=1e-12)
    with pytest.raises(ValueError):
        rs.restrict(f, np.eye(3))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 3), st.integers(0, 10 ** 6))
def test_restrict_q_is_q(k, extra, seed):
    n = k + extra
    A = rs.random_frame(k, n, np.random.default_rng(seed))
    q = rs.restrict(SparsePoly.quadratic_form(Ring.RR, n), A)
    qk = SparsePoly.quadratic_form(Ring.RR, k)
    monos = set(q.terms) | set(qk.terms)
    assert max(abs(q.terms.get(m, 0.0) - qk.terms.get(m, 0.0)) for m in monos) < 1e-12


# residuals


def test_residual_examples():
    rng = np.random.default_rng(1)
    q2 = SparsePoly.quadratic_form(Ring.QQ, 5) ** 2
    assert rs.residual(q2, rs.random_frame(3, 5, rng), "even-round") < 1e-12
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert rs.residual(parse_poly("x1^3", 3), A, "odd-zero") == 0.0
    # by hand: Bombieri weights (1, 1/4, 1/6, 1/4, 1), <x1^4, Q^2> = 1, |Q^2|^2 = 8/3
    assert rs.residual(parse_poly("x1^4", 2), np.eye(2), "even-round") == pytest.approx(math.sqrt(5 / 8))


def test_residual_parity_mismatch():
    with pytest.raises(ValueError):
        rs.residual(parse_poly("x1^3", 2), np.eye(2), "even-round")
    with pytest.raises(ValueError):
        rs.residual(parse_poly("x1^3", 2), np.eye(2), "sideways")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([(3, "odd-zero"), (4, "even-round")]))
def test_residual_depends_on_subspace_only(seed, dm):
    d, mode = dm
    rng = np.random.default_rng(seed)
    f = rs.random_form(5, d, rng)
    A = rs.random_frame(2, 5, rng)
    R = haar_rotation(2, rng)
    r0 = rs.residual(f, A, mode)
    assert rs.residual(f, R @ A, mode) == pytest.approx(r0, rel=1e-9, abs=1e-12)
    # a reflection is orthogonal too
    assert rs.residual(f, np.diag([1.0, -1.0]) @ A, mode) == pytest.approx(r0, rel=1e-9, abs=1e-12)
    c = float(rng.uniform(-5, 5)) or 1.0
    assert rs.residual(f.scale(c), A, mode) == pytest.approx(r0, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("d,mode", [(3, "odd-zero"), (4, "even-round")])
def test_gradient_matches_finite_differences(d, mode):
    rng = np.random.default_rng(7 + d)
    f = rs.random_form(5, d, rng)
    for _ in range(3):
        A = rs.random_frame(2, 5, rng)
        val, grad = rs.residual_and_grad(f, A, mode)
        assert val == pytest.approx(rs.residual(f, A, mode) ** 2)
        fd = np.zeros_like(A)
        h = 1e-6
        for i in range(A.shape[0]):
            for j in range(A.shape[1]):
                E = np.zeros_like(A)
                E[i, j] = h
                fd[i, j] = (rs.residual_and_grad(f, A + E, mode)[0] - rs.residual_and_grad(f, A - E, mode)[0]) / (2 * h)
        assert np.linalg.norm(fd - grad) <= 1e-4 * np.linalg.norm(grad)


# search


def test_search_round_input_is_immediate():
    q2 = SparsePoly.quadratic_form(Ring.QQ, 4) ** 2
    rep = rs.search([q2], 2, "even-round", restarts=3, seed=0)
    assert rep.success and rep.residual < 1e-12 and rep.restarts_used == 1


def test_search_odd_cubic():
    rng = np.random.default_rng(2024)
    f = rs.random_form(6, 3, rng)
    rep = rs.search([f], 2, "odd-zero", restarts=50, seed=1)
    assert rep.success and rep.residual <= 1e-8
    # certificate: the cubic vanishes at random points of the plane
    for u in rng.standard_normal((5, 2)):
        assert abs(f.evaluate(rep.frame.rows.T @ u)) < 1e-7


def test_search_power_sum():
    f = parse_poly("x1^4 + x2^4 + x3^4 + x4^4 + x5^4 + x6^4", 6)
    rep = rs.search([f], 2, "even-round", restarts=50, seed=0)
    assert rep.success and rep.residual <= 1e-8


def test_search_report_json_and_determinism():
    rng = np.random.default_rng(3)
    f = rs.random_form(6, 3, rng)
    a = rs.search([f], 2, "odd-zero", restarts=5, seed=4)
    b = rs.search([f], 2, "odd-zero", restarts=5, seed=4)
    assert a.to_json() == b.to_json()
    assert set(a.to_json()) >= {"mode", "n", "k", "residual", "frame", "seed", "restarts"}


def test_search_thread_count_does_not_change_result(monkeypatch):
    rng = np.random.default_rng(8)
    f = rs.random_form(6, 3, rng)
    monkeypatch.setenv("GRR_THREADS", "1")
    a = rs.search([f], 2, "odd-zero", restarts=6, seed=2, tol=1e-30, iters=5)
    monkeypatch.setenv("GRR_THREADS", "3")
    b = rs.search([f], 2, "odd-zero", restarts=6, seed=2, tol=1e-30, iters=5)
    assert a.to_json() == b.to_json() and a.history == b.history


def test_running_best_is_reported():
    rng = np.random.default_rng(5)
    f = rs.random_form(5, 4, rng)
    rep = rs.search([f], 2, "even-round", restarts=4, seed=0, tol=1e-30, iters=3)
    assert not rep.success and rep.restarts_used == 4
    assert rep.residual == pytest.approx(min(rep.history))
    assert rep.residual == pytest.approx(rs.residual(f, rep.frame, "even-round"))


def test_search_rejects_bad_inputs():
    with pytest.raises(ValueError):
        rs.search([parse_poly("x1^3", 2)], 3, "odd-zero")
    with pytest.raises(ValueError):
        rs.search([parse_poly("x1^3", 2), parse_poly("x1^3", 3)], 1, "odd-zero")


# complex search


def test_complex_isotropic_line():
    rep = rs.complex_search([parse_poly("x1^2 + x2^2", 2)], 1, restarts=10, seed=0)
    assert rep.success and rep.residual <= 1e-10
    a, b = rep.frame.rows[0]
    assert min(abs(b / a - 1j), abs(b / a + 1j)) < 1e-8


def test_complex_cubic_matches_companion_roots():
    rng = np.random.default_rng(77)
    for _ in range(5):
        f = rs.random_form(2, 3, rng, complex_=True)
        rep = rs.complex_search([f], 1, restarts=20, seed=0)
        assert rep.success and rep.residual <= 1e-10
        a, b = rep.frame.rows[0]
        # f(x1, x2) = sum c_j x1^j x2^(3-j); zero lines are [r : 1] for roots r of sum c_j r^j
        coeffs = [f.terms.get((j, 3 - j), 0) for j in range(3, -1, -1)]
        roots = np.roots(coeffs)
        assert min(abs(a / b - r) for r in roots) < 1e-6 * max(1.0, abs(a / b))


def test_complex_quadratic_plane():
    rng = np.random.default_rng(12)
    f = rs.random_form(5, 2, rng, complex_=True)
    rep = rs.complex_search([f], 2, restarts=20, seed=0)
    assert rep.success and rep.residual <= 1e-10
    G = rep.frame.rows @ rep.frame.rows.conj().T
    assert np.allclose(G, np.eye(2), atol=1e-10)


# exact quadratic rounding


def test_quadratic_examples():
    q = rs.exact_round_quadratic(np.eye(4), 2)
    assert q.value == pytest.approx(1.0) and q.residual < 1e-12
    q = rs.exact_round_quadratic(np.diag([1.0, 2.0, 3.0]), 2)
    assert q.value == pytest.approx(2.0)
    F = q.frame.rows
    assert np.allclose(F @ np.diag([1.0, 2.0, 3.0]) @ F.T, 2 * np.eye(2), atol=1e-12)
    span = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]) / np.array([[1.0], [math.sqrt(2)]])
    assert np.linalg.matrix_rank(np.vstack([F, span]), tol=1e-10) == 2
    with pytest.raises(ValueError):
        rs.exact_round_quadratic(np.eye(4), 3)


def test_quadratic_degenerate_spectrum():
    q = rs.exact_round_quadratic(np.diag([2.0, 2.0, 2.0, 1.0, 5.0]), 3)
    assert q.residual < 1e-12 and q.value == pytest.approx(2.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10 ** 6))
def test_quadratic_random_property(k, seed):
    rng = np.random.default_rng(seed)
    n = 2 * k - 1
    G = rng.standard_normal((n, n))
    A = (G + G.T) / 2
    q = rs.exact_round_quadratic(A, k)
    F = q.frame.rows
    assert np.linalg.norm(F @ A @ F.T - q.value * np.eye(k), 2) <= 1e-10 * max(1.0, np.abs(A).max() * n)
    assert rs.quadratic_residual(A, q.frame) <= 1e-10
