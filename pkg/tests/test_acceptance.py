"""One pass/fail test per acceptance criterion, with its tolerance and time limit."""

import itertools
import json
import math
import subprocess
import sys
import time
from collections import Counter

import numpy as np

from grr import cli, cubature as cu, obstruction as ob, roundsearch as rs, sections as sc, sylowtree as sy
from grr.homogeneous import basis
from grr.polyring import Ring, SparsePoly, compose_linear, parse_poly


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def proportional_residual(v: SparsePoly, q: SparsePoly) -> float:
    monos = sorted(set(v.terms) | set(q.terms))
    a = np.array([float(v.terms.get(m, 0.0)) for m in monos])
    b = np.array([float(q.terms.get(m, 0.0)) for m in monos])
    nrm = np.linalg.norm(a)
    if nrm == 0:
        return 0.0
    return float(np.linalg.norm(a - (a @ b / (b @ b)) * b) / nrm)


def test_criterion_01_obstruction_parity():
    with Timer() as t:
        for d, k in itertools.product((1, 3, 5), (1, 2, 3)):
            top = ob.top_sw_class(ob.symmetric_power_weights(d, k))
            assert top.ring is Ring.GF2
            assert not top.is_zero()
            assert ob.minimal_n(d, k) <= k + math.comb(d + k - 1, d)
        for d, k in itertools.product((2, 4), (1, 2, 3)):
            assert ob.top_sw_class(ob.symmetric_power_weights(d, k)).is_zero()
    assert t.elapsed < 10


def test_criterion_02_complex_obstruction():
    with Timer() as t:
        for d, k in itertools.product((1, 2, 3, 4), (1, 2, 3)):
            assert not ob.top_chern_class(ob.symmetric_power_weights(d, k)).is_zero()
            assert ob.minimal_n(d, k, "complex") <= ob.bound_thm6(d, k)
    assert t.elapsed < 10


def test_criterion_03_pontryagin_golden_values():
    with Timer() as t:
        target = parse_poly("16*x1^2*x2^2", 2) * parse_poly("x1^2 - x2^2", 2) ** 2
        P = ob.pontryagin_from_weights(ob.symmetric_power_of(ob.oriented_weights(4), 2))
        assert P.top == target and P.top.ring is Ring.QQ
        G = ob.grassmannian_g12_4()
        assert ob.sqrt_in_presented_ring(G.lift_ambient(target, 16), G, 8) is None
        amb = ob.PresentedRing.free(["a", "b"], [2, 2])
        root = ob.sqrt_in_presented_ring(target, amb, 8)
        assert root == parse_poly("4*x1*x2", 2) * parse_poly("x1^2 - x2^2", 2)
    assert t.elapsed < 1


def test_criterion_04_invariant_quadratics():
    with Timer() as t:
        for p, alpha in ((2, 1), (3, 1), (2, 2)):
            res = ob.invariant_quadratic_space(p, alpha)
            assert (res.dim_T, res.dim_G) == (p ** alpha, 1)
    assert t.elapsed < 1


def _oracle_group(h):
    m = 2 ** h
    return [p for p in itertools.permutations(range(m))
            if all((p[i] ^ p[j]).bit_length() == (i ^ j).bit_length() for i in range(m) for j in range(i + 1, m))]


def _partition(classify, delta, m):
    classes = {}
    for c in itertools.combinations_with_replacement(range(1, m + 1), delta):
        S = Counter(c)
        classes.setdefault(classify(S), []).append(tuple(sorted(S.items())))
    return sorted(sorted(v) for v in classes.values())


def test_criterion_05_orbit_oracle():
    with Timer() as t:
        for h in (1, 2, 3):
            group = _oracle_group(h)
            assert len(group) == 2 ** (2 ** h - 1)
            for delta in (1, 2, 3):
                def orbit(S):
                    return frozenset(tuple(sorted(Counter({g[i - 1] + 1: c for i, c in S.items()}).items()))
                                     for g in group)
                brute = _partition(orbit, delta, 2 ** h)
                keyed = _partition(lambda S: sy.key_string(sy.orbit_key(S, h)), delta, 2 ** h)
                assert keyed == brute
        assert [sy.orbit_count(2, h) for h in range(1, 11)] == [h + 1 for h in range(1, 11)]
    assert t.elapsed < 30


def test_criterion_06_lemma2_bound_and_residual():
    rng = np.random.default_rng(6)
    with Timer() as t:
        for k in (2, 3):
            for l in (1, 2):
                fs = [SparsePoly.from_homogeneous_coeffs(Ring.RR, k, 4, rng.standard_normal(basis(k, 4).dim))
                      for _ in range(l)]
                ts = cu.build_lemma2_cubature(fs, k, seed=k * 10 + l)
                assert len(ts) <= l * math.comb(k + 3, 4)
                q2 = SparsePoly.quadratic_form(Ring.RR, k) ** 2
                for f in fs:
                    total = SparsePoly.zero(Ring.RR, k)
                    for tr in ts:
                        total = total + compose_linear(f, tr.matrix)
                    assert proportional_residual(total, q2) <= 1e-8
    assert t.elapsed < 60


def test_criterion_07_recursive_forms():
    with Timer() as t:
        rc = cu.build_recursive_forms(2, 4, cu.ConstructionSchedule(2, 4, (1, 4, 16)), seed=0)
        L = rc.forms.matrix
        assert L.shape == (16, 2)
        for size in (1, 2):
            q = SparsePoly.quadratic_form(Ring.RR, 2) ** size
            for entry in sy.enumerate_orbits(size, 4):
                g = sy.orbit_polynomial(entry.representative, 4, Ring.RR)
                assert proportional_residual(compose_linear(g, L), q) <= 1e-7
        rng = np.random.default_rng(7)
        for _ in range(5):
            a = sy.random_invariant_coefficients(4, 2, rng)
            assert cu.verify_round_restriction(a, rc.forms).residual <= 1e-7
    assert t.elapsed < 300


def test_criterion_08_odd_degree_search():
    rng = np.random.default_rng(8)
    successes = 0
    with Timer() as t:
        for i in range(20):
            f = rs.random_form(6, 3, rng)
            rep = rs.search([f], 2, "odd-zero", restarts=200, seed=i, tol=1e-8)
            if rep.success and rs.residual(f, rep.frame, "odd-zero") <= 1e-8:
                successes += 1
    assert successes >= 19
    assert t.elapsed < 600


def test_criterion_09_exact_quadratics():
    rng = np.random.default_rng(9)
    ok = 0
    with Timer() as t:
        for i in range(100):
            k = 1 + i % 5
            n = 2 * k - 1
            G = rng.standard_normal((n, n))
            A = (G + G.T) / 2
            q = rs.exact_round_quadratic(A, k)
            F = q.frame.rows
            assert np.allclose(F @ F.T, np.eye(k), atol=1e-12)
            ok += rs.quadratic_residual(A, q.frame) <= 1e-10
    assert ok == 100
    assert t.elapsed < 10


def _companion_roots(c):
    """Roots of c[0] r^3 + c[1] r^2 + c[2] r + c[3] from the companion matrix."""
    c = np.asarray(c, dtype=complex) / c[0]
    C = np.zeros((3, 3), dtype=complex)
    C[1:, :-1] = np.eye(2)
    C[:, -1] = -c[:0:-1]
    return np.linalg.eigvals(C)


def test_criterion_10_complex_zero_lines():
    rng = np.random.default_rng(10)
    with Timer() as t:
        for i in range(50):
            f = rs.random_form(2, 3, rng, complex_=True)
            rep = rs.complex_search([f], 1, restarts=20, seed=i, tol=1e-10)
            assert rep.success and rep.residual <= 1e-10
            a, b = rep.frame.rows[0]
            # f = sum_j c_j x1^j x2^(3-j); the line through (a, b) has slope r = a/b
            roots = _companion_roots([f.terms.get((j, 3 - j), 0) for j in range(3, -1, -1)])
            r = a / b
            assert min(abs(r - z) for z in roots) <= 1e-6 * max(1.0, abs(r))
    assert t.elapsed < 10


def test_criterion_11_sections_demo():
    P = sc.random_symmetric_polytope(5, 20, np.random.default_rng(11))
    assert P.vertices.shape == (20, 5)
    with Timer() as t:
        rep = sc.search_section_subspace([P], 2, "projection", ellipsoid="lowner", restarts=500, seed=0, tol=1e-6)
    assert rep.success and rep.restarts_used <= 500
    E = sc.lowner_mvee(sc.project(P, rep.frame).vertices, eps=1e-12)
    assert sc.ball_residual(E) <= 1e-6
    assert t.elapsed < 600


def test_criterion_12_identity_and_determinism(capsys):
    with Timer() as t:
        assert all(ob.binomial_identity_check(d, k) for d in range(9) for k in range(9))
        runs = [
            ["search", "--k", "2", "--n", "6", "--poly", "x1^3 + x2^2*x3 - x4*x5*x6 + x6^3",
             "--restarts", "10", "--seed", "12"],
            ["cubature", "--k", "2", "--d", "4", "--seed", "12"],
            ["quadratic", "--k", "4", "--seed", "12"],
        ]
        for argv in runs:
            outs = []
            for _ in range(2):
                code = cli.dispatch(argv)
                outs.append((code, capsys.readouterr().out))
            assert outs[0] == outs[1]
            json.loads(outs[0][1])
        procs = [subprocess.run([sys.executable, "-m", "grr", "search", "--k", "2", "--n", "6", "--poly",
                                 "x1^3 - x2*x3*x4 + x5^2*x6", "--restarts", "5", "--seed", "7"],
                                capture_output=True) for _ in range(2)]
        assert procs[0].stdout == procs[1].stdout and procs[0].returncode == procs[1].returncode
        assert procs[0].stdout
    assert t.elapsed < 5
