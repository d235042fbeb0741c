import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from pmdplearn import Polynomial, parse_model, index_expressions
from pmdplearn.geometry import Polytope, build_region, enumerate_vertices, lp_solve, obbt
from pmdplearn.geometry.lp import INFEASIBLE, OPTIMAL, simplex_standard
from pmdplearn.geometry.polytope import mccormick_rows
from pmdplearn.geometry.region import Lifter, lift
from pmdplearn.geometry.vertices import VertexEnumerationUnavailable

from conftest import COIN, expr_id, intervals_for


def box(n, lo=0.0, hi=1.0, A=None, b=None):
    A = np.zeros((0, n)) if A is None else np.atleast_2d(A)
    b = [] if b is None else b
    return Polytope([f"x{i}" for i in range(n)], A, b, [lo] * n, [hi] * n)


def segment():
    # theta1 + theta2 = 1 as two opposing inequalities
    return box(2, A=[[1, 1], [-1, -1]], b=[1, -1])


# ---------------------------------------------------------------- region


def test_complement_intervals_induce_segment(coin):
    idx = index_expressions(coin)
    ivals = intervals_for(idx, {0: (0.4, 0.7), 1: (0.4, 0.7)})
    p = build_region(idx, ivals, coin.params)
    assert lp_solve(p, [1.0], "min").value == pytest.approx(0.4, abs=1e-9)
    assert lp_solve(p, [1.0], "max").value == pytest.approx(0.6, abs=1e-9)


def test_mccormick_rows_on_unit_box():
    A, b = mccormick_rows(3, 2, 0, 1, [0, 0, 0], [1, 1, 1])
    # z >= 0, z <= y, z >= x + y - 1, z <= x
    expected = {
        (0.0, 0.0, -1.0, 0.0),
        (0.0, -1.0, 1.0, 0.0),
        (1.0, 1.0, -1.0, 1.0),
        (-1.0, 0.0, 1.0, 0.0),
    }
    got = {tuple(float(v) + 0.0 for v in np.append(r, c)) for r, c in zip(A, b)}
    assert got == expected


def test_lifter_creates_aux_for_bilinear():
    lf = Lifter(["a", "b"], [0, 0], [1, 1])
    z = lf.register_poly(Polynomial.var(0) * Polynomial.var(1))
    assert lf.products == [(2, 0, 1)]
    assert lf.names[2] == "z[a*b]"


def test_lift_is_exact_on_true_points():
    lf = Lifter(["a", "b", "c"], [0, 0, 0], [1, 1, 1])
    a, b, c = (Polynomial.var(i) for i in range(3))
    f = a * b * c + 2 * a * b - c + 0.5
    lf.register_poly(f)
    p = Polytope(lf.names, np.zeros((0, len(lf.names))), [], lf.lo, lf.hi, lf.products, lf.monomial_map, 3)
    row, const = lift(p, f)
    rng = np.random.default_rng(1)
    for _ in range(50):
        v = rng.random(3)
        x = np.concatenate([v, [v[0] * v[1], v[0] * v[1] * v[2]]])
        assert row @ x + const == pytest.approx(f.evaluate(v), abs=1e-12)
        assert p.max_violation(x) <= 1e-12


# ---------------------------------------------------------------- LP


def test_lp_min_on_segment_region():
    p = box(1, 0, 1, A=[[1], [-1]], b=[0.6, -0.4])
    assert lp_solve(p, [1.0], "min").value == pytest.approx(0.4)


def test_lp_max_on_simplex():
    p = box(2, A=[[1, 1]], b=[1])
    r = lp_solve(p, [1, 1], "max")
    assert r.status == OPTIMAL and r.value == pytest.approx(1.0)


def test_lp_infeasible():
    p = box(1, -5, 5, A=[[1], [-1]], b=[0, -1])
    assert lp_solve(p, [1.0]).status == INFEASIBLE


def test_standard_form_simplex_phase_one():
    # min -x0 - x1 s.t. x0 + x1 + s = 1
    status, y, basis, _ = simplex_standard(np.array([[1.0, 1.0, 1.0]]), np.array([1.0]), np.array([-1.0, -1.0, 0.0]))
    assert status == OPTIMAL and y[0] + y[1] == pytest.approx(1.0)
    status, *_ = simplex_standard(np.array([[1.0, 1.0]]), np.array([-1.0]), np.array([1.0, 1.0]))
    assert status == INFEASIBLE


def random_lp(rng, n, m):
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(-1, 1, n)
    b = A @ x0 + rng.uniform(0, 1, m)  # x0 strictly feasible
    return box(n, -2, 2, A=A, b=b)


def test_random_lps_match_scipy_and_vertices():
    rng = np.random.default_rng(7)
    for k in range(200):
        n = 2 + k % 2
        p = random_lp(rng, n, 3 + k % 4)
        c = rng.normal(size=n)
        ours = lp_solve(p, c, "min")
        ref = linprog(c, A_ub=p.A, b_ub=p.b, bounds=list(zip(p.lo, p.hi)), method="highs")
        assert ours.ok and ours.value == pytest.approx(ref.fun, abs=1e-7)
        assert p.max_violation(ours.x) <= 1e-7
        verts = enumerate_vertices(p)
        assert ours.value == pytest.approx(float(np.min(verts @ c)), abs=1e-7)


def test_warm_start_reuses_basis():
    rng = np.random.default_rng(3)
    p = random_lp(rng, 3, 6)
    c = rng.normal(size=3)
    cold = lp_solve(p, c, "min")
    warm = lp_solve(p, c + 1e-3 * rng.normal(size=3), "min", basis=cold.basis)
    ref = linprog(c, A_ub=p.A, b_ub=p.b, bounds=list(zip(p.lo, p.hi)), method="highs")
    assert cold.value == pytest.approx(ref.fun, abs=1e-8)
    assert warm.pivots <= cold.pivots
    again = lp_solve(p, c, "min", basis=cold.basis)
    assert again.pivots == 0 and again.value == pytest.approx(cold.value, abs=1e-12)


# ---------------------------------------------------------------- vertices


def test_vertices_unit_square():
    assert len(enumerate_vertices(box(2))) == 4


def test_vertices_segment():
    v = sorted(map(tuple, np.round(enumerate_vertices(segment()), 12)))
    assert v == [(0.0, 1.0), (1.0, 0.0)]


def test_vertices_triangle():
    assert len(enumerate_vertices(box(2, A=[[1, 1]], b=[1]))) == 3


def test_vertices_empty_polytope():
    assert len(enumerate_vertices(box(1, A=[[1], [-1]], b=[0.2, -0.5]))) == 0


def test_vertices_refuse_high_dimension():
    with pytest.raises(VertexEnumerationUnavailable, match="vertex enumeration unavailable"):
        enumerate_vertices(box(9), max_dim=6)


# ---------------------------------------------------------------- OBBT


def bilinear_region():
    # z = t1*t2, t1,t2 in [0.5,1], z <= 0.3
    return Polytope(["t1", "t2", "z"], [[0, 0, 1]], [0.3], [0.5, 0.5, 0.25], [1, 1, 1], products=[(2, 0, 1)], n_params=2)


def test_obbt_bilinear_bounds_match_true_set():
    p = obbt(bilinear_region(), max_rounds=10)
    assert not p.infeasible
    # true set {t1*t2 <= 0.3} restricted to the box: max t1 = 0.3/0.5
    g = np.linspace(0.5, 1.0, 1001)
    t1, t2 = np.meshgrid(g, g)
    ok = t1 * t2 <= 0.3
    assert t1[ok].max() == pytest.approx(0.6, abs=1e-3)
    assert p.hi[0] == pytest.approx(0.6, abs=1e-6)
    assert p.hi[1] == pytest.approx(0.6, abs=1e-6)
    assert p.hi[0] >= t1[ok].max() and p.lo[0] <= t1[ok].min()


def test_obbt_zero_rounds_is_identity():
    p = bilinear_region()
    q = obbt(p, max_rounds=0)
    assert np.array_equal(q.lo, p.lo) and np.array_equal(q.hi, p.hi)


def test_obbt_linear_fixpoint():
    p = box(2, A=[[1, 1], [-1, 0]], b=[1.2, -0.3])
    hist = []
    q = obbt(p, max_rounds=5, history=hist)
    assert q.lo[0] == pytest.approx(0.3, abs=1e-8) and q.hi[1] == pytest.approx(0.9, abs=1e-8)
    r = obbt(q, max_rounds=1)
    assert np.allclose(r.lo, q.lo, atol=1e-8) and np.allclose(r.hi, q.hi, atol=1e-8)
    assert len(hist) == 3  # initial, tightening round, no-gain round


def test_obbt_detects_emptiness():
    p = Polytope(["t1", "t2", "z"], [[0, 0, 1]], [0.2], [0.5, 0.5, 0.25], [1, 1, 1], products=[(2, 0, 1)], n_params=2)
    assert obbt(p).infeasible


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.45), st.floats(0.55, 0.95), st.floats(0.05, 0.45), st.floats(0.55, 0.95), st.floats(0.1, 0.8))
def test_obbt_never_cuts_true_points(a_lo, a_hi, b_lo, b_hi, zmax):
    lo = [a_lo, b_lo, a_lo * b_lo]
    hi = [a_hi, b_hi, a_hi * b_hi]
    p = Polytope(["a", "b", "z"], [[0, 0, 1]], [zmax], lo, hi, products=[(2, 0, 1)], n_params=2)
    q = obbt(p)
    rng = np.random.default_rng(0)
    pts = rng.uniform([a_lo, b_lo], [a_hi, b_hi], size=(400, 2))
    pts = pts[pts[:, 0] * pts[:, 1] <= zmax]
    if len(pts) == 0:
        return
    assert not q.infeasible
    x = np.column_stack([pts, pts[:, 0] * pts[:, 1]])
    assert np.all(x >= q.lo - 1e-9) and np.all(x <= q.hi + 1e-9)
    assert np.max(x @ q.A.T - q.b) <= 1e-9
