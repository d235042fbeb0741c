from fractions import Fraction

from hypothesis import given, strategies as st

from pmdplearn import Polynomial

t1, t2 = Polynomial.var(0), Polynomial.var(1)


def test_evaluate_bilinear_plus_constant():
    assert (2 * t1 * t2 + 1).evaluate([0.5, 0.5]) == 1.5


def test_constant_polynomial():
    f = Polynomial.const(Fraction(3, 10))
    assert f.is_constant()
    assert f.evaluate([0.9]) == 0.3


def test_cancellation_leaves_no_terms():
    f = t1 - t1
    assert len(f) == 0
    assert f.evaluate([0.7]) == 0


def test_structural_equality_and_hash():
    a = t1 * t2 + Fraction(1, 2)
    b = Fraction(1, 2) + t2 * t1
    assert a == b and hash(a) == hash(b)
    assert (1 - t1) != (1 - t2)


def test_degree_and_linearity():
    assert (t1 * t2).degree() == 2
    assert (t1 * t1).degree() == 2 and not (t1 * t1).is_multilinear()
    assert (t1 + t2).is_linear()


def test_to_string_round_trip():
    from pmdplearn import parse_model

    f = 1 - Fraction(1, 2) * t1 * t2
    s = f.to_string(["a", "b"])
    text = f"params: a in [0,1], b in [0,1];\nstate s {{ action x {{ -> s : {s}; -> t : 1 - ({s}); }} }}\nstate t {{ }}"
    m = parse_model(text)
    assert m.trans[(0, 0)][0][1] == f


coef = st.fractions(min_value=-3, max_value=3, max_denominator=8)


@given(coef, coef, coef, st.floats(0, 1), st.floats(0, 1))
def test_arithmetic_matches_float_evaluation(a, b, c, x, y):
    f = a * t1 + b * t2 * t1 + c
    g = (f * f) - f
    v = f.evaluate([x, y])
    assert abs(g.evaluate([x, y]) - (v * v - v)) < 1e-9
