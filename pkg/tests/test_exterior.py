import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import to_sympy
from lcsmech.expr import Chart, Expr, random_polynomial, sample_rng
from lcsmech.exterior import (ChartMap, ChartMismatch, DifferentialForm, VectorFieldExpr, bracket, exterior_derivative,
                              form_equal, form_matrix_at, interior_product, ldr_differential, pullback, wedge)

X4 = Chart.euclidean(4)
QP = Chart.cotangent_chart(1)


def dx(*names, chart=X4):
    return DifferentialForm.basis(chart, *names)


OMEGA1 = DifferentialForm.parse(X4, 2, {"x2,x4": "-1", "x1,x3": "1", "x4,x3": "-x2"})


def test_wedge_antisymmetry():
    assert wedge(dx("x1"), dx("x1")).is_zero()
    assert wedge(dx("x3"), dx("x1")) == -dx("x1", "x3")


def test_wedge_display():
    eta2 = DifferentialForm.parse(X4, 1, {"x1": "1", "x4": "-x2"})
    got = wedge(eta2, dx("x3"))
    want = DifferentialForm.parse(X4, 2, {"x1,x3": "1", "x4,x3": "-x2"})
    assert got == want


def test_wedge_chart_mismatch():
    with pytest.raises(ChartMismatch):
        wedge(dx("x1"), DifferentialForm.basis(QP, "q1"))


def test_exterior_derivative_examples():
    assert exterior_derivative(DifferentialForm.scalar(X4, 7)).is_zero()
    a = DifferentialForm.parse(X4, 2, {"x4,x3": "x2"})
    assert exterior_derivative(a) == dx("x2", "x4", "x3")
    eta2 = DifferentialForm.parse(X4, 1, {"x1": "1", "x4": "-x2"})
    assert exterior_derivative(eta2) == -dx("x2", "x4")


def test_ldr_examples():
    f = DifferentialForm.scalar(X4, Expr.var("x1") * Expr.var("x3"))
    zero = DifferentialForm.zero(X4, 1)
    assert ldr_differential(f, zero) == exterior_derivative(f)
    theta = dx("x3")
    assert ldr_differential(ldr_differential(f, theta), theta).is_zero()
    assert ldr_differential(OMEGA1, theta).is_zero()
    with pytest.raises(ValueError):
        ldr_differential(f, dx("x1", "x2"))


def test_interior_product_examples():
    d1 = VectorFieldExpr.coordinate(X4, "x1")
    d2 = VectorFieldExpr.coordinate(X4, "x2")
    assert interior_product(d1, dx("x1", "x3")) == dx("x3")
    assert interior_product(d2, dx("x1", "x3")).is_zero()
    Z = VectorFieldExpr(QP, [Expr.var("q1") ** 2, Expr.var("p1") + 3])
    got = interior_product(Z, dx("q1", "p1", chart=QP))
    want = DifferentialForm.one_form(QP, [-(Expr.var("p1") + 3), Expr.var("q1") ** 2])
    assert got == want
    with pytest.raises(ValueError):
        interior_product(d1, DifferentialForm.scalar(X4, 1))


def test_pullback_examples():
    ident = ChartMap.identity(X4)
    assert pullback(ident, OMEGA1) == OMEGA1
    C2 = Chart.cotangent_chart(2)
    base = C2.base()
    gamma = ChartMap(base, C2, ["q1", "q2", "q1^2*q2", "q2^3 + q1"])
    got = pullback(gamma, DifferentialForm.basis(C2, "p1"))
    assert got == DifferentialForm.one_form(base, ["2*q1*q2", "q1^2"])


def test_form_matrix():
    m = form_matrix_at(dx("q1", "p1", chart=QP), [0.3, -1.2])
    assert np.array_equal(m, [[0.0, 1.0], [-1.0, 0.0]])
    m1 = form_matrix_at(OMEGA1, np.zeros(4))
    want = np.zeros((4, 4))
    want[1, 3], want[3, 1] = -1, 1
    want[0, 2], want[2, 0] = 1, -1
    assert np.array_equal(m1, want)
    m = form_matrix_at(OMEGA1, [0.5, 1.5, -0.25, 2.0])
    assert np.array_equal(m + m.T, np.zeros((4, 4)))


def test_form_matrix_exact():
    m = form_matrix_at(OMEGA1, [0, 3, 0, 0], exact=True)
    assert m[3][2] == -3 and m[2][3] == 3


# -- property tests ---------------------------------------------------------

def _rand_form(seed, degree, chart=X4):
    rng = sample_rng(seed)
    names = list(chart.coords)
    import itertools
    terms = {}
    for idx in itertools.combinations(range(chart.dim), degree):
        if rng.random() < 0.6:
            terms[idx] = random_polynomial(names, rng, max_degree=2, n_terms=3)
    return DifferentialForm(chart, degree, terms)


def _closed_theta(seed, chart=X4):
    sigma = random_polynomial(list(chart.coords), sample_rng(seed), max_degree=3, n_terms=4)
    return exterior_derivative(DifferentialForm.scalar(chart, sigma))


seeds = st.integers(0, 10 ** 6)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(0, 3))
def test_d_squared_zero(seed, degree):
    a = _rand_form(seed, degree)
    assert exterior_derivative(exterior_derivative(a)).is_zero()


@settings(max_examples=30, deadline=None)
@given(seeds, seeds, st.integers(0, 2))
def test_ldr_squared_zero(seed, tseed, degree):
    theta = _closed_theta(tseed)
    a = _rand_form(seed, degree)
    assert ldr_differential(ldr_differential(a, theta), theta).is_zero()


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(0, 2), st.integers(0, 2))
def test_leibniz(seed, p, q):
    a, b = _rand_form(seed, p), _rand_form(seed + 1, q)
    lhs = exterior_derivative(wedge(a, b))
    rhs = wedge(exterior_derivative(a), b) + wedge(a, exterior_derivative(b)).scale((-1) ** p)
    assert lhs == rhs


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(0, 2))
def test_pullback_commutes_with_d(seed, degree):
    rng = sample_rng(seed + 99)
    src = Chart.euclidean(3, "y")
    phi = ChartMap(src, X4, [random_polynomial(list(src.coords), rng, max_degree=2, n_terms=3) for _ in range(4)])
    a = _rand_form(seed, degree)
    assert pullback(phi, exterior_derivative(a)) == exterior_derivative(pullback(phi, a))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 2), st.integers(1, 2))
def test_interior_product_antiderivation(seed, p, q):
    rng = sample_rng(seed + 5)
    X = VectorFieldExpr(X4, [random_polynomial(list(X4.coords), rng, 2, 3) for _ in range(4)])
    a, b = _rand_form(seed, p), _rand_form(seed + 1, q)
    lhs = interior_product(X, wedge(a, b))
    rhs = wedge(interior_product(X, a), b) + wedge(a, interior_product(X, b)).scale((-1) ** p)
    assert lhs == rhs


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_bracket_matches_lie_derivative_commutator(seed):
    rng = sample_rng(seed)
    X = VectorFieldExpr(X4, [random_polynomial(list(X4.coords), rng, 2, 2) for _ in range(4)])
    Y = VectorFieldExpr(X4, [random_polynomial(list(X4.coords), rng, 2, 2) for _ in range(4)])
    f = random_polynomial(list(X4.coords), rng, 3, 4)
    assert bracket(X, Y).apply(f) == X.apply(Y.apply(f)) - Y.apply(X.apply(f))


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_exterior_derivative_matches_sympy(seed):
    a = _rand_form(seed, 1)
    da = exterior_derivative(a)
    xs = sp.symbols("x1 x2 x3 x4")
    comps = [to_sympy(c) for c in a.components()]
    for i in range(4):
        for j in range(i + 1, 4):
            want = sp.diff(comps[j], xs[i]) - sp.diff(comps[i], xs[j])
            assert sp.expand(to_sympy(da.coeff(i, j)) - want) == 0


def test_linearity_of_wedge_and_d():
    a, b, c = _rand_form(1, 1), _rand_form(2, 1), _rand_form(3, 2)
    assert wedge(a + b, c) == wedge(a, c) + wedge(b, c)
    assert exterior_derivative(a + b) == exterior_derivative(a) + exterior_derivative(b)


def test_json_round_trip():
    back = DifferentialForm.from_json(X4, OMEGA1.to_json())
    assert back == OMEGA1
    assert form_equal(back, OMEGA1).method == "exact"
