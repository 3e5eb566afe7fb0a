import numpy as np
import pytest
from hypothesis import given, strategies as st

from strupkit.errors import DimensionError, UndefinedMetricError
from strupkit.phase import apply_J
from strupkit.poly import (MultiPoly, coefficient_mae, poisson_bracket, poly_arith, poly_grad)
from strupkit.systems import builtin_system

X = lambda n, i: MultiPoly.variable(n, i)


def test_add_cancels_to_zero():
    a = X(1, 0) ** 2
    assert poly_arith(a, a.scale(-1), "add").is_zero()


def test_difference_of_squares():
    a = X(1, 0) + X(1, 1)
    b = X(1, 0) - X(1, 1)
    assert poly_arith(a, b, "mul") == X(1, 0) ** 2 - X(1, 1) ** 2


def test_scale():
    h = (X(1, 0) ** 2).scale(0.5) + (X(1, 1) ** 2).scale(0.5)
    assert poly_arith(h, 2, "scale") == X(1, 0) ** 2 + X(1, 1) ** 2


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        X(1, 0) + X(2, 0)


def test_drop_tolerance_normalizes():
    p = MultiPoly(1, {(1, 0): 1e-15, (0, 1): 1.0})
    assert len(p) == 1


def test_grad_power_rule():
    h = X(2, 0) ** 2 * X(2, 1)
    g = poly_grad(h)
    assert g[0] == (X(2, 0) * X(2, 1)).scale(2)
    assert g[1] == X(2, 0) ** 2
    assert g[2].is_zero() and g[3].is_zero()


def test_grad_constant():
    assert all(g.is_zero() for g in poly_grad(MultiPoly.constant(2, 3.0)))


def test_henon_heiles_gradient_matches_system(rng):
    system = builtin_system("henon-heiles")
    grads = poly_grad(system.poly_form)
    x = rng.uniform(-1, 1, size=(10, 4))
    numeric = np.stack([g(x) for g in grads], axis=-1)
    assert np.max(np.abs(numeric - system.grad_H(x))) < 1e-13


def test_bracket_example():
    half_p2 = (X(1, 0) ** 2).scale(0.5)
    half_q2 = (X(1, 1) ** 2).scale(0.5)
    assert poisson_bracket(half_p2, half_q2) == (X(1, 0) * X(1, 1)).scale(-1)


def _random_poly(seed, n, degree, terms=6):
    rng = np.random.default_rng(seed)
    out = {}
    for _ in range(terms):
        idx = np.zeros(2 * n, dtype=int)
        for _ in range(rng.integers(0, degree + 1)):
            idx[rng.integers(0, 2 * n)] += 1
        out[tuple(idx)] = rng.normal()
    return MultiPoly(n, out)


polys = st.builds(_random_poly, st.integers(0, 10 ** 6), st.sampled_from([1, 2]), st.just(3))


def _close(a, b, tol=1e-10):
    return max((abs(c) for _, c in (a - b)), default=0.0) < tol


@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2]))
def test_antisymmetry(seed, n):
    f = _random_poly(seed, n, 3)
    g = _random_poly(seed + 1, n, 3)
    assert poisson_bracket(f, f).is_zero()
    assert _close(poisson_bracket(f, g) + poisson_bracket(g, f), MultiPoly(n))


@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2]))
def test_jacobi_identity(seed, n):
    f, g, k = (_random_poly(seed + i, n, 3) for i in range(3))
    total = (poisson_bracket(f, poisson_bracket(g, k)) + poisson_bracket(g, poisson_bracket(k, f))
             + poisson_bracket(k, poisson_bracket(f, g)))
    assert _close(total, MultiPoly(n))


@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2]))
def test_leibniz_rule(seed, n):
    f, g, k = (_random_poly(seed + i, n, 3) for i in range(3))
    lhs = poisson_bracket(f, g * k)
    rhs = poisson_bracket(f, g) * k + g * poisson_bracket(f, k)
    assert _close(lhs, rhs)


@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2, 3]))
def test_bracket_matches_pointwise_formula(seed, n):
    f = _random_poly(seed, n, 3)
    g = _random_poly(seed + 1, n, 3)
    x = np.random.default_rng(seed).uniform(-1, 1, size=(50, 2 * n))
    gf = np.stack([d(x) for d in poly_grad(f)], axis=-1)
    gg = np.stack([d(x) for d in poly_grad(g)], axis=-1)
    numeric = np.sum(gf * apply_J(gg), axis=-1)
    symbolic = poisson_bracket(f, g)(x)
    assert np.all(np.abs(symbolic - numeric) <= 1e-12 * np.maximum(1.0, np.abs(numeric)))


def test_text_round_trip(rng):
    p = _random_poly(3, 2, 4)
    assert MultiPoly.from_text(p.to_text()) == p
    lines = p.to_text().splitlines()
    assert lines == sorted(lines, key=lambda s: tuple(int(a) for a in s.split(":")[0].split()))


def test_from_text_comments_and_dim():
    p = MultiPoly.from_text("# truth\n2 0 : 0.5\n0 2 : 0.5\n")
    assert p.dim_n == 1 and p[(2, 0)] == 0.5


def test_pretty_style():
    p = MultiPoly(2, {(2, 0, 0, 0): 0.5, (0, 0, 1, 1): -0.4})
    assert p.pretty() == "0.5 x_0^2 - 0.4 x_2 x_3"
    assert MultiPoly(1).pretty() == "0"


def test_mae_examples():
    a = (X(1, 0) ** 2).scale(0.5)
    assert coefficient_mae(a, a) == 0.0
    assert coefficient_mae(a, (X(1, 0) ** 2).scale(0.6)) == pytest.approx(0.1)


def test_mae_union_vs_intersection():
    learned = MultiPoly(1, {(2, 0): 0.5, (1, 1): 0.01})
    truth = MultiPoly(1, {(2, 0): 0.6})
    assert coefficient_mae(learned, truth) == pytest.approx((0.1 + 0.01) / 2)
    assert coefficient_mae(learned, truth, "intersection") == pytest.approx(0.1)


def test_mae_of_zero_polynomials_undefined():
    with pytest.raises(UndefinedMetricError):
        coefficient_mae(MultiPoly(1), MultiPoly(1))


def test_evaluation_batched(rng):
    p = _random_poly(9, 2, 3)
    x = rng.normal(size=(7, 4))
    assert np.allclose(p(x), [p(row) for row in x])
