import numpy as np
import pytest

from strupkit.checks import SHEAR_KINDS, random_layer
from strupkit.errors import DimensionError
from strupkit.layers import (GenRidgeLayer, HenonLayer, RidgeLayer, ShearLayer, fixed_forward,
                             gr_forward, gr_materialize, henon_forward, layer_from_dict,
                             pack_sym, ridge_forward, ridge_vjp, sym_size)
from strupkit.phase import symplecticity_residual
from strupkit.poly import MultiPoly
from strupkit.systems import reference_flow

ALL_KINDS = SHEAR_KINDS + ("henon",)


def _fd_vjp(layer, x, h, c, eps=1e-6):
    """Central-difference input and parameter gradients of <c, layer(x)>."""
    f = lambda: float(np.sum(layer.forward(x, h) * c))
    dx = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + eps
        up = f()
        x[i] = old - eps
        down = f()
        x[i] = old
        dx[i] = (up - down) / (2 * eps)
    grads = {}
    for name, arr in layer.params.items():
        g = np.zeros_like(arr)
        for i in np.ndindex(arr.shape):
            old = arr[i]
            arr[i] = old + eps
            up = f()
            arr[i] = old - eps
            down = f()
            arr[i] = old
            g[i] = (up - down) / (2 * eps)
        grads[name] = g
    return dx, grads


def _rel(a, b):
    floor = 1e-4 * max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))


# -- ridge ------------------------------------------------------------------


def test_zero_direction_is_identity():
    layer = RidgeLayer.poly(np.zeros(4), [1.0, 2.0])
    x = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(ridge_forward(layer, x, 0.5), x)


def test_ridge_hand_example():
    layer = RidgeLayer.poly([0.0, 1.0], [0.5])
    assert np.allclose(ridge_forward(layer, np.array([1.0, 2.0]), 0.1), [0.8, 2.0], atol=1e-15)


def test_ridge_vjp_zero_cotangent(rng):
    layer = random_layer("poly-ridge", 2, rng)
    dx, grads = ridge_vjp(layer, rng.normal(size=(3, 4)), 0.1, np.zeros((3, 4)))
    assert not np.any(dx) and all(not np.any(g) for g in grads.values())


def test_ridge_vjp_at_zero_direction(rng):
    layer = RidgeLayer.poly(np.zeros(4), [0.7, -0.3])
    x = rng.normal(size=(1, 4))
    c = rng.normal(size=(1, 4))
    dx, grads = ridge_vjp(layer, x, 0.1, c)
    assert np.array_equal(dx, c)
    # alpha starts at degree 2, so alpha'(0) = 0 and the w-gradient vanishes too
    _, fd = _fd_vjp(layer, x.copy(), 0.1, c)
    assert np.max(np.abs(grads["w"] - fd["w"])) < 1e-10


def test_ridge_conserves_projection(rng):
    layer = random_layer("poly-ridge", 3, rng)
    x = rng.uniform(-0.5, 0.5, size=(20, 6))
    out = layer.forward(x, 0.7)
    assert np.max(np.abs(layer.invariant(out) - layer.invariant(x))) < 1e-13


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_overflow_raises():
    from strupkit.errors import NumericOverflowError
    layer = RidgeLayer.poly([1.0, 0.0], [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1e300])
    with pytest.raises(NumericOverflowError):
        layer.forward(np.array([1e50, 0.0]), 1.0)


# -- generalized ridge --------------------------------------------------------


def test_gr_zero_matrices():
    n, k = 2, sym_size(2)
    params = {"s1": np.zeros(k), "s2": np.zeros(k), "s3": np.zeros(k),
              "weights": np.ones((3, n)), "biases": np.zeros(3), "out": np.ones(3)}
    layer = GenRidgeLayer(n, params, "A")
    A, B = gr_materialize(layer)
    assert np.array_equal(A, np.eye(n)) and np.array_equal(B, np.zeros((n, n)))
    x = np.array([0.1, -0.2, 0.3, 0.4])
    g = layer.net.grad(layer.params, x[None, :2])[0]
    assert np.allclose(gr_forward(layer, x, 0.1), np.r_[x[:2], x[2:] + 0.1 * g], atol=1e-16)


def test_gr_scalar_example():
    params = {"s1": [1.0], "s2": [2.0], "s3": [3.0], "weights": np.ones((1, 1)),
              "biases": [0.0], "out": [1.0]}
    A, B = gr_materialize(GenRidgeLayer(1, params, "A"))
    assert A[0, 0] == 7.0 and B[0, 0] == 10.0
    A2, B2 = gr_materialize(GenRidgeLayer(1, params, "B"))
    assert A2[0, 0] == 10.0 and B2[0, 0] == 7.0


@pytest.mark.parametrize("orientation", "AB")
def test_gr_symmetry_property(rng, orientation):
    layer = random_layer(f"gen-ridge:{orientation}", 4, rng)
    A, B = gr_materialize(layer)
    assert np.max(np.abs(A @ B.T - B @ A.T)) < 1e-13


def test_gr_zero_output_weights_identity(rng):
    layer = random_layer("gen-ridge:A", 2, rng)
    layer.params["out"][:] = 0
    x = rng.normal(size=4)
    assert np.array_equal(layer.forward(x, 0.3), x)


def test_gr_conserves_projection(rng):
    layer = random_layer("gen-ridge:B", 3, rng)
    x = rng.uniform(-0.5, 0.5, size=(10, 6))
    assert np.max(np.abs(layer.invariant(layer.forward(x, 0.5)) - layer.invariant(x))) < 1e-13


# -- fixed direction ----------------------------------------------------------


def test_la_linear_example():
    layer = ShearLayer(1, {"sym": [0.3]}, "q", "quadratic")
    assert np.allclose(fixed_forward(layer, np.array([2.0, 1.0]), 0.1), [2.0, 1.0 + 2 * 0.1 * 0.3 * 2.0])


def test_g_zero_scale_is_identity(rng):
    layer = random_layer("G:q", 2, rng)
    layer.params["out"][:] = 0
    x = rng.normal(size=4)
    assert np.array_equal(layer.forward(x, 1.0), x)


def test_p_shear_updates_only_p(rng):
    layer = random_layer("G:p", 2, rng)
    x = rng.normal(size=4)
    y = layer.forward(x, 0.2)
    assert np.array_equal(y[2:], x[2:]) and not np.allclose(y[:2], x[:2])


# -- henon ------------------------------------------------------------------


def test_henon_quarter_turn():
    layer = HenonLayer.from_poly(MultiPoly(1))
    assert np.array_equal(henon_forward(layer, np.array([1.0, 2.0]), 0.4), [2.0, -1.0])


def test_henon_hand_example():
    layer = HenonLayer.from_poly(MultiPoly(1, {(0, 2): 1.0}))
    assert np.allclose(henon_forward(layer, np.array([1.0, 2.0]), 1.0), [2.0, 3.0])


def test_henon_rejects_p_dependence():
    with pytest.raises(ValueError):
        HenonLayer.from_poly(MultiPoly(1, {(1, 0): 1.0}))


@pytest.mark.parametrize("kind", ["net", "poly"])
def test_henon_equals_shear_stack(rng, kind):
    if kind == "net":
        layer = random_layer("henon", 2, rng)
    else:
        layer = HenonLayer.from_poly(MultiPoly(2, {(0, 0, 2, 1): 0.7, (0, 0, 0, 3): -0.2}))
    x = rng.uniform(-1, 1, size=(20, 4))
    assert np.max(np.abs(layer.forward_by_shears(x, 0.3) - layer.forward(x, 0.3))) < 1e-12


# -- properties over every kind --------------------------------------------


@pytest.mark.parametrize("kind", SHEAR_KINDS)
@pytest.mark.parametrize("n", [1, 2, 4])
def test_shear_exactness(rng, kind, n):
    layer = random_layer(kind, n, rng)
    for h in (0.01, 0.1, 1.0):
        x = rng.uniform(-0.5, 0.5, size=(3, 2 * n))
        ref = reference_flow(layer.grad_hamiltonian, x, h)
        assert np.max(np.abs(layer.forward(x, h) - ref)) < 1e-10


@pytest.mark.parametrize("kind", SHEAR_KINDS)
def test_grad_hamiltonian_matches_fd(rng, kind):
    layer = random_layer(kind, 2, rng)
    x = rng.uniform(-0.5, 0.5, size=4)
    eps = 1e-6
    fd = np.array([(layer.hamiltonian(x + eps * e) - layer.hamiltonian(x - eps * e)) / (2 * eps)
                   for e in np.eye(4)])
    assert np.allclose(layer.grad_hamiltonian(x), fd, rtol=1e-7, atol=1e-8)


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("n", [1, 2, 4])
def test_symplectic(rng, kind, n):
    layer = random_layer(kind, n, rng)
    x = rng.uniform(-0.5, 0.5, size=2 * n)
    assert symplecticity_residual(lambda z: layer.forward(z, 0.3), x) < 1e-8


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_inverse(rng, kind):
    layer = random_layer(kind, 2, rng)
    x = rng.uniform(-0.5, 0.5, size=(20, 4))
    assert np.max(np.abs(layer.inverse(layer.forward(x, 0.7), 0.7) - x)) < 1e-12


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_vjp_matches_fd(rng, kind):
    layer = random_layer(kind, 2, rng)
    x = rng.uniform(-0.5, 0.5, size=(4, 4))
    c = rng.normal(size=(4, 4))
    dx, grads = layer.vjp(x, 0.3, c)
    fdx, fgrads = _fd_vjp(layer, x.copy(), 0.3, c)
    assert _rel(dx, fdx) < 1e-6
    for name in layer.params:
        assert _rel(grads[name], fgrads[name]) < 1e-6, name


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_serialization_round_trip(rng, kind):
    layer = random_layer(kind, 2, rng)
    again = layer_from_dict(layer.to_dict(), 2)
    assert np.array_equal(again.flat_params(), layer.flat_params())
    x = rng.normal(size=(5, 4))
    assert np.array_equal(again.forward(x, 0.2), layer.forward(x, 0.2))


def test_poly_henon_serialization():
    layer = HenonLayer.from_poly(MultiPoly(1, {(0, 3): 0.5}))
    again = layer_from_dict(layer.to_dict(), 1)
    assert np.array_equal(again.forward(np.array([0.3, 0.4]), 1.0), layer.forward(np.array([0.3, 0.4]), 1.0))


def test_dimension_check(rng):
    layer = random_layer("G:p", 2, rng)
    with pytest.raises(DimensionError):
        layer.forward(np.zeros(6), 0.1)


def test_wrong_parameter_count():
    with pytest.raises(DimensionError):
        layer_from_dict({"kind": "LA-linear", "orientation": "p", "params": [1.0, 2.0]}, 2)


def test_pack_sym_round_trip(rng):
    from strupkit.layers import unpack_sym
    M = rng.normal(size=(3, 3))
    M = M + M.T
    assert np.array_equal(unpack_sym(pack_sym(M), 3), M)
