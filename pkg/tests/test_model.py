import json

import numpy as np
import pytest

from strupkit.checks import METHOD_HYPER, TEST_SCALES, gradient_error, model_structure
from strupkit.errors import CapabilityError, ConfigurationError, DimensionError
from strupkit.layers import RidgeLayer
from strupkit.model import (METHODS, SympNetModel, count_params, init_model,
                            inverse_modified_hamiltonian, load_model, model_forward,
                            model_from_dict, model_inverse, param_stats)
from strupkit.phase import fd_jacobian
from strupkit.poly import MultiPoly


def _random(method, n=2, seed=0):
    return init_model(method, n, METHOD_HYPER[method], seed=seed, scales=TEST_SCALES)


def test_p_parameter_count():
    model = init_model("P", 2, {"layers": 8, "degree": 3})
    assert model.num_params == 48 == count_params("P", 2, {"layers": 8, "degree": 3})


@pytest.mark.parametrize("method", METHODS)
def test_count_params_matches(method):
    model = init_model(method, 3, METHOD_HYPER[method])
    assert model.num_params == count_params(method, 3, METHOD_HYPER[method])


@pytest.mark.parametrize("method", METHODS)
def test_same_seed_bitwise_identical(method):
    a, b = init_model(method, 2, METHOD_HYPER[method], seed=5), init_model(method, 2, METHOD_HYPER[method], seed=5)
    assert np.array_equal(a.get_flat(), b.get_flat())
    assert a.to_dict() == b.to_dict()


def test_near_identity_at_init(rng):
    h = 0.1
    model = init_model("P", 2, {"layers": 8, "degree": 3}, seed=3)
    x = rng.normal(size=(200, 4))
    x /= np.maximum(1.0, np.linalg.norm(x, axis=1))[:, None]
    assert np.max(np.linalg.norm(model.forward(x, h) - x, axis=1)) < 0.1 * h


@pytest.mark.parametrize("hyper", [{"layers": 2, "degree": 1}, {"layers": 2}, {"layers": -1, "degree": 3}])
def test_invalid_hyper(hyper):
    with pytest.raises(ConfigurationError):
        init_model("P", 2, hyper)


def test_h_layers_multiple_of_four():
    with pytest.raises(ConfigurationError):
        init_model("H", 1, {"layers": 3, "width": 2})


def test_unknown_method():
    with pytest.raises(ConfigurationError):
        init_model("Q", 1, {"layers": 1})


def test_empty_model_is_identity(rng):
    model = SympNetModel(2, "P", [])
    x = rng.normal(size=(4, 4))
    assert np.array_equal(model_forward(model, x, 0.3), x)
    assert np.array_equal(model_inverse(model, x, 0.3), x)


def test_zero_parameters_identity(rng):
    model = init_model("P", 2, {"layers": 3, "degree": 3})
    model.set_flat(np.zeros(model.num_params))
    x = rng.normal(size=(4, 4))
    assert np.array_equal(model.forward(x, 0.3), x)


def test_single_layer_model(rng):
    model = _random("P")
    single = SympNetModel(2, "P", [model.layers[0].copy()])
    x = rng.normal(size=(5, 4))
    assert np.array_equal(single.forward(x, 0.2), model.layers[0].forward(x, 0.2))


@pytest.mark.parametrize("method", METHODS)
def test_forward_is_manual_fold(rng, method):
    model = _random(method)
    x = rng.uniform(-0.5, 0.5, size=(20, 4))
    y = x
    for layer in model.layers:
        y = layer.forward(y, 0.1)
    assert np.array_equal(model.forward(x, 0.1), y)


@pytest.mark.parametrize("method", METHODS)
def test_group_property(rng, method):
    a, b = _random(method, seed=0), _random(method, seed=1)
    x = rng.uniform(-0.5, 0.5, size=(10, 4))
    assert np.array_equal(a.then(b).forward(x, 0.2), b.forward(a.forward(x, 0.2), 0.2))


@pytest.mark.parametrize("method", METHODS)
def test_inverse_round_trip(rng, method):
    model = _random(method)
    x = rng.uniform(-0.5, 0.5, size=(50, 4))
    assert np.max(np.abs(model.inverse(model.forward(x, 0.1), 0.1) - x)) < 1e-12


# Henon layers contain a quarter turn that negating h does not undo; they
# invert through the reversed shear stack instead (see test_inverse_round_trip)
@pytest.mark.parametrize("method", [m for m in METHODS if m != "H"])
def test_reversed_model_negative_step(rng, method):
    model = _random(method)
    x = rng.uniform(-0.5, 0.5, size=(20, 4))
    back = model.reversed_layers().forward(model.forward(x, 0.1), -0.1)
    assert np.max(np.abs(back - x)) < 1e-12


def test_single_ridge_inverse_is_negative_step(rng):
    layer = RidgeLayer.poly(rng.normal(size=4), rng.normal(size=2))
    model = SympNetModel(2, "P", [layer])
    y = rng.normal(size=(5, 4))
    assert np.array_equal(model.inverse(y, 0.3), layer.forward(y, -0.3))


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("n", [1, 2])
def test_structure_preserved(method, n):
    s = model_structure(method, n)
    assert s["symplecticity"] < 1e-8
    assert s["volume"] < 1e-8
    assert s["inverse"] < 1e-12


@pytest.mark.parametrize("method", METHODS)
def test_backward_stability(rng, method):
    model = _random(method)
    x = rng.uniform(-0.5, 0.5, size=4)
    xs = model.forward_trace(x, 0.1)
    k = len(model.layers)
    for j in range(k):
        tail = model.layers[j:]

        def run(z, tail=tail):
            for layer in tail:
                z = layer.forward(z, 0.1)
            return z

        jac = fd_jacobian(run, xs[j])
        assert np.linalg.norm(jac, 2) >= 1 - 1e-8


@pytest.mark.parametrize("method", METHODS)
def test_gradient_matches_fd(method):
    assert gradient_error(method) < 1e-6


@pytest.mark.parametrize("method", METHODS)
def test_checkpoint_round_trip(tmp_path, rng, method):
    model = _random(method)
    model.metadata.update({"seed": 3, "epochs": 10, "train_loss": 1.25e-7})
    path = tmp_path / "m.json"
    model.save(path)
    again = load_model(path)
    assert np.array_equal(again.get_flat(), model.get_flat())
    assert again.metadata == model.metadata and again.hyper == model.hyper
    x = rng.normal(size=(5, 4))
    assert np.array_equal(again.forward(x, 0.1), model.forward(x, 0.1))


def test_checkpoint_version_checked():
    d = _random("P").to_dict()
    d["format_version"] = 99
    with pytest.raises(ConfigurationError):
        model_from_dict(d)


def test_checkpoint_json_has_dim():
    d = json.loads(json.dumps(_random("G").to_dict()))
    assert d["dim"] == 4 and d["method"] == "G"


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        _random("P").forward(np.zeros(6), 0.1)


def test_imh_single_layer():
    model = SympNetModel(1, "P", [RidgeLayer.poly([0.0, 1.0], [1.0])])
    assert inverse_modified_hamiltonian(model) == MultiPoly(1, {(0, 2): 1.0})


def test_imh_sum_rule(rng):
    layer = RidgeLayer.poly(rng.normal(size=4), rng.normal(size=3))
    one = inverse_modified_hamiltonian(SympNetModel(2, "P", [layer]))
    two = inverse_modified_hamiltonian(SympNetModel(2, "P", [layer.copy(), layer.copy()]))
    assert (two - one.scale(2.0)).is_zero()


def test_imh_matches_layer_hamiltonian(rng):
    model = _random("P")
    imh = inverse_modified_hamiltonian(model)
    x = rng.normal(size=(6, 4))
    direct = sum(layer.hamiltonian(x) for layer in model.layers)
    assert np.allclose(imh(x), direct, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("method", ["R", "GR", "G", "LA", "H"])
def test_imh_capability(method):
    with pytest.raises(CapabilityError, match=method):
        inverse_modified_hamiltonian(_random(method))


def test_imh_bounded_capability():
    model = init_model("P", 1, {"layers": 1, "degree": 2, "bounded": True})
    with pytest.raises(CapabilityError):
        inverse_modified_hamiltonian(model)


def test_param_stats():
    model = SympNetModel(1, "P", [RidgeLayer.poly([-1.0, 0.0], [3.0])])
    mean, lo, hi = param_stats(model)
    assert mean == pytest.approx(2 / 3) and lo == -1 and hi == 3


def test_param_stats_zero():
    model = init_model("G", 2, {"layers": 2, "width": 3})
    model.set_flat(np.zeros(model.num_params))
    assert param_stats(model) == (0.0, 0.0, 0.0)
