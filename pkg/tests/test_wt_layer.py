from dataclasses import replace

import numpy as np
import pytest
import torch

from src.errors import CacheError, ParameterError, ShapeError
from src.haar.haar_core import haar_matrix, hadamard_matrix
from src.haar.wt_layer import (LayerParams, ThresholdMode, apply_grads, backward, crop, forward,
                               init_params, load_params, pad_pow2, save_params, soft_threshold)


def dense_forward(x, params):
    """
    Literal reference: explicit matrices, explicit loops over batch, channels and paths.
    """
    batch, c_in, height, width = x.shape
    if params.transform == 'hadamard':
        Hc = hadamard_matrix(int(np.log2(height)), normalized=True)
        Hr = hadamard_matrix(int(np.log2(width)), normalized=True)
    else:
        Hc = haar_matrix(int(np.log2(height)))
        Hr = haar_matrix(int(np.log2(width)))
    thresholds = np.log1p(np.exp(params.T_raw))
    y = np.zeros((batch, params.c_out, height, width))
    for b in range(batch):
        coeffs = [Hc @ x[b, c] @ Hr.T for c in range(c_in)]
        total = [np.zeros((height, width)) for _ in range(params.c_out)]
        for i in range(params.paths):
            for o in range(params.c_out):
                z = sum(params.V[i, o, c] * coeffs[c] * params.A[i] for c in range(c_in))
                total[o] += np.sign(z) * np.maximum(np.abs(z) - thresholds[i], 0.0)
        for o in range(params.c_out):
            y[b, o] = Hc.T @ total[o] @ Hr
            if params.residual:
                y[b, o] += x[b, o]
    return y


def random_params(rng, paths, c_in, c_out, height, width, residual=False, transform='haar'):
    return LayerParams(A=rng.normal(1.0, 0.5, size=(paths, height, width)),
                       V=rng.normal(0.0, 1.0, size=(paths, c_out, c_in)),
                       T_raw=rng.normal(-2.0, 1.0, size=(paths, height, width)),
                       residual=residual, transform=transform)


def test_pad_and_crop():
    x = np.ones((2, 3, 3, 5))
    padded, record = pad_pow2(x)
    assert padded.shape == (2, 3, 4, 8)
    assert (record.height, record.width) == (3, 5)
    assert padded[..., 3:, :].sum() == 0 and padded[..., 5:].sum() == 0
    np.testing.assert_array_equal(crop(padded, record), x)
    same, _ = pad_pow2(np.ones((1, 1, 4, 4)))
    assert same.shape == (1, 1, 4, 4)
    with pytest.raises(ShapeError):
        pad_pow2(np.ones((4, 4)))


def test_unit_side_pads_to_two():
    padded, record = pad_pow2(np.ones((1, 1, 1, 4)))
    assert padded.shape == (1, 1, 2, 4)
    assert padded[..., 1:, :].sum() == 0
    assert (record.height, record.width) == (1, 4)


@pytest.mark.parametrize("transform", ['haar', 'hadamard'])
def test_unit_side_forward_and_backward(rng, transform):
    x = rng.standard_normal((1, 1, 1, 4))
    params = init_params(1, 1, 1, 1, 4, transform=transform)
    assert params.spatial == (2, 4)
    y, cache = forward(x, params)
    assert y.shape == (1, 1, 1, 4)
    grads = backward(np.ones_like(y), cache)
    assert grads.x.shape == x.shape
    identity = replace(params, V=np.ones((1, 1, 1)), threshold_mode=ThresholdMode.ZERO)
    np.testing.assert_allclose(forward(x, identity)[0], x, atol=1e-12)
    column = rng.standard_normal((2, 1, 4, 1))
    identity = replace(init_params(1, 1, 1, 4, 1, transform=transform),
                       V=np.ones((1, 1, 1)), threshold_mode=ThresholdMode.ZERO)
    np.testing.assert_allclose(forward(column, identity)[0], column, atol=1e-12)


def test_soft_threshold():
    assert soft_threshold(2.0, 0.5) == pytest.approx(1.5)
    assert soft_threshold(-2.0, 0.5) == pytest.approx(-1.5)
    assert soft_threshold(0.3, 0.5) == 0.0
    assert soft_threshold(0.5, 0.5) == 0.0
    np.testing.assert_allclose(soft_threshold(np.array([1.0, -1.0]), 0.0), [1.0, -1.0])
    with pytest.raises(ParameterError):
        soft_threshold(1.0, -0.1)


def test_soft_threshold_shrinks(rng):
    z = rng.standard_normal((2, 3, 4, 4))
    T = rng.uniform(0.0, 1.0, size=(4, 4))
    out = soft_threshold(z, T)
    assert np.all(np.abs(out) <= np.abs(z))
    assert np.all((out == 0) | (np.sign(out) == np.sign(z)))


def test_identity_configuration(identity_params, rng):
    """
    Unit scaling, identity mixing and zero thresholds reproduce the input, padding included.
    """
    x = rng.standard_normal((3, 2, 3, 5))
    y, _ = forward(x, identity_params)
    assert y.shape == x.shape
    np.testing.assert_allclose(y, x, atol=1e-10)


def test_zero_scaling_residual_is_identity(rng):
    params = random_params(rng, 2, 3, 3, 4, 4, residual=True)
    params = replace(params, A=np.zeros_like(params.A))
    x = rng.standard_normal((2, 3, 4, 4))
    y, _ = forward(x, params)
    np.testing.assert_allclose(y, x, atol=1e-12)


def test_residual_adds_input(rng):
    params = random_params(rng, 2, 2, 2, 4, 4)
    x = rng.standard_normal((2, 2, 4, 4))
    plain, _ = forward(x, params)
    with_skip, _ = forward(x, replace(params, residual=True))
    np.testing.assert_allclose(with_skip - plain, x, atol=1e-12)


def test_matches_dense_reference(rng):
    """
    50 random configurations against the loop-based reference.
    """
    for _ in range(50):
        paths = int(rng.choice([1, 2, 3]))
        channels = int(rng.choice([1, 2, 4]))
        side = int(rng.choice([4, 8]))
        residual = bool(rng.integers(2))
        params = random_params(rng, paths, channels, channels, side, side, residual=residual)
        x = rng.standard_normal((2, channels, side, side))
        y, _ = forward(x, params)
        np.testing.assert_allclose(y, dense_forward(x, params), atol=1e-10)


def test_rectangular_and_channel_change(rng):
    params = random_params(rng, 2, 3, 5, 4, 8)
    x = rng.standard_normal((2, 3, 4, 8))
    y, _ = forward(x, params)
    assert y.shape == (2, 5, 4, 8)
    np.testing.assert_allclose(y, dense_forward(x, params), atol=1e-10)


def test_hadamard_transform_matches_dense(rng):
    params = random_params(rng, 2, 2, 2, 8, 8, transform='hadamard')
    x = rng.standard_normal((2, 2, 8, 8))
    y, _ = forward(x, params)
    np.testing.assert_allclose(y, dense_forward(x, params), atol=1e-10)
    assert not np.allclose(y, forward(x, replace(params, transform='haar'))[0])


def test_forward_shape_errors(rng):
    params = random_params(rng, 1, 2, 3, 4, 4)
    with pytest.raises(ShapeError):
        forward(np.ones((1, 3, 4, 4)), params)
    with pytest.raises(ShapeError):
        forward(np.ones((1, 2, 8, 8)), params)
    with pytest.raises(ShapeError):
        forward(np.ones((1, 2, 4, 4)), replace(params, residual=True))


def test_params_validation():
    with pytest.raises(ShapeError):
        LayerParams(A=np.ones((1, 4, 4)), V=np.ones((2, 1, 1)), T_raw=np.ones((1, 4, 4)))
    with pytest.raises(ShapeError):
        LayerParams(A=np.ones((1, 4, 4)), V=np.ones((1, 1, 1)), T_raw=np.ones((1, 4, 2)))
    with pytest.raises(ParameterError):
        LayerParams(A=np.ones((1, 4, 4)), V=np.ones((1, 1, 1)), T_raw=np.ones((1, 4, 4)),
                    transform='fourier')


def _loss(x, params, weights):
    y, _ = forward(x, params)
    return float(np.sum(y * weights))


def _active_pattern(x, params):
    _, cache = forward(x, params)
    return [np.abs(z) > t for z, t in zip(cache.mixed, cache.thresholds)]


def _perturbed(x, params, name, index, delta):
    if name == 'x':
        x = x.copy()
        x[index] += delta
        return x, params
    arr = getattr(params, name).copy()
    arr[index] += delta
    return x, replace(params, **{name: arr})


@pytest.mark.parametrize("residual", [False, True])
def test_gradients_match_finite_differences(rng, residual):
    """
    Central differences at 100 random coordinates; coordinates whose
    perturbation crosses a threshold kink are skipped.
    """
    params = random_params(rng, 2, 2, 2 if residual else 3, 4, 4, residual=residual)
    x = rng.standard_normal((2, 2, 3, 4))
    weights = rng.standard_normal((2, params.c_out, 3, 4))
    _, cache = forward(x, params)
    grads = backward(weights, cache)
    analytic = {'x': grads.x, 'A': grads.A, 'V': grads.V, 'T_raw': grads.T_raw}
    shapes = {'x': x.shape, 'A': params.A.shape, 'V': params.V.shape, 'T_raw': params.T_raw.shape}

    h = 1e-5
    checked = 0
    names = list(shapes)
    for _ in range(100):
        name = names[rng.integers(len(names))]
        index = tuple(int(rng.integers(s)) for s in shapes[name])
        x_plus, p_plus = _perturbed(x, params, name, index, 1e-3)
        x_minus, p_minus = _perturbed(x, params, name, index, -1e-3)
        base = _active_pattern(x, params)
        if any(not np.array_equal(a, b) for a, b in zip(base, _active_pattern(x_plus, p_plus))):
            continue
        if any(not np.array_equal(a, b) for a, b in zip(base, _active_pattern(x_minus, p_minus))):
            continue
        x_plus, p_plus = _perturbed(x, params, name, index, h)
        x_minus, p_minus = _perturbed(x, params, name, index, -h)
        numeric = (_loss(x_plus, p_plus, weights) - _loss(x_minus, p_minus, weights)) / (2 * h)
        exact = analytic[name][index]
        rel = abs(numeric - exact) / max(abs(numeric), abs(exact), 1e-5)
        assert rel < 1e-4, (name, index, numeric, exact)
        checked += 1
    assert checked >= 50


def test_gradients_match_autograd(rng):
    """
    Same layer written with torch ops; autograd must agree with the analytic backward.
    """
    params = random_params(rng, 3, 2, 3, 4, 8)
    x = rng.standard_normal((2, 2, 4, 8))
    weights = rng.standard_normal((2, 3, 4, 8))

    Hc = torch.tensor(haar_matrix(2))
    Hr = torch.tensor(haar_matrix(3))
    tx = torch.tensor(x, requires_grad=True)
    tA = torch.tensor(params.A, requires_grad=True)
    tV = torch.tensor(params.V, requires_grad=True)
    tT = torch.tensor(params.T_raw, requires_grad=True)
    coeffs = Hc @ tx @ Hr.T
    total = 0
    for i in range(params.paths):
        z = torch.einsum('oc,bchw->bohw', tV[i], coeffs * tA[i])
        total = total + torch.sign(z) * torch.relu(z.abs() - torch.nn.functional.softplus(tT[i]))
    y = Hc.T @ total @ Hr
    (y * torch.tensor(weights)).sum().backward()

    _, cache = forward(x, params)
    grads = backward(weights, cache)
    np.testing.assert_allclose(grads.x, tx.grad.numpy(), atol=1e-10)
    np.testing.assert_allclose(grads.A, tA.grad.numpy(), atol=1e-10)
    np.testing.assert_allclose(grads.V, tV.grad.numpy(), atol=1e-10)
    np.testing.assert_allclose(grads.T_raw, tT.grad.numpy(), atol=1e-10)


def test_zero_upstream_gradient(rng):
    params = random_params(rng, 2, 2, 2, 4, 4, residual=True)
    x = rng.standard_normal((1, 2, 4, 4))
    _, cache = forward(x, params)
    grads = backward(np.zeros((1, 2, 4, 4)), cache)
    for arr in (grads.x, grads.A, grads.V, grads.T_raw):
        assert not np.any(arr)


def test_residual_input_gradient(rng):
    params = random_params(rng, 2, 2, 2, 4, 4)
    x = rng.standard_normal((2, 2, 4, 4))
    g = rng.standard_normal((2, 2, 4, 4))
    plain = backward(g, forward(x, params)[1])
    skip = backward(g, forward(x, replace(params, residual=True))[1])
    np.testing.assert_allclose(skip.x - plain.x, g, atol=1e-12)
    np.testing.assert_allclose(skip.V, plain.V, atol=1e-12)


def test_backward_rejects_bad_cache(rng):
    params = random_params(rng, 1, 2, 2, 4, 4)
    _, cache = forward(rng.standard_normal((1, 2, 4, 4)), params)
    with pytest.raises(CacheError):
        backward(np.ones((1, 2, 4, 4)), {'mixed': []})
    with pytest.raises(CacheError):
        backward(np.ones((2, 2, 4, 4)), cache)


def test_zero_threshold_mode_has_no_threshold_gradient(rng):
    params = replace(random_params(rng, 1, 1, 1, 4, 4), threshold_mode=ThresholdMode.ZERO)
    x = rng.standard_normal((1, 1, 4, 4))
    grads = backward(np.ones((1, 1, 4, 4)), forward(x, params)[1])
    assert not np.any(grads.T_raw)


def test_init_params():
    params = init_params(3, 4, 2, 8, 8, seed=7)
    assert params.A.shape == (3, 8, 8) and np.all(params.A == 1.0)
    assert params.V.shape == (3, 2, 4)
    assert np.all(np.abs(params.V) <= np.sqrt(1.0 / 4))
    T = params.thresholds()
    assert np.all((T > 0.009) & (T < 0.011))
    again = init_params(3, 4, 2, 8, 8, seed=7)
    np.testing.assert_array_equal(params.V, again.V)
    assert not np.array_equal(params.V, init_params(3, 4, 2, 8, 8, seed=8).V)
    with pytest.raises(ParameterError):
        init_params(0, 1, 1, 4, 4)
    with pytest.raises(ParameterError):
        init_params(1, 1, 1, 4, 6)


def test_apply_grads_is_sgd(rng):
    params = random_params(rng, 1, 2, 2, 4, 4)
    x = rng.standard_normal((1, 2, 4, 4))
    grads = backward(np.ones((1, 2, 4, 4)), forward(x, params)[1])
    stepped = apply_grads(params, grads, 0.1)
    np.testing.assert_allclose(stepped.V, params.V - 0.1 * grads.V)
    np.testing.assert_allclose(stepped.T_raw, params.T_raw - 0.1 * grads.T_raw)
    assert stepped is not params


def test_checkpoint(tmp_path, rng):
    params = random_params(rng, 2, 3, 3, 4, 8, residual=True, transform='hadamard')
    path = tmp_path / "layer.json"
    save_params(params, str(path))
    loaded = load_params(str(path))
    np.testing.assert_array_equal(loaded.A, params.A)
    np.testing.assert_array_equal(loaded.V, params.V)
    np.testing.assert_array_equal(loaded.T_raw, params.T_raw)
    assert loaded.residual and loaded.transform == 'hadamard'
    assert list(tmp_path.iterdir()) == [path]
    with pytest.raises(OSError):
        save_params(params, str(tmp_path / "missing" / "layer.json"))
