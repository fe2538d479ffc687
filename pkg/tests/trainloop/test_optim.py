import numpy as np
import pytest

from meb.numcore import Tensor
from meb.trainloop.optim import Adam, AdamState, adam_step, step_lr


def _reference(param, grads, lr, wd=0.0, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, grad in enumerate(grads, start=1):
        g = grad + wd * param
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        param = param - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return param


@pytest.mark.parametrize("wd", [0.0, 0.01])
def test_matches_scalar_reference(wd):
    grads = [0.5, -0.2, 0.3]
    state = AdamState.zeros_like(np.zeros(1))
    param = np.array([1.0])
    for g in grads:
        param, state = adam_step(param, np.array([g]), state, lr=0.1, wd=wd)
    assert state.t == 3
    assert param[0] == pytest.approx(_reference(1.0, grads, 0.1, wd), rel=1e-12)


def test_first_step_moves_by_about_lr():
    param, _ = adam_step(np.array([1.0]), np.array([0.5]), AdamState.zeros_like(np.zeros(1)), lr=0.1)
    assert param[0] == pytest.approx(0.9, abs=1e-6)


def test_zero_gradient_without_decay_is_a_fixed_point():
    param = np.array([[0.3, -2.0]])
    updated, _ = adam_step(param, np.zeros_like(param), AdamState.zeros_like(param), lr=0.1)
    np.testing.assert_array_equal(updated, param)


def test_step_does_not_modify_its_inputs():
    param, grad = np.array([1.0, 2.0]), np.array([0.1, 0.2])
    state = AdamState.zeros_like(param)
    adam_step(param, grad, state, lr=0.1)
    np.testing.assert_array_equal(param, [1.0, 2.0])
    assert state.t == 0
    np.testing.assert_array_equal(state.m, [0.0, 0.0])


def test_optimizer_updates_tensors_and_resets_state():
    params = {"w": Tensor(np.array([1.0, 1.0])), "b": Tensor(np.array([0.0]))}
    opt = Adam(lr=0.1)
    opt.step(params, {"w": np.array([1.0, -1.0]), "b": np.array([2.0])})
    np.testing.assert_allclose(params["w"].data, [0.9, 1.1], rtol=1e-6)
    assert params["w"].data.dtype == np.float32
    assert opt.state["w"].t == 1
    opt.reset(["w"])
    assert "w" not in opt.state
    assert opt.state["b"].t == 1


def test_step_schedule():
    assert step_lr(1.0, 1, [40, 70], 0.1) == 1.0
    assert step_lr(1.0, 40, [40, 70], 0.1) == 1.0
    assert step_lr(1.0, 41, [40, 70], 0.1) == pytest.approx(0.1)
    assert step_lr(1.0, 71, [40, 70], 0.1) == pytest.approx(0.01)
    assert step_lr(0.5, 10, [], 0.1) == 0.5
