"""Adam optimizer: update math against the hand-unrolled recurrence."""

import numpy as np
import pytest

from pumfa import tensor as T
from pumfa.optim import Adam
from pumfa.tensor import Tensor


def make_param(value):
    return Tensor(np.asarray(value, dtype=np.float32), requires_grad=True)


def test_zero_gradient_leaves_params_unchanged():
    p = make_param([1.0, 2.0])
    opt = Adam([("p", p)], lr=0.1)
    p.grad = np.zeros(2, dtype=np.float32)
    opt.step()
    assert np.array_equal(p.data, [1.0, 2.0])


def test_none_gradient_skipped():
    p = make_param([1.0])
    opt = Adam([("p", p)], lr=0.1)
    opt.step()  # no backward ran; nothing to apply
    assert np.array_equal(p.data, [1.0])


def test_first_step_moves_by_lr():
    # bias correction makes the first update lr * g/|g| up to eps
    p = make_param([0.0])
    opt = Adam([("p", p)], lr=0.1)
    p.grad = np.ones(1, dtype=np.float32)
    opt.step()
    assert p.data[0] == pytest.approx(-0.1, rel=1e-6)


def test_two_steps_follow_ema_recurrence():
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    p = make_param([0.5])
    opt = Adam([("p", p)], lr=lr)
    g = np.float32(1.0)

    m = v = np.float32(0.0)
    expected = np.float32(0.5)
    for step in (1, 2):
        p.grad = np.array([g], dtype=np.float32)
        opt.step()
        m = np.float32(b1 * m + (1 - b1) * g)
        v = np.float32(b2 * v + (1 - b2) * g * g)
        m_hat = m / np.float32(1 - b1 ** step)
        v_hat = v / np.float32(1 - b2 ** step)
        expected = np.float32(expected - lr * m_hat / (np.sqrt(v_hat) + eps))
        assert opt.state.step_count == step
        assert opt.state.m["p"][0] == pytest.approx(m, rel=1e-6)
        assert opt.state.v["p"][0] == pytest.approx(v, rel=1e-6)
        assert p.data[0] == pytest.approx(expected, rel=1e-6)


def test_shape_mismatch_rejected():
    p = make_param([1.0, 2.0])
    opt = Adam([("p", p)], lr=0.1)
    p.grad = np.ones(3, dtype=np.float32)
    with pytest.raises(ValueError, match="p"):
        opt.step()


def test_duplicate_names_rejected():
    p, q = make_param([1.0]), make_param([2.0])
    with pytest.raises(ValueError):
        Adam([("p", p), ("p", q)], lr=0.1)


def test_zero_grad_clears_all():
    p = make_param([1.0])
    opt = Adam([("p", p)], lr=0.1)
    p.grad = np.ones(1, dtype=np.float32)
    opt.zero_grad()
    assert p.grad is None


def test_state_arrays_roundtrip():
    p = make_param([1.0, -1.0])
    opt = Adam([("p", p)], lr=0.1)
    for _ in range(3):
        p.grad = np.array([0.5, -0.25], dtype=np.float32)
        opt.step()
    snapshot = opt.state_arrays()

    p2 = make_param([1.0, -1.0])
    opt2 = Adam([("p", p2)], lr=0.1)
    opt2.load_state_arrays(snapshot)
    assert opt2.state.step_count == 3
    assert np.array_equal(opt2.state.m["p"], opt.state.m["p"])
    assert np.array_equal(opt2.state.v["p"], opt.state.v["p"])

    # both optimizers must now evolve identically
    p2.data = p.data.copy()
    for o, param in ((opt, p), (opt2, p2)):
        param.grad = np.array([1.0, 1.0], dtype=np.float32)
        o.step()
    assert np.array_equal(p.data, p2.data)


def test_descends_a_quadratic():
    p = make_param([4.0])
    opt = Adam([("p", p)], lr=0.05)
    for _ in range(400):
        opt.zero_grad()
        loss = T.tsum((p * p))
        T.backward(loss)
        opt.step()
    assert abs(p.data[0]) < 0.1
