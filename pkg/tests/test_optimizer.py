"""Tests for the AdamW optimizer and step scaling."""

import numpy as np
import pytest

from core.tensor import Parameter
from training.config import TrainConfig
from training.optimizer import STEP_KEY, AdamW


def _params(rng) -> dict[str, Parameter]:
    return {
        'a': Parameter(rng.normal(size=(1, 2, 3, 3)), name='a'),
        'b': Parameter(rng.normal(size=(1, 1, 1, 2)), name='b'),
    }


def test_zero_gradient_only_decays(rng):
    """Test that with no gradient a step shrinks weights by (1 - lr * wd)."""
    params = _params(rng)
    before = {name: p.values.copy() for name, p in params.items()}
    optim = AdamW(params, lr=0.1, weight_decay=0.01)
    optim.zero_grad()
    optim.step()
    for name, p in params.items():
        np.testing.assert_array_equal(p.values, before[name] * (1 - 0.1 * 0.01))


def test_zero_learning_rate_is_a_no_op(rng):
    """Test that lr = 0 leaves parameters unchanged."""
    params = _params(rng)
    before = {name: p.values.copy() for name, p in params.items()}
    optim = AdamW(params, lr=0.0)
    for p in params.values():
        p.accumulate_grad(np.ones_like(p.values))
    optim.step()
    for name, p in params.items():
        np.testing.assert_array_equal(p.values, before[name])


def test_first_step_moves_by_learning_rate(rng):
    """Test the bias-corrected first update: roughly lr against the gradient sign."""
    params = _params(rng)
    before = params['a'].values.copy()
    optim = AdamW(params, lr=0.01, weight_decay=0.0)
    optim.zero_grad()
    params['a'].accumulate_grad(np.full_like(before, 3.0))
    optim.step()
    np.testing.assert_allclose(params['a'].values, before - 0.01, atol=1e-8)


def test_step_scales(rng):
    """Test zero, partial and unknown per-parameter scales."""
    params = _params(rng)
    reference = {name: Parameter(p.values.copy(), name=name) for name, p in params.items()}
    before = {name: p.values.copy() for name, p in params.items()}
    scaled, plain = AdamW(params, lr=0.01), AdamW(reference, lr=0.01)
    for group in (params, reference):
        for p in group.values():
            p.zero_grad()
            p.accumulate_grad(np.full_like(p.values, 0.5))
    scaled.step(scales={'a': 0.0, 'b': 0.25})
    plain.step()
    np.testing.assert_array_equal(params['a'].values, before['a'])
    expected = before['b'] + 0.25 * (reference['b'].values - before['b'])
    np.testing.assert_allclose(params['b'].values, expected, atol=1e-15)
    with pytest.raises(KeyError):
        scaled.step(scales={'missing': 1.0})


def test_state_dict_round_trip(rng):
    """Test that restoring moments and step count continues identically."""
    params = _params(rng)
    optim = AdamW(params)
    for p in params.values():
        p.zero_grad()
        p.accumulate_grad(np.ones_like(p.values))
    optim.step()
    state = optim.state_dict()
    assert state[STEP_KEY].reshape(-1)[0] == 1.0
    assert set(state) == {STEP_KEY, 'optim.m.a', 'optim.v.a', 'optim.m.b', 'optim.v.b'}

    clone = AdamW({name: Parameter(p.values.copy(), name=name) for name, p in params.items()})
    clone.load_state_dict(state)
    assert clone.step_count == 1
    for group in (params, clone.params):
        for p in group.values():
            p.zero_grad()
            p.accumulate_grad(np.full_like(p.values, -0.5))
    optim.step()
    clone.step()
    for name in params:
        np.testing.assert_array_equal(params[name].values, clone.params[name].values)


def test_load_state_dict_validation(rng):
    """Test missing and mis-shaped optimizer buffers."""
    optim = AdamW(_params(rng))
    state = optim.state_dict()
    with pytest.raises(KeyError):
        optim.load_state_dict({k: v for k, v in state.items() if k != STEP_KEY})
    with pytest.raises(KeyError):
        optim.load_state_dict({k: v for k, v in state.items() if k != 'optim.v.b'})
    with pytest.raises(ValueError):
        optim.load_state_dict({**state, 'optim.m.a': np.zeros((1, 1, 1, 1))})


def test_learning_rate_halves_at_decay_boundary():
    """Test the step-wise schedule."""
    config = TrainConfig(learning_rate=1e-3, lr_decay=0.5, decay_interval=10, batch_size=2)
    steps_per_epoch = config.steps_per_epoch(8)
    assert steps_per_epoch == 4
    assert config.learning_rate_at(0, 8) == 1e-3
    assert config.learning_rate_at(10 * steps_per_epoch - 1, 8) == 1e-3
    assert config.learning_rate_at(10 * steps_per_epoch, 8) == 5e-4
    assert config.learning_rate_at(20 * steps_per_epoch, 8) == 2.5e-4
