import math
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from ReadTheFaultsIn.errors import NumericalError, ShapeError, ValidationError
from ReadTheFaultsIn.net import (
    LrSchedule,
    OptimizerState,
    accuracy,
    backward,
    checkpoint_bytes,
    clip_and_step,
    clip_gradients,
    embed,
    forward,
    gradient_check,
    init_params,
    kl_divergence,
    load_checkpoint,
    lr_at,
    parse_checkpoint,
    save_checkpoint,
    softmax_cross_entropy,
)

logit_rows = arrays(np.float64, (4, 5), elements=st.floats(-20, 20))

def _images(count, side=8, seed=0):
    return np.random.default_rng(seed).uniform(0, 1, (count, side, side))

def test_embedding_shape(small_params):
    assert small_params.embedding_dim == 16
    assert embed(small_params, _images(3)).shape == (3, 16)
    with pytest.raises(ShapeError):
        embed(small_params, _images(3, side=16))

def test_zero_weights_give_zero_embeddings(small_params):
    zero = small_params.with_tensors(small_params.zeros_like())
    assert np.array_equal(embed(zero, _images(2)), np.zeros((2, 16)))

def test_embeddings_do_not_mix_batch_items(small_params):
    images = _images(5, seed=1)
    together = embed(small_params, images)
    apart = np.concatenate([embed(small_params, images[i:i + 1]) for i in range(5)])
    assert np.allclose(together, apart, atol=1e-10)

def test_init_is_seeded():
    assert init_params(8, 4, 2, seed=3).equals(init_params(8, 4, 2, seed=3))
    assert not init_params(8, 4, 2, seed=3).equals(init_params(8, 4, 2, seed=4))
    with pytest.raises(ShapeError):
        init_params(10, 4, 2)

def test_zero_upstream_gives_zero_grads(small_params):
    embeddings, cache = forward(small_params, _images(2))
    grads = backward(small_params, cache, np.zeros_like(embeddings))
    assert all(not grad.any() for grad in grads.values())

def test_stale_cache_rejected(small_params):
    embeddings, cache = forward(small_params, _images(2))
    with pytest.raises(ShapeError):
        backward(small_params.copy(), cache, np.ones_like(embeddings))

def test_backward_matches_finite_differences():
    params = init_params(8, 4, 2, seed=5, dtype=np.float64)
    errors = gradient_check(params, _images(4, seed=2), seed=1)
    assert set(errors) == set(params.names)
    assert max(errors.values()) < 1e-3

def test_cross_entropy_examples():
    assert softmax_cross_entropy(np.zeros((1, 6)), [0]).loss == pytest.approx(math.log(6))
    assert softmax_cross_entropy([[0.0, math.log(3)]], [0]).loss == pytest.approx(math.log(4))
    assert softmax_cross_entropy([[60.0, 0.0]], [0]).loss == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValidationError):
        softmax_cross_entropy(np.zeros((1, 3)), [3])

def test_kl_examples():
    logits = np.array([[0.3, -1.2, 2.0]])
    assert kl_divergence(logits, logits).loss == pytest.approx(0.0, abs=1e-12)
    assert kl_divergence(np.zeros((1, 2)), [[50.0, -50.0]]).loss == pytest.approx(math.log(2))
    with pytest.raises(ShapeError):
        kl_divergence(np.zeros((1, 2)), np.zeros((1, 3)))

def test_kl_with_infinite_teacher_logits():
    loss, grad = kl_divergence(np.zeros((1, 2)), [[math.inf, -math.inf]])
    assert loss == pytest.approx(math.log(2))
    assert np.allclose(grad, [[-0.5, 0.5]])

    loss, _ = kl_divergence(np.zeros((2, 2)), [[math.inf, -math.inf], [0.0, 0.0]], temperature=2.0)
    assert loss == pytest.approx(4 * math.log(2) / 2)

    with pytest.raises(NumericalError):
        kl_divergence(np.zeros((1, 2)), [[-math.inf, -math.inf]])

@given(logit_rows, st.lists(st.integers(0, 4), min_size=4, max_size=4))
def test_cross_entropy_gradient_is_softmax_minus_onehot(logits, labels):
    loss, grad = softmax_cross_entropy(logits, labels)
    assert loss >= 0
    probs = grad * len(labels) + np.eye(5)[labels]
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    assert np.all(probs >= 0)

@given(logit_rows, logit_rows, st.floats(0.5, 4))
def test_kl_is_nonnegative(student, teacher, temperature):
    assert kl_divergence(student, teacher, temperature).loss >= 0

@given(logit_rows, arrays(np.float64, (4, 1), elements=st.floats(-5, 5)))
def test_kl_vanishes_for_row_shifts(logits, shift):
    assert kl_divergence(logits, logits + shift).loss == pytest.approx(0.0, abs=1e-9)

def test_accuracy():
    assert accuracy([[1.0, 0.0], [0.0, 1.0], [2.0, 1.0]], [0, 1, 1]) == pytest.approx(2 / 3)

def test_clipping_halves_large_gradients():
    clipped, norm = clip_gradients({"w": np.array([11.24])}, 5.62)
    assert norm == pytest.approx(11.24)
    assert clipped["w"] == pytest.approx([5.62])

    opt = OptimizerState("sgd", lr=1.0, clip_norm=5.62)
    new = clip_and_step(opt, {"w": np.array([0.0])}, {"w": np.array([11.24])})
    assert new["w"] == pytest.approx([-5.62])
    assert opt.last_clipped and opt.last_grad_norm == pytest.approx(11.24)

def test_sgd_step():
    p = {"a": np.array([1.0, 2.0]), "b": np.array([[0.5]])}
    new = clip_and_step(OptimizerState("sgd", lr=1.0), p, p)
    assert all(not tensor.any() for tensor in new.values())

def test_rmsprop_first_step():
    opt = OptimizerState("rmsprop", lr=0.01, rho=0.9, eps=1e-8)
    g = np.full(3, 0.5)
    new = clip_and_step(opt, {"w": np.zeros(3)}, {"w": g})
    expected = -0.01 * g / np.sqrt(0.1 * g ** 2 + 1e-8)
    assert np.allclose(new["w"], expected)

def test_step_keeps_parameter_dtype():
    new = clip_and_step(OptimizerState(), {"w": np.ones(2, dtype=np.float32)}, {"w": np.ones(2)})
    assert new["w"].dtype == np.float32

def test_non_finite_gradients_fail_fast():
    with pytest.raises(NumericalError):
        clip_and_step(OptimizerState(), {"w": np.zeros(2)}, {"w": np.array([np.nan, 1.0])})
    with pytest.raises(ShapeError):
        clip_and_step(OptimizerState(), {"w": np.zeros(2)}, {"w": np.zeros(3)})

def test_learning_rate_ramp():
    schedule = LrSchedule()
    assert lr_at(schedule, 0) == pytest.approx(1e-6)
    assert lr_at(schedule, 500) == pytest.approx(5e-5)
    assert lr_at(schedule, 250) == pytest.approx(2.55e-5)
    assert lr_at(schedule, 900) == pytest.approx(5e-5)
    with pytest.raises(ValidationError):
        LrSchedule(1e-3, 1e-4)

def test_checkpoint_round_trip(tmp_path, small_params):
    head = np.arange(6, dtype=np.float64).reshape(2, 3)
    path = save_checkpoint(tmp_path / "a.ckpt", small_params, {"head.W": head}, {"phase": "pretrain"})
    params, extras, meta = load_checkpoint(path)

    assert params.equals(small_params)
    assert np.array_equal(extras["head.W"], head)
    assert meta == {"phase": "pretrain"}
    assert checkpoint_bytes(params, extras, meta) == path.read_bytes()

def test_corrupt_checkpoints_rejected(small_params):
    data = checkpoint_bytes(small_params)
    with pytest.raises(ValidationError):
        parse_checkpoint(b"garbage!" + data[8:])
    with pytest.raises(ShapeError):
        parse_checkpoint(data[:-8])
