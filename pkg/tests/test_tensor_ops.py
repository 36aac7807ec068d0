"""Tests for tensors, differentiable operations and gradient replay."""

import math

import numpy as np
import pytest

from core import ops
from core.tensor import ComputeGraph, GraphError, Parameter, Shape, ShapeError, Tensor, backward, no_grad


def _naive_conv(x: np.ndarray, k: np.ndarray, stride: int, padding: int) -> np.ndarray:
    b, c, h, w = x.shape
    oc, _, kh, kw = k.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((b, oc, oh, ow))
    for n in range(b):
        for o in range(oc):
            for i in range(oh):
                for j in range(ow):
                    for ci in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                out[n, o, i, j] += xp[n, ci, i * stride + u, j * stride + v] * k[o, ci, u, v]
    return out


def test_shape_rejects_wrong_rank():
    """Test that tensors must be rank 4."""
    with pytest.raises(ShapeError, match='rank 4'):
        Tensor(np.zeros((2, 2, 2)))


def test_shape_rejects_zero_dimension():
    """Test that every dimension must be positive."""
    with pytest.raises(ShapeError, match='height'):
        Tensor(np.zeros((1, 1, 0, 3)))


def test_shape_element_cap():
    """Test the element cap."""
    with pytest.raises(ShapeError, match='cap'):
        Shape((1, 1, 4, 4), cap=8)


def test_scalar_item():
    """Test scalar tensors."""
    assert Tensor.scalar(2.5).item() == 2.5
    with pytest.raises(ShapeError):
        Tensor.zeros((1, 1, 2, 2)).item()


def test_conv2d_identity_kernel():
    """Test that a 1x1 unit kernel reproduces the input."""
    x = Tensor(np.arange(16.0).reshape(1, 1, 4, 4))
    out = ops.conv2d(x, Tensor(np.ones((1, 1, 1, 1))), Tensor(np.zeros((1, 1, 1, 1))))
    np.testing.assert_array_equal(out.values, x.values)


def test_conv2d_sum_of_ones():
    """Test a 3x3 ones kernel over a 3x3 ones input."""
    out = ops.conv2d(Tensor.ones((1, 1, 3, 3)), Tensor.ones((1, 1, 3, 3)))
    assert out.dims == (1, 1, 1, 1)
    assert out.item() == 9.0


@pytest.mark.parametrize('stride,padding', [(1, 0), (1, 1), (2, 1)])
def test_conv2d_matches_naive_loops(rng, stride, padding):
    """Test convolution against a direct loop reference."""
    x = rng.normal(size=(1, 2, 5, 5))
    k = rng.normal(size=(3, 2, 3, 3))
    out = ops.conv2d(Tensor(x), Tensor(k), stride=stride, padding=padding)
    np.testing.assert_allclose(out.values, _naive_conv(x, k, stride, padding), atol=1e-12)


def test_conv2d_channel_mismatch():
    """Test that the diagnostic names the offending dimension."""
    with pytest.raises(ShapeError, match='dimension 1'):
        ops.conv2d(Tensor.zeros((1, 2, 4, 4)), Tensor.zeros((1, 3, 3, 3)))


def test_conv2d_invalid_stride():
    """Test that non-positive strides are rejected."""
    with pytest.raises(ShapeError, match='stride'):
        ops.conv2d(Tensor.zeros((1, 1, 4, 4)), Tensor.zeros((1, 1, 3, 3)), stride=0)


def test_add_shape_mismatch_names_dimension():
    """Test elementwise shape checks."""
    with pytest.raises(ShapeError, match='channels'):
        ops.add(Tensor.zeros((1, 2, 4, 4)), Tensor.zeros((1, 3, 4, 4)))


def test_upsample_replicates():
    """Test nearest-neighbour enlargement."""
    out = ops.upsample2x(Tensor(np.array([[[[1.0, 2.0], [3.0, 4.0]]]])))
    expected = np.array([[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]], dtype=float)
    np.testing.assert_array_equal(out.values[0, 0], expected)
    assert ops.upsample2x(Tensor.scalar(5.0)).values.tolist() == [[[[5.0, 5.0], [5.0, 5.0]]]]


def test_upsample_backward_sums_blocks():
    """Test that each input receives the sum of its block's gradient."""
    x = Tensor.ones((1, 1, 2, 2), requires_grad=True)
    backward(ops.sum_all(ops.upsample2x(x)))
    np.testing.assert_array_equal(x.grad, np.full((1, 1, 2, 2), 4.0))


def test_downsample_mean_inverts_upsample(rng):
    """Test block averaging."""
    x = Tensor(rng.normal(size=(2, 3, 4, 4)))
    np.testing.assert_allclose(ops.downsample_mean(ops.upsample(x, 4), 4).values, x.values, atol=1e-15)


def test_log_rejects_non_positive():
    """Test the log domain check."""
    with pytest.raises(ops.DomainError):
        ops.log(Tensor.zeros((1, 1, 1, 1)))


def test_softmax_uniform_and_degenerate():
    """Test softmax on equal scores and on one slot."""
    np.testing.assert_allclose(ops.softmax_over_slots(Tensor.zeros((1, 4, 1, 1))).values.ravel(), [0.25] * 4)
    assert ops.softmax_over_slots(Tensor.scalar(3.0)).item() == 1.0


def test_softmax_closed_form_and_stability():
    """Test softmax values and max-subtraction."""
    out = ops.softmax_over_slots(Tensor(np.array([1.0, 2.0]).reshape(1, 2, 1, 1)))
    e = math.e
    np.testing.assert_allclose(out.values.ravel(), [1 / (1 + e), e / (1 + e)], rtol=1e-12)
    big = ops.softmax_over_slots(Tensor(np.full((1, 3, 1, 1), 1000.0)))
    np.testing.assert_allclose(big.values.ravel(), [1 / 3] * 3)


def test_sobel_constant_and_ramp():
    """Test Sobel responses of flat and ramp maps."""
    gx, gy = ops.sobel_gradients(Tensor.ones((1, 1, 6, 6)))
    assert not gx.values.any() and not gy.values.any()

    ramp = np.tile(np.arange(8.0), (8, 1))[None, None]
    gx, gy = ops.sobel_gradients(Tensor(ramp))
    np.testing.assert_array_equal(gx.values[0, 0, :, 1:-1], 8.0)
    np.testing.assert_array_equal(gx.values[0, 0, :, [0, -1]], 4.0)
    np.testing.assert_array_equal(gy.values, 0.0)

    gx_t, gy_t = ops.sobel_gradients(Tensor(ramp.transpose(0, 1, 3, 2).copy()))
    np.testing.assert_array_equal(gy_t.values, gx.values.transpose(0, 1, 3, 2))
    np.testing.assert_array_equal(gx_t.values, 0.0)


def test_backward_linear_and_quadratic(rng):
    """Test gradients of sum(x) and sum(x * x)."""
    x = Tensor(rng.normal(size=(1, 2, 3, 3)), requires_grad=True)
    backward(ops.sum_all(x))
    np.testing.assert_array_equal(x.grad, np.ones_like(x.values))

    x.grad = None
    backward(ops.sum_all(ops.hadamard(x, x)))
    np.testing.assert_allclose(x.grad, 2 * x.values)


def test_backward_sums_multiple_paths():
    """Test that a leaf used twice accumulates both contributions."""
    x = Tensor.ones((1, 1, 2, 2), requires_grad=True)
    received = backward(ops.sum_all(ops.add(x, x)))
    np.testing.assert_array_equal(x.grad, np.full((1, 1, 2, 2), 2.0))
    np.testing.assert_array_equal(received[x], x.grad)


def test_parameter_without_path_gets_exact_zero():
    """Test that a parameter the loss never reaches holds an all-zero gradient."""
    used = Parameter(np.full((1, 1, 2, 2), 2.0))
    unused = Parameter(np.ones((1, 1, 2, 2)))
    received = backward(ops.sum_all(used))
    assert unused not in received
    np.testing.assert_array_equal(unused.grad, np.zeros((1, 1, 2, 2)))
    np.testing.assert_array_equal(used.grad, np.ones((1, 1, 2, 2)))


def test_compute_graph_records_in_order():
    """Test that a graph context records every operation and replays them."""
    x = Parameter(np.full((1, 1, 2, 2), 3.0))
    with ComputeGraph() as graph:
        loss = ops.mean_all(ops.square(x))
    assert [node.op for node in graph.nodes] == ['square', 'mean']
    graph.backward(loss)
    np.testing.assert_allclose(x.grad, np.full((1, 1, 2, 2), 1.5))
    assert len(ComputeGraph.from_loss(loss)) == 2


def test_backward_rejects_non_scalar_and_constant_loss():
    """Test backward preconditions."""
    x = Tensor.ones((1, 1, 2, 2), requires_grad=True)
    with pytest.raises(GraphError, match='scalar'):
        backward(ops.scale(x, 2.0))
    with pytest.raises(GraphError):
        backward(ops.sum_all(Tensor.ones((1, 1, 2, 2))))


def test_no_grad_skips_recording():
    """Test that no_grad produces constant tensors."""
    x = Tensor.ones((1, 1, 2, 2), requires_grad=True)
    with no_grad():
        y = ops.scale(x, 2.0)
    assert not y.requires_grad
    assert y.creator is None


def test_weight_and_tile_batch_gradients():
    """Test per-sample scaling and batch tiling gradients."""
    x = Tensor(np.ones((2, 1, 2, 2)), requires_grad=True)
    s = Tensor(np.array([2.0, 3.0]).reshape(2, 1, 1, 1), requires_grad=True)
    backward(ops.sum_all(ops.weight(x, s)))
    np.testing.assert_array_equal(s.grad.ravel(), [4.0, 4.0])
    np.testing.assert_array_equal(x.grad[1], np.full((1, 2, 2), 3.0))

    p = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
    backward(ops.sum_all(ops.tile_batch(p, 3)))
    np.testing.assert_array_equal(p.grad, np.full((1, 1, 2, 2), 3.0))


def test_elementwise_dispatch():
    """Test the named elementwise kinds."""
    x = Tensor(np.full((1, 1, 1, 1), 0.5))
    assert ops.elementwise('sigmoid', x).item() == pytest.approx(1 / (1 + math.exp(-0.5)))
    assert ops.elementwise('scale', x, 4.0).item() == 2.0
    assert ops.elementwise('hadamard', x, x).item() == 0.25
    with pytest.raises(ValueError, match='unknown'):
        ops.elementwise('relu', x)
