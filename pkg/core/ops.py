"""Differentiable operations over rank-4 tensors.

Each operation computes its forward value with numpy and records a gradient
rule through :func:`core.tensor.record`. Binary operations require equal
shapes; the only implicit broadcasts are ``scale`` (a Python float) and
``weight`` (one scalar per batch sample).
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.tensor import ShapeError, Tensor, record

logger = logging.getLogger(__name__)

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()

ELEMENTWISE_KINDS = ('sigmoid', 'tanh', 'add', 'hadamard', 'scale', 'exp', 'log')


class DomainError(ValueError):
    """Raised when an operation is evaluated outside its mathematical domain."""


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.dims != b.dims:
        for name, da, db in zip(('batch', 'channels', 'height', 'width'), a.dims, b.dims):
            if da != db:
                raise ShapeError(f'{op}: {name} mismatch ({da} vs {db}) for shapes {a.shape} and {b.shape}')


# --- convolution ----------------------------------------------------------


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Windowed dot product of ``kernel`` over zero-padded ``x`` plus ``bias``.

    Args:
        x: Input ``(B, C, H, W)``.
        kernel: ``(outC, C, kH, kW)``.
        bias: ``(1, outC, 1, 1)`` or None.
        stride: Step between windows, at least 1.
        padding: Zero padding on every spatial border, at least 0.
    """
    if stride < 1:
        raise ShapeError(f'conv2d: stride must be >= 1, got {stride}')
    if padding < 0:
        raise ShapeError(f'conv2d: padding must be >= 0, got {padding}')
    batch, in_c, height, width = x.dims
    out_c, k_in, kh, kw = kernel.dims
    if k_in != in_c:
        raise ShapeError(f'conv2d: kernel input channels {k_in} != input channels {in_c} (dimension 1)')
    if bias is not None and bias.dims != (1, out_c, 1, 1):
        raise ShapeError(f'conv2d: bias shape {bias.shape} != 1x{out_c}x1x1 (dimension 1)')
    if height + 2 * padding < kh:
        raise ShapeError(f'conv2d: kernel height {kh} exceeds padded input height {height + 2 * padding}')
    if width + 2 * padding < kw:
        raise ShapeError(f'conv2d: kernel width {kw} exceeds padded input width {width + 2 * padding}')

    out_h = conv_output_size(height, kh, stride, padding)
    out_w = conv_output_size(width, kw, stride, padding)
    pads = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    padded = np.pad(x.values, pads) if padding else x.values
    # (B, C, outH, outW, kH, kW)
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    windows = windows[:, :, :out_h, :out_w]
    out = np.tensordot(windows, kernel.values, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.values
    out = np.ascontiguousarray(out)

    def grad_rule(grad: np.ndarray, needs: tuple[bool, ...]):
        grad_x = grad_k = grad_b = None
        if needs[0]:
            grad_padded = np.zeros_like(padded)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(grad, kernel.values[:, :, i, j], axes=([1], [0]))
                    grad_padded[
                        :, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride
                    ] += contrib.transpose(0, 3, 1, 2)
            grad_x = grad_padded[:, :, padding : padding + height, padding : padding + width]
        if needs[1]:
            grad_k = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        if bias is not None and needs[2]:
            grad_b = grad.sum(axis=(0, 2, 3)).reshape(1, out_c, 1, 1)
        return (grad_x, grad_k, grad_b)

    inputs = (x, kernel) if bias is None else (x, kernel, bias)
    return record('conv2d', inputs, out, grad_rule)


# --- resampling -------------------------------------------------------------


def upsample(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbour enlargement by an integer factor on both spatial axes."""
    if factor < 1:
        raise ShapeError(f'upsample: factor must be >= 1, got {factor}')
    out = np.repeat(np.repeat(x.values, factor, axis=2), factor, axis=3)
    batch, channels, height, width = x.dims

    def grad_rule(grad: np.ndarray, needs: tuple[bool, ...]):
        folded = grad.reshape(batch, channels, height, factor, width, factor)
        return (folded.sum(axis=(3, 5)),)

    return record('upsample', (x,), out, grad_rule)


def upsample2x(x: Tensor) -> Tensor:
    return upsample(x, 2)


def downsample_mean(x: Tensor, factor: int) -> Tensor:
    """Average over non-overlapping ``factor`` x ``factor`` blocks."""
    batch, channels, height, width = x.dims
    if height % factor or width % factor:
        raise ShapeError(f'downsample_mean: {height}x{width} not divisible by {factor}')
    blocks = x.values.reshape(batch, channels, height // factor, factor, width // factor, factor)
    out = blocks.mean(axis=(3, 5))

    def grad_rule(grad: np.ndarray, needs: tuple[bool, ...]):
        spread = np.repeat(np.repeat(grad, factor, axis=2), factor, axis=3)
        return (spread / (factor * factor),)

    return record('downsample_mean', (x,), out, grad_rule)


def pad_replicate(x: Tensor, pad: int) -> Tensor:
    """Pad spatial borders by repeating the edge values."""
    height, width = x.dims[2], x.dims[3]
    out = np.pad(x.values, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode='edge')

    def grad_rule(grad: np.ndarray, needs: tuple[bool, ...]):
        inner = grad[:, :, pad : pad + height, pad : pad + width].copy()
        # fold the replicated rows, then the replicated columns (corners included)
        inner[:, :, 0, :] += grad[:, :, :pad, pad : pad + width].sum(axis=2)
        inner[:, :, -1, :] += grad[:, :, pad + height :, pad : pad + width].sum(axis=2)
        left = grad[:, :, :, :pad].sum(axis=3)
        right = grad[:, :, :, pad + width :].sum(axis=3)
        inner[:, :, :, 0] += left[:, :, pad : pad + height]
        inner[:, :, :, -1] += right[:, :, pad : pad + height]
        inner[:, :, 0, 0] += left[:, :, :pad].sum(axis=2)
        inner[:, :, -1, 0] += left[:, :, pad + height :].sum(axis=2)
        inner[:, :, 0, -1] += right[:, :, :pad].sum(axis=2)
        inner[:, :, -1, -1] += right[:, :, pad + height :].sum(axis=2)
        return (inner,)

    return record('pad_replicate', (x,), out, grad_rule)


# --- elementwise ------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('add', a, b)
    return record('add', (a, b), a.values + b.values, lambda g, needs: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('sub', a, b)
    return record('sub', (a, b), a.values - b.values, lambda g, needs: (g, -g))


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('hadamard', a, b)
    av, bv = a.values, b.values
    return record('hadamard', (a, b), av * bv, lambda g, needs: (g * bv, g * av))


def div(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('div', a, b)
    av, bv = a.values, b.values
    out = av / bv
    return record('div', (a, b), out, lambda g, needs: (g / bv, -g * out / bv))


def scale(x: Tensor, factor: float) -> Tensor:
    return record('scale', (x,), x.values * factor, lambda g, needs: (g * factor,))


def add_scalar(x: Tensor, value: float) -> Tensor:
    return record('add_scalar', (x,), x.values + value, lambda g, needs: (g,))


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.values))
    return record('sigmoid', (x,), out, lambda g, needs: (g * out * (1.0 - out),))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.values)
    return record('tanh', (x,), out, lambda g, needs: (g * (1.0 - out * out),))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.values)
    return record('exp', (x,), out, lambda g, needs: (g * out,))


def log(x: Tensor) -> Tensor:
    if np.any(x.values <= 0.0):
        raise DomainError(f'log of non-positive value (min {x.values.min():.6g}); clamp first')
    xv = x.values
    return record('log', (x,), np.log(xv), lambda g, needs: (g / xv,))


def square(x: Tensor) -> Tensor:
    xv = x.values
    return record('square', (x,), xv * xv, lambda g, needs: (2.0 * g * xv,))


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.values)

    def grad_rule(g: np.ndarray, needs: tuple[bool, ...]):
        safe = np.where(out > 0.0, out, 1.0)
        return (np.where(out > 0.0, 0.5 * g / safe, 0.0),)

    return record('sqrt', (x,), out, grad_rule)


def absolute(x: Tensor) -> Tensor:
    xv = x.values
    return record('abs', (x,), np.abs(xv), lambda g, needs: (g * np.sign(xv),))


def elu(x: Tensor) -> Tensor:
    xv = x.values
    neg = np.expm1(np.minimum(xv, 0.0))
    out = np.where(xv > 0.0, xv, neg)
    return record('elu', (x,), out, lambda g, needs: (g * np.where(xv > 0.0, 1.0, neg + 1.0),))


def clamp(x: Tensor, low: float, high: float) -> Tensor:
    xv = x.values
    inside = (xv >= low) & (xv <= high)
    return record('clamp', (x,), np.clip(xv, low, high), lambda g, needs: (g * inside,))


def elementwise(kind: str, *operands: Tensor | float) -> Tensor:
    """Dispatch one of the named elementwise kinds.

    ``scale`` takes ``(tensor, factor)``; ``add`` and ``hadamard`` take two
    equal-shaped tensors; the rest are unary.
    """
    unary = {'sigmoid': sigmoid, 'tanh': tanh, 'exp': exp, 'log': log}
    if kind in unary:
        (x,) = operands
        return unary[kind](x)  # type: ignore[arg-type]
    if kind == 'add':
        return add(*operands)  # type: ignore[arg-type]
    if kind == 'hadamard':
        return hadamard(*operands)  # type: ignore[arg-type]
    if kind == 'scale':
        x, factor = operands
        return scale(x, float(factor))  # type: ignore[arg-type]
    raise ValueError(f'unknown elementwise kind {kind!r}; expected one of {ELEMENTWISE_KINDS}')


# --- structural -------------------------------------------------------------


def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise ShapeError('concat_channels: nothing to concatenate')
    first = tensors[0].dims
    for t in tensors[1:]:
        if (t.dims[0], t.dims[2], t.dims[3]) != (first[0], first[2], first[3]):
            raise ShapeError(f'concat_channels: {t.shape} does not match {tensors[0].shape} outside dimension 1')
    out = np.concatenate([t.values for t in tensors], axis=1)
    bounds = np.cumsum([0] + [t.dims[1] for t in tensors])

    def grad_rule(g: np.ndarray, needs: tuple[bool, ...]):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(tensors)))

    return record('concat_channels', tuple(tensors), out, grad_rule)


def channel(x: Tensor, index: int) -> Tensor:
    """Select one channel as a ``(B, 1, H, W)`` tensor."""
    if not 0 <= index < x.dims[1]:
        raise ShapeError(f'channel: index {index} outside 0..{x.dims[1] - 1} (dimension 1)')
    out = x.values[:, index : index + 1].copy()

    def grad_rule(g: np.ndarray, needs: tuple[bool, ...]):
        full = np.zeros_like(x.values)
        full[:, index : index + 1] = g
        return (full,)

    return record('channel', (x,), out, grad_rule)


def tile_batch(x: Tensor, batch: int) -> Tensor:
    """Repeat a batch-1 tensor ``batch`` times along dimension 0."""
    if x.dims[0] != 1:
        raise ShapeError(f'tile_batch: expected batch 1, got {x.dims[0]} (dimension 0)')
    out = np.repeat(x.values, batch, axis=0)
    return record('tile_batch', (x,), out, lambda g, needs: (g.sum(axis=0, keepdims=True),))


def weight(x: Tensor, s: Tensor) -> Tensor:
    """Multiply each sample's map by its own scalar ``s[b]`` (``s`` is ``(B,1,1,1)``)."""
    if s.dims != (x.dims[0], 1, 1, 1):
        raise ShapeError(f'weight: scalar shape {s.shape} != {x.dims[0]}x1x1x1 (dimension 0)')
    xv, sv = x.values, s.values

    def grad_rule(g: np.ndarray, needs: tuple[bool, ...]):
        return (g * sv, (g * xv).sum(axis=(1, 2, 3), keepdims=True))

    return record('weight', (x, s), xv * sv, grad_rule)


# --- reductions -------------------------------------------------------------


def sum_all(x: Tensor) -> Tensor:
    out = np.full((1, 1, 1, 1), x.values.sum())
    return record('sum', (x,), out, lambda g, needs: (np.full_like(x.values, g.item()),))


def mean_all(x: Tensor) -> Tensor:
    n = x.values.size
    out = np.full((1, 1, 1, 1), x.values.mean())
    return record('mean', (x,), out, lambda g, needs: (np.full_like(x.values, g.item() / n),))


def spatial_mean(x: Tensor) -> Tensor:
    """Average over height and width, giving ``(B, C, 1, 1)``."""
    n = x.dims[2] * x.dims[3]
    out = x.values.mean(axis=(2, 3), keepdims=True)
    return record('spatial_mean', (x,), out, lambda g, needs: (np.broadcast_to(g / n, x.values.shape).copy(),))


def softmax_over_slots(scores: Tensor) -> Tensor:
    """Softmax across dimension 1 of ``(B, n, 1, 1)`` scores, max-subtracted."""
    if scores.dims[2:] != (1, 1):
        raise ShapeError(f'softmax_over_slots: expected (B, n, 1, 1) scores, got {scores.shape}')
    shifted = scores.values - scores.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def grad_rule(g: np.ndarray, needs: tuple[bool, ...]):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return record('softmax', (scores,), out, grad_rule)


# --- image gradients ---------------------------------------------------------


def sobel_gradients(depth_map: Tensor) -> tuple[Tensor, Tensor]:
    """Horizontal and vertical Sobel responses of a single-channel map.

    The map is replicate-padded by one pixel so both outputs keep its size.
    """
    batch, channels, height, width = depth_map.dims
    if channels != 1:
        raise ShapeError(f'sobel_gradients: expected 1 channel, got {channels} (dimension 1)')
    if height < 3 or width < 3:
        raise ShapeError(f'sobel_gradients: map {height}x{width} is smaller than 3x3')
    padded = pad_replicate(depth_map, 1)
    kx = Tensor(SOBEL_X.reshape(1, 1, 3, 3), copy=False)
    ky = Tensor(SOBEL_Y.reshape(1, 1, 3, 3), copy=False)
    return conv2d(padded, kx), conv2d(padded, ky)
