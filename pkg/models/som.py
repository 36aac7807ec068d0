"""Structure-oriented memory: a bank of learnable filters read by attention.

Reading convolves the query feature with every slot, scans the candidate
maps with a bidirectional convolutional LSTM, and turns the per-slot
controller outputs into a softmax attention over slots. The memory output
is the attention-weighted sum of the candidates; it is concatenated with
the query and fused back to the query's width.

Writing is part of the optimizer step: each slot's update is scaled by the
(detached) attention that slot received in the most recent read.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from core import ops
from core.tensor import Parameter, ShapeError, Tensor
from models.module import Conv2d, Module, xavier_uniform

logger = logging.getLogger(__name__)

DEFAULT_MEMORY_SIZE = 8


class StaleAttentionError(ValueError):
    """Raised when attention weights do not belong to the bank being written."""


@dataclass(frozen=True)
class SOMConfig:
    memory_size: int = DEFAULT_MEMORY_SIZE
    slot_kernel: int = 3

    def __post_init__(self) -> None:
        if self.memory_size < 1:
            raise ValueError(f'memory_size must be >= 1, got {self.memory_size}')
        if self.slot_kernel % 2 != 1:
            raise ValueError(f'slot_kernel must be odd to preserve spatial size, got {self.slot_kernel}')


@dataclass(frozen=True)
class AttentionWeights:
    """Per-sample attention over slots, shape ``(B, n)``.

    ``tensor`` keeps the graph handle of the ``(B, n, 1, 1)`` softmax output
    when the weights came from a live read.
    """

    values: np.ndarray
    tensor: Tensor | None = field(default=None, compare=False, repr=False)

    @property
    def size(self) -> int:
        return int(self.values.shape[1])

    def batch_mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def as_list(self) -> list[float]:
        return [float(a) for a in self.batch_mean()]


class MemorySlot(Module):
    """One filter ``(W_t, b_t)`` of the bank."""

    def __init__(self, channels: int, kernel: int, rng: np.random.Generator):
        area = kernel * kernel
        shape = (channels, channels, kernel, kernel)
        self.weight = Parameter(xavier_uniform(shape, channels * area, channels * area, rng))
        self.bias = Parameter(np.zeros((1, channels, 1, 1)))

    def __call__(self, z: Tensor) -> Tensor:
        pad = self.weight.dims[2] // 2
        return ops.conv2d(z, self.weight, self.bias, stride=1, padding=pad)


class MemoryBank(Module):
    """Ordered slots; the controller scans them in this order."""

    def __init__(self, channels: int, config: SOMConfig, rng: np.random.Generator):
        self.channels = channels
        self.slots = [MemorySlot(channels, config.slot_kernel, rng) for _ in range(config.memory_size)]

    def __len__(self) -> int:
        return len(self.slots)


def query_memory(bank: MemoryBank, z_i: Tensor) -> list[Tensor]:
    """Convolve the query with every slot: ``x_t = W_t * Z_i + b_t``."""
    if z_i.dims[1] != bank.channels:
        raise ShapeError(f'query has {z_i.dims[1]} channels, memory slots expect {bank.channels} (dimension 1)')
    return [slot(z_i) for slot in bank.slots]


class ConvLSTMCell(Module):
    """Convolutional LSTM cell with elementwise peephole weights.

    Input-to-gate convolutions carry the gate biases; hidden-to-gate
    convolutions have none. Peepholes are ``(1, D, H, W)`` and tiled over
    the batch.
    """

    def __init__(self, in_channels: int, hidden: int, height: int, width: int, rng: np.random.Generator):
        self.hidden = hidden
        self.w_xi = Conv2d(in_channels, hidden, 3, rng)
        self.w_hi = Conv2d(hidden, hidden, 3, rng, bias=False)
        self.w_xf = Conv2d(in_channels, hidden, 3, rng)
        self.w_hf = Conv2d(hidden, hidden, 3, rng, bias=False)
        self.w_xc = Conv2d(in_channels, hidden, 3, rng)
        self.w_hc = Conv2d(hidden, hidden, 3, rng, bias=False)
        self.w_xo = Conv2d(in_channels, hidden, 3, rng)
        self.w_ho = Conv2d(hidden, hidden, 3, rng, bias=False)
        peep = (1, hidden, height, width)
        self.w_ci = Parameter(rng.uniform(-0.1, 0.1, size=peep))
        self.w_cf = Parameter(rng.uniform(-0.1, 0.1, size=peep))
        self.w_co = Parameter(rng.uniform(-0.1, 0.1, size=peep))

    def initial_state(self, batch: int, height: int, width: int) -> tuple[Tensor, Tensor]:
        dims = (batch, self.hidden, height, width)
        return Tensor.zeros(dims), Tensor.zeros(dims)


def convlstm_step(cell: ConvLSTMCell, x_t: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
    """One controller step; the output gate's peephole reads the updated cell state."""
    batch = x_t.dims[0]
    if c_prev.dims[1:] != cell.w_ci.dims[1:]:
        raise ShapeError(f'cell state {c_prev.shape} does not match peephole shape {cell.w_ci.shape}')
    w_ci = ops.tile_batch(cell.w_ci, batch)
    w_cf = ops.tile_batch(cell.w_cf, batch)
    w_co = ops.tile_batch(cell.w_co, batch)

    i_t = ops.sigmoid(ops.add(ops.add(cell.w_xi(x_t), cell.w_hi(h_prev)), ops.hadamard(w_ci, c_prev)))
    f_t = ops.sigmoid(ops.add(ops.add(cell.w_xf(x_t), cell.w_hf(h_prev)), ops.hadamard(w_cf, c_prev)))
    candidate = ops.tanh(ops.add(cell.w_xc(x_t), cell.w_hc(h_prev)))
    c_t = ops.add(ops.hadamard(f_t, c_prev), ops.hadamard(i_t, candidate))
    o_t = ops.sigmoid(ops.add(ops.add(cell.w_xo(x_t), cell.w_ho(h_prev)), ops.hadamard(w_co, c_t)))
    h_t = ops.hadamard(o_t, ops.tanh(c_t))
    return h_t, c_t


class ReadController(Module):
    """Forward and backward ConvLSTM scans plus the projection to one score channel."""

    def __init__(
        self,
        channels: int,
        height: int,
        width: int,
        rng: np.random.Generator,
        hidden: int | None = None,
    ):
        hidden = channels if hidden is None else hidden
        self.forward_cell = ConvLSTMCell(channels, hidden, height, width, rng)
        self.backward_cell = ConvLSTMCell(channels, hidden, height, width, rng)
        self.w_hfy = Conv2d(hidden, 1, 1, rng, bias=False)
        self.w_hby = Conv2d(hidden, 1, 1, rng, bias=False)
        self.b_y = Parameter(np.zeros((1, 1, 1, 1)))


def _scan(cell: ConvLSTMCell, xs: list[Tensor], order: range) -> dict[int, Tensor]:
    batch, _, height, width = xs[0].dims
    h, c = cell.initial_state(batch, height, width)
    hidden: dict[int, Tensor] = {}
    for t in order:
        h, c = convlstm_step(cell, xs[t], h, c)
        hidden[t] = h
    return hidden


def attention_scores(controller: ReadController, xs: list[Tensor]) -> Tensor:
    """Per-slot scores ``(B, n, 1, 1)``: spatial mean of the projected hidden states plus ``b_y``."""
    n = len(xs)
    forward_h = _scan(controller.forward_cell, xs, range(n))
    backward_h = _scan(controller.backward_cell, xs, range(n - 1, -1, -1))
    bias = ops.tile_batch(controller.b_y, xs[0].dims[0])
    scores = []
    for t in range(n):
        projected = ops.add(controller.w_hfy(forward_h[t]), controller.w_hby(backward_h[t]))
        scores.append(ops.add(ops.spatial_mean(projected), bias))
    return ops.concat_channels(scores)


def read(
    controller: ReadController,
    xs: list[Tensor],
    detach_attention: bool = False,
    forced_alpha: np.ndarray | None = None,
) -> tuple[Tensor, AttentionWeights]:
    """Read the memory by attention.

    Args:
        controller: The bidirectional controller.
        xs: Candidate maps ``x_1..x_n`` from :func:`query_memory`.
        detach_attention: Weight the candidates with constant attention so no
            gradient reaches the controller through ``alpha``.
        forced_alpha: Optional ``(n,)`` or ``(B, n)`` weights used instead of
            the controller's; implies a detached attention path.

    Returns:
        ``(Z_m, alpha)`` with ``Z_m = sum_t alpha_t x_t``.
    """
    if not xs:
        raise ShapeError('read needs at least one memory slot')
    batch = xs[0].dims[0]
    n = len(xs)
    if forced_alpha is not None:
        values = np.broadcast_to(np.asarray(forced_alpha, dtype=np.float64), (batch, n)).copy()
        alpha_tensor = Tensor(values.reshape(batch, n, 1, 1), copy=False)
    else:
        alpha_tensor = ops.softmax_over_slots(attention_scores(controller, xs))
        if detach_attention:
            alpha_tensor = alpha_tensor.detach()
    terms = [ops.weight(x_t, ops.channel(alpha_tensor, t)) for t, x_t in enumerate(xs)]
    z_m = terms[0]
    for term in terms[1:]:
        z_m = ops.add(z_m, term)
    alpha = AttentionWeights(alpha_tensor.values.reshape(batch, n).copy(), tensor=alpha_tensor)
    return z_m, alpha


class SOM(Module):
    """One memory module for one pyramid level."""

    def __init__(self, channels: int, height: int, width: int, config: SOMConfig, rng: np.random.Generator):
        self.channels = channels
        self.feature_size = (height, width)
        self.bank = MemoryBank(channels, config, rng)
        self.controller = ReadController(channels, height, width, rng)
        self.fusion = Conv2d(2 * channels, channels, 1, rng)

    def __call__(self, z_i: Tensor) -> tuple[Tensor, AttentionWeights]:
        return transfer(self, z_i)


def transfer(som: SOM, z_i: Tensor, detach_attention: bool = False) -> tuple[Tensor, AttentionWeights]:
    """Concatenate the query with the memory output and fuse back to the query width."""
    xs = query_memory(som.bank, z_i)
    z_m, alpha = read(som.controller, xs, detach_attention=detach_attention)
    z_id = som.fusion(ops.concat_channels([z_i, z_m]))
    return z_id, alpha


class SOMStack(Module):
    """Independent memory modules, one per pyramid level."""

    def __init__(
        self,
        level_channels: tuple[int, ...],
        level_sizes: tuple[tuple[int, int], ...],
        config: SOMConfig,
        rng: np.random.Generator,
    ):
        if len(level_channels) != len(level_sizes):
            raise ValueError('level_channels and level_sizes must have the same length')
        self.config = config
        self.levels = [SOM(c, h, w, config, rng) for c, (h, w) in zip(level_channels, level_sizes)]

    def __call__(self, features: list[Tensor] | tuple[Tensor, ...]) -> tuple[list[Tensor], list[AttentionWeights]]:
        if len(features) != len(self.levels):
            raise ShapeError(f'expected {len(self.levels)} feature levels, got {len(features)}')
        transferred, attention = [], []
        for som, z_i in zip(self.levels, features):
            z_id, alpha = transfer(som, z_i)
            transferred.append(z_id)
            attention.append(alpha)
        return transferred, attention


def attention_scaled_update(bank: MemoryBank, alpha: AttentionWeights, prefix: str = '') -> dict[str, float]:
    """Per-parameter step scales realizing ``W_t <- W_t + alpha_t * eta * delta_W_t``.

    The returned mapping (parameter name -> batch-mean ``alpha_t``) is handed
    to the optimizer, which multiplies each slot's step by its scale. Names
    use ``prefix`` so they match the owning model's parameter names.
    """
    if alpha.size != len(bank):
        raise StaleAttentionError(f'attention covers {alpha.size} slots but the bank has {len(bank)}')
    weights = alpha.batch_mean()
    scales: dict[str, float] = {}
    for t, slot in enumerate(bank.slots):
        for name, _ in slot.named_parameters(f'{prefix}slots.{t}.'):
            scales[name] = float(weights[t])
    return scales
