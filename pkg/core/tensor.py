"""Dense rank-4 tensors with reverse-mode gradient recording.

Every value in the network is a ``Tensor`` holding a row-major NCHW ``float64``
array. Operations in :mod:`core.ops` attach a :class:`Node` to each output that
requires a gradient; :func:`backward` replays the recorded gradient rules in
reverse topological order and accumulates into leaf tensors.

Scalars are ``(1, 1, 1, 1)`` tensors. Per-channel biases are ``(1, C, 1, 1)``.
"""

from __future__ import annotations

import contextlib
import contextvars
import logging
import math
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_ELEMENT_CAP = int(os.getenv('SAMNET_MAX_ELEMENTS', str(2**26)))

DIM_NAMES = ('batch', 'channels', 'height', 'width')


class ShapeError(ValueError):
    """Raised when a tensor shape violates an operation's contract."""


class GraphError(RuntimeError):
    """Raised when backward cannot be run on the requested loss."""


@dataclass(frozen=True)
class Shape:
    """Four positive dimensions (batch, channels, height, width)."""

    dims: tuple[int, int, int, int]
    cap: int = DEFAULT_ELEMENT_CAP

    def __post_init__(self) -> None:
        if len(self.dims) != 4:
            raise ShapeError(f'expected rank 4 (batch, channels, height, width), got rank {len(self.dims)}')
        for name, dim in zip(DIM_NAMES, self.dims):
            if int(dim) != dim or dim < 1:
                raise ShapeError(f'{name} must be a positive integer, got {dim}')
        if self.numel > self.cap:
            raise ShapeError(f'{self.numel} elements exceed the cap of {self.cap}')

    @property
    def numel(self) -> int:
        return math.prod(self.dims)

    @property
    def batch(self) -> int:
        return self.dims[0]

    @property
    def channels(self) -> int:
        return self.dims[1]

    @property
    def height(self) -> int:
        return self.dims[2]

    @property
    def width(self) -> int:
        return self.dims[3]

    def __str__(self) -> str:
        return 'x'.join(str(d) for d in self.dims)


GradRule = Callable[[np.ndarray, tuple[bool, ...]], Sequence[np.ndarray | None]]


class Node:
    """One executed operation: its inputs, its output and its gradient rule."""

    __slots__ = ('op', 'inputs', 'output', 'grad_rule')

    def __init__(self, op: str, inputs: tuple['Tensor', ...], output: 'Tensor', grad_rule: GradRule):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.grad_rule = grad_rule

    def __repr__(self) -> str:
        return f'<Node(op={self.op}, output={self.output.shape})>'


_ACTIVE_GRAPH: contextvars.ContextVar['ComputeGraph | None'] = contextvars.ContextVar(
    'active_graph', default=None
)
_GRAD_ENABLED: contextvars.ContextVar[bool] = contextvars.ContextVar('grad_enabled', default=True)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run operations without recording gradient rules."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


def grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


class Tensor:
    """A rank-4 float64 array with an optional gradient buffer."""

    __slots__ = ('values', 'requires_grad', 'grad', 'creator', 'name', '__weakref__')

    def __init__(
        self,
        values: np.ndarray | Sequence | float,
        requires_grad: bool = False,
        name: str | None = None,
        *,
        copy: bool = True,
    ):
        arr = np.array(values, dtype=np.float64) if copy else np.asarray(values, dtype=np.float64)
        if arr.ndim != 4:
            raise ShapeError(f'expected rank 4 (batch, channels, height, width), got rank {arr.ndim}')
        Shape(tuple(arr.shape))  # type: ignore[arg-type]
        self.values = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.creator: Node | None = None
        self.name = name

    @classmethod
    def zeros(cls, dims: Sequence[int], requires_grad: bool = False) -> 'Tensor':
        return cls(np.zeros(tuple(dims)), requires_grad=requires_grad, copy=False)

    @classmethod
    def ones(cls, dims: Sequence[int], requires_grad: bool = False) -> 'Tensor':
        return cls(np.ones(tuple(dims)), requires_grad=requires_grad, copy=False)

    @classmethod
    def scalar(cls, value: float, requires_grad: bool = False) -> 'Tensor':
        return cls(np.full((1, 1, 1, 1), float(value)), requires_grad=requires_grad, copy=False)

    @property
    def shape(self) -> Shape:
        return Shape(tuple(self.values.shape))  # type: ignore[arg-type]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return tuple(self.values.shape)  # type: ignore[return-value]

    @property
    def is_leaf(self) -> bool:
        return self.creator is None

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f'item() needs a single element, tensor has shape {self.shape}')
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> 'Tensor':
        return Tensor(self.values, requires_grad=False, copy=False)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.values)

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.values.shape:
            raise ShapeError(f'gradient shape {grad.shape} does not match tensor shape {self.values.shape}')
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad = self.grad + grad

    def __add__(self, other: 'Tensor') -> 'Tensor':
        from core import ops

        return ops.add(self, other)

    def __sub__(self, other: 'Tensor') -> 'Tensor':
        from core import ops

        return ops.sub(self, other)

    def __mul__(self, other: 'Tensor | float') -> 'Tensor':
        from core import ops

        if isinstance(other, Tensor):
            return ops.hadamard(self, other)
        return ops.scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> 'Tensor':
        from core import ops

        return ops.scale(self, -1.0)

    def __repr__(self) -> str:
        label = f' name={self.name}' if self.name else ''
        return f'<Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})>'


class Parameter(Tensor):
    """A named learnable leaf tensor.

    The gradient buffer starts at zero, so a parameter the loss never
    reaches reads exactly 0 after backward.
    """

    __slots__ = ()

    def __init__(self, values: np.ndarray, name: str | None = None):
        super().__init__(values, requires_grad=True, name=name)
        self.zero_grad()


def record(
    op: str,
    inputs: tuple[Tensor, ...],
    out: np.ndarray,
    grad_rule: GradRule,
) -> Tensor:
    """Wrap ``out`` in a Tensor and record its gradient rule when any input needs one."""
    requires = grad_enabled() and any(t.requires_grad for t in inputs)
    result = Tensor(out, requires_grad=requires, copy=False)
    if requires:
        node = Node(op, inputs, result, grad_rule)
        result.creator = node
        graph = _ACTIVE_GRAPH.get()
        if graph is not None:
            graph.nodes.append(node)
    return result


class ComputeGraph:
    """Ordered record of executed operations.

    Used as a context manager, every operation run inside the block is
    appended in execution order; reverse execution order is a valid
    topological order for gradient replay. :meth:`from_loss` builds the
    same record after the fact from the nodes reachable from a loss.
    """

    def __init__(self, nodes: Iterable[Node] = ()):
        self.nodes: list[Node] = list(nodes)
        self._token: contextvars.Token | None = None

    def __enter__(self) -> 'ComputeGraph':
        self._token = _ACTIVE_GRAPH.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        if self._token is not None:
            _ACTIVE_GRAPH.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_loss(cls, loss: Tensor) -> 'ComputeGraph':
        order: list[Node] = []
        visited: set[int] = set()
        if loss.creator is None:
            return cls()
        stack: list[tuple[Node, bool]] = [(loss.creator, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for inp in node.inputs:
                if inp.creator is not None and id(inp.creator) not in visited:
                    stack.append((inp.creator, False))
        return cls(order)

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Replay gradient rules from ``loss`` and accumulate into leaves.

        Returns the gradient received by each leaf during this replay;
        multiple paths into one leaf are summed.
        """
        if loss.values.size != 1:
            raise GraphError(f'loss must be a scalar tensor, got shape {loss.shape}')
        if not loss.requires_grad:
            raise GraphError('loss has no gradient path to any parameter')

        pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
        received: dict[Tensor, np.ndarray] = {}
        if loss.creator is None:
            loss.accumulate_grad(pending[id(loss)])
            received[loss] = pending[id(loss)]
            return received

        for node in reversed(self.nodes):
            upstream = pending.pop(id(node.output), None)
            if upstream is None:
                continue
            needs = tuple(t.requires_grad for t in node.inputs)
            for inp, grad in zip(node.inputs, node.grad_rule(upstream, needs)):
                if grad is None or not inp.requires_grad:
                    continue
                if inp.creator is None:
                    inp.accumulate_grad(grad)
                    received[inp] = received[inp] + grad if inp in received else grad
                else:
                    key = id(inp)
                    pending[key] = pending[key] + grad if key in pending else grad
        return received


def backward(loss: Tensor, graph: ComputeGraph | None = None) -> dict[Tensor, np.ndarray]:
    """Back-propagate a scalar loss through ``graph`` (or the graph reachable from it)."""
    if graph is None:
        graph = ComputeGraph.from_loss(loss)
    return graph.backward(loss)
