"""Parameter containers shared by the backbone and the memory modules."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from core import ops
from core.tensor import Parameter, ShapeError, Tensor


def xavier_uniform(shape: tuple[int, ...], fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform in ``[-sqrt(6 / (fan_in + fan_out)), +sqrt(6 / (fan_in + fan_out))]``."""
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Base class: discovers parameters and sub-modules from attributes."""

    def named_parameters(self, prefix: str = '') -> Iterator[tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            name = f'{prefix}{attr}'
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f'{name}.')
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f'{name}.{i}.')
                    elif isinstance(item, Parameter):
                        yield f'{name}.{i}', item

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def parameter_dict(self, prefix: str = '') -> dict[str, Parameter]:
        return dict(self.named_parameters(prefix))

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def freeze(self) -> None:
        """Stop recording gradients for every parameter of this module."""
        for p in self.parameters():
            p.requires_grad = False
            p.zero_grad()

    def state_dict(self, prefix: str = '') -> dict[str, np.ndarray]:
        return {name: p.values.copy() for name, p in self.named_parameters(prefix)}

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = '') -> None:
        for name, p in self.named_parameters(prefix):
            if name not in state:
                raise KeyError(f'missing parameter {name!r}')
            values = state[name]
            if values.shape != p.values.shape:
                raise ShapeError(
                    f'parameter {name!r}: stored shape {values.shape} != model shape {p.values.shape}'
                )
            p.values[...] = values


class Conv2d(Module):
    """Convolution layer with Xavier-initialized kernel and zero bias."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int | None = None,
        bias: bool = True,
    ):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        area = kernel_size * kernel_size
        self.weight = Parameter(
            xavier_uniform(
                (out_channels, in_channels, kernel_size, kernel_size),
                in_channels * area,
                out_channels * area,
                rng,
            )
        )
        self.bias = Parameter(np.zeros((1, out_channels, 1, 1))) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)

    def __repr__(self) -> str:
        k = self.weight.dims[2]
        return f'<Conv2d({self.in_channels}->{self.out_channels}, k={k}, stride={self.stride})>'
