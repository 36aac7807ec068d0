"""Minimal dense-tensor kernel with reverse-mode gradients."""

from .gradcheck import check_gradients, finite_difference_grad, relative_error
from .ops import DomainError
from .tensor import (
    ComputeGraph,
    GraphError,
    Parameter,
    Shape,
    ShapeError,
    Tensor,
    backward,
    no_grad,
)

__all__ = [
    'ComputeGraph',
    'DomainError',
    'GraphError',
    'Parameter',
    'Shape',
    'ShapeError',
    'Tensor',
    'backward',
    'check_gradients',
    'finite_difference_grad',
    'no_grad',
    'relative_error',
]
