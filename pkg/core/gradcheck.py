"""Central finite-difference gradients, the oracle for every backward rule."""

from __future__ import annotations

import logging
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from core.ops import DomainError
from core.tensor import Tensor, backward, no_grad

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-6
ERROR_FLOOR = 1e-4

ScalarFn = Callable[[Tensor], 'Tensor | float']


def _evaluate(f: ScalarFn, x: Tensor) -> float:
    with no_grad():
        value = f(x)
    result = value.item() if isinstance(value, Tensor) else float(value)
    if not np.isfinite(result):
        raise DomainError(f'function evaluated to non-finite value {result}')
    return result


def finite_difference_grad(
    f: ScalarFn,
    x: Tensor,
    eps: float = DEFAULT_EPS,
    indices: Sequence[tuple[int, ...]] | None = None,
) -> Tensor:
    """Estimate ``df/dx`` with ``(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)``.

    ``x`` is perturbed in place and restored, so ``f`` may close over a model
    that owns ``x``. When ``indices`` is given only those elements are
    estimated; the others are left at zero.
    """
    grad = np.zeros_like(x.values)
    flat_indices: Iterable[tuple[int, ...]] = (
        indices if indices is not None else list(np.ndindex(*x.values.shape))
    )
    for idx in flat_indices:
        original = x.values[idx]
        x.values[idx] = original + eps
        upper = _evaluate(f, x)
        x.values[idx] = original - eps
        lower = _evaluate(f, x)
        x.values[idx] = original
        grad[idx] = (upper - lower) / (2.0 * eps)
    return Tensor(grad, copy=False)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = ERROR_FLOOR) -> float:
    """``|a - n| / max(|a|, |n|, floor)`` in the Euclidean norm."""
    denom = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), floor)
    return float(np.linalg.norm(analytic - numeric)) / denom


def sample_indices(
    shape: tuple[int, ...], count: int, rng: np.random.Generator
) -> list[tuple[int, ...]]:
    total = int(np.prod(shape))
    if total <= count:
        return list(np.ndindex(*shape))
    picks = rng.choice(total, size=count, replace=False)
    return [tuple(int(i) for i in np.unravel_index(p, shape)) for p in sorted(picks)]


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    eps: float = DEFAULT_EPS,
    max_elements: int | None = None,
    seed: int = 0,
) -> dict[str, float]:
    """Compare reverse-mode and finite-difference gradients for each parameter.

    Returns the relative error per parameter name, measured on the sampled
    elements (all elements when ``max_elements`` is None).
    """
    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    backward(loss)
    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, p in params.items():
        shape = p.values.shape
        idx = (
            list(np.ndindex(*shape))
            if max_elements is None
            else sample_indices(shape, max_elements, rng)
        )
        numeric = finite_difference_grad(lambda _: loss_fn(), p, eps=eps, indices=idx)
        analytic = np.array([p.grad[i] for i in idx]) if p.grad is not None else np.zeros(len(idx))
        errors[name] = relative_error(analytic, np.array([numeric.values[i] for i in idx]))
        logger.debug('gradient check %s: relative error %.3e', name, errors[name])
    return errors
