"""Shared test helpers: random expression generator and small oracles."""

from __future__ import annotations

import numpy as np

from wienergamma.core import (
    Constant,
    Coordinate,
    Exp,
    Hermite,
    Negate,
    Power,
    Product,
    Sum,
    Tanh,
)


def random_expression(rng: np.random.Generator, dim: int, depth: int = 3):
    """A random smooth expression with moderate growth (safe for FD checks)."""
    if depth <= 0 or rng.random() < 0.25:
        if rng.random() < 0.7:
            return Coordinate(int(rng.integers(0, dim)))
        return Constant(float(np.round(rng.uniform(-2.0, 2.0), 3)))
    kind = rng.choice(
        ["sum", "product", "negate", "power", "exp", "tanh", "hermite"],
        p=[0.24, 0.18, 0.08, 0.14, 0.08, 0.14, 0.14],
    )
    child = lambda: random_expression(rng, dim, depth - 1)  # noqa: E731
    if kind == "sum":
        return Sum(tuple(child() for _ in range(int(rng.integers(2, 4)))))
    if kind == "product":
        return Product((child(), child()))
    if kind == "negate":
        return Negate(child())
    if kind == "power":
        return Power(child(), int(rng.integers(1, 4)))
    if kind == "exp":
        # Damp the argument so values and third derivatives stay moderate.
        return Exp(Product((Constant(0.25), child())))
    if kind == "tanh":
        return Tanh(child())
    return Hermite(int(rng.integers(0, 5)), child())


def central_difference_gradient(expr, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Independent gradient oracle: central finite differences, coordinatewise."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        up = x.copy()
        dn = x.copy()
        up[i] += step
        dn[i] -= step
        grad[i] = (expr.value(up) - expr.value(dn)) / (2.0 * step)
    return grad
