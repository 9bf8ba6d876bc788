"""Finite-dimensional Wiener space and smooth functionals with exact gradients.

A space of dimension n carries a Gram matrix ``gram[i, j] = <h_i, h_j>`` for a
basis h_1..h_n and a factor L with ``gram = L @ L.T``.  All sampling and
differentiation happen in whitened coordinates: a sample point is a standard
normal vector xi, the basis values are ``W(h_i) = (L @ xi)_i``, and the inner
product of the ambient Hilbert space is the plain Euclidean dot product.  The
Malliavin derivative of a functional is therefore its ordinary gradient in xi.

Functionals are expression trees over a closed grammar (coordinates, constants,
sums, products, integer powers, exp, tanh, probabilists' Hermite polynomials),
so first derivatives are exact via forward-mode differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

GRAM_SYMMETRY_TOL = 1e-12
GRAM_EIGENVALUE_FLOOR = -1e-10


class WienerSpaceError(ValueError):
    """Invalid space construction (asymmetric or non-PSD Gram matrix)."""


class ExpressionError(ValueError):
    """Malformed expression (bad coordinate index, bad node parameter)."""


class EvaluationOverflow(FloatingPointError):
    """A functional evaluated to a non-finite value (e.g. exp overflow)."""


# ---------------------------------------------------------------------------
# Hermite polynomials (probabilists' normalization: H2(x) = x^2 - 1)
# ---------------------------------------------------------------------------

def hermite_value(q: int, x):
    """H_q(x) by the recurrence H_{q+1} = x*H_q - q*H_{q-1}, H_0 = 1, H_1 = x."""
    if q < 0 or q != int(q):
        raise ExpressionError(f"Hermite order must be an integer >= 0, got {q}")
    x = np.asarray(x, dtype=float)
    if q == 0:
        return np.ones_like(x)
    h_prev = np.ones_like(x)
    h = x.copy()
    for k in range(1, q):
        h_prev, h = h, x * h - k * h_prev
    return h


def hermite_pair(q: int, x):
    """Return (H_q(x), H_{q-1}(x)); H_{-1} is taken as 0.

    The pair gives the derivative for free: H_q'(x) = q * H_{q-1}(x).
    """
    x = np.asarray(x, dtype=float)
    if q == 0:
        return np.ones_like(x), np.zeros_like(x)
    h_prev = np.ones_like(x)
    h = x.copy()
    for k in range(1, q):
        h_prev, h = h, x * h - k * h_prev
    return h, h_prev


# ---------------------------------------------------------------------------
# Wiener space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WienerSpace:
    """Dimension, Gram matrix of basis inner products, and a factor of it."""

    dim: int
    gram: np.ndarray
    whitener: np.ndarray  # L with gram = L @ L.T; lower-triangular when PD

    def is_identity_gram(self) -> bool:
        return bool(np.array_equal(self.gram, np.eye(self.dim)))


def build_space(dim: int, gram: np.ndarray | None = None) -> WienerSpace:
    """Build a space of dimension ``dim``; identity Gram matrix when omitted.

    Rejects Gram matrices that are asymmetric beyond 1e-12 or have an
    eigenvalue below -1e-10, naming the offending eigenvalue.
    """
    if dim < 1 or dim != int(dim):
        raise WienerSpaceError(f"dimension must be a positive integer, got {dim}")
    dim = int(dim)
    if gram is None:
        eye = np.eye(dim)
        return WienerSpace(dim=dim, gram=_frozen(eye), whitener=_frozen(eye.copy()))
    gram = np.asarray(gram, dtype=float)
    if gram.shape != (dim, dim):
        raise WienerSpaceError(f"gram must be {dim}x{dim}, got shape {gram.shape}")
    asym = np.max(np.abs(gram - gram.T))
    if asym > GRAM_SYMMETRY_TOL:
        raise WienerSpaceError(f"gram is asymmetric: max |g - g.T| = {asym:.3e}")
    gram = 0.5 * (gram + gram.T)
    try:
        whitener = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        # Semi-definite case: eigenfactor instead of a triangular one.
        eigvals, eigvecs = np.linalg.eigh(gram)
        lam_min = float(eigvals[0])
        if lam_min < GRAM_EIGENVALUE_FLOOR:
            raise WienerSpaceError(
                f"gram is not positive semi-definite: eigenvalue {lam_min:.6e} "
                f"< {GRAM_EIGENVALUE_FLOOR:.0e}"
            ) from None
        whitener = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    return WienerSpace(dim=dim, gram=_frozen(gram), whitener=_frozen(whitener))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def sample(space: WienerSpace, rng: np.random.Generator, size: int | None = None):
    """Draw whitened sample points: shape (dim,) or (size, dim)."""
    if size is None:
        return rng.standard_normal(space.dim)
    return rng.standard_normal((size, space.dim))


def isonormal_values(space: WienerSpace, xi: np.ndarray) -> np.ndarray:
    """Basis values (W(h_1), ..., W(h_n)) at whitened coordinates xi."""
    xi = np.asarray(xi, dtype=float)
    return xi @ space.whitener.T


# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------

class Expression:
    """Base node.  Subclasses implement ``value_and_gradient``.

    ``x`` has shape (..., n); values come back with shape (...,) and gradients
    with shape (..., n).  Every node is smooth on all of R^n.
    """

    def value_and_gradient(self, x: np.ndarray):
        raise NotImplementedError

    def value(self, x: np.ndarray):
        return self.value_and_gradient(np.asarray(x, dtype=float))[0]

    def max_coordinate(self) -> int:
        """Largest coordinate index used, or -1 for constant expressions."""
        raise NotImplementedError

    def coordinates(self) -> frozenset[int]:
        raise NotImplementedError

    def is_affine(self) -> bool:
        """True when the gradient is constant over R^n."""
        raise NotImplementedError

    # Sugar so fields and tests can be written as arithmetic.
    def __add__(self, other):
        return Sum((self, _as_expression(other)))

    def __radd__(self, other):
        return Sum((_as_expression(other), self))

    def __sub__(self, other):
        return Sum((self, Negate(_as_expression(other))))

    def __rsub__(self, other):
        return Sum((_as_expression(other), Negate(self)))

    def __mul__(self, other):
        return Product((self, _as_expression(other)))

    def __rmul__(self, other):
        return Product((_as_expression(other), self))

    def __truediv__(self, other):
        if not isinstance(other, (int, float)):
            raise ExpressionError("division is only defined by a nonzero constant")
        if other == 0:
            raise ExpressionError("division by zero")
        return Product((self, Constant(1.0 / float(other))))

    def __neg__(self):
        return Negate(self)

    def __pow__(self, k):
        return Power(self, k)


def _as_expression(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float)):
        return Constant(float(value))
    raise ExpressionError(f"cannot use {type(value).__name__} in an expression")


@dataclass(frozen=True)
class Coordinate(Expression):
    index: int

    def __post_init__(self):
        if self.index < 0 or self.index != int(self.index):
            raise ExpressionError(f"coordinate index must be >= 0, got {self.index}")

    def value_and_gradient(self, x):
        val = x[..., self.index]
        grad = np.zeros_like(x)
        grad[..., self.index] = 1.0
        return val, grad

    def max_coordinate(self):
        return self.index

    def coordinates(self):
        return frozenset((self.index,))

    def is_affine(self):
        return True


@dataclass(frozen=True)
class Constant(Expression):
    value_: float

    def __post_init__(self):
        if not np.isfinite(self.value_):
            raise ExpressionError(f"constant must be finite, got {self.value_}")

    def value_and_gradient(self, x):
        val = np.full(x.shape[:-1], self.value_)
        return val, np.zeros_like(x)

    def max_coordinate(self):
        return -1

    def coordinates(self):
        return frozenset()

    def is_affine(self):
        return True


@dataclass(frozen=True)
class Sum(Expression):
    children: tuple[Expression, ...]

    def __post_init__(self):
        if len(self.children) < 1:
            raise ExpressionError("Sum needs at least one child")

    def value_and_gradient(self, x):
        val, grad = self.children[0].value_and_gradient(x)
        val, grad = val.copy(), grad.copy()
        for child in self.children[1:]:
            v, g = child.value_and_gradient(x)
            val += v
            grad += g
        return val, grad

    def max_coordinate(self):
        return max(c.max_coordinate() for c in self.children)

    def coordinates(self):
        return frozenset().union(*(c.coordinates() for c in self.children))

    def is_affine(self):
        return all(c.is_affine() for c in self.children)


@dataclass(frozen=True)
class Product(Expression):
    children: tuple[Expression, ...]

    def __post_init__(self):
        if len(self.children) < 1:
            raise ExpressionError("Product needs at least one child")

    def value_and_gradient(self, x):
        val, grad = self.children[0].value_and_gradient(x)
        val, grad = val.copy(), grad.copy()
        for child in self.children[1:]:
            v, g = child.value_and_gradient(x)
            grad *= v[..., None]
            grad += val[..., None] * g
            val = val * v
        return val, grad

    def max_coordinate(self):
        return max(c.max_coordinate() for c in self.children)

    def coordinates(self):
        return frozenset().union(*(c.coordinates() for c in self.children))

    def is_affine(self):
        # Affine only when at most one factor depends on the coordinates.
        nonconst = [c for c in self.children if c.coordinates()]
        if not nonconst:
            return True
        return len(nonconst) == 1 and nonconst[0].is_affine()


@dataclass(frozen=True)
class Negate(Expression):
    child: Expression

    def value_and_gradient(self, x):
        v, g = self.child.value_and_gradient(x)
        return -v, -g

    def max_coordinate(self):
        return self.child.max_coordinate()

    def coordinates(self):
        return self.child.coordinates()

    def is_affine(self):
        return self.child.is_affine()


@dataclass(frozen=True)
class Power(Expression):
    child: Expression
    exponent: int

    def __post_init__(self):
        if self.exponent < 1 or self.exponent != int(self.exponent):
            raise ExpressionError(
                f"Power exponent must be an integer >= 1, got {self.exponent}"
            )

    def value_and_gradient(self, x):
        v, g = self.child.value_and_gradient(x)
        k = self.exponent
        if k == 1:
            return v, g
        return v**k, (k * v ** (k - 1))[..., None] * g

    def max_coordinate(self):
        return self.child.max_coordinate()

    def coordinates(self):
        return self.child.coordinates()

    def is_affine(self):
        return self.exponent == 1 and self.child.is_affine() or not self.child.coordinates()


@dataclass(frozen=True)
class Exp(Expression):
    child: Expression

    def value_and_gradient(self, x):
        v, g = self.child.value_and_gradient(x)
        with np.errstate(over="ignore"):
            ev = np.exp(v)
        return ev, ev[..., None] * g

    def max_coordinate(self):
        return self.child.max_coordinate()

    def coordinates(self):
        return self.child.coordinates()

    def is_affine(self):
        return not self.child.coordinates()


@dataclass(frozen=True)
class Tanh(Expression):
    child: Expression

    def value_and_gradient(self, x):
        v, g = self.child.value_and_gradient(x)
        tv = np.tanh(v)
        return tv, (1.0 - tv * tv)[..., None] * g

    def max_coordinate(self):
        return self.child.max_coordinate()

    def coordinates(self):
        return self.child.coordinates()

    def is_affine(self):
        return not self.child.coordinates()


@dataclass(frozen=True)
class Hermite(Expression):
    """H_q applied to a subexpression; H_q' = q * H_{q-1} drives the gradient."""

    order: int
    child: Expression

    def __post_init__(self):
        if self.order < 0 or self.order != int(self.order):
            raise ExpressionError(f"Hermite order must be >= 0, got {self.order}")

    def value_and_gradient(self, x):
        v, g = self.child.value_and_gradient(x)
        hq, hq_minus = hermite_pair(self.order, v)
        return hq, (self.order * hq_minus)[..., None] * g

    def max_coordinate(self):
        return self.child.max_coordinate()

    def coordinates(self):
        return self.child.coordinates()

    def is_affine(self):
        if self.order == 0 or not self.child.coordinates():
            return True
        return self.order == 1 and self.child.is_affine()


def w(index: int) -> Coordinate:
    """Shorthand for Coordinate(index), matching the grammar's ``w<i>``."""
    return Coordinate(index)


# ---------------------------------------------------------------------------
# Functionals and random fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Functional:
    """An expression on a space, minus an explicit centering shift."""

    space: WienerSpace
    expr: Expression
    mean_shift: float = 0.0

    def __post_init__(self):
        top = self.expr.max_coordinate()
        if top >= self.space.dim:
            raise ExpressionError(
                f"expression uses coordinate w{top} but the space has "
                f"dimension {self.space.dim}"
            )

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        val = self.expr.value(x) - self.mean_shift
        _check_finite(val, "functional value")
        return val

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _, grad = self.expr.value_and_gradient(x)
        _check_finite(grad, "functional gradient")
        return grad

    def value_and_gradient(self, x):
        x = np.asarray(x, dtype=float)
        val, grad = self.expr.value_and_gradient(x)
        val = val - self.mean_shift
        _check_finite(val, "functional value")
        _check_finite(grad, "functional gradient")
        return val, grad

    def with_mean_shift(self, mean_shift: float) -> "Functional":
        return Functional(self.space, self.expr, float(mean_shift))


def _check_finite(a, what: str):
    if not np.all(np.isfinite(a)):
        raise EvaluationOverflow(f"{what} is not finite")


def malliavin_derivative(functional: Functional, x) -> np.ndarray:
    """Gradient in whitened coordinates: the Malliavin derivative of F at x."""
    return functional.gradient(x)


def functional_difference(f_t: Functional, f_s: Functional) -> Functional:
    """The functional f_t - f_s (shared space required)."""
    if f_t.space is not f_s.space and not np.array_equal(f_t.space.gram, f_s.space.gram):
        raise WienerSpaceError("functionals live on different spaces")
    return Functional(
        f_t.space,
        Sum((f_t.expr, Negate(f_s.expr))),
        f_t.mean_shift - f_s.mean_shift,
    )


def center_by_monte_carlo(
    functional: Functional, rng: np.random.Generator, n_samples: int = 100_000
) -> Functional:
    """Estimate E[F] by Monte Carlo and return a copy shifted to mean zero."""
    xi = sample(functional.space, rng, n_samples)
    mean = float(np.mean(functional.expr.value(xi)))
    return functional.with_mean_shift(mean)


@dataclass(frozen=True)
class RandomField:
    """Finitely many functionals sharing one space, indexed 0..d-1."""

    space: WienerSpace
    components: tuple[Functional, ...]

    def __post_init__(self):
        if len(self.components) < 1:
            raise ExpressionError("a random field needs at least one component")
        for f in self.components:
            if f.space is not self.space:
                raise WienerSpaceError("all field components must share one space")

    @property
    def dim(self) -> int:
        return len(self.components)

    def eval_all(self, x) -> np.ndarray:
        """Values of every component, stacked on a trailing axis (..., d)."""
        x = np.asarray(x, dtype=float)
        return np.stack([f.eval(x) for f in self.components], axis=-1)

    def coordinates(self) -> frozenset[int]:
        return frozenset().union(*(f.expr.coordinates() for f in self.components))

    def constant_gradients(self) -> np.ndarray | None:
        """(d, n) gradient matrix when every component is affine, else None."""
        if not all(f.expr.is_affine() for f in self.components):
            return None
        origin = np.zeros(self.space.dim)
        return np.stack([f.gradient(origin) for f in self.components])


def make_field(space: WienerSpace, exprs: Iterable[Expression],
               mean_shifts: Iterable[float] | None = None) -> RandomField:
    exprs = tuple(exprs)
    if mean_shifts is None:
        mean_shifts = (0.0,) * len(exprs)
    comps = tuple(
        Functional(space, e, float(m)) for e, m in zip(exprs, mean_shifts, strict=True)
    )
    return RandomField(space, comps)
