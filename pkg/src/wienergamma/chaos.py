"""Explicit finite chaos expansions and the exact Gamma oracle.

A chaos form is a sum of terms ``c * prod_k H_{q_k}(xi_{i_k})`` over distinct
coordinates of an identity-Gram space.  A term of total order q = sum(q_k)
lives in the order-q eigenspace of the Ornstein-Uhlenbeck generator, so the
pseudo-inverse acts on it as division by -q and

    -D L^{-1} G = sum over terms of order q >= 1 of  D(term) / q.

Constant terms (empty factor list) are annihilated.  This gives Gamma_{F,G}
exactly, which is the reference the Monte Carlo engine is validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Constant,
    ExpressionError,
    Functional,
    Hermite,
    Coordinate,
    Product,
    Sum,
    WienerSpace,
    hermite_pair,
    hermite_value,
)

Factor = tuple[int, int]  # (coordinate index, Hermite order >= 1)
Term = tuple[float, tuple[Factor, ...]]


@dataclass(frozen=True)
class ChaosForm:
    space: WienerSpace
    terms: tuple[Term, ...]

    def __post_init__(self):
        if not self.space.is_identity_gram():
            raise ExpressionError("chaos forms require an identity-Gram space")
        for coeff, factors in self.terms:
            if not np.isfinite(coeff):
                raise ExpressionError("term coefficient must be finite")
            indices = [i for i, _ in factors]
            if len(set(indices)) != len(indices):
                raise ExpressionError(f"repeated coordinate in term {factors}")
            for i, q in factors:
                if q < 1:
                    raise ExpressionError("factor orders must be >= 1")
                if i < 0 or i >= self.space.dim:
                    raise ExpressionError(
                        f"coordinate {i} out of range for dimension {self.space.dim}")

    def order(self) -> int:
        return max((sum(q for _, q in fs) for _, fs in self.terms), default=0)

    def mean(self) -> float:
        """E[form]: only constant terms contribute."""
        return float(sum(c for c, fs in self.terms if not fs))

    def centered(self) -> "ChaosForm":
        """Drop constant terms, i.e. subtract the exact mean."""
        if self.mean() == 0.0:
            return self
        return ChaosForm(self.space, tuple((c, fs) for c, fs in self.terms if fs))

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape[:-1])
        for coeff, factors in self.terms:
            term = np.full(x.shape[:-1], coeff)
            for i, q in factors:
                term = term * hermite_value(q, x[..., i])
            total += term
        return total

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self._weighted_gradient(x, lambda q: 1.0)

    def minus_dl_gradient(self, x) -> np.ndarray:
        """Gradient of -L^{-1} applied to the form: term of order q scaled by 1/q."""
        x = np.asarray(x, dtype=float)
        return self._weighted_gradient(x, lambda q: 1.0 / q)

    def _weighted_gradient(self, x, weight) -> np.ndarray:
        grad = np.zeros_like(x)
        for coeff, factors in self.terms:
            if not factors:
                continue
            total_order = sum(q for _, q in factors)
            scale = coeff * weight(total_order)
            values = []
            derivs = []
            for i, q in factors:
                hq, hq_minus = hermite_pair(q, x[..., i])
                values.append(hq)
                derivs.append(q * hq_minus)
            for k, (i, _) in enumerate(factors):
                part = np.full(x.shape[:-1], scale)
                for j, v in enumerate(values):
                    part = part * (derivs[j] if j == k else v)
                grad[..., i] += part
        return grad

    # The Monte Carlo engine works through this Functional-like surface.
    def eval(self, x) -> np.ndarray:
        return self.value(x)

    def to_functional(self) -> Functional:
        """Equivalent expression-tree functional (same value and gradient)."""
        term_exprs = []
        for coeff, factors in self.terms:
            children = [Constant(float(coeff))]
            children.extend(Hermite(q, Coordinate(i)) for i, q in factors)
            term_exprs.append(children[0] if len(children) == 1 else Product(tuple(children)))
        if not term_exprs:
            term_exprs = [Constant(0.0)]
        expr = term_exprs[0] if len(term_exprs) == 1 else Sum(tuple(term_exprs))
        return Functional(self.space, expr, 0.0)


def gamma_oracle(f: ChaosForm, g: ChaosForm, x) -> np.ndarray:
    """Exact Gamma_{F,G}(x) = <DF(x), -D L^{-1} G(x)> for chaos forms."""
    if f.space.dim != g.space.dim:
        raise ExpressionError("chaos forms live on different spaces")
    x = np.asarray(x, dtype=float)
    return np.sum(f.gradient(x) * g.minus_dl_gradient(x), axis=-1)


def expectation_of_product(f: ChaosForm, g: ChaosForm) -> float:
    """Exact E[F * G] from Hermite orthogonality E[H_p H_q] = q! 1{p=q}."""
    total = 0.0
    for cf, fs in f.terms:
        f_orders = dict(fs)
        for cg, gs in g.terms:
            g_orders = dict(gs)
            if set(f_orders) != set(g_orders):
                continue
            if any(f_orders[i] != g_orders[i] for i in f_orders):
                continue
            weight = 1.0
            for q in f_orders.values():
                weight *= math.factorial(q)
            total += cf * cg * weight
    return total


def form(space: WienerSpace, *terms: Term) -> ChaosForm:
    """Convenience constructor: form(space, (1.0, ((0, 2),)), ...)."""
    return ChaosForm(space, tuple((float(c), tuple(fs)) for c, fs in terms))


def oracle_suite(space: WienerSpace) -> list[tuple[str, ChaosForm, ChaosForm]]:
    """Twelve centered chaos-form pairs, orders <= 4 on <= 4 coordinates.

    Used both for the oracle-vs-engine agreement checks and as the test bed
    for the integration-by-parts identity.
    """
    if space.dim < 4 or not space.is_identity_gram():
        raise ExpressionError("the suite needs an identity-Gram space of dim >= 4")

    def mk(*terms):
        return form(space, *terms)

    pairs = [
        ("first-chaos-equal", mk((1.0, ((0, 1),))), mk((1.0, ((0, 1),)))),
        ("first-chaos-orthogonal", mk((1.0, ((0, 1),))), mk((1.0, ((1, 1),)))),
        ("h2-equal", mk((1.0, ((0, 2),))), mk((1.0, ((0, 2),)))),
        ("cross-h1h1-vs-h2", mk((1.0, ((0, 1), (1, 1)))), mk((1.0, ((0, 2),)))),
        ("mixed-vs-h2", mk((1.0, ((0, 2),)), (1.0, ((1, 1),))), mk((1.0, ((1, 2),)))),
        ("h3-equal", mk((1.0, ((0, 3),))), mk((1.0, ((0, 3),)))),
        ("order3-vs-product", mk((1.0, ((0, 3),)), (1.0, ((2, 1),))),
         mk((1.0, ((0, 2), (1, 1))))),
        ("h4-equal", mk((0.5, ((0, 4),))), mk((0.5, ((0, 4),)))),
        ("h2h2-equal", mk((1.0, ((0, 2), (1, 2)))), mk((1.0, ((0, 2), (1, 2))))),
        ("triple-product-vs-h2", mk((1.0, ((0, 1), (1, 1), (2, 1)))),
         mk((1.0, ((3, 2),)))),
        ("order4-vs-order2", mk((1.0, ((0, 2), (1, 1), (2, 1)))),
         mk((1.0, ((0, 1), (3, 1))))),
        ("multi-term", mk((0.5, ((0, 2),)), (-0.25, ((0, 1), (1, 1))), (1.0, ((3, 1),))),
         mk((1.0, ((1, 3),)), (1.0, ((2, 1),)))),
    ]
    return pairs
