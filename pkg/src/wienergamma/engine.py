"""Monte Carlo / quadrature estimation of the covariance operator Gamma.

For functionals F, G on one space, Gamma_{F,G}(x) = <DF(x), -D L^{-1} G(x)>.
The pseudo-inverse side is realized through the Mehler coupling: with
u = e^{-z} the semigroup integral over z in [0, inf) becomes

    Gamma_{F,G}(x) = int_0^1 E_hat[ <DF(x), DG(u x + sqrt(1-u^2) x_hat)> ] du,

with x_hat an independent standard normal copy.  The u-integral is
Gauss-Legendre; the inner expectation is Monte Carlo (optionally antithetic).

Two sampling regimes share this representation:

* pointwise: one base point, ``mc_samples`` inner copies (``gamma_pointwise``);
* in expectation: many outer points, a few inner copies each, for quantities
  like E[Phi'(F) Gamma_{F,G}].  The ``mc_samples`` budget is spread across the
  outer points (at least one inner copy per point), which keeps estimators
  unbiased while the standard error is measured over outer points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Functional, functional_difference, sample


class CenteringError(ValueError):
    """A functional that must be centered has a mean inconsistent with zero."""


@dataclass(frozen=True)
class MehlerConfig:
    """Discretization knobs for the Mehler representation."""

    quad_nodes: int = 32
    mc_samples: int = 4096
    antithetic: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.quad_nodes < 2:
            raise ValueError(f"quad_nodes must be >= 2, got {self.quad_nodes}")
        if self.mc_samples < 2:
            raise ValueError(f"mc_samples must be >= 2, got {self.mc_samples}")


@dataclass(frozen=True)
class GammaEstimate:
    value: float
    std_error: float
    n_samples: int


class RunningMoments:
    """Streaming mean/variance (Welford, with Chan's merge for batches)."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0

    def add(self, x: float):
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (x - self.mean)

    def add_batch(self, values: np.ndarray):
        values = np.asarray(values, dtype=float).ravel()
        n = values.size
        if n == 0:
            return
        batch_mean = float(np.mean(values))
        batch_m2 = float(np.sum((values - batch_mean) ** 2))
        if self.count == 0:
            self.count, self.mean, self._m2 = n, batch_mean, batch_m2
            return
        total = self.count + n
        delta = batch_mean - self.mean
        self._m2 += batch_m2 + delta * delta * self.count * n / total
        self.mean += delta * n / total
        self.count = total

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        return self._m2 / (self.count - 1)

    @property
    def std_error(self) -> float:
        if self.count < 1:
            return 0.0
        return math.sqrt(self.variance / self.count)


def gauss_legendre_unit(n_nodes: int):
    """Gauss-Legendre nodes and weights on [0, 1]; weights renormalized to sum 1."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    return nodes, weights / weights.sum()


def mehler_shift(omega: np.ndarray, omega_hat: np.ndarray, u: float) -> np.ndarray:
    """The Ornstein-Uhlenbeck coupling u*omega + sqrt(1-u^2)*omega_hat."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    omega = np.asarray(omega, dtype=float)
    omega_hat = np.asarray(omega_hat, dtype=float)
    return u * omega + math.sqrt(1.0 - u * u) * omega_hat


def _inner_normals(rng: np.random.Generator, n_draws: int, dim: int, antithetic: bool):
    """Inner copies, shape (count, dim); antithetic pairs stacked as (+z, -z)."""
    if antithetic:
        half = max(1, n_draws // 2)
        z = rng.standard_normal((half, dim))
        return np.concatenate([z, -z], axis=0)
    return rng.standard_normal((max(1, n_draws), dim))


def gamma_pointwise(f, g, omega: np.ndarray, cfg: MehlerConfig,
                    rng: np.random.Generator | None = None) -> GammaEstimate:
    """Estimate Gamma_{F,G} at one sample point.

    ``f`` and ``g`` can be Functionals or chaos forms -- anything with a
    ``space`` and a ``gradient`` method.  Inner copies are shared across
    quadrature nodes (common random numbers); with antithetic sampling the
    +/- pair average is the independent unit for the standard error, which
    reflects Monte Carlo variation only.
    """
    space = f.space
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (space.dim,):
        raise ValueError(f"sample point must have shape ({space.dim},)")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed]))
    nodes, weights = gauss_legendre_unit(cfg.quad_nodes)
    inner = _inner_normals(rng, cfg.mc_samples, space.dim, cfg.antithetic)

    df = f.gradient(omega)
    per_sample = np.zeros(inner.shape[0])
    for u, wt in zip(nodes, weights):
        shifted = u * omega + math.sqrt(1.0 - u * u) * inner
        per_sample += wt * (g.gradient(shifted) @ df)

    if cfg.antithetic:
        half = inner.shape[0] // 2
        per_sample = 0.5 * (per_sample[:half] + per_sample[half:])
    acc = RunningMoments()
    acc.add_batch(per_sample)
    return GammaEstimate(value=acc.mean, std_error=acc.std_error, n_samples=acc.count)


def capital_delta(f_s: Functional, f_t: Functional, omega: np.ndarray,
                  cfg: MehlerConfig,
                  rng: np.random.Generator | None = None) -> GammaEstimate:
    """Delta_F(s, t) = Gamma applied twice to the difference F_t - F_s."""
    diff = functional_difference(f_t, f_s)
    return gamma_pointwise(diff, diff, omega, cfg, rng=rng)


# ---------------------------------------------------------------------------
# Expectation-level estimators (coupled inner copies)
# ---------------------------------------------------------------------------

def inner_copies_per_point(cfg: MehlerConfig, n_outer: int) -> int:
    """Spread the mc_samples budget over outer points; antithetic needs pairs."""
    per = max(1, math.ceil(cfg.mc_samples / n_outer))
    if cfg.antithetic and per % 2:
        per += 1
    return per


def coupled_gamma_values(f, g, points: np.ndarray, cfg: MehlerConfig,
                         rng: np.random.Generator) -> np.ndarray:
    """Unbiased per-point estimates of Gamma_{F,G}(points[i]) with fresh
    inner copies per point; shape (n_points,)."""
    points = np.asarray(points, dtype=float)
    n_points, dim = points.shape
    per = inner_copies_per_point(cfg, n_points)
    if cfg.antithetic:
        z = rng.standard_normal((n_points, per // 2, dim))
        inner = np.concatenate([z, -z], axis=1)
    else:
        inner = rng.standard_normal((n_points, per, dim))
    nodes, weights = gauss_legendre_unit(cfg.quad_nodes)

    df = f.gradient(points)  # (n_points, dim)
    values = np.zeros(n_points)
    for u, wt in zip(nodes, weights):
        shifted = u * points[:, None, :] + math.sqrt(1.0 - u * u) * inner
        dg = g.gradient(shifted)  # (n_points, per, dim)
        values += wt * np.mean(np.einsum("prd,pd->pr", dg, df), axis=1)
    return values


def minus_dl_gradient_estimates(functionals, points: np.ndarray, cfg: MehlerConfig,
                                rng: np.random.Generator) -> np.ndarray:
    """Per-point estimates of the -D L^{-1} gradient for several functionals.

    Returns shape (len(functionals), n_points, dim).  One set of inner copies
    is shared across the functionals (common random numbers); each estimate is
    conditionally unbiased given the base point, and the map is linear, so
    differences of components estimate -D L^{-1} of the difference.
    """
    points = np.asarray(points, dtype=float)
    n_points, dim = points.shape
    per = inner_copies_per_point(cfg, n_points)
    if cfg.antithetic:
        z = rng.standard_normal((n_points, per // 2, dim))
        inner = np.concatenate([z, -z], axis=1)
    else:
        inner = rng.standard_normal((n_points, per, dim))
    nodes, weights = gauss_legendre_unit(cfg.quad_nodes)

    estimates = np.zeros((len(functionals), n_points, dim))
    for u, wt in zip(nodes, weights):
        shifted = u * points[:, None, :] + math.sqrt(1.0 - u * u) * inner
        for i, f in enumerate(functionals):
            estimates[i] += wt * np.mean(f.gradient(shifted), axis=1)
    return estimates


def require_centered(f, points: np.ndarray, what: str = "functional"):
    """Reject a functional whose sample mean is not within 3 SE of zero."""
    vals = f.eval(points)
    n = vals.size
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    if abs(mean) > 3.0 * se and se > 0.0:
        raise CenteringError(
            f"{what} is not centered: sample mean {mean:.4g} exceeds 3 x SE {se:.4g}")
    if se == 0.0 and mean != 0.0:
        raise CenteringError(f"{what} is deterministic and nonzero: {mean:.4g}")


@dataclass(frozen=True)
class IbpResult:
    lhs: float
    rhs: float
    residual: float
    lhs_std_error: float
    rhs_std_error: float
    std_error: float  # combined
    n_outer: int

    @property
    def passed(self) -> bool:
        return self.residual <= 3.0 * self.std_error


def ibp_residual(phi, phi_prime, f, g, n_outer: int, cfg: MehlerConfig,
                 seed: int | None = None) -> IbpResult:
    """Both sides of E[Phi(F) G] = E[Phi'(F) Gamma_{F,G}], with a residual.

    G must be centered (checked on the outer sample at 3 standard errors).
    Both sides are averaged over the same fresh outer points; the combined
    standard error is the root-sum-square of the two sides'.
    """
    space = f.space
    rng = np.random.default_rng(np.random.SeedSequence(
        [cfg.seed if seed is None else seed, 0x1B9]))
    points = sample(space, rng, n_outer)
    require_centered(g, points, what="G")

    f_vals = f.eval(points)
    g_vals = g.eval(points)
    lhs_acc = RunningMoments()
    lhs_acc.add_batch(np.asarray(phi(f_vals)) * g_vals)

    gamma_vals = coupled_gamma_values(f, g, points, cfg, rng)
    rhs_acc = RunningMoments()
    rhs_acc.add_batch(np.asarray(phi_prime(f_vals)) * gamma_vals)

    combined = math.hypot(lhs_acc.std_error, rhs_acc.std_error)
    return IbpResult(
        lhs=lhs_acc.mean,
        rhs=rhs_acc.mean,
        residual=abs(lhs_acc.mean - rhs_acc.mean),
        lhs_std_error=lhs_acc.std_error,
        rhs_std_error=rhs_acc.std_error,
        std_error=combined,
        n_outer=n_outer,
    )


@dataclass(frozen=True)
class PoincareResult:
    p: float
    lhs: float  # E|F|^p
    rhs: float  # (p-1)^{p/2} E|Gamma_{F,F}|^{p/2}
    lhs_std_error: float
    rhs_std_error: float
    n_outer: int

    @property
    def std_error(self) -> float:
        return math.hypot(self.lhs_std_error, self.rhs_std_error)

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + 3.0 * self.std_error


def poincare_check(f, p: float, n_outer: int, cfg: MehlerConfig,
                   seed: int | None = None) -> PoincareResult:
    """Monte Carlo check of E|F|^p <= (p-1)^{p/2} E|Gamma_{F,F}|^{p/2}, p >= 2."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    space = f.space
    rng = np.random.default_rng(np.random.SeedSequence(
        [cfg.seed if seed is None else seed, 0x90C]))
    points = sample(space, rng, n_outer)
    require_centered(f, points, what="F")

    lhs_acc = RunningMoments()
    lhs_acc.add_batch(np.abs(f.eval(points)) ** p)

    gamma_vals = coupled_gamma_values(f, f, points, cfg, rng)
    rhs_acc = RunningMoments()
    rhs_acc.add_batch((p - 1.0) ** (p / 2.0) * np.abs(gamma_vals) ** (p / 2.0))

    return PoincareResult(
        p=p,
        lhs=lhs_acc.mean,
        rhs=rhs_acc.mean,
        lhs_std_error=lhs_acc.std_error,
        rhs_std_error=rhs_acc.std_error,
        n_outer=n_outer,
    )
