"""Smart-path comparison experiments: suprema, functionals, concentration.

Two random fields under comparison are always embedded on one space with
disjoint coordinate blocks, which enforces the cross-orthogonality the
interpolation arguments need (the Gamma coupling between an F component and a
G component vanishes identically).  The supremum comparison interpolates
through a soft-max; the functional comparison interpolates f(sqrt(1-t) G +
sqrt(t) F) directly.  Verdicts always report both sides with their Monte
Carlo standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Constant,
    Coordinate,
    Expression,
    Functional,
    Product,
    RandomField,
    Sum,
    WienerSpaceError,
    build_space,
    make_field,
    sample,
)
from .engine import (
    MehlerConfig,
    RunningMoments,
    gamma_pointwise,
    minus_dl_gradient_estimates,
    require_centered,
)
from .parallel import run_chunked


class BlockOverlapError(ValueError):
    """The two fields of a comparison share coordinates."""


class ConvergenceError(RuntimeError):
    """Power iteration failed to converge within the iteration budget."""


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float


DEFAULT_BETAS = (1.0, 2.0, 4.0, 8.0, 16.0)


def default_t_grid(n_points: int = 21) -> np.ndarray:
    """Interpolation grid kept away from the 1/sqrt(t), 1/sqrt(1-t) endpoints."""
    return np.linspace(0.025, 0.975, n_points)


# ---------------------------------------------------------------------------
# Soft-max machinery
# ---------------------------------------------------------------------------

def softmax_sup(beta: float, v: np.ndarray) -> np.ndarray:
    """(1/beta) log sum_i exp(beta v_i): between max(v) and max(v) + log(d)/beta."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    v = np.asarray(v, dtype=float)
    m = np.max(v, axis=-1)
    return m + np.log(np.sum(np.exp(beta * (v - m[..., None])), axis=-1)) / beta


def h_weights(t: float, beta: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Soft-max weights of the interpolated field sqrt(1-t) y + sqrt(t) x."""
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = beta * (math.sqrt(1.0 - t) * y + math.sqrt(t) * x)
    s -= np.max(s, axis=-1, keepdims=True)
    e = np.exp(s)
    return e / np.sum(e, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Field pairs on disjoint blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldPair:
    """Fields F and G of equal size sharing one space on disjoint blocks."""

    f: RandomField
    g: RandomField

    def __post_init__(self):
        if self.f.space is not self.g.space:
            raise WienerSpaceError("F and G must live on the same space")
        if self.f.dim != self.g.dim:
            raise ValueError("F and G must have the same number of components")
        overlap = self.f.coordinates() & self.g.coordinates()
        if overlap:
            raise BlockOverlapError(
                f"F and G share coordinates {sorted(overlap)}; embed them on "
                "disjoint blocks")

    @property
    def space(self):
        return self.f.space

    @property
    def dim(self) -> int:
        return self.f.dim

    def check_centered(self, rng: np.random.Generator, n_samples: int = 20_000):
        pts = sample(self.space, rng, n_samples)
        for name, fld in (("F", self.f), ("G", self.g)):
            for i, comp in enumerate(fld.components):
                require_centered(comp, pts, what=f"{name}[{i}]")


def _linear_expr(row: np.ndarray, offset: int) -> Expression:
    children = [
        Product((Constant(float(c)), Coordinate(offset + a)))
        for a, c in enumerate(row)
        if c != 0.0
    ]
    if not children:
        return Constant(0.0)
    return children[0] if len(children) == 1 else Sum(tuple(children))


def build_gaussian_pair(cov_f: np.ndarray, cov_g: np.ndarray) -> FieldPair:
    """Centered Gaussian fields with the given covariances, on disjoint blocks."""
    cov_f = np.asarray(cov_f, dtype=float)
    cov_g = np.asarray(cov_g, dtype=float)
    d = cov_f.shape[0]
    if cov_g.shape[0] != d:
        raise ValueError("covariance matrices must have equal size")
    lf = np.linalg.cholesky(cov_f)
    lg = np.linalg.cholesky(cov_g)
    space = build_space(2 * d)
    f = make_field(space, [_linear_expr(lf[i], 0) for i in range(d)])
    g = make_field(space, [_linear_expr(lg[i], d) for i in range(d)])
    return FieldPair(f, g)


def _affine_delta_matrix(grads: np.ndarray) -> np.ndarray:
    """Delta(i, j) = |grad_i - grad_j|^2 for constant-gradient components."""
    diff = grads[:, None, :] - grads[None, :, :]
    return np.einsum("ijd,ijd->ij", diff, diff)


# ---------------------------------------------------------------------------
# Sudakov-Fernique-type interpolation
# ---------------------------------------------------------------------------

def sf_phi_value(pair: FieldPair, t: float, beta: float, n_outer: int,
                 seed: int = 0, workers: int = 1) -> Estimate:
    """phi(t) = (1/beta) E log sum_i exp(beta (sqrt(1-t) G_i + sqrt(t) F_i))."""
    acc = RunningMoments()

    def job(chunk, rng):
        pts = sample(pair.space, rng, chunk)
        interp = math.sqrt(1.0 - t) * pair.g.eval_all(pts) + math.sqrt(t) * pair.f.eval_all(pts)
        return softmax_sup(beta, interp)

    for vals in run_chunked(n_outer, workers, seed, 0x501, job):
        acc.add_batch(vals)
    return Estimate(acc.mean, acc.std_error)


def _delta_matrices_at(pair: FieldPair, pts: np.ndarray, cfg: MehlerConfig,
                       rng: np.random.Generator):
    """Per-point Delta matrices for both fields, shape 2 x (B, d, d).

    Components with constant gradients get their exact (deterministic) Delta;
    otherwise one shared set of inner copies drives conditionally unbiased
    estimates for every pair difference at once.
    """
    out = []
    n_pts = pts.shape[0]
    for fld in (pair.f, pair.g):
        const = fld.constant_gradients()
        if const is not None:
            delta = _affine_delta_matrix(const)
            out.append(np.broadcast_to(delta, (n_pts,) + delta.shape))
            continue
        base = np.stack([c.gradient(pts) for c in fld.components])  # (d, B, n)
        est = minus_dl_gradient_estimates(fld.components, pts, cfg, rng)  # (d, B, n)
        gdiff = base[:, None] - base[None, :]      # (d, d, B, n)
        ediff = est[:, None] - est[None, :]
        delta = np.einsum("ijbn,ijbn->bij", gdiff, ediff)
        out.append(delta)
    return out


def sf_phi_prime(pair: FieldPair, t: float, beta: float, cfg: MehlerConfig,
                 n_outer: int, seed: int = 0, workers: int = 1) -> Estimate:
    """Derivative of the soft-max interpolation at t:

        phi'(t) = (beta/4) sum_{i,j} E[h_i h_j (Delta_F(i,j) - Delta_G(i,j))].
    """
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must lie in (0, 1), got {t}")
    acc = RunningMoments()

    def job(chunk, rng):
        pts = sample(pair.space, rng, chunk)
        f_vals = pair.f.eval_all(pts)
        g_vals = pair.g.eval_all(pts)
        h = h_weights(t, beta, f_vals, g_vals)
        delta_f, delta_g = _delta_matrices_at(pair, pts, cfg, rng)
        gap = delta_f - delta_g
        return (beta / 4.0) * np.einsum("bi,bij,bj->b", h, gap, h)

    for vals in run_chunked(n_outer, workers, seed, 0x5F1, job):
        acc.add_batch(vals)
    return Estimate(acc.mean, acc.std_error)


def expected_max(fld: RandomField, n_samples: int, seed: int = 0,
                 workers: int = 1) -> Estimate:
    """E[max_i field_i] by plain Monte Carlo."""
    acc = RunningMoments()

    def job(chunk, rng):
        pts = sample(fld.space, rng, chunk)
        return np.max(fld.eval_all(pts), axis=-1)

    for vals in run_chunked(n_samples, workers, seed, 0xE3A, job):
        acc.add_batch(vals)
    return Estimate(acc.mean, acc.std_error)


@dataclass(frozen=True)
class PhiPrimeRow:
    beta: float
    t: float
    value: float
    std_error: float

    @property
    def nonpositive_within_3se(self) -> bool:
        return self.value <= 3.0 * self.std_error


@dataclass(frozen=True)
class SudakovReport:
    e_max_f: Estimate
    e_max_g: Estimate
    rows: tuple[PhiPrimeRow, ...]
    sandwich_gaps: dict  # beta -> log(d)/beta

    @property
    def phi_prime_all_nonpositive(self) -> bool:
        return all(r.nonpositive_within_3se for r in self.rows)

    @property
    def max_comparison_holds(self) -> bool:
        slack = 3.0 * math.hypot(self.e_max_f.std_error, self.e_max_g.std_error)
        return self.e_max_f.value <= self.e_max_g.value + slack


def sudakov_fernique_experiment(pair: FieldPair, betas=DEFAULT_BETAS,
                                t_grid: np.ndarray | None = None,
                                cfg: MehlerConfig = MehlerConfig(),
                                n_outer: int = 10_000, n_sup: int = 100_000,
                                seed: int = 0, workers: int = 1) -> SudakovReport:
    """Full supremum-comparison run: phi' sign profile plus both expected maxima."""
    if t_grid is None:
        t_grid = default_t_grid()
    d = pair.dim
    rows = []
    for bi, beta in enumerate(betas):
        for ti, t in enumerate(t_grid):
            est = sf_phi_prime(pair, float(t), float(beta), cfg, n_outer,
                               seed=seed + 7919 * bi + 104729 * ti, workers=workers)
            rows.append(PhiPrimeRow(float(beta), float(t), est.value, est.std_error))
    e_f = expected_max(pair.f, n_sup, seed=seed + 1, workers=workers)
    e_g = expected_max(pair.g, n_sup, seed=seed + 2, workers=workers)
    gaps = {float(b): math.log(d) / float(b) for b in betas}
    return SudakovReport(e_max_f=e_f, e_max_g=e_g, rows=tuple(rows), sandwich_gaps=gaps)


# ---------------------------------------------------------------------------
# Slepian-type interpolation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HessianFunction:
    """A C^2 map together with its exact Hessian evaluator."""

    name: str
    fun: object   # callable (..., d) -> (...)
    hessian: object  # callable (..., d) -> (..., d, d)

    def check_symmetry(self, x: np.ndarray, tol: float = 1e-10):
        h = self.hessian(x)
        gap = np.max(np.abs(h - np.swapaxes(h, -1, -2)))
        if gap > tol:
            raise ValueError(f"hessian of {self.name} is asymmetric by {gap:.3e}")


def quadratic_function(a: np.ndarray, name: str = "quadratic") -> HessianFunction:
    """f(x) = x' A x / 2 with constant Hessian A (A symmetrized)."""
    a = 0.5 * (np.asarray(a, dtype=float) + np.asarray(a, dtype=float).T)

    def fun(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, a, x)

    def hessian(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(a, x.shape[:-1] + a.shape).copy()

    return HessianFunction(name, fun, hessian)


def log_sum_exp_function(beta: float, name: str = "log-sum-exp") -> HessianFunction:
    """f(x) = (1/beta) log sum exp(beta x_i), a smooth convex max surrogate."""

    def fun(x):
        return softmax_sup(beta, x)

    def hessian(x):
        x = np.asarray(x, dtype=float)
        s = beta * x
        s = s - np.max(s, axis=-1, keepdims=True)
        p = np.exp(s)
        p /= np.sum(p, axis=-1, keepdims=True)
        eye = np.eye(x.shape[-1])
        return beta * (eye * p[..., None] - p[..., :, None] * p[..., None, :])

    return HessianFunction(name, fun, hessian)


def exp_linear_function(theta: np.ndarray, name: str = "exp-linear") -> HessianFunction:
    """f(x) = exp(<theta, x>); all second derivatives share the sign pattern
    theta_i theta_j, so nonnegative theta gives nonnegative cross-derivatives."""
    theta = np.asarray(theta, dtype=float)

    def fun(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp(x @ theta)

    def hessian(x):
        vals = fun(x)
        outer = theta[:, None] * theta[None, :]
        return vals[..., None, None] * outer

    return HessianFunction(name, fun, hessian)


def _gamma_matrices_at(fld: RandomField, pts: np.ndarray, cfg: MehlerConfig,
                       rng: np.random.Generator) -> np.ndarray:
    """Per-point Gamma matrices (B, d, d); entry (i, j) couples DF_j with the
    -D L^{-1} estimate for F_i.  Exact (constant) for all-affine fields."""
    const = fld.constant_gradients()
    n_pts = pts.shape[0]
    if const is not None:
        gamma = const @ const.T
        return np.broadcast_to(gamma, (n_pts,) + gamma.shape)
    base = np.stack([c.gradient(pts) for c in fld.components])  # (d, B, n)
    est = minus_dl_gradient_estimates(fld.components, pts, cfg, rng)
    return np.einsum("jbn,ibn->bij", base, est)


def slepian_phi_prime(pair: FieldPair, fn: HessianFunction, t: float,
                      cfg: MehlerConfig, n_outer: int, seed: int = 0,
                      workers: int = 1):
    """Derivative of t -> E f(sqrt(1-t) G + sqrt(t) F):

        phi'(t) = (1/2) sum_{i,j} E[ d2f/dx_i dx_j (interp) (Gamma^F_ij - Gamma^G_ij) ].

    Returns (Estimate, heavy_tail_flag); the flag marks a sample whose largest
    |Hessian| entry dominates the integrability diagnostic.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    acc = RunningMoments()
    abs_acc = RunningMoments()
    max_single = 0.0

    def job(chunk, rng):
        pts = sample(pair.space, rng, chunk)
        interp = math.sqrt(1.0 - t) * pair.g.eval_all(pts) + math.sqrt(t) * pair.f.eval_all(pts)
        fn.check_symmetry(interp[: min(8, len(interp))])
        hess = fn.hessian(interp)  # (B, d, d)
        gamma_f = _gamma_matrices_at(pair.f, pts, cfg, rng)
        gamma_g = _gamma_matrices_at(pair.g, pts, cfg, rng)
        per_sample = 0.5 * np.einsum("bij,bij->b", hess, gamma_f - gamma_g)
        return per_sample, np.max(np.abs(hess), axis=(1, 2))

    for per_sample, abs_rows in run_chunked(n_outer, workers, seed, 0x51E, job):
        acc.add_batch(per_sample)
        abs_acc.add_batch(abs_rows)
        max_single = max(max_single, float(np.max(abs_rows)))
    total_abs = abs_acc.mean * abs_acc.count
    heavy_tail = bool(total_abs > 0 and max_single > 0.1 * total_abs)
    return Estimate(acc.mean, acc.std_error), heavy_tail


@dataclass(frozen=True)
class SlepianReport:
    e_f_of_f: Estimate
    e_f_of_g: Estimate
    rows: tuple[PhiPrimeRow, ...]
    heavy_tail_flagged: bool

    @property
    def phi_prime_all_nonnegative(self) -> bool:
        return all(r.value >= -3.0 * r.std_error for r in self.rows)

    @property
    def functional_comparison_holds(self) -> bool:
        slack = 3.0 * math.hypot(self.e_f_of_f.std_error, self.e_f_of_g.std_error)
        return self.e_f_of_f.value >= self.e_f_of_g.value - slack


def slepian_experiment(pair: FieldPair, fn: HessianFunction,
                       t_grid: np.ndarray | None = None,
                       cfg: MehlerConfig = MehlerConfig(),
                       n_outer: int = 10_000, n_value: int = 100_000,
                       seed: int = 0, workers: int = 1) -> SlepianReport:
    if t_grid is None:
        t_grid = default_t_grid(11)
    rows = []
    flagged = False
    for ti, t in enumerate(t_grid):
        est, heavy = slepian_phi_prime(pair, fn, float(t), cfg, n_outer,
                                       seed=seed + 31 * ti, workers=workers)
        flagged = flagged or heavy
        rows.append(PhiPrimeRow(float("nan"), float(t), est.value, est.std_error))

    def value_of(fld, salt):
        acc = RunningMoments()

        def job(chunk, rng):
            pts = sample(fld.space, rng, chunk)
            return fn.fun(fld.eval_all(pts))

        for vals in run_chunked(n_value, workers, seed + salt, 0x5E2, job):
            acc.add_batch(vals)
        return Estimate(acc.mean, acc.std_error)

    return SlepianReport(
        e_f_of_f=value_of(pair.f, 3),
        e_f_of_g=value_of(pair.g, 4),
        rows=tuple(rows),
        heavy_tail_flagged=flagged,
    )


# ---------------------------------------------------------------------------
# Concentration bound
# ---------------------------------------------------------------------------

def operator_norm(c: np.ndarray, tol: float = 1e-8, max_iterations: int = 10_000) -> float:
    """Largest |eigenvalue| of a symmetric matrix by power iteration on C^2."""
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("operator_norm expects a square matrix")
    if np.max(np.abs(c - c.T)) > 1e-10:
        raise ValueError("operator_norm expects a symmetric matrix")
    if not np.any(c):
        return 0.0
    rng = np.random.default_rng(0xC0)
    v = rng.standard_normal(c.shape[0])
    v /= np.linalg.norm(v)
    q_prev = math.inf
    for _ in range(max_iterations):
        cv = c @ v
        w_vec = c @ cv
        q = float(v @ w_vec)  # Rayleigh quotient of C^2
        norm = np.linalg.norm(w_vec)
        if norm == 0.0:
            return 0.0
        v = w_vec / norm
        if abs(q - q_prev) <= 0.01 * tol * max(1.0, abs(q)):
            return math.sqrt(max(q, 0.0))
        q_prev = q
    raise ConvergenceError(
        f"power iteration did not converge in {max_iterations} iterations")


def gamma_matrix_pointwise(fld: RandomField, omega: np.ndarray, cfg: MehlerConfig,
                           rng: np.random.Generator):
    """Gamma matrix estimate at one point with entrywise standard errors."""
    d = fld.dim
    matrix = np.zeros((d, d))
    max_se = 0.0
    for i in range(d):
        for j in range(d):
            est = gamma_pointwise(fld.components[j], fld.components[i], omega, cfg,
                                  rng=np.random.default_rng(rng.integers(2**63)))
            matrix[i, j] = est.value
            max_se = max(max_se, est.std_error)
    return matrix, max_se


@dataclass(frozen=True)
class ConcentrationResult:
    tail: float
    tail_std_error: float
    bound: float
    operator_norm_value: float
    psd_margin: float       # most negative eigenvalue of C - Gamma seen
    psd_tolerance: float    # -3 x largest Gamma std error seen
    n_samples: int

    @property
    def psd_ok(self) -> bool:
        # Small absolute floor so an exactly-deterministic Gamma (tolerance 0)
        # is not rejected over a last-bit eigenvalue.
        return self.psd_margin >= -(self.psd_tolerance + 1e-12)

    @property
    def bound_holds(self) -> bool:
        return self.tail <= self.bound + 3.0 * self.tail_std_error


def concentration_check(fld: RandomField, c_matrix: np.ndarray, x: np.ndarray,
                        n_outer: int, cfg: MehlerConfig, n_psd: int = 32,
                        seed: int = 0, workers: int = 1) -> ConcentrationResult:
    """Empirical joint upper tail against exp(-|x|^2 / (2 |C|_op)).

    The bound requires C - Gamma to be nonnegative definite; that is checked
    on n_psd sampled points (minimum eigenvalue above -3 x the Gamma standard
    error).  If the check fails the result refuses to assert the bound.
    """
    c_matrix = np.asarray(c_matrix, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise ValueError("threshold vector x must be nonnegative")

    psd_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xAB]))
    pts = sample(fld.space, psd_rng, n_psd)
    margin = math.inf
    tolerance = 0.0
    for k in range(n_psd):
        gamma, max_se = gamma_matrix_pointwise(fld, pts[k], cfg, psd_rng)
        gamma = 0.5 * (gamma + gamma.T)
        eigmin = float(np.linalg.eigvalsh(c_matrix - gamma)[0])
        margin = min(margin, eigmin)
        tolerance = max(tolerance, 3.0 * max_se)

    op_norm = operator_norm(c_matrix)
    bound = math.exp(-float(x @ x) / (2.0 * op_norm))

    hits = RunningMoments()

    def job(chunk, rng):
        sample_pts = sample(fld.space, rng, chunk)
        vals = fld.eval_all(sample_pts)
        return np.all(vals >= x, axis=-1).astype(float)

    for indicator in run_chunked(n_outer, workers, seed, 0xC02, job):
        hits.add_batch(indicator)
    p_hat = hits.mean
    se = math.sqrt(max(p_hat * (1.0 - p_hat), 1e-300) / hits.count)
    return ConcentrationResult(
        tail=p_hat,
        tail_std_error=se,
        bound=bound,
        operator_norm_value=op_norm,
        psd_margin=margin,
        psd_tolerance=tolerance,
        n_samples=hits.count,
    )


# ---------------------------------------------------------------------------
# Perturbation of a Gaussian vector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationSpec:
    """Ingredients for perturbing a Gaussian vector on Wiener space.

    * ``g_rows[i]``: whitened-coordinate vector of the Gaussian component G_i,
      so Cov(G_i, G_j) = <g_i, g_j>.
    * ``f_rows[i][k]``: vectors feeding the i-th perturbation; all inner
      products <f_ik, g_j> and <f_ik, f_jl> must be nonnegative.
    * ``phi_builders[i]``: maps a list of argument Expressions to the
      expression Phi_i(args); each Phi_i must be increasing in every argument.
    """

    g_rows: np.ndarray
    f_rows: tuple
    phi_builders: tuple


def validate_perturbation(spec: PerturbationSpec):
    g = np.asarray(spec.g_rows, dtype=float)
    flat = [(i, k, np.asarray(fv, dtype=float))
            for i, group in enumerate(spec.f_rows) for k, fv in enumerate(group)]
    for i, k, fv in flat:
        dots = g @ fv
        if np.any(dots < 0):
            j = int(np.argmin(dots))
            raise ValueError(
                f"<f[{i}][{k}], g[{j}]> = {dots[j]:.4g} < 0 violates the sign condition")
    for a in range(len(flat)):
        for b in range(a, len(flat)):
            i, k, fa = flat[a]
            j, l, fb = flat[b]
            dot = float(fa @ fb)
            if dot < 0:
                raise ValueError(
                    f"<f[{i}][{k}], f[{j}][{l}]> = {dot:.4g} < 0 violates the sign condition")


def build_perturbed_pair(spec: PerturbationSpec, rng: np.random.Generator,
                         n_center: int = 200_000):
    """Return (field F, field G, space).  F_i = G_i + centered Phi_i(I1(f_ik));
    the perturbations are centered by Monte Carlo so both fields have mean zero.
    """
    validate_perturbation(spec)
    check_phi_monotone(spec, rng)
    g = np.asarray(spec.g_rows, dtype=float)
    d, n = g.shape
    space = build_space(n)

    f_exprs = []
    for i in range(d):
        args = [_linear_expr(np.asarray(fv, dtype=float), 0) for fv in spec.f_rows[i]]
        phi_expr = spec.phi_builders[i](args)
        expr = Sum((_linear_expr(g[i], 0), phi_expr))
        shift = float(np.mean(phi_expr.value(sample(space, rng, n_center))))
        f_exprs.append(Functional(space, expr, mean_shift=shift))
    f_field = RandomField(space, tuple(f_exprs))
    g_field = make_field(space, [_linear_expr(g[i], 0) for i in range(d)])
    return f_field, g_field, space


def check_phi_monotone(spec: PerturbationSpec, rng: np.random.Generator,
                       n_points: int = 2_000):
    """Verify d Phi_i / d x_k >= 0 at sampled argument points."""
    g = np.asarray(spec.g_rows, dtype=float)
    n = g.shape[1]
    for i, group in enumerate(spec.f_rows):
        n_args = len(group)
        if n_args == 0:
            continue
        phi_expr = spec.phi_builders[i]([Coordinate(k) for k in range(n_args)])
        xi = np.random.default_rng(rng.integers(2**63)).standard_normal((n_points, n))
        args = np.stack([xi @ np.asarray(fv, dtype=float) for fv in group], axis=-1)
        _, grads = phi_expr.value_and_gradient(args)
        worst = float(np.min(grads))
        if worst < -1e-12:
            raise ValueError(
                f"Phi[{i}] has a negative partial derivative ({worst:.4g}) at a "
                "sampled point")


def perturbation_gamma(f_field: RandomField, omega: np.ndarray, cfg: MehlerConfig,
                       seed: int = 0):
    """Sampled Gamma matrix of the perturbed field at one point.

    Entry (i, j) estimates Gamma_{F_i, F_j}; returns (values, std_errors).
    """
    d = f_field.dim
    values = np.zeros((d, d))
    errors = np.zeros((d, d))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9E4]))
    for i in range(d):
        for j in range(d):
            est = gamma_pointwise(f_field.components[j], f_field.components[i],
                                  omega, cfg,
                                  rng=np.random.default_rng(rng.integers(2**63)))
            values[i, j] = est.value
            errors[i, j] = est.std_error
    return values, errors
