"""GP conditioning, log marginal likelihood, and hyperparameter search.

Hyperparameters split into two groups: the graph parameters (bandwidth
and truncation) are searched over a grid, while the diffusion time and
noise level are optimized by projected gradient ascent on a log scale
within each grid cell.  The baseline squared-exponential model reuses
the same machinery with a length-scale grid and an (amplitude, noise)
inner ascent.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg

from .covariance import sqexp_covariance
from .errors import NumericalError, ValidationError
from .graph import build_graph, pairwise_sq_dists
from .spectral import ball_counts, density_normalize, eigendecompose

LIKELIHOOD_FORMS = ("standard", "as_written")

# jitter ladder, relative to mean diagonal of the labeled block
_JITTER_START = 1e-10
_JITTER_MAX = 1e-4

# inner ascent settings
_ARMIJO_C = 1e-4
_ARMIJO_SHRINK = 0.5
_MAX_ITERS = 50
_LOGML_TOL = 1e-8


@dataclass(frozen=True)
class Hyperparams:
    epsilon: float
    truncation: int
    t: float
    sigma_noise: float
    mode: str = "general"


@dataclass(frozen=True)
class BaselineHyperparams:
    amplitude: float
    rho: float
    sigma_noise: float


class Prediction:
    """Posterior mean and (optionally) covariance at query points."""

    def __init__(self, mean, cov=None, var=None):
        self.mean = mean
        self.cov = cov
        self.var = var

    @property
    def query_count(self):
        return self.mean.shape[0]


@dataclass
class FitReport:
    best: object
    logml: float
    trace: list = field(default_factory=list)
    rmse: float = None
    # mean removed from the responses before the search; prediction
    # call sites must condition on (y - offset) and add it back
    offset: float = 0.0


@dataclass
class SearchConfig:
    """Grids and optimizer settings for hyperparameter selection.

    Default grids follow the only grid the source experiments disclose:
    truncation 1..35, squared bandwidth 0.002..0.030.
    """
    eps2_grid: list = field(
        default_factory=lambda: [0.002 + 0.001 * i for i in range(29)])
    k_grid: list = field(default_factory=lambda: list(range(1, 36)))
    t_bounds: tuple = (0.01, 1.0)
    sigma2_bounds: tuple = (0.1, 2.0)
    multistarts: int = 3
    seed: int = 0
    likelihood_form: str = "standard"
    nystrom_scale: str = "consistent"
    mode: str = "general"
    intrinsic_dim: int = None
    # the rank-K prior has no intercept, so by default the labeled mean
    # is treated as the prior mean rather than explained by the kernel
    center_responses: bool = True
    # baseline (squared-exponential) search space
    rho2_grid: list = field(
        default_factory=lambda: list(np.logspace(-2, 1, 13)))
    amplitude_bounds: tuple = (1e-2, 1e4)

    def __post_init__(self):
        if not self.eps2_grid or not self.k_grid or not self.rho2_grid:
            raise ValidationError("search grids must be non-empty")
        if self.likelihood_form not in LIKELIHOOD_FORMS:
            raise ValidationError(
                f"unknown likelihood form {self.likelihood_form!r}")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        data.pop("schema", None)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown search config fields {sorted(unknown)}")
        return cls(**data)

    def to_json(self, path):
        data = {"schema": 1, **asdict(self)}
        data["t_bounds"] = list(self.t_bounds)
        data["sigma2_bounds"] = list(self.sigma2_bounds)
        data["amplitude_bounds"] = list(self.amplitude_bounds)
        data["rho2_grid"] = [float(v) for v in self.rho2_grid]
        with open(path, "w") as fh:
            json.dump(data, fh, indent=1)


def _chol_with_jitter(mat):
    """Cholesky with escalating diagonal jitter.

    Tries no jitter first so well-conditioned systems are untouched,
    then walks 1e-10..1e-4 times the mean diagonal in decade steps.
    """
    m = mat.shape[0]
    scale = max(np.trace(mat) / m, np.finfo(float).tiny)
    jitter = 0.0
    while True:
        try:
            chol = np.linalg.cholesky(mat + jitter * np.eye(m))
            return chol, jitter
        except np.linalg.LinAlgError:
            pass
        if jitter == 0.0:
            jitter = _JITTER_START * scale
        else:
            jitter *= 10.0
        if jitter > _JITTER_MAX * scale:
            eigmin = float(np.linalg.eigvalsh(mat)[0])
            raise NumericalError(
                "covariance not positive definite even after jitter "
                f"(smallest eigenvalue about {eigmin:.3e})")


def _chol_solve(chol, rhs):
    y = scipy.linalg.solve_triangular(chol, rhs, lower=True)
    return scipy.linalg.solve_triangular(chol.T, y, lower=False)


def predict(cov_full, responses, sigma_noise, want="full"):
    """Condition a joint Gaussian prior on the labeled responses.

    ``cov_full`` is the prior covariance over labeled-first points
    (labeled block top-left); the first len(responses) indices are
    observed with noise variance sigma_noise^2.
    """
    H = cov_full.H if hasattr(cov_full, "H") else np.asarray(cov_full, float)
    y = np.asarray(responses, dtype=float).ravel()
    m = y.shape[0]
    if H.shape[0] != H.shape[1] or H.shape[0] < m:
        raise ValidationError("covariance must be square and cover all "
                              "labeled points")
    if sigma_noise < 0:
        raise ValidationError("sigma_noise must be nonnegative")
    if m == 0:
        q = H.shape[0]
        mean = np.zeros(q)
        if want == "mean":
            return Prediction(mean)
        if want == "var":
            return Prediction(mean, var=np.diag(H).copy())
        return Prediction(mean, cov=H.copy(), var=np.diag(H).copy())
    Kff = H[:m, :m] + sigma_noise ** 2 * np.eye(m)
    chol, _ = _chol_with_jitter(Kff)
    cross = H[m:, :m]
    alpha = _chol_solve(chol, y)
    mean = cross @ alpha
    if want == "mean":
        return Prediction(mean)
    beta = scipy.linalg.solve_triangular(chol, cross.T, lower=True)
    if want == "var":
        var = np.diag(H)[m:] - np.sum(beta ** 2, axis=0)
        return Prediction(mean, var=var)
    cov = H[m:, m:] - beta.T @ beta
    cov = 0.5 * (cov + cov.T)
    return Prediction(mean, cov=cov, var=np.diag(cov).copy())


def log_marginal_likelihood(H11, responses, sigma_noise, form="standard"):
    """Log evidence of the responses under the prior plus noise.

    standard:   -1/2 y^T K^{-1} y - 1/2 log det K - m/2 log 2pi
    as_written: doubles the two data-dependent terms (same argmax).
    """
    if form not in LIKELIHOOD_FORMS:
        raise ValidationError(f"unknown likelihood form {form!r}")
    H11 = np.asarray(H11, dtype=float)
    y = np.asarray(responses, dtype=float).ravel()
    m = y.shape[0]
    Kff = H11 + sigma_noise ** 2 * np.eye(m)
    chol, _ = _chol_with_jitter(Kff)
    alpha = _chol_solve(chol, y)
    quad = float(y @ alpha)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    coeff = 0.5 if form == "standard" else 1.0
    return -coeff * quad - coeff * logdet - 0.5 * m * np.log(2.0 * np.pi)


def _labeled_block_factors(basis, mode, m):
    from .covariance import _mode_scale
    vec = basis.vectors(mode)[:m]
    scale = _mode_scale(mode, basis.n_points)
    return vec, scale


def _tri_inverse(chol):
    inv_chol, info = scipy.linalg.lapack.dtrtri(chol, lower=1)
    if info != 0:
        inv_chol = scipy.linalg.solve_triangular(
            chol, np.eye(chol.shape[0]), lower=True, check_finite=False)
    return inv_chol


def _logml_and_grad_spectral(Vm, scale, mu, t, sigma, y, form="standard",
                             want_grad=True):
    """Value and (d/dt, d/dsigma) of the log marginal likelihood for a
    spectral covariance with labeled-block factors Vm.

    With ``want_grad=False`` only the value is computed (the gradient
    slots are None); the line search uses this cheaper form.
    """
    m = y.shape[0]
    w = scale * np.exp(-mu * t)
    Kff = (Vm * w) @ Vm.T
    Kff[np.diag_indices_from(Kff)] += sigma ** 2
    chol, jitter = _chol_with_jitter(Kff)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    coeff = 0.5 if form == "standard" else 1.0
    const = -0.5 * m * np.log(2.0 * np.pi)
    if not want_grad:
        half = scipy.linalg.solve_triangular(chol, y, lower=True,
                                             check_finite=False)
        return -coeff * float(half @ half) - coeff * logdet + const, \
            None, None
    rhs = np.empty((m, Vm.shape[1] + 1))
    rhs[:, 0] = y
    rhs[:, 1:] = Vm
    half = scipy.linalg.solve_triangular(chol, rhs, lower=True,
                                         check_finite=False)
    hy = half[:, 0]
    B = half[:, 1:]                                   # chol^{-1} Vm
    value = -coeff * float(hy @ hy) - coeff * logdet + const
    alpha = scipy.linalg.solve_triangular(chol.T, hy, lower=False,
                                          check_finite=False)
    # dK/dt = -(Vm diag(mu w) Vm^T); dK/dsigma = 2 sigma I
    # dL/dtheta = coeff * (alpha^T dK alpha - tr(K^{-1} dK))
    proj = Vm.T @ alpha
    g = mu * w
    quad_t = -float(g @ proj ** 2)                    # alpha^T dK/dt alpha
    trace_t = -float(g @ np.sum(B ** 2, axis=0))      # tr(K^{-1} dK/dt)
    tr_inv = float(np.sum(_tri_inverse(chol) ** 2))
    d_dt = coeff * (quad_t - trace_t)
    d_dsigma = coeff * (2.0 * sigma) * (float(alpha @ alpha) - tr_inv)
    return value, d_dt, d_dsigma


class _CellObjective:
    """Likelihood of one (bandwidth, truncation) grid cell, reduced to
    the column space of the labeled eigenvector block.

    With Vm = Q R (thin QR), Kff = Q (R diag(w) R^T) Q^T + sigma^2 I,
    so every inner-ascent evaluation costs O(K^3) in the truncation K
    instead of O(m^3) in the labeled count m.  Matches
    _logml_and_grad_spectral exactly up to round-off.
    """

    def __init__(self, Vm, scale, mu, y, form):
        m = Vm.shape[0]
        self.scale = scale
        self.mu = mu
        self.coeff = 0.5 if form == "standard" else 1.0
        Q, self.R = np.linalg.qr(Vm)
        self.c = Q.T @ y
        # response energy outside the column space, explained by noise
        self.resid2 = max(float(y @ y - self.c @ self.c), 0.0)
        self.extra_dims = m - self.R.shape[0]
        self.const = -0.5 * m * np.log(2.0 * np.pi)

    def __call__(self, x, want_grad=True):
        t, sigma = x
        w = self.scale * np.exp(-self.mu * t)
        M = (self.R * w) @ self.R.T
        s2 = sigma ** 2
        M[np.diag_indices_from(M)] += s2
        chol, _ = _chol_with_jitter(M)
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol)))) \
            + self.extra_dims * np.log(s2)
        half = scipy.linalg.solve_triangular(chol, self.c, lower=True,
                                             check_finite=False)
        quad = float(half @ half) + self.resid2 / s2
        value = -self.coeff * quad - self.coeff * logdet + self.const
        if not want_grad:
            return value, None, None
        u = scipy.linalg.solve_triangular(chol.T, half, lower=False,
                                          check_finite=False)
        g = self.mu * w
        Mg = (self.R * g) @ self.R.T
        inv_chol = _tri_inverse(chol)
        Minv = inv_chol.T @ inv_chol
        quad_t = -float(u @ Mg @ u)                   # alpha^T dK/dt alpha
        trace_t = -float(np.sum(Minv * Mg))           # tr(K^{-1} dK/dt)
        alpha_sq = float(u @ u) + self.resid2 / s2 ** 2
        tr_inv = float(np.trace(Minv)) + self.extra_dims / s2
        d_dt = self.coeff * (quad_t - trace_t)
        d_dsigma = self.coeff * (2.0 * sigma) * (alpha_sq - tr_inv)
        return value, d_dt, d_dsigma


def logml_gradient(basis, t, sigma_noise, responses, mode="general",
                   form="standard"):
    """Gradient of the log marginal likelihood in (t, sigma_noise)."""
    y = np.asarray(responses, dtype=float).ravel()
    Vm, scale = _labeled_block_factors(basis, mode, y.shape[0])
    _, d_dt, d_ds = _logml_and_grad_spectral(
        Vm, scale, basis.mu, t, sigma_noise, y, form)
    return d_dt, d_ds


def _ascend_2d(value_grad, x0, bounds, max_iters=_MAX_ITERS):
    """Projected gradient ascent in log coordinates with backtracking.

    ``value_grad(x, want_grad)`` returns (f, g1, g2) at x (natural
    coordinates), with the gradient slots None when want_grad is false;
    ``bounds`` is ((lo1, hi1), (lo2, hi2)).  Returns (x_best, f_best).
    """
    lo = np.log([bounds[0][0], bounds[1][0]])
    hi = np.log([bounds[0][1], bounds[1][1]])
    z = np.clip(np.log(np.asarray(x0, dtype=float)), lo, hi)

    def eval_full(zv):
        x = np.exp(zv)
        f, g1, g2 = value_grad(x)
        # chain rule into log coordinates
        return f, np.array([g1 * x[0], g2 * x[1]])

    def eval_value(zv):
        return value_grad(np.exp(zv), want_grad=False)[0]

    f, grad = eval_full(z)
    for _ in range(max_iters):
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            break
        step = 1.0 / max(gnorm, 1.0)
        improved = False
        while step * gnorm > 1e-14:
            z_new = np.clip(z + step * grad, lo, hi)
            direction = z_new - z
            if not np.any(direction):
                break
            f_new = eval_value(z_new)
            if f_new >= f + _ARMIJO_C * float(grad @ direction):
                improved = f_new > f + _LOGML_TOL
                z, f = z_new, f_new
                grad = eval_full(z)[1]
                break
            step *= _ARMIJO_SHRINK
        if not improved:
            break
    return np.exp(z), f


def _inner_starts(t_bounds, sigma2_bounds, t_default, s2_default, count, rng):
    """Default start plus log-uniform random starts inside the box."""
    starts = [(np.clip(t_default, *t_bounds),
               np.sqrt(np.clip(s2_default, *sigma2_bounds)))]
    for _ in range(max(count - 1, 0)):
        t = np.exp(rng.uniform(np.log(t_bounds[0]), np.log(t_bounds[1])))
        s2 = np.exp(rng.uniform(np.log(sigma2_bounds[0]),
                                np.log(sigma2_bounds[1])))
        starts.append((t, np.sqrt(s2)))
    return starts


def fit(cloud, search):
    """Grid search over (bandwidth, truncation) with an inner gradient
    ascent over (diffusion time, noise) in every cell.

    Deterministic for a fixed config and seed.  Returns the best cell
    (lexicographic tie-break) with the per-cell evaluation trace.
    """
    m = cloud.labeled_count
    if m < 1:
        raise ValidationError("fit requires at least one labeled point")
    mode = search.mode
    if mode == "manifold" and cloud.intrinsic_dim is None \
            and search.intrinsic_dim is None:
        raise ValidationError("manifold mode requires intrinsic_dim")
    d = search.intrinsic_dim or cloud.intrinsic_dim
    offset = float(np.mean(cloud.responses)) if search.center_responses \
        else 0.0
    y = cloud.responses - offset
    rng = np.random.default_rng(search.seed)
    sq_dists = pairwise_sq_dists(cloud.points)
    kmax = max(search.k_grid)
    if kmax > cloud.n_points:
        raise ValidationError("truncation grid exceeds number of points")
    s2_default = float(np.var(y)) / 2.0 if m > 1 else 1.0
    sigma2_bounds = tuple(search.sigma2_bounds)
    t_bounds = tuple(search.t_bounds)

    trace = []
    best = None
    for eps2 in search.eps2_grid:
        eps = float(np.sqrt(eps2))
        graph = build_graph(cloud.points, eps, sq_dists=sq_dists)
        basis_full = eigendecompose(graph, kmax)
        if mode == "manifold":
            counts = ball_counts(cloud.points, eps, sq_dists=sq_dists)
            basis_full = density_normalize(basis_full, counts, d)
        for k in search.k_grid:
            basis = basis_full.head(k)
            Vm, scale = _labeled_block_factors(basis, mode, m)
            mu = basis.mu
            value_grad = _CellObjective(Vm, scale, mu, y,
                                        search.likelihood_form)
            t_default = 1.0 / mu[-1] if mu[-1] > 0 else t_bounds[1]
            cell_rng = np.random.default_rng(rng.integers(2 ** 63))
            cell_best = None
            for t0, s0 in _inner_starts(t_bounds, sigma2_bounds, t_default,
                                        s2_default, search.multistarts,
                                        cell_rng):
                (t_opt, s_opt), f_opt = _ascend_2d(
                    value_grad, (t0, s0),
                    (t_bounds, (np.sqrt(sigma2_bounds[0]),
                                np.sqrt(sigma2_bounds[1]))))
                if cell_best is None or f_opt > cell_best[1]:
                    cell_best = ((t_opt, s_opt), f_opt)
            (t_opt, s_opt), f_opt = cell_best
            hp = Hyperparams(eps, k, float(t_opt), float(s_opt), mode)
            trace.append((hp, f_opt))
            if best is None or f_opt > best[1] or (
                    f_opt == best[1] and
                    (eps, k, t_opt, s_opt) <
                    (best[0].epsilon, best[0].truncation,
                     best[0].t, best[0].sigma_noise)):
                best = (hp, f_opt)
    return FitReport(best=best[0], logml=best[1], trace=trace,
                     offset=offset)


def _sqexp_logml_and_grad(R, amplitude, sigma, y, form="standard",
                          want_grad=True):
    """Value and (d/dA, d/dsigma) for the squared-exponential baseline
    at fixed length scale; R is the unit-amplitude labeled kernel."""
    m = y.shape[0]
    Kff = amplitude * R + sigma ** 2 * np.eye(m)
    chol, _ = _chol_with_jitter(Kff)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    coeff = 0.5 if form == "standard" else 1.0
    if not want_grad:
        half = scipy.linalg.solve_triangular(chol, y, lower=True,
                                             check_finite=False)
        return -coeff * float(half @ half) - coeff * logdet \
            - 0.5 * m * np.log(2.0 * np.pi), None, None
    alpha = _chol_solve(chol, y)
    quad = float(y @ alpha)
    value = -coeff * quad - coeff * logdet - 0.5 * m * np.log(2.0 * np.pi)
    inv_chol = _tri_inverse(chol)
    Kinv = inv_chol.T @ inv_chol
    d_dA = coeff * float(alpha @ R @ alpha) - coeff * float(np.sum(Kinv * R))
    d_ds = coeff * 2.0 * sigma * float(alpha @ alpha) \
        - coeff * 2.0 * sigma * float(np.trace(Kinv))
    return value, d_dA, d_ds


def fit_baseline(cloud, search):
    """Length-scale grid with (amplitude, noise) ascent per cell."""
    m = cloud.labeled_count
    if m < 1:
        raise ValidationError("fit requires at least one labeled point")
    y = cloud.responses
    labeled = cloud.points[:m]
    sq_ll = pairwise_sq_dists(labeled)
    rng = np.random.default_rng(search.seed)
    amp_bounds = tuple(search.amplitude_bounds)
    sigma2_bounds = tuple(search.sigma2_bounds)
    a_default = float(np.var(y)) if m > 1 else 1.0
    s2_default = float(np.var(y)) / 2.0 if m > 1 else 1.0

    trace = []
    best = None
    for rho2 in search.rho2_grid:
        R = np.exp(sq_ll / (-float(rho2)))

        def value_grad(x, want_grad=True, R=R):
            return _sqexp_logml_and_grad(R, x[0], x[1], y,
                                         search.likelihood_form, want_grad)

        cell_rng = np.random.default_rng(rng.integers(2 ** 63))
        cell_best = None
        for a0, s0 in _inner_starts(amp_bounds, sigma2_bounds, a_default,
                                    s2_default, search.multistarts, cell_rng):
            (a_opt, s_opt), f_opt = _ascend_2d(
                value_grad, (a0, s0),
                (amp_bounds, (np.sqrt(sigma2_bounds[0]),
                              np.sqrt(sigma2_bounds[1]))))
            if cell_best is None or f_opt > cell_best[1]:
                cell_best = ((a_opt, s_opt), f_opt)
        (a_opt, s_opt), f_opt = cell_best
        hp = BaselineHyperparams(float(a_opt), float(np.sqrt(rho2)),
                                 float(s_opt))
        trace.append((hp, f_opt))
        if best is None or f_opt > best[1]:
            best = (hp, f_opt)
    return FitReport(best=best[0], logml=best[1], trace=trace)


def baseline_predict(cloud, hp, query_points, want="mean"):
    """Posterior of the squared-exponential baseline at query points."""
    m = cloud.labeled_count
    labeled = cloud.points[:m]
    pts = np.vstack([labeled, np.atleast_2d(query_points)])
    C = sqexp_covariance(pts, pts, hp.amplitude, hp.rho)
    return predict(C, cloud.responses, hp.sigma_noise, want=want)
