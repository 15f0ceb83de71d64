"""Covariance assembly: graph-spectral covariances, their out-of-sample
Nystrom extension, and the squared-exponential baseline.

General mode uses l2-normalized eigenvectors scaled by the sample count;
manifold mode uses inverse-density-normalized eigenvectors with no count
factor (the density weighting absorbs it).  The two coincide under
uniform sampling density.
"""

import numpy as np

from .errors import NumericalError, ValidationError
from .graph import pairwise_sq_dists

MODES = ("general", "manifold")
NYSTROM_SCALES = ("consistent", "as_written")


class GlgpCovariance:
    """A rank-<=K covariance matrix together with its provenance."""

    def __init__(self, mode, epsilon, truncation, t, H, basis):
        self.mode = mode
        self.epsilon = float(epsilon)
        self.truncation = int(truncation)
        self.t = float(t)
        self.H = H
        self.basis = basis


class NystromExtension:
    """Row-stochastic extension matrix from a base cloud to extra points."""

    def __init__(self, E, epsilon, n_base):
        self.E = E
        self.epsilon = float(epsilon)
        self.n_base = int(n_base)

    @property
    def n_extra(self):
        return self.E.shape[0] - self.n_base


def _mode_scale(mode, n_points):
    if mode == "general":
        return float(n_points)
    if mode == "manifold":
        return 1.0
    raise ValidationError(f"unknown mode {mode!r}")


def glgp_covariance(basis, t, mode="general"):
    """Heat-weighted sum of eigenvector outer products.

    general:  H = N * sum_i exp(-mu_i t) v_i v_i^T  (l2 vectors)
    manifold: H = sum_i exp(-mu_i t) v_i v_i^T      (density vectors)
    """
    if t < 0:
        raise ValidationError("diffusion time t must be nonnegative")
    vec = basis.vectors(mode)
    scale = _mode_scale(mode, basis.n_points)
    weights = scale * np.exp(-basis.mu * t)
    H = (vec * weights) @ vec.T
    H = 0.5 * (H + H.T)
    return GlgpCovariance(mode, basis.epsilon, basis.truncation, t, H, basis)


def extension_matrix(base_points, new_points, epsilon):
    """Extension rows for base points followed by new points.

    Kernel degrees are always summed against the base set only, so the
    first n_base rows reproduce the base transition matrix exactly and
    each new row depends only on the base set and that one point.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    base = np.atleast_2d(np.asarray(base_points, dtype=float))
    if base.shape[0] < 2:
        raise ValidationError("need at least 2 base points")
    new = np.asarray(new_points, dtype=float)
    if new.size == 0:
        new = np.empty((0, base.shape[1]))
    new = np.atleast_2d(new)
    if new.shape[1] != base.shape[1]:
        raise ValidationError("base and new points disagree in dimension")
    allpts = np.vstack([base, new])
    kern = np.exp(pairwise_sq_dists(allpts, base) / (-4.0 * epsilon ** 2))
    q_base = kern[: base.shape[0]].sum(axis=1)
    q_rows = kern.sum(axis=1)
    E = kern / q_base[None, :] / q_rows[:, None]
    E /= E.sum(axis=1)[:, None]
    return NystromExtension(E, epsilon, base.shape[0])


def nystrom_covariance(ext, basis, t, mode="general", scale="consistent"):
    """Extend a graph-spectral covariance to base+new points.

    The inner weights divide by (1 - eps^2 mu)^2 so that the base-block
    restriction reproduces the unextended covariance exactly.  With
    scale="as_written" the general-mode sample-count factor is dropped
    (the restriction then equals H / N).
    """
    if t < 0:
        raise ValidationError("diffusion time t must be nonnegative")
    if scale not in NYSTROM_SCALES:
        raise ValidationError(f"unknown nystrom scale {scale!r}")
    if ext.n_base != basis.n_points:
        raise ValidationError("extension and basis disagree on base size")
    vec = basis.vectors(mode)
    eps2 = basis.epsilon ** 2
    shrink = 1.0 - eps2 * basis.mu
    bad = np.abs(shrink) < 1e-10
    if np.any(bad):
        raise NumericalError(
            "near-singular extension: |1 - eps^2 mu| < 1e-10 for "
            f"eigenpair(s) {np.flatnonzero(bad).tolist()}")
    c = _mode_scale(mode, basis.n_points) if scale == "consistent" else \
        _mode_scale("manifold", basis.n_points)
    weights = c * np.exp(-basis.mu * t) / shrink ** 2
    G = ext.E @ vec
    H = (G * weights) @ G.T
    H = 0.5 * (H + H.T)
    cov = GlgpCovariance(mode, basis.epsilon, basis.truncation, t, H, basis)
    cov.extension = ext
    return cov


def sqexp_covariance(points_a, points_b, amplitude, rho):
    """Squared-exponential covariance A * exp(-||x - x'||^2 / rho^2)."""
    if amplitude <= 0 or rho <= 0:
        raise ValidationError("amplitude and rho must be positive")
    a = np.atleast_2d(np.asarray(points_a, dtype=float))
    b = np.atleast_2d(np.asarray(points_b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValidationError("point sets disagree in dimension")
    return amplitude * np.exp(pairwise_sq_dists(a, b) / (-rho ** 2))
