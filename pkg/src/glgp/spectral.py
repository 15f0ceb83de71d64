"""Spectral decomposition of the kernel-normalized Laplacian.

Eigenpairs are computed on the symmetric conjugate Asym and mapped back
through D^{-1/2}, which keeps the spectrum real and the eigenvectors
stably orthogonal.  Two normalizations are carried: plain l2, and the
inverse-density l2 weighting used in manifold mode.
"""

import logging
import math

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ValidationError
from .graph import pairwise_sq_dists

logger = logging.getLogger(__name__)

# up to this size a dense subset solve is used: it is exact, its cost
# is flat, and on the clustered spectra these kernels produce (many
# eigenvalues of Asym near 1 at small bandwidth) it beats ARPACK by an
# order of magnitude; the iterative solver only pays off beyond this
_DENSE_MAX_N = 4000


class SpectralBasis:
    """First K eigenpairs of -L = (I - A)/eps^2, ascending.

    Attributes
    ----------
    epsilon : float
    mu : ndarray of shape (K,)
        Nonnegative eigenvalues, ascending.
    vec_l2 : ndarray of shape (N, K)
        Eigenvectors of A (columns), each l2-normalized.
    vec_density : ndarray of shape (N, K) or None
        Inverse-density-normalized eigenvectors (manifold mode).
    ball_counts : ndarray of shape (N,) or None
        Epsilon-ball occupancy counts backing the density weights.
    intrinsic_dim : int or None
    """

    def __init__(self, epsilon, mu, vec_l2, vec_density=None,
                 ball_counts=None, intrinsic_dim=None):
        self.epsilon = float(epsilon)
        self.mu = mu
        self.vec_l2 = vec_l2
        self.vec_density = vec_density
        self.ball_counts = ball_counts
        self.intrinsic_dim = intrinsic_dim

    @property
    def truncation(self):
        return self.mu.shape[0]

    @property
    def n_points(self):
        return self.vec_l2.shape[0]

    def head(self, k):
        """Basis restricted to the k smallest eigenpairs."""
        if k > self.truncation:
            raise ValidationError(f"requested {k} pairs, have {self.truncation}")
        vd = None if self.vec_density is None else self.vec_density[:, :k]
        return SpectralBasis(self.epsilon, self.mu[:k], self.vec_l2[:, :k],
                             vd, self.ball_counts, self.intrinsic_dim)

    def vectors(self, mode):
        if mode == "general":
            return self.vec_l2
        if mode == "manifold":
            if self.vec_density is None:
                raise ValidationError(
                    "manifold mode requires density-normalized vectors; "
                    "run density_normalize first")
            return self.vec_density
        raise ValidationError(f"unknown mode {mode!r}")


def _fix_signs(vecs):
    """Make the first entry with magnitude > 1e-12 positive, per column."""
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size and col[idx[0]] < 0:
            vecs[:, j] = -col
    return vecs


def eigendecompose(graph, k):
    """First k eigenpairs of -L, eigenvectors mapped to A and l2-normalized."""
    n = graph.n_points
    if not 1 <= k <= n:
        raise ValidationError(f"truncation {k} out of range 1..{n}")
    eps2 = graph.epsilon ** 2
    dense = n <= _DENSE_MAX_N or k > n // 10
    if not dense:
        try:
            ncv = min(n, max(2 * k + 1, 60))
            lam, U = scipy.sparse.linalg.eigsh(graph.Asym, k=k, which="LA",
                                               ncv=ncv)
            order = np.argsort(lam)[::-1]
            lam = lam[order]
            U = U[:, order]
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            # clustered spectra stall ARPACK; the dense path always works
            # at the sizes this package targets
            logger.warning("iterative eigensolver converged only %d/%d "
                           "pairs; falling back to a dense solve",
                           len(exc.eigenvalues), k)
            dense = True
    if dense:
        lam, U = scipy.linalg.eigh(graph.Asym, subset_by_index=[n - k, n - 1])
        lam = lam[::-1]
        U = U[:, ::-1]
    # lam are the largest eigenvalues of Asym; mu = (1 - lam)/eps^2
    mu = np.maximum((1.0 - lam) / eps2, 0.0)
    vec = U / np.sqrt(graph.Ddiag)[:, None]
    vec /= np.linalg.norm(vec, axis=0)
    _fix_signs(vec)
    order = np.argsort(mu, kind="stable")
    return SpectralBasis(graph.epsilon, mu[order], vec[:, order])


def ball_counts(points, epsilon, sq_dists=None):
    """Number of sample points strictly within epsilon of each point.

    Open ball, self included, so every count is >= 1.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    if sq_dists is None:
        sq_dists = pairwise_sq_dists(np.atleast_2d(np.asarray(points, float)))
    return (sq_dists < epsilon ** 2).sum(axis=1)


def sphere_surface_area(d):
    """Surface measure of the unit sphere S^{d-1}: 2 pi^{d/2} / Gamma(d/2)."""
    if d < 1:
        raise ValidationError("dimension must be >= 1")
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def density_normalize(basis, counts, d):
    """Attach inverse-density-normalized eigenvectors to a basis.

    Each l2 eigenvector is rescaled by its norm under the weights
    (|S^{d-1}| eps^d / d) / counts, an epsilon-ball density estimate.
    Directions are unchanged.
    """
    counts = np.asarray(counts)
    if counts.shape[0] != basis.n_points:
        raise ValidationError("counts length does not match basis")
    if np.any(counts < 1):
        raise ValidationError("every epsilon-ball count must be >= 1")
    d = int(d)
    factor = sphere_surface_area(d) * basis.epsilon ** d / d
    weights = factor / counts
    norms = np.sqrt(weights @ basis.vec_l2 ** 2)
    vec_density = basis.vec_l2 / norms[None, :]
    return SpectralBasis(basis.epsilon, basis.mu, basis.vec_l2,
                         vec_density=vec_density, ball_counts=counts,
                         intrinsic_dim=d)
