"""Kernel-normalized graph Laplacian over a point cloud.

The affinity divides the Gaussian kernel by the kernel degrees of both
endpoints (the density-correcting normalization used in diffusion maps),
then row-normalizes into a transition matrix A.  The Laplacian
(A - I)/eps^2 is kept implicit; spectral work goes through the symmetric
conjugate Asym = D^{-1/2} W D^{-1/2}.
"""

import numpy as np

from .errors import ValidationError


class KernelGraph:
    """Matrices derived from a point set at bandwidth epsilon.

    Attributes
    ----------
    epsilon : float
        Kernel bandwidth.
    q : ndarray of shape (N,)
        Kernel degrees (row sums of the raw Gaussian Gram matrix,
        self-term included, so q_i >= 1).
    W : ndarray of shape (N, N)
        Symmetric degree-normalized affinity.
    Ddiag : ndarray of shape (N,)
        Row sums of W.
    A : ndarray of shape (N, N)
        Row-stochastic transition matrix D^{-1} W.
    Asym : ndarray of shape (N, N)
        Symmetric conjugate D^{-1/2} W D^{-1/2}, similar to A.
    """

    def __init__(self, epsilon, q, W, Ddiag, A, Asym):
        self.epsilon = float(epsilon)
        self.q = q
        self.W = W
        self.Ddiag = Ddiag
        self.A = A
        self.Asym = Asym

    @property
    def n_points(self):
        return self.W.shape[0]


def gaussian_kernel(x, xp, epsilon):
    """Gaussian kernel exp(-||x - x'||^2 / (4 eps^2)) in (0, 1]."""
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape:
        raise ValidationError(
            f"dimension mismatch: {x.shape} vs {xp.shape}")
    d2 = float(np.sum((x - xp) ** 2))
    return float(np.exp(-d2 / (4.0 * epsilon ** 2)))


def pairwise_sq_dists(points, others=None):
    """Squared Euclidean distance matrix, clipped at 0.

    With ``others`` given, returns the |points| x |others| cross matrix.
    """
    points = np.asarray(points, dtype=float)
    others = points if others is None else np.asarray(others, dtype=float)
    aa = np.sum(points ** 2, axis=1)
    bb = np.sum(others ** 2, axis=1)
    d2 = aa[:, None] + bb[None, :] - 2.0 * points @ others.T
    np.maximum(d2, 0.0, out=d2)
    if others is points:
        np.fill_diagonal(d2, 0.0)
    return d2


def build_graph(points, epsilon, sq_dists=None):
    """Construct the kernel graph for a point set.

    ``sq_dists`` lets callers reuse a precomputed squared-distance matrix
    when sweeping bandwidths over a fixed cloud.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if n < 2:
        raise ValidationError("need at least 2 points")
    if not np.all(np.isfinite(points)):
        raise ValidationError("points contain non-finite coordinates")
    if sq_dists is None:
        sq_dists = pairwise_sq_dists(points)
    kern = np.exp(sq_dists / (-4.0 * epsilon ** 2))
    q = kern.sum(axis=1)
    W = kern / np.outer(q, q)
    Ddiag = W.sum(axis=1)
    A = W / Ddiag[:, None]
    inv_sqrt = 1.0 / np.sqrt(Ddiag)
    Asym = W * np.outer(inv_sqrt, inv_sqrt)
    Asym = 0.5 * (Asym + Asym.T)
    return KernelGraph(epsilon, q, W, Ddiag, A, Asym)


def neg_laplacian(graph):
    """Materialize -L = (I - A)/eps^2 (diagnostics and tests only)."""
    n = graph.n_points
    return (np.eye(n) - graph.A) / graph.epsilon ** 2


def perturb_points(points, delta, seed):
    """Displace each point by an independent vector of norm < delta.

    Directions are uniform on the sphere, radii uniform in [0, delta).
    Deterministic for a fixed seed.
    """
    if delta < 0:
        raise ValidationError("delta must be nonnegative")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if delta == 0:
        return points.copy()
    rng = np.random.default_rng(seed)
    n, dim = points.shape
    dirs = rng.standard_normal((n, dim))
    norms = np.linalg.norm(dirs, axis=1)
    # a zero Gaussian draw has probability 0; fall back to a fixed axis
    bad = norms < 1e-300
    if np.any(bad):
        dirs[bad] = 0.0
        dirs[bad, 0] = 1.0
        norms[bad] = 1.0
    radii = delta * rng.random(n)
    return points + dirs * (radii / norms)[:, None]
