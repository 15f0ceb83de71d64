"""Graph-Laplacian Gaussian process regression.

Learns a GP covariance from the spectrum of a kernel-normalized graph
Laplacian over labeled plus unlabeled inputs, predicts at new points via
a row-stochastic Nystrom extension, and selects hyperparameters by
marginal likelihood.
"""

from .covariance import (extension_matrix, glgp_covariance,
                         nystrom_covariance, sqexp_covariance)
from .errors import GlgpError, NumericalError, ParseError, ValidationError
from .estimators import GraphLaplacianGP, SquaredExponentialGP
from .gp import (Hyperparams, SearchConfig, fit, fit_baseline,
                 log_marginal_likelihood, logml_gradient, predict)
from .graph import build_graph, gaussian_kernel, perturb_points
from .pointcloud import PointCloud, load_csv, save_csv
from .spectral import ball_counts, density_normalize, eigendecompose

__version__ = "0.1.0"

__all__ = [
    "GraphLaplacianGP", "SquaredExponentialGP", "PointCloud", "SearchConfig",
    "Hyperparams", "GlgpError", "ValidationError", "ParseError",
    "NumericalError", "build_graph", "gaussian_kernel", "perturb_points",
    "eigendecompose", "ball_counts", "density_normalize", "glgp_covariance",
    "nystrom_covariance", "extension_matrix", "sqexp_covariance", "predict",
    "log_marginal_likelihood", "logml_gradient", "fit", "fit_baseline",
    "load_csv", "save_csv",
]
