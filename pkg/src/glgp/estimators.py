"""Scikit-learn style estimators wrapping the functional core.

The graph-spectral model is semi-supervised: pass every point (labeled
and unlabeled) to ``fit``, marking unlabeled targets with NaN.  The
unlabeled rows shape the learned covariance even though they carry no
response.  ``predict`` handles arbitrary query points; out-of-sample
points go through the row-stochastic extension of the training graph,
which restricts exactly to the in-sample covariance on training rows.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .covariance import extension_matrix, nystrom_covariance
from .errors import ValidationError
from .gp import SearchConfig, baseline_predict, fit, fit_baseline, predict
from .pointcloud import PointCloud


class GraphLaplacianGP(BaseEstimator, RegressorMixin):
    """Semi-supervised GP regression with a graph-spectral covariance.

    Parameters mirror :class:`glgp.gp.SearchConfig`; any left as None
    falls back to the config defaults.
    """

    def __init__(self, eps2_grid=None, k_grid=None, t_bounds=None,
                 sigma2_bounds=None, mode="general", intrinsic_dim=None,
                 multistarts=3, seed=0, likelihood_form="standard",
                 nystrom_scale="consistent"):
        self.eps2_grid = eps2_grid
        self.k_grid = k_grid
        self.t_bounds = t_bounds
        self.sigma2_bounds = sigma2_bounds
        self.mode = mode
        self.intrinsic_dim = intrinsic_dim
        self.multistarts = multistarts
        self.seed = seed
        self.likelihood_form = likelihood_form
        self.nystrom_scale = nystrom_scale

    def _search_config(self):
        kwargs = dict(mode=self.mode, intrinsic_dim=self.intrinsic_dim,
                      multistarts=self.multistarts, seed=self.seed,
                      likelihood_form=self.likelihood_form,
                      nystrom_scale=self.nystrom_scale)
        for name in ("eps2_grid", "k_grid", "t_bounds", "sigma2_bounds"):
            value = getattr(self, name)
            if value is not None:
                kwargs[name] = value
        return SearchConfig(**kwargs)

    def fit(self, X, y):
        """Fit on all points; NaN entries of y mark unlabeled points."""
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValidationError("X and y disagree in length")
        labeled = np.isfinite(y)
        order = np.concatenate([np.flatnonzero(labeled),
                                np.flatnonzero(~labeled)])
        cloud = PointCloud(X[order], int(labeled.sum()), y[labeled],
                           intrinsic_dim=self.intrinsic_dim)
        search = self._search_config()
        report = fit(cloud, search)
        from .experiments import build_model
        _, basis, cov = build_model(cloud, report.best)
        self.cloud_ = cloud
        self.report_ = report
        self.hyperparams_ = report.best
        self.logml_ = report.logml
        self.offset_ = report.offset
        self.basis_ = basis
        self.covariance_ = cov
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, return_std=False):
        """Posterior mean (and optionally sd) at arbitrary query points."""
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError("query dimension differs from training")
        hp = self.hyperparams_
        ext = extension_matrix(self.cloud_.points, X, hp.epsilon)
        cov = nystrom_covariance(ext, self.basis_, hp.t, hp.mode,
                                 scale=self.nystrom_scale)
        n = self.cloud_.n_points
        m = self.cloud_.labeled_count
        idx = np.concatenate([np.arange(m), np.arange(n, n + X.shape[0])])
        H = cov.H[np.ix_(idx, idx)]
        pred = predict(H, self.cloud_.responses - self.offset_,
                       hp.sigma_noise,
                       want="var" if return_std else "mean")
        mean = pred.mean + self.offset_
        if return_std:
            return mean, np.sqrt(np.maximum(pred.var, 0.0))
        return mean


class SquaredExponentialGP(BaseEstimator, RegressorMixin):
    """Baseline GP with an ambient squared-exponential covariance."""

    def __init__(self, rho2_grid=None, amplitude_bounds=None,
                 sigma2_bounds=None, multistarts=3, seed=0,
                 likelihood_form="standard"):
        self.rho2_grid = rho2_grid
        self.amplitude_bounds = amplitude_bounds
        self.sigma2_bounds = sigma2_bounds
        self.multistarts = multistarts
        self.seed = seed
        self.likelihood_form = likelihood_form

    def _search_config(self):
        kwargs = dict(multistarts=self.multistarts, seed=self.seed,
                      likelihood_form=self.likelihood_form)
        for name in ("rho2_grid", "amplitude_bounds", "sigma2_bounds"):
            value = getattr(self, name)
            if value is not None:
                kwargs[name] = value
        return SearchConfig(**kwargs)

    def fit(self, X, y):
        """Fit on labeled data; NaN targets are simply dropped."""
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValidationError("X and y disagree in length")
        labeled = np.isfinite(y)
        order = np.concatenate([np.flatnonzero(labeled),
                                np.flatnonzero(~labeled)])
        cloud = PointCloud(X[order], int(labeled.sum()), y[labeled])
        report = fit_baseline(cloud, self._search_config())
        self.cloud_ = cloud
        self.report_ = report
        self.hyperparams_ = report.best
        self.logml_ = report.logml
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "hyperparams_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError("query dimension differs from training")
        pred = baseline_predict(self.cloud_, self.hyperparams_, X,
                                want="var" if return_std else "mean")
        if return_std:
            return pred.mean, np.sqrt(np.maximum(pred.var, 0.0))
        return pred.mean
