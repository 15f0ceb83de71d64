"""Serialization of fitted models.

A model file must allow later out-of-sample extension, which needs the
base points and kernel degrees, not just the covariance; so it stores
the hyperparameters, eigenpairs, base points and responses.
"""

import json

import numpy as np

from .errors import ValidationError
from .gp import Hyperparams
from .spectral import SpectralBasis

SCHEMA = 1


def save_model(path, cloud, hp, basis, nystrom_scale="consistent",
               predictions=None, response_offset=0.0):
    data = {
        "schema": SCHEMA,
        "mode": hp.mode,
        "epsilon": hp.epsilon,
        "truncation": hp.truncation,
        "t": hp.t,
        "sigma_noise": hp.sigma_noise,
        "nystrom_scale": nystrom_scale,
        "response_offset": float(response_offset),
        "labeled_count": cloud.labeled_count,
        "points": cloud.points.tolist(),
        "responses": cloud.responses.tolist(),
        "intrinsic_dim": cloud.intrinsic_dim,
        "mu": basis.mu.tolist(),
        "vec_l2": basis.vec_l2.tolist(),
    }
    if basis.vec_density is not None:
        data["vec_density"] = basis.vec_density.tolist()
        data["ball_counts"] = np.asarray(basis.ball_counts).tolist()
    if predictions is not None:
        data["in_sample_predictions"] = np.asarray(predictions).tolist()
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_model(path):
    from .pointcloud import PointCloud
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema") != SCHEMA:
        raise ValidationError(f"{path}: unsupported model schema "
                              f"{data.get('schema')!r}")
    cloud = PointCloud(data["points"], data["labeled_count"],
                       data["responses"],
                       intrinsic_dim=data.get("intrinsic_dim"))
    hp = Hyperparams(data["epsilon"], data["truncation"], data["t"],
                     data["sigma_noise"], data["mode"])
    vec_density = None
    counts = None
    if "vec_density" in data:
        vec_density = np.array(data["vec_density"])
        counts = np.array(data["ball_counts"])
    basis = SpectralBasis(data["epsilon"], np.array(data["mu"]),
                          np.array(data["vec_l2"]), vec_density=vec_density,
                          ball_counts=counts,
                          intrinsic_dim=data.get("intrinsic_dim"))
    extras = {
        "nystrom_scale": data.get("nystrom_scale", "consistent"),
        "response_offset": data.get("response_offset", 0.0),
        "in_sample_predictions": data.get("in_sample_predictions"),
    }
    return cloud, hp, basis, extras
