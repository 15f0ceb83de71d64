"""Point-cloud data model: labeled-first ordering, CSV/JSON ingestion.

Points are stored labeled-first: indices 0..m-1 carry responses, indices
m..m+n-1 are unlabeled.  All matrices downstream rely on this block
structure, so files with interleaved rows are stably reordered on load.
"""

import csv
import json
import logging
import math

import numpy as np

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)


class PointCloud:
    """Immutable set of D-dimensional points with a labeled/unlabeled split.

    Parameters
    ----------
    points : array-like of shape (m + n, D)
        Ambient coordinates, labeled points first.
    labeled_count : int
        Number m of labeled points (the first m rows).
    responses : array-like of shape (m,)
        Observed responses for the labeled points, in row order.
    intrinsic_dim : int, optional
        Intrinsic dimension d; required only for manifold-mode
        density normalization.
    """

    def __init__(self, points, labeled_count, responses, intrinsic_dim=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        responses = np.asarray(responses, dtype=float).ravel()
        if points.size == 0:
            raise ValidationError("empty point cloud")
        if points.ndim != 2:
            raise ValidationError("points must be a 2-d array")
        if not np.all(np.isfinite(points)):
            raise ValidationError("points contain non-finite coordinates")
        m = int(labeled_count)
        if m < 0 or m > points.shape[0]:
            raise ValidationError(
                f"labeled_count {m} out of range for {points.shape[0]} points")
        if responses.shape[0] != m:
            raise ValidationError(
                f"got {responses.shape[0]} responses for {m} labeled points")
        if not np.all(np.isfinite(responses)):
            raise ValidationError("responses contain non-finite values")
        if points.shape[0] < 2:
            raise ValidationError("need at least 2 points")
        if intrinsic_dim is not None:
            intrinsic_dim = int(intrinsic_dim)
            if intrinsic_dim < 1:
                raise ValidationError("intrinsic_dim must be >= 1")
        self._points = points
        self._points.setflags(write=False)
        self._responses = responses
        self._responses.setflags(write=False)
        self._m = m
        self._intrinsic_dim = intrinsic_dim

    @property
    def points(self):
        return self._points

    @property
    def responses(self):
        return self._responses

    @property
    def labeled_count(self):
        return self._m

    @property
    def unlabeled_count(self):
        return self.n_points - self._m

    @property
    def n_points(self):
        return self._points.shape[0]

    @property
    def dim_ambient(self):
        return self._points.shape[1]

    @property
    def intrinsic_dim(self):
        return self._intrinsic_dim

    def split(self):
        """Return (labeled points, responses, unlabeled points) views."""
        m = self._m
        return self._points[:m], self._responses, self._points[m:]

    def __repr__(self):
        return (f"PointCloud(m={self._m}, n={self.unlabeled_count}, "
                f"D={self.dim_ambient}, d={self._intrinsic_dim})")


def load_csv(path):
    """Read a point cloud from CSV.

    Expected header ``x0,...,x{D-1},y,labeled`` with ``labeled`` in {0,1}.
    Labeled rows must carry a finite y; interleaved rows are stably
    reordered labeled-first (a warning reports the remapping).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("missing header row") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[-1] != "labeled" or header[-2] != "y":
            raise ParseError("header must end with columns 'y,labeled'")
        dim = len(header) - 2
        for j in range(dim):
            if header[j] != f"x{j}":
                raise ParseError(f"expected coordinate column 'x{j}', "
                                 f"got '{header[j]}'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != dim + 2:
                raise ParseError(
                    f"expected {dim + 2} fields, got {len(row)}", line=lineno)
            try:
                coords = [float(c) for c in row[:dim]]
            except ValueError:
                raise ParseError("non-numeric coordinate", line=lineno) from None
            flag = row[-1].strip()
            if flag not in ("0", "1"):
                raise ParseError(f"labeled flag must be 0 or 1, got '{flag}'",
                                 line=lineno)
            ystr = row[-2].strip()
            y = None
            if ystr:
                try:
                    y = float(ystr)
                except ValueError:
                    raise ParseError("non-numeric response", line=lineno) from None
            if flag == "1" and (y is None or not math.isfinite(y)):
                raise ParseError("labeled row without finite response",
                                 line=lineno)
            rows.append((coords, y, flag == "1"))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    order = sorted(range(len(rows)), key=lambda i: not rows[i][2])
    if order != list(range(len(rows))):
        logger.warning("%s: reordered rows labeled-first (permutation %s)",
                       path, order)
    rows = [rows[i] for i in order]
    points = np.array([r[0] for r in rows])
    labeled = [r for r in rows if r[2]]
    responses = np.array([r[1] for r in labeled])
    return PointCloud(points, len(labeled), responses)


def save_csv(cloud, path):
    """Write a point cloud in the format accepted by :func:`load_csv`."""
    dim = cloud.dim_ambient
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(dim)] + ["y", "labeled"])
        for i in range(cloud.n_points):
            coords = [repr(float(v)) for v in cloud.points[i]]
            if i < cloud.labeled_count:
                writer.writerow(coords + [repr(float(cloud.responses[i])), 1])
            else:
                writer.writerow(coords + ["", 0])


def load_json(path):
    """Read a point cloud from the JSON alternative format."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        points = data["points"]
        m = data["labeled_count"]
        responses = data["responses"]
    except KeyError as exc:
        raise ValidationError(f"{path}: missing field {exc}") from None
    cloud = PointCloud(points, m, responses,
                       intrinsic_dim=data.get("intrinsic_dim"))
    if cloud.dim_ambient != data.get("dim", cloud.dim_ambient):
        raise ValidationError(f"{path}: dim field disagrees with points")
    return cloud


def save_json(cloud, path):
    # json emits shortest-roundtrip reprs, so doubles survive exactly
    data = {
        "dim": cloud.dim_ambient,
        "points": cloud.points.tolist(),
        "responses": cloud.responses.tolist(),
        "labeled_count": cloud.labeled_count,
    }
    if cloud.intrinsic_dim is not None:
        data["intrinsic_dim"] = cloud.intrinsic_dim
    with open(path, "w") as fh:
        json.dump(data, fh)


def split(cloud):
    """Functional alias for :meth:`PointCloud.split`."""
    return cloud.split()
