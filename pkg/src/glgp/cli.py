"""Command-line front end.

Subcommands: generate, fit, predict, extend, spectrum, covrow,
benchmark.  Exit codes: 0 success, 1 validation error, 2 numerical
failure.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments, model_io, pointcloud
from .covariance import extension_matrix, glgp_covariance, nystrom_covariance
from .errors import NumericalError, ValidationError
from .gp import SearchConfig, fit, predict
from .graph import build_graph
from .spectral import eigendecompose


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="glgp",
        description="Graph-Laplacian Gaussian process regression")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--experiment", required=True,
                   choices=experiments.EXPERIMENTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fit", help="select hyperparameters and save a model")
    p.add_argument("--data", required=True)
    p.add_argument("--search", help="search config JSON")
    p.add_argument("--mode", choices=("general", "manifold"))
    p.add_argument("--intrinsic-dim", type=int)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--dump-graph", help="directory for W/A CSV debug dumps")

    p = sub.add_parser("predict", help="posterior mean at model base points")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True,
                   help="CSV whose points must belong to the model base set")
    p.add_argument("--out", required=True)

    p = sub.add_parser("extend", help="predict at new points via extension")
    p.add_argument("--model", required=True)
    p.add_argument("--new-points", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("spectrum", help="dump Laplacian eigenpairs as CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--eps2", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("covrow", help="dump one covariance row as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("benchmark", help="replicate an experiment")
    p.add_argument("--experiment", required=True,
                   choices=experiments.EXPERIMENTS)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="result JSON path")
    return parser


def _write_truth_csv(path, truth):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["truth"])
        for v in truth:
            writer.writerow([repr(float(v))])


def _write_pred_csv(path, mean):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prediction"])
        for v in mean:
            writer.writerow([repr(float(v))])


def _cmd_generate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = experiments.ExperimentSpec(args.experiment, args.seed)
    if args.experiment == "nystrom_spiral":
        data = experiments.gen_nystrom_spiral(args.seed)
        pointcloud.save_csv(data["base_cloud"], out / "base.csv")
        _write_truth_csv(out / "base_truth.csv", data["base_truth"])
        pointcloud.save_csv(data["full_cloud"], out / "points.csv")
        _write_truth_csv(out / "truth.csv", data["full_truth"])
    else:
        cloud, truth = experiments._generate(spec)
        pointcloud.save_csv(cloud, out / "points.csv")
        _write_truth_csv(out / "truth.csv", truth)
    return 0


def _cmd_fit(args):
    cloud = pointcloud.load_csv(args.data)
    if args.search:
        search = SearchConfig.from_json(args.search)
    else:
        search = SearchConfig()
    if args.mode:
        search.mode = args.mode
    if args.intrinsic_dim:
        search.intrinsic_dim = args.intrinsic_dim
    if search.mode == "manifold" and search.intrinsic_dim is not None:
        cloud = pointcloud.PointCloud(
            cloud.points, cloud.labeled_count, cloud.responses,
            intrinsic_dim=search.intrinsic_dim)
    report = fit(cloud, search)
    hp = report.best
    graph, basis, cov = experiments.build_model(cloud, hp)
    if args.dump_graph:
        dump = Path(args.dump_graph)
        dump.mkdir(parents=True, exist_ok=True)
        np.savetxt(dump / "W.csv", graph.W, delimiter=",")
        np.savetxt(dump / "A.csv", graph.A, delimiter=",")
    pred = predict(cov, cloud.responses - report.offset, hp.sigma_noise,
                   want="mean")
    model_io.save_model(args.out, cloud, hp, basis,
                        nystrom_scale=search.nystrom_scale,
                        predictions=pred.mean + report.offset,
                        response_offset=report.offset)
    print(f"best logml {report.logml:.6f} at eps^2="
          f"{hp.epsilon ** 2:.6g} K={hp.truncation} t={hp.t:.6g} "
          f"sigma={hp.sigma_noise:.6g}")
    return 0


def _match_base_indices(base_points, query_points):
    """Exact-match rows of query_points among base_points."""
    index = {tuple(row): i for i, row in enumerate(base_points)}
    idx = []
    for row in np.atleast_2d(query_points):
        key = tuple(row)
        if key not in index:
            raise ValidationError(
                "predict requires query points from the model base set; "
                "use 'extend' for new points")
        idx.append(index[key])
    return np.array(idx, dtype=int)


def _cmd_predict(args):
    cloud, hp, basis, extras = model_io.load_model(args.model)
    query = pointcloud.load_csv(args.data)
    idx = _match_base_indices(cloud.points, query.points)
    cov = glgp_covariance(basis, hp.t, hp.mode)
    m = cloud.labeled_count
    sel = np.concatenate([np.arange(m), idx])
    H = cov.H[np.ix_(sel, sel)]
    offset = extras["response_offset"]
    pred = predict(H, cloud.responses - offset, hp.sigma_noise, want="mean")
    _write_pred_csv(args.out, pred.mean + offset)
    return 0


def _cmd_extend(args):
    cloud, hp, basis, extras = model_io.load_model(args.model)
    new = pointcloud.load_csv(args.new_points)
    ext = extension_matrix(cloud.points, new.points, hp.epsilon)
    cov = nystrom_covariance(ext, basis, hp.t, hp.mode,
                             scale=extras["nystrom_scale"])
    n = cloud.n_points
    m = cloud.labeled_count
    sel = np.concatenate([np.arange(m),
                          np.arange(n, n + new.n_points)])
    H = cov.H[np.ix_(sel, sel)]
    offset = extras["response_offset"]
    pred = predict(H, cloud.responses - offset, hp.sigma_noise, want="mean")
    _write_pred_csv(args.out, pred.mean + offset)
    return 0


def _cmd_spectrum(args):
    cloud = pointcloud.load_csv(args.data)
    eps = float(np.sqrt(args.eps2))
    graph = build_graph(cloud.points, eps)
    basis = eigendecompose(graph, args.k)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mu"] + [f"v{i}" for i in range(basis.n_points)])
        for i in range(basis.truncation):
            writer.writerow([repr(float(basis.mu[i]))]
                            + [repr(float(v)) for v in basis.vec_l2[:, i]])
    return 0


def _cmd_covrow(args):
    cloud, hp, basis, extras = model_io.load_model(args.model)
    cov = glgp_covariance(basis, hp.t, hp.mode)
    if not 0 <= args.index < cov.H.shape[0]:
        raise ValidationError(f"row index {args.index} out of range")
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["covariance"])
        for v in cov.H[args.index]:
            writer.writerow([repr(float(v))])
    return 0


def _cmd_benchmark(args):
    seeds = [args.seed + i for i in range(args.replicates)]
    results, summary = experiments.replicate(args.experiment, seeds)
    payload = {
        "schema": 1,
        "summary": summary,
        "replicates": [r.summary() for r in results],
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=1)
    print(json.dumps(summary, indent=1))
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "extend": _cmd_extend,
    "spectrum": _cmd_spectrum,
    "covrow": _cmd_covrow,
    "benchmark": _cmd_benchmark,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
