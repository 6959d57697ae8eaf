"""Command-line front end: ``mmls denoise|project|sigma|study``."""

import argparse
import csv
import io
import os
import sys
from dataclasses import replace

import numpy as np

from .cloud import PointCloud
from .cloudio import format_cloud, format_value, read_cloud
from .errors import ConfigError, MmlsError
from .harness import (NoiseModel, SyntheticManifold, measure_linear_scaling,
                      reduced_distance_metric, run_convergence_study, run_denoise_experiment,
                      sample_manifold)
from .project import MmlsConfig, project_cloud
from .weights import DEFAULT_OVERSAMPLE, DEFAULT_TRIALS, MetricForm, estimate_sigma

DEFAULT_SEED = 0
FIXED_ITERATIONS = 3

EPILOG = """\
environment:
  MMLS_THREADS   cap on worker threads used for per-point projection (default 1)

errors are reported as a single line 'error: <code>: <message>' on stderr
with a nonzero exit status.
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"error: usage: {message}\n")
        sys.exit(2)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _sigma(text):
    if text == "auto":
        return None
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"sigma must be a number or 'auto', got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("sigma must be positive")
    return v


def _iters(text):
    if text == "paper3":
        return "paper3"
    return _positive_int(text)


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_run_flags(p, need_d=True):
    p.add_argument("--d", type=_positive_int, required=need_d, help="intrinsic dimension")
    p.add_argument("--m", type=_positive_int, default=2, help="local polynomial degree (default 2)")
    p.add_argument("--weight", choices=("gaussian", "bump"), default="gaussian")
    p.add_argument("--sigma", type=_sigma, default=None,
                   help="gaussian bandwidth / bump support radius, or 'auto' (default)")
    p.add_argument("--eps", type=float, default=None,
                   help="frame stopping tolerance (default 1e-10 x cloud diameter)")
    p.add_argument("--iters", type=_iters, default=None,
                   help="max frame iterations, or 'paper3' for exactly three "
                        "(default 10; 'study denoise' defaults to paper3)")
    p.add_argument("--metric", default="euclid",
                   help="'euclid' or 'spd:<csv file with an n x n SPD matrix>'")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--trials", type=_positive_int, default=DEFAULT_TRIALS,
                   help="sample points for the automatic bandwidth (default 100)")
    p.add_argument("--oversample", type=_positive_int, default=DEFAULT_OVERSAMPLE,
                   help="neighbors per unknown for the automatic bandwidth (default 10)")
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")


def build_parser():
    parser = _Parser(prog="mmls", description="Manifold moving least-squares projection.",
                     epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("denoise", help="project every point of a cloud onto the approximant",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("cloud", help="CloudFile with the noisy samples")
    _add_run_flags(p)
    p.add_argument("--truth", help="CloudFile with clean twins, to report RMSE before/after")
    p.add_argument("--report", help="per-point report CSV (default <out>.report.csv)")

    p = sub.add_parser("project", help="project query points onto the approximant",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("cloud", help="CloudFile with the samples")
    p.add_argument("queries", help="CloudFile with the points to project")
    _add_run_flags(p)
    p.add_argument("--report", help="per-point report CSV (default <out>.report.csv)")

    p = sub.add_parser("sigma", help="estimate the gaussian bandwidth",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("cloud")
    _add_run_flags(p)

    p = sub.add_parser("study", help="convergence, scaling and denoising experiments",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("study", choices=("convergence", "scaling", "denoise"))
    p.add_argument("--kind", default=None,
                   help="manifold: helix|circle|sphere|torus|plane|ellipse-images")
    p.add_argument("--levels", type=_positive_int, default=4, help="convergence levels (default 4)")
    p.add_argument("--base", type=_positive_int, default=128,
                   help="points at the coarsest convergence level (default 128)")
    p.add_argument("--n", type=_int_list, default=[256, 512, 1024],
                   help="ambient dimensions for the scaling study")
    p.add_argument("--count", type=_positive_int, default=None, help="number of samples")
    p.add_argument("--noise", default=None,
                   help="'uniform:<a>' or 'gaussian:<s>' per coordinate")
    p.add_argument("--side", type=_positive_int, default=32, help="ellipse image side")
    p.add_argument("--reduce", type=int, default=0,
                   help="ellipse-images: measure weight distances in the top <k> x d "
                        "principal directions (0 = off)")
    _add_run_flags(p, need_d=False)
    return parser


def _threads():
    raw = os.environ.get("MMLS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"MMLS_THREADS must be an integer, got {raw!r}") from None


def _metric(text, n=None):
    if text in ("euclid", "euclidean"):
        return MetricForm()
    if text.startswith("spd:"):
        matrix, _ = read_cloud(text[4:])
        metric = MetricForm.spd(matrix)
        if n is not None:
            metric.check_dim(n)
        return metric
    raise ConfigError(f"unknown metric {text!r}; use 'euclid' or 'spd:<file>'")


def _config(args, n=None, d=None):
    iters = 10 if args.iters is None else args.iters
    return MmlsConfig(
        d=d if d is not None else args.d, m=args.m, weight=args.weight, sigma=args.sigma,
        eps=args.eps, max_iters=10 if iters == "paper3" else iters,
        fixed_iterations=FIXED_ITERATIONS if iters == "paper3" else None,
        metric=_metric(args.metric, n), seed=args.seed, trials=args.trials,
        oversample=args.oversample)


class _Output:
    """Writes to a path or stdout; the summary goes wherever the data does not."""

    def __init__(self, path):
        self.path = path

    @property
    def to_stdout(self):
        return self.path in (None, "-")

    def write(self, text):
        if self.to_stdout:
            sys.stdout.write(text)
        else:
            with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)

    def summary(self, line):
        (sys.stderr if self.to_stdout else sys.stdout).write(line + "\n")

    def sidecar(self, explicit):
        if explicit:
            return explicit
        return None if self.to_stdout else self.path + ".report.csv"


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _result_rows(queries, results):
    rows = []
    for i, (q, res) in enumerate(zip(queries, results)):
        if res.ok:
            rows.append([i, float(np.linalg.norm(res.projected - q)), int(res.converged),
                         res.report.iterations_used, res.degree_used, res.effective_points,
                         float(res.frame.constraint_residual),
                         ";".join(res.flags) if res.flags else "ok"])
        else:
            rows.append([i, float("nan"), 0, 0, 0, 0, float("nan"), res.error.code])
    return rows


REPORT_HEADER = ["index", "displacement", "converged", "iterations", "degree",
                 "effective_points", "constraint_residual", "flag"]


def _run_projection(args, cloud_pts, queries):
    cloud = PointCloud(cloud_pts)
    config = _config(args, n=cloud.dim)
    config.check_cloud(cloud)
    if queries.shape[1] != cloud.dim:
        raise ConfigError(f"queries have {queries.shape[1]} columns, cloud has {cloud.dim}")
    config = config.resolve(cloud)
    results = project_cloud(cloud, queries, config, workers=_threads())
    projected = np.array([r.projected for r in results])
    out = _Output(args.out)
    out.write(format_cloud(projected, d=config.d))
    side = out.sidecar(args.report)
    if side:
        with open(side, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_table(REPORT_HEADER, _result_rows(queries, results)))
    for i, res in enumerate(results):
        if not res.ok:
            sys.stderr.write(f"warning: row {i}: {res.error.code}: {res.error}\n")
    failed = sum(not r.ok for r in results)
    ok = [r for r in results if r.ok]
    disp = [np.linalg.norm(r.projected - q) for r, q in zip(results, queries) if r.ok]
    parts = [f"points={len(results)}", f"converged={sum(r.converged for r in ok)}",
             f"flagged={sum(bool(r.flags) for r in ok)}", f"failed={failed}",
             f"sigma={format_value(config.sigma)}",
             f"mean_displacement={format_value(np.mean(disp)) if disp else 'nan'}"]
    return out, results, projected, parts


def cmd_denoise(args):
    points, _ = read_cloud(args.cloud)
    out, results, projected, parts = _run_projection(args, points, points)
    if args.truth:
        truth, _ = read_cloud(args.truth)
        if truth.shape != points.shape:
            raise ConfigError("truth file shape differs from the cloud")
        ok = np.array([r.ok for r in results])
        before = np.sqrt(np.mean(np.sum((points - truth) ** 2, axis=1)))
        after = np.sqrt(np.mean(np.sum((projected[ok] - truth[ok]) ** 2, axis=1)))
        parts += [f"rmse_before={format_value(before)}", f"rmse_after={format_value(after)}",
                  f"reduction={format_value(before / after)}"]
    out.summary("summary: " + " ".join(parts))
    return 0


def cmd_project(args):
    points, _ = read_cloud(args.cloud)
    queries, _ = read_cloud(args.queries)
    out, _, _, parts = _run_projection(args, points, queries)
    out.summary("summary: " + " ".join(parts))
    return 0


def cmd_sigma(args):
    points, _ = read_cloud(args.cloud)
    cloud = PointCloud(points)
    metric = _metric(args.metric, cloud.dim)
    sigma, info = estimate_sigma(cloud, args.d, args.m, trials=args.trials,
                                 oversample=args.oversample, rng_seed=args.seed,
                                 metric=metric, return_details=True)
    text = (f"sigma={format_value(sigma)} neighbors={info['neighbors']} "
            f"trials={info['trials']} oversample={args.oversample} points={cloud.size}\n")
    _Output(args.out).write(text)
    return 0


def _noise(text, default):
    if text is None:
        return default
    kind, _, amp = text.partition(":")
    kinds = {"uniform": "uniform-box", "gaussian": "gaussian-iid"}
    if kind not in kinds:
        raise ConfigError(f"noise must be 'uniform:<a>' or 'gaussian:<s>', got {text!r}")
    try:
        return NoiseModel(kinds[kind], float(amp), seed=default.seed if default else 0)
    except ValueError:
        raise ConfigError(f"bad noise amplitude in {text!r}") from None


def cmd_study(args):
    out = _Output(args.out)
    workers = _threads()
    if args.study == "convergence":
        spec = SyntheticManifold(args.kind or "circle")
        if args.levels < 3:
            raise ConfigError("a convergence study needs at least 3 levels")
        counts = [args.base * 2 ** i for i in range(args.levels)]
        config = _config(args, d=spec.intrinsic_dim)
        rep = run_convergence_study(spec, args.m, counts, config, seed=args.seed,
                                    workers=workers)
        slope = rep.slope if rep.slope is not None else "n/a"
        rows = [[lv["points"], lv["h"], lv["max_error"], lv["rmse"], lv["backward"],
                 lv["failures"], lv["flagged"], slope] for lv in rep.levels]
        out.write(_table(["points", "h", "max_error", "rmse", "backward_bound", "failures",
                          "flagged", "slope"], rows))
        out.summary(f"summary: kind={spec.kind} m={args.m} slope={format_value(rep.slope) if rep.slope is not None else 'n/a'}")
        return 0
    if args.study == "scaling":
        d = args.d or 1
        config = _config(args, d=d)
        rows = measure_linear_scaling(d, args.m, args.n, config, count=args.count or 1000,
                                      seed=args.seed)
        out.write(_table(["n", "seconds_per_point", "ratio", "equivariance_error"],
                         [[r["n"], r["seconds_per_point"], r["ratio"], r["equivariance_error"]]
                          for r in rows]))
        return 0
    kind = args.kind or "helix"
    if kind == "ellipse-images":
        spec = SyntheticManifold(kind, side=args.side)
        noise = _noise(args.noise, NoiseModel("gaussian-iid", 0.05, seed=args.seed))
        count = args.count or 144
    else:
        spec = SyntheticManifold(kind)
        noise = _noise(args.noise, NoiseModel("uniform-box", 0.2, seed=args.seed))
        count = args.count or 400
    if args.iters is None:
        args.iters = "paper3"
    config = _config(args, d=spec.intrinsic_dim)
    if args.reduce:
        noisy = sample_manifold(spec, count, noise=noise, seed=args.seed)
        config = replace(config, metric=reduced_distance_metric(
            noisy.points, spec.intrinsic_dim, factor=args.reduce))
    rep = run_denoise_experiment(spec, count, noise, config, seed=args.seed, workers=workers,
                                 manifold_distance=kind != "ellipse-images")
    out.write(_table(["index", "distance_before", "distance_after"],
                     [[i, float(b), float(a)]
                      for i, (b, a) in enumerate(zip(rep.per_point_before, rep.per_point))]))
    parts = [f"kind={kind}", f"points={count}",
             f"rmse_before={format_value(rep.rmse_before)}",
             f"rmse_after={format_value(rep.rmse_to_truth)}",
             f"mean_before={format_value(rep.mean_truth_before)}",
             f"mean_after={format_value(rep.mean_truth_after)}", f"failures={rep.failures}"]
    if rep.manifold_rmse_before is not None:
        parts += [f"manifold_rmse_before={format_value(rep.manifold_rmse_before)}",
                  f"manifold_rmse_after={format_value(rep.manifold_rmse_after)}"]
    out.summary("summary: " + " ".join(parts))
    return 0


COMMANDS = {"denoise": cmd_denoise, "project": cmd_project, "sigma": cmd_sigma, "study": cmd_study}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except MmlsError as exc:
        sys.stderr.write(f"error: {exc.code}: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: io: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
