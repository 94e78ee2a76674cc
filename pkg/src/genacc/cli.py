"""Command-line entry point.

Every command writes ``run_config.json`` next to its outputs.  The file
records the resolved arguments; ``genacc --from-config run_config.json``
replays the run and reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, analysis, datasets
from .classifiers import (Combine, EnsembleConfig, GradualOneNN, NoiseModel, NoisyEnsemble, OneNN,
                          OpenSetGradualOneNN, step_classifier)
from .analytic import ToyProblem, analytic_curve
from .evaluation import AccuracyCurve, AttackConfig, accuracy_curve, ara
from .geometry import MetricKind
from .modes import AttackMode, Evaluator, VoronoiMode

log = logging.getLogger("genacc")

EVALUATORS = ["std-max", "std-exact", "gen-max", "gen-exact"]
STEP = ["f1", "f2", "f3"]

# execution details that must not leak into the recorded configuration
_NOT_CONFIG = {"threads", "verbose", "func", "from_config"}


class CLIError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers


def _outdir(args) -> Path:
    out = Path(args.out or Path("genacc-out") / args.command)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config(out: Path, args, argv) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}
    cfg = {"genacc_version": __version__, "argv": _replay_argv(argv), **cfg}
    (out / "run_config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True, default=str) + "\n")


def _replay_argv(argv):
    # drop thread-count flags so replays are config-identical
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--threads":
            skip = True
            continue
        if a.startswith("--threads="):
            continue
        out.append(a)
    return out


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _data_dir(args, env: str) -> Path:
    d = args.data_dir or os.environ.get(env)
    if not d:
        raise CLIError(f"no data directory: pass --data-dir or set {env}")
    p = Path(d)
    if not p.is_dir():
        raise CLIError(f"data directory {p} does not exist")
    return p


def _load_dataset(args):
    name = args.dataset
    if name == "toy":
        return datasets.make_toy_1d(args.samples)
    if name == "sunset":
        return datasets.make_sunset(args.samples, seed=args.seed)
    if name == "noise-example":
        return datasets.make_noise_example()
    if name == "blobs":
        return datasets.make_blobs(args.samples, args.dim, args.classes, seed=args.seed)
    if name == "synthetic-images":
        return datasets.make_synthetic_images(args.samples, args.dim, args.classes, seed=args.seed)
    if name == "csv":
        if not args.data:
            raise CLIError("--dataset csv needs --data PATH")
        if not Path(args.data).is_file():
            raise CLIError(f"missing file {args.data}")
        return datasets.read_csv(args.data)
    if name == "mnist":
        images, labels = datasets.find_mnist_files(_data_dir(args, "GENACC_MNIST_DIR"))
        return datasets.load_idx(images, labels)
    if name == "cifar10":
        return datasets.load_cifar10(datasets.find_cifar10_files(_data_dir(args, "GENACC_CIFAR10_DIR")))
    raise CLIError(f"unknown dataset {name!r}")


def _subset(ds, args):
    if getattr(args, "full", False) or args.subset is None or args.subset >= len(ds):
        return ds
    rng = np.random.default_rng(args.seed)
    idx = np.sort(rng.choice(len(ds), size=args.subset, replace=False))
    return ds.subset(idx)


def _add_common(p):
    p.add_argument("--out", help="output directory (default genacc-out/<command>)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: GENACC_NUM_THREADS or 1)")


def _add_dataset(p, default="toy"):
    p.add_argument("--dataset", default=default,
                   choices=["toy", "sunset", "noise-example", "blobs", "synthetic-images", "csv",
                            "mnist", "cifar10"])
    p.add_argument("--data", help="CSV file for --dataset csv")
    p.add_argument("--data-dir", help="directory holding MNIST/CIFAR-10 files")
    p.add_argument("--samples", type=int, default=100,
                   help="generator size (per class for sunset, per interval for toy)")
    p.add_argument("--dim", type=int, default=2, help="dimension for generated blobs/images")
    p.add_argument("--classes", type=int, default=3, help="class count for generated sets")
    p.add_argument("--subset", type=int, default=None, help="random subset size")


# --------------------------------------------------------------------------
# commands


def cmd_toy_curves(args, argv) -> int:
    out = _outdir(args)
    toy = datasets.make_toy_1d()
    clfs = STEP if args.classifier == "all" else [args.classifier]
    evs = EVALUATORS if args.evaluator == "all" else [args.evaluator]
    summary = {}
    for name in clfs:
        clf = step_classifier(name)
        for ev in evs:
            attack = AttackConfig(mode=AttackMode.ANALYTIC_1D, voronoi_mode=VoronoiMode.CLASS_REGION)
            pts = analytic_curve(ev, clf, ToyProblem.from_dataset(toy), Fraction(str(args.eps_max)))
            curve = AccuracyCurve([float(e) for e, _ in pts], [float(a) for _, a in pts],
                                  Evaluator.parse(ev).value, name, {"attack": attack.to_dict()})
            stem = f"{name}_{ev.replace('-', '_')}"
            curve.write(out / f"{stem}.csv")
            summary[stem] = {"ara": ara(curve), "points": len(curve)}
            print(f"{stem}: {len(curve)} points, ARA {ara(curve):.6g}")
    _dump_json(out / "summary.json", summary)
    _write_config(out, args, argv)
    return 0


def cmd_sunset_demo(args, argv) -> int:
    out = _outdir(args)
    ds = datasets.make_sunset(args.n_per_class, seed=args.seed, line_extent=args.line_extent,
                              evenly_spaced=not args.random)
    clf = OneNN(ds, MetricKind.L2)
    xs = np.linspace(-2.0, 2.0, args.resolution)
    ys = np.linspace(-1.0, 3.0, args.resolution)
    X1, X2 = np.meshgrid(xs, ys, indexing="ij")
    grid = np.column_stack([X1.ravel(), X2.ravel()])
    pred = clf.predict(grid)
    oracle, dist = datasets.sunset_oracle(grid)
    far = dist > args.margin
    agree = float(np.mean(pred[far] == oracle[far]))
    lines = ["x1,x2,pred,oracle,boundary_distance"]
    lines += [f"{a:.17g},{b:.17g},{int(p)},{int(o)},{d:.17g}"
              for (a, b), p, o, d in zip(grid, pred, oracle, dist)]
    (out / "sunset_grid.csv").write_text("\n".join(lines) + "\n")
    res = {"agreement": agree, "nodes_compared": int(far.sum()), "margin": args.margin,
           "n_per_class": args.n_per_class}
    _dump_json(out / "summary.json", res)
    _write_config(out, args, argv)
    print(f"1-NN agrees with the parabola oracle on {agree:.4%} of {int(far.sum())} nodes")
    return 0


def _build_classifier(args, ds, metric):
    name = args.classifier
    if name in STEP:
        if ds.dim != 1:
            raise CLIError("step classifiers take 1-D data")
        return step_classifier(name)
    if name == "1nn":
        return OneNN(ds, metric)
    if name == "gradual-1nn":
        return GradualOneNN(ds, metric, kernel=args.kernel)
    if name == "open-set":
        return OpenSetGradualOneNN(ds, metric, alpha=args.alpha, variant=args.open_set_variant)
    if name == "ensemble":
        cfg = EnsembleConfig(args.sigma, args.members, args.seed, args.noise_model, args.combine)
        return NoisyEnsemble(ds, metric, cfg, threads=args.threads)
    raise CLIError(f"unknown classifier {name!r}")


def _epsilons(args, ds, metric):
    if args.eps:
        return np.array(sorted({float(v) for v in args.eps.split(",")}))
    if args.eps_max is None:
        return None
    return np.linspace(0.0, args.eps_max, args.eps_count)


def cmd_eval(args, argv) -> int:
    metric = MetricKind.parse(args.metric)
    ds = _subset(_load_dataset(args), args)
    ev = Evaluator.parse(args.evaluator)
    if ev.norm_mode.value == "exact" and ds.dim > 3 and args.attack != "analytic_1d":
        raise CLIError(f"exact-norm evaluation is not supported for {ds.dim}-dimensional data; "
                       "use std-max or gen-max")
    clf = _build_classifier(args, ds, metric)
    mode = args.attack
    if mode is None:
        mode = "analytic_1d" if args.classifier in STEP and ds.region is not None else "grid"
    voronoi = args.voronoi_mode or ("class_region" if ds.dim == 1 and ds.region is not None
                                    else "point_cell")
    attack = AttackConfig(mode=mode, pgd_steps=args.pgd_steps, pgd_restarts=args.pgd_restarts,
                          pgd_step_fraction=args.pgd_step_fraction,
                          grid_resolution=args.grid_resolution,
                          sphere_directions=args.sphere_directions, voronoi_mode=voronoi,
                          alternations=args.alternations, tie_policy=args.tie_policy,
                          seed=args.seed, threads=args.threads or 0)
    out = _outdir(args)
    eps = _epsilons(args, ds, metric)
    curve = accuracy_curve(ev, clf, ds, eps, attack, metric)
    stem = f"{clf.name}_{ev.value}"
    curve.write(out / f"{stem}.csv")
    _write_config(out, args, argv)
    print(f"{stem}: {len(curve)} radii written to {out}")
    return 0


def cmd_analyze(args, argv) -> int:
    metric = MetricKind.parse(args.metric)
    ds = _load_dataset(args)
    if args.dataset in ("mnist", "cifar10") and not args.full and args.subset is None:
        args.subset = 1000
        log.info("using a 1000-sample subset; pass --full for the whole set")
    ds = _subset(ds, args)
    out = _outdir(args)
    started = time.perf_counter()

    def progress(done, total):
        if args.verbose:
            rate = done / max(time.perf_counter() - started, 1e-9)
            print(f"  rows {done}/{total} ({rate:.0f}/s)", file=sys.stderr)

    report = analysis.analyze(ds, metric, args.engine, bins=args.bins, tile=args.tile,
                              threads=args.threads, checkpoint=args.checkpoint, progress=progress)
    report.write(out)
    _write_config(out, args, argv)
    s = report.summary()
    print(f"min d_diff {s['min_d_diff']:.6g} (x255 = {s['min_d_diff_x255']:.6g}); "
          f"LOO {s['loo_strict']:.4f} ({s['loo_optimistic']:.4f}*); "
          f"cross-entropy ({s['avg_neg_log2_ratio_min']:.4f}, {s['avg_neg_log2_ratio_max']:.4f})")
    return 0


def cmd_ensemble_grid(args, argv) -> int:
    metric = MetricKind.parse(args.metric)
    ds = _subset(_load_dataset(args), args)
    if ds.dim != 2:
        raise CLIError("ensemble-grid needs 2-D data")
    cfg = EnsembleConfig(args.sigma, args.members, args.seed, args.noise_model, args.combine)
    clf = NoisyEnsemble(ds, metric, cfg, threads=args.threads)
    x0, x1 = args.x_range
    y0, y1 = args.y_range
    xs = np.linspace(x0, x1, args.resolution)
    ys = np.linspace(y0, y1, args.resolution)
    X1, X2 = np.meshgrid(xs, ys, indexing="ij")
    grid = np.column_stack([X1.ravel(), X2.ravel()])
    S = clf.scores(grid)
    best = S.max(axis=1, keepdims=True)
    pred = np.where((S == best).sum(axis=1) > 1, -1, clf.classes[S.argmax(axis=1)])
    out = _outdir(args)
    head = ["x1", "x2"] + [f"score_{k}" for k in range(S.shape[1])] + ["pred"]
    lines = [",".join(head)]
    for (a, b), s, p in zip(grid, S, pred):
        lines.append(",".join([f"{a:.17g}", f"{b:.17g}", *(f"{v:.17g}" for v in s), str(int(p))]))
    (out / "ensemble_grid.csv").write_text("\n".join(lines) + "\n")
    _write_config(out, args, argv)
    print(f"{grid.shape[0]} grid nodes written to {out / 'ensemble_grid.csv'} (ties as -1)")
    return 0


def cmd_selftest(args, argv) -> int:
    from .selftest import run_selftest
    return run_selftest(quick=args.quick)


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="genacc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"genacc {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--from-config", metavar="JSON", help="replay a recorded run_config.json")
    sub = p.add_subparsers(dest="command")

    t = sub.add_parser("toy-curves", help="analytic accuracy curves of the 1-D toy problem")
    t.add_argument("--classifier", default="all", choices=STEP + ["all"])
    t.add_argument("--evaluator", default="all", choices=EVALUATORS + ["all"])
    t.add_argument("--eps-max", type=float, default=6.3)
    _add_common(t)
    t.set_defaults(func=cmd_toy_curves)

    s = sub.add_parser("sunset-demo", help="1-NN on the sunset set against the parabola oracle")
    s.add_argument("--n-per-class", type=int, default=10000)
    s.add_argument("--resolution", type=int, default=200)
    s.add_argument("--line-extent", type=float, default=3.0)
    s.add_argument("--margin", type=float, default=0.02)
    s.add_argument("--random", action="store_true", help="sample instead of even spacing")
    _add_common(s)
    s.set_defaults(func=cmd_sunset_demo)

    e = sub.add_parser("eval", help="accuracy curve of one classifier under one evaluator")
    _add_dataset(e)
    e.add_argument("--metric", default="l2", choices=["l1", "l2", "linf"])
    e.add_argument("--classifier", default="1nn",
                   choices=STEP + ["1nn", "gradual-1nn", "open-set", "ensemble"])
    e.add_argument("--evaluator", default="gen-max", choices=EVALUATORS)
    e.add_argument("--eps", help="comma-separated radii")
    e.add_argument("--eps-max", type=float, default=None)
    e.add_argument("--eps-count", type=int, default=128)
    e.add_argument("--attack", choices=["grid", "pgd", "analytic_1d"], default=None)
    e.add_argument("--grid-resolution", type=int, default=201)
    e.add_argument("--sphere-directions", type=int, default=4096)
    e.add_argument("--pgd-steps", type=int, default=40)
    e.add_argument("--pgd-restarts", type=int, default=4)
    e.add_argument("--pgd-step-fraction", type=float, default=0.1)
    e.add_argument("--voronoi-mode", choices=["point_cell", "class_region"], default=None)
    e.add_argument("--alternations", type=int, default=1)
    e.add_argument("--tie-policy", choices=["strict", "optimistic"], default="strict")
    e.add_argument("--kernel", default="inverse", choices=["inverse", "inverse_square", "inverse_log1p"])
    e.add_argument("--alpha", type=float, default=0.5)
    e.add_argument("--open-set-variant", default="entropy", choices=["entropy", "geometric_mean"])
    _add_ensemble(e)
    _add_common(e)
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("analyze", help="nearest-neighbour distance statistics and LOO accuracy")
    _add_dataset(a, default="mnist")
    a.add_argument("--metric", default="l2", choices=["l1", "l2", "linf"])
    a.add_argument("--engine", default="blocked", choices=["blocked", "naive"])
    a.add_argument("--tile", type=int, default=256)
    a.add_argument("--bins", type=int, default=50)
    a.add_argument("--full", action="store_true", help="use the whole dataset")
    a.add_argument("--checkpoint", help="resumable tile checkpoint (.npz)")
    _add_common(a)
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("ensemble-grid", help="noisy-ensemble scores over a 2-D grid")
    _add_dataset(g, default="noise-example")
    g.add_argument("--metric", default="l2", choices=["l1", "l2", "linf"])
    g.add_argument("--x-range", type=float, nargs=2, default=[-3.0, 3.0])
    g.add_argument("--y-range", type=float, nargs=2, default=[-3.0, 3.0])
    g.add_argument("--resolution", type=int, default=61)
    _add_ensemble(g)
    _add_common(g)
    g.set_defaults(func=cmd_ensemble_grid)

    st = sub.add_parser("selftest", help="golden values and quick property checks")
    st.add_argument("--quick", action="store_true")
    st.set_defaults(func=cmd_selftest, out=None, seed=0, threads=None)
    return p


def _add_ensemble(p):
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--members", type=int, default=1000)
    p.add_argument("--noise-model", default="gaussian", choices=[m.value for m in NoiseModel])
    p.add_argument("--combine", default="vote", choices=[c.value for c in Combine])


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.from_config:
        try:
            recorded = json.loads(Path(args.from_config).read_text())["argv"]
        except (OSError, KeyError, ValueError) as exc:
            print(f"genacc: cannot read config: {exc}", file=sys.stderr)
            return 2
        argv = recorded
        args = parser.parse_args(recorded)
    if args.command is None:
        parser.print_help()
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads:
        os.environ["GENACC_NUM_THREADS"] = str(args.threads)
    try:
        return args.func(args, argv)
    except (CLIError, datasets.DatasetError, FileNotFoundError, ValueError,
            NotImplementedError) as exc:
        print(f"genacc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
