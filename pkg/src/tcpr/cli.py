"""Command-line front end.

Exit codes: 0 success, 1 invalid usage or flags, 2 runtime failure.
Every file written starts with ``#`` lines echoing the resolved settings.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import __version__
from ._io import atomic_write
from .classifiers import ClassifierSpec, TrainConfig
from .episodes import EvalConfig, EvalReport, evaluate
from .errors import TCPRError
from .feature_bank import SyntheticBankSpec, generate_synthetic_bank, load_bank, save_bank
from .plotting import emit_plot
from .simulation import SimSpec, run_bias_simulation
from .transforms import TRANSFORM_KINDS, CentroidEstimator, TransformPipeline

SUMMARY_FIELDS = ("transform", "centroid", "k", "p", "classifier", "gamma", "n_way",
                  "k_shot", "q", "episodes", "failed", "mean_acc", "ci95")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _add_eval_flags(p):
    p.add_argument("--novel", required=True, help="novel bank (.bin or .csv)")
    p.add_argument("--base", help="base bank; required by cl2n and tcpr --centroid base-knn")
    p.add_argument("--n-way", type=int, default=5)
    p.add_argument("--k-shot", type=int, default=1)
    p.add_argument("--q", type=int, default=15, help="queries per class")
    p.add_argument("--episodes", type=int, default=2000)
    p.add_argument("--transform", choices=TRANSFORM_KINDS, default="l2")
    p.add_argument("--centroid", choices=("oracle", "support", "base-knn"), default="base-knn")
    p.add_argument("--p", type=float, default=0.5, help="neighbor weight exponent")
    p.add_argument("--classifier", choices=("ncc", "cosine"), default="ncc")
    p.add_argument("--gamma", type=float, default=10.0)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", help="per-episode CSV; a .summary file is written alongside")
    p.add_argument("--plot", help="SVG chart output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tcpr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-synthetic", help="write a Gaussian synthetic bank")
    g.add_argument("--classes", type=int, required=True)
    g.add_argument("--per-class", type=int, required=True)
    g.add_argument("--dim", type=int, default=64)
    g.add_argument("--scale", type=float, default=1.0, help="distance of class means from the origin")
    g.add_argument("--noise-std", type=float, default=0.3)
    g.add_argument("--offset", type=float, default=0.0,
                   help="shared skew added along axis 2 (orthogonal to the class-mean plane)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    i = sub.add_parser("inspect", help="summarize a bank file")
    i.add_argument("path")

    e = sub.add_parser("evaluate", help="episodic evaluation of one configuration")
    _add_eval_flags(e)
    e.add_argument("--k-neighbors", type=int, default=100)

    k = sub.add_parser("sweep-k", help="evaluate tcpr base-knn over several neighbor counts")
    _add_eval_flags(k)
    k.add_argument("--k-neighbors", type=_int_list, required=True, help="e.g. 1,10,100,1000")

    s = sub.add_parser("simulate", help="two-Gaussian sampling-bias simulation")
    s.add_argument("--a", type=_float_list, default=[1.0], help="class-mean offset; list sweeps")
    s.add_argument("--k-shot", type=_int_list, default=[1], help="shots; list sweeps")
    s.add_argument("--tasks", type=int, default=10000)
    s.add_argument("--q", type=int, default=50)
    s.add_argument("--bins", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--plot")
    return parser


# -- output helpers --------------------------------------------------------

def _header(command: str, settings: dict) -> str:
    lines = [f"# tcpr {__version__} {command}"]
    lines += [f"# {key}={value}" for key, value in settings.items()]
    return "\n".join(lines) + "\n"


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _summary_row(report: EvalReport) -> list:
    cfg = report.config
    return [cfg["transform"], cfg["centroid"], cfg["k"], cfg["p"], cfg["classifier"],
            cfg["gamma"], cfg["n_way"], cfg["k_shot"], cfg["q"], cfg["episodes"],
            report.failed_episodes, f"{report.mean_acc:.4f}", f"{report.ci95_half_width:.4f}"]


def write_report_csv(report: EvalReport, path, command: str = "evaluate") -> None:
    """Write ``path`` (``episode,accuracy`` rows) and ``path.summary``."""
    head = _header(command, report.config)
    rows = [("episode", "accuracy")]
    rows += [(i, f"{acc:.6f}") for i, acc in zip(report.episode_ids, report.per_episode_acc)]
    atomic_write(path, (head + _csv_text(rows)).encode())
    summary = [SUMMARY_FIELDS, _summary_row(report)]
    atomic_write(f"{path}.summary", (head + _csv_text(summary)).encode())


def read_csv_rows(path) -> list[dict]:
    """Parse a CSV written by this tool, skipping ``#`` lines."""
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


# -- subcommands -----------------------------------------------------------

def _pipeline(args, k_neighbors) -> TransformPipeline:
    if args.transform != "tcpr":
        return TransformPipeline(args.transform)
    est = CentroidEstimator(args.centroid, k_neighbors, args.p)
    return TransformPipeline("tcpr", est)


def _eval_config(args, k_neighbors) -> EvalConfig:
    train = TrainConfig(gamma=args.gamma, learning_rate=args.lr, epochs=args.epochs)
    return EvalConfig(args.n_way, args.k_shot, args.q, args.episodes,
                      _pipeline(args, k_neighbors), ClassifierSpec(args.classifier, train))


def _validate_eval(args, parser):
    for flag in ("n_way", "k_shot", "q", "episodes"):
        if getattr(args, flag) < 1:
            parser.error(f"--{flag.replace('_', '-')} must be >= 1")
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    if args.gamma <= 0 or args.lr <= 0:
        parser.error("--gamma and --lr must be > 0")
    if args.epochs < 0:
        parser.error("--epochs must be >= 0")
    if args.p < 0:
        parser.error("--p must be >= 0")
    ks = args.k_neighbors if isinstance(args.k_neighbors, list) else [args.k_neighbors]
    if min(ks) < 1:
        parser.error("--k-neighbors must be >= 1")
    needs_base = args.transform == "cl2n" or (args.transform == "tcpr" and args.centroid == "base-knn")
    if needs_base and not args.base:
        what = "cl2n" if args.transform == "cl2n" else "--transform tcpr --centroid base-knn"
        parser.error(f"{what} requires --base")


def cmd_gen_synthetic(args, parser):
    if args.dim < 3 and args.offset:
        parser.error("--offset needs --dim >= 3")
    offset = None
    if args.offset:
        offset = np.zeros(args.dim)
        offset[2] = args.offset
    try:
        spec = SyntheticBankSpec(args.classes, args.per_class, args.dim, args.scale,
                                 args.noise_std, args.seed, offset)
    except ValueError as exc:
        parser.error(str(exc))
    bank = generate_synthetic_bank(spec)
    save_bank(bank, args.out)
    print(f"wrote {bank!r} to {args.out}")


def cmd_inspect(args, parser):
    bank = load_bank(args.path)
    counts = np.bincount(bank.labels, minlength=bank.num_classes)
    norms = bank.row_norms
    print(f"path:        {args.path}")
    print(f"rows:        {bank.n}")
    print(f"dim:         {bank.dim}")
    print(f"classes:     {bank.num_classes}")
    print(f"per class:   min {counts.min()}  max {counts.max()}  empty {int((counts == 0).sum())}")
    print(f"row norms:   min {norms.min():.4g}  mean {norms.mean():.4g}  max {norms.max():.4g}")


def _load_eval_banks(args):
    novel = load_bank(args.novel)
    base = load_bank(args.base) if args.base else None
    if base is not None and base.dim != novel.dim:
        raise TCPRError(f"base dim {base.dim} differs from novel dim {novel.dim}")
    return novel, base


def cmd_evaluate(args, parser):
    _validate_eval(args, parser)
    novel, base = _load_eval_banks(args)
    config = _eval_config(args, args.k_neighbors)
    report = evaluate(novel, base, config, args.seed, threads=args.threads)
    print(",".join(SUMMARY_FIELDS))
    print(",".join(str(v) for v in _summary_row(report)))
    if report.failed_episodes:
        print(f"warning: {report.failed_episodes} episodes failed "
              f"(first: {report.failures[0][1]})", file=sys.stderr)
    if args.out:
        write_report_csv(report, args.out)
    if args.plot:
        emit_plot(report, args.plot, title="per-episode accuracy",
                  comments=_header("evaluate", report.config).splitlines())


def cmd_sweep_k(args, parser):
    if args.transform != "tcpr" or args.centroid != "base-knn":
        parser.error("sweep-k requires --transform tcpr --centroid base-knn")
    _validate_eval(args, parser)
    novel, base = _load_eval_banks(args)
    results = []
    for k in args.k_neighbors:
        report = evaluate(novel, base, _eval_config(args, k), args.seed, threads=args.threads)
        results.append((k, report))
        print(f"k={k}  mean_acc={report.mean_acc:.4f}  ci95={report.ci95_half_width:.4f}  "
              f"failed={report.failed_episodes}")
    settings = dict(results[0][1].config, k=",".join(map(str, args.k_neighbors)), seed=args.seed)
    if args.out:
        rows = [("k", "mean_acc", "ci95", "failed")]
        rows += [(k, f"{r.mean_acc:.4f}", f"{r.ci95_half_width:.4f}", r.failed_episodes)
                 for k, r in results]
        atomic_write(args.out, (_header("sweep-k", settings) + _csv_text(rows)).encode())
    if args.plot:
        emit_plot(results, args.plot, title="accuracy vs number of base neighbors",
                  comments=_header("sweep-k", settings).splitlines())


def cmd_simulate(args, parser):
    if len(args.a) > 1 and len(args.k_shot) > 1:
        parser.error("sweep either --a or --k-shot, not both")
    try:
        template = SimSpec(args.a[0], args.k_shot[0], args.tasks, args.q, args.bins, args.seed)
        axis, values = ("a", args.a) if len(args.a) > 1 else ("k_shot", args.k_shot)
        specs = [SimSpec(**{**template.__dict__, axis: v, "seed": args.seed + j})
                 for j, v in enumerate(values)]
    except ValueError as exc:
        parser.error(str(exc))
    curves = [(getattr(spec, axis), run_bias_simulation(spec)) for spec in specs]

    settings = {"a": ",".join(map(str, args.a)), "k_shot": ",".join(map(str, args.k_shot)),
                "tasks": args.tasks, "q": args.q, "bins": args.bins, "seed": args.seed}
    rows = [("a", "k_shot", "bin_center", "mean_acc", "std_acc", "count")]
    for spec, (_, curve) in zip(specs, curves):
        for b in np.flatnonzero(curve.count > 0):
            rows.append((spec.a, spec.k_shot, f"{curve.bin_centers[b]:.6f}",
                         f"{curve.mean_acc[b]:.6f}", f"{curve.std_acc[b]:.6f}", int(curve.count[b])))
        try:
            gap = f"{curve.gap():.4f}"
        except ValueError:
            gap = "n/a"
        print(f"a={spec.a} k_shot={spec.k_shot}  overall_acc={np.nansum(curve.mean_acc * curve.count) / curve.count.sum():.4f}  gap={gap}")
    atomic_write(args.out, (_header("simulate", settings) + _csv_text(rows)).encode())
    if args.plot:
        data = curves[0][1] if len(curves) == 1 else curves
        emit_plot(data, args.plot, title="accuracy vs prototype distance to centroid",
                  comments=_header("simulate", settings).splitlines())


COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "inspect": cmd_inspect,
    "evaluate": cmd_evaluate,
    "sweep-k": cmd_sweep_k,
    "simulate": cmd_simulate,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args, parser) or 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TCPRError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
