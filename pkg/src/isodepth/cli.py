"""Command-line entry point: ``isodepth <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path


from . import __version__
from .casestudy import CASE_KINDS, DETECTORS, case_report, construct_case, run_calibration, verify_dataset
from .core import jitter, load_csv, sort_and_validate
from .errors import DuplicateValue, IsoDepthError
from .forest import Forest, fit_forest, score_many
from .harness import (
    ExperimentConfig,
    convergence_experiment,
    depth_profile_experiment,
    uniform_gap_statistics,
)
from .knn import KnnConfig, knn_scores, rank_by_knn
from .oracle import depth_profile
from .walk import absorption_cdf_curve, build_chain, expected_steps

DEFAULT_SEED = 42


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _common(p, plot=False, fmt="csv"):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="64-bit seed (default %(default)s)")
    p.add_argument("--output", "-o", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default=fmt)
    if plot:
        p.add_argument("--plot", metavar="PATH", help="also render a figure to PATH (.png, .svg, .pdf)")


def _input(p, column=False):
    p.add_argument("--input", "-i", required=True, help="CSV file with a header row")
    if column:
        p.add_argument("--column", help="column name (optional if the file has one numeric column)")
        p.add_argument("--jitter", type=float, default=0.0, metavar="EPS",
                       help="add seeded uniform noise in [-EPS, EPS] to break ties")
    else:
        p.add_argument("--columns", help="comma-separated column names (default: all numeric)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isodepth", description=__doc__)
    parser.add_argument("--version", action="version", version=f"isodepth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="grow a forest on a CSV file and score its rows")
    _input(p)
    p.add_argument("--model", required=True, help="where to write the forest JSON")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--psi", type=int, default=256, help="subsample size (capped at n)")
    p.add_argument("--n-jobs", type=int, default=1)
    _common(p, plot=True)

    p = sub.add_parser("score", help="score CSV rows with a saved forest")
    _input(p)
    p.add_argument("--model", required=True)
    _common(p)

    p = sub.add_parser("oracle", help="exact expected depth of every point of a 1-D column")
    _input(p, column=True)
    _common(p, plot=True)

    p = sub.add_parser("walk", help="random-walk chain for one target point")
    _input(p, column=True)
    p.add_argument("--target", type=int, required=True, help="1-based rank of the target point")
    _common(p, fmt="json")

    p = sub.add_parser("knn", help="k-NN scores (mean L1 distance to the k nearest rows)")
    _input(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--include-self", action="store_true", help="let a row count as its own neighbour")
    p.add_argument("--top", type=int, help="also report the TOP highest-scoring rows")
    _common(p, plot=True)

    p = sub.add_parser("case", help="build an archetype dataset and its threshold report")
    p.add_argument("--kind", choices=CASE_KINDS, required=True)
    p.add_argument("--param", "-p", action="append", default=[], metavar="KEY=VALUE",
                   help="construction parameter, repeatable")
    p.add_argument("--detector", choices=DETECTORS, default="iforest")
    p.add_argument("--k", type=int)
    p.add_argument("--c", type=float, help="threshold constant (default: calibrated)")
    p.add_argument("--dataset", help="write the constructed points to this CSV path")
    _common(p, plot=True, fmt="json")

    p = sub.add_parser("verify", help="density-factor assumption check per column")
    _input(p)
    _common(p)

    p = sub.add_parser("converge", help="forest-vs-oracle MSE over a grid of tree counts")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--generator", choices=("normal", "uniform", "exponential", "csv"))
    p.add_argument("--n", type=int)
    p.add_argument("--psi", type=int)
    p.add_argument("--m-grid", help="comma-separated tree counts")
    p.add_argument("--repeats", type=int)
    p.add_argument("--path")
    p.add_argument("--column")
    p.add_argument("--n-jobs", type=int, default=1)
    _common(p, plot=True)

    p = sub.add_parser("gapstats", help="min-gap and density-factor statistics of uniform samples")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    _common(p, fmt="json")

    p = sub.add_parser("profile", help="oracle and forest depths side by side with top-m flags")
    _input(p, column=True)
    p.add_argument("--m", type=int, default=1, help="number of points to flag")
    p.add_argument("--trees", type=int, default=1000)
    p.add_argument("--n-jobs", type=int, default=1)
    _common(p, plot=True)

    p = sub.add_parser("calibrate", help="recompute the threshold constants by bisection")
    _common(p, fmt="json")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _emit(args, text: str):
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")


def _header(args, **extra) -> str:
    cfg = {"command": args.command, "seed": args.seed}
    cfg.update(extra)
    return f"# isodepth {__version__} " + json.dumps(cfg, sort_keys=True, separators=(",", ":")) + "\n"


def _csv(args, header_row, rows, **extra) -> str:
    buf = io.StringIO()
    buf.write(_header(args, **extra))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header_row)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _columns(args):
    return args.columns.split(",") if args.columns else None


def _load_matrix(args):
    return load_csv(args.input, _columns(args))


def _load_sample(args):
    ds = load_csv(args.input, [args.column] if args.column else None)
    if ds.d != 1:
        raise IsoDepthError(f"{args.input}: {ds.d} numeric columns, choose one with --column")
    v = ds.rows[:, 0]
    if args.jitter > 0:
        v = jitter(v, args.jitter, args.seed)
    return sort_and_validate(v), ds.column_names[0]


def _parse_value(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _scores_out(args, scores, name, **extra):
    if args.format == "json":
        doc = {"tool_version": __version__, "seed": args.seed, **extra,
               "scores": [float(s) for s in scores]}
        return _json(doc)
    return _csv(args, ["index", name], ((i + 1, float(s)) for i, s in enumerate(scores)), **extra)


def cmd_fit(args):
    ds = _load_matrix(args)
    forest = fit_forest(ds.rows, args.trees, args.psi, args.seed, n_jobs=args.n_jobs)
    Path(args.model).write_text(forest.to_json(), encoding="utf-8")
    s = score_many(forest, ds.rows)
    _emit(args, _scores_out(args, s, "score", trees=args.trees, psi=args.psi,
                            columns=list(ds.column_names)))
    if args.plot:
        from .plots import plot_scores
        plot_scores(ds.rows[:, 0] if ds.d == 1 else None, s, args.plot, "average depth")


def cmd_score(args):
    forest = Forest.from_json(Path(args.model).read_text(encoding="utf-8"))
    ds = _load_matrix(args)
    s = score_many(forest, ds.rows)
    args.seed = forest.base_seed
    _emit(args, _scores_out(args, s, "score", trees=forest.n_trees, psi=forest.subsample_size,
                            columns=list(ds.column_names)))


def cmd_oracle(args):
    s, col = _load_sample(args)
    prof = depth_profile(s)
    if args.format == "json":
        _emit(args, _json({"tool_version": __version__, "column": col,
                           "x": s.values.tolist(), "expected_depth": prof.expected_depths.tolist()}))
    else:
        rows = ((i + 1, float(x), float(h)) for i, (x, h) in enumerate(zip(s.values, prof.expected_depths)))
        _emit(args, _csv(args, ["index", "x", "expected_depth"], rows, column=col, jitter=args.jitter))
    if args.plot:
        from .plots import plot_depth_profile
        plot_depth_profile(s.values, prof.expected_depths, args.plot)


def cmd_walk(args):
    s, col = _load_sample(args)
    chain = build_chain(s, args.target)
    steps = expected_steps(chain)
    cdf = absorption_cdf_curve(chain)
    if args.format == "json":
        doc = chain.to_dict()
        doc.update({"expected_steps": steps, "cdf": cdf.tolist(), "tool_version": __version__})
        _emit(args, _json(doc))
    else:
        rows = ((xi, float(p)) for xi, p in enumerate(cdf))
        _emit(args, _csv(args, ["steps", "cdf"], rows, column=col, target=args.target,
                         expected_steps=steps))
    print(f"expected_steps: {steps!r}", file=sys.stderr)


def cmd_knn(args):
    ds = _load_matrix(args)
    cfg = KnnConfig(args.k, exclude_self=not args.include_self)
    s = knn_scores(ds.rows, cfg)
    extra = {"k": args.k, "exclude_self": cfg.exclude_self}
    if args.top:
        extra["top"] = rank_by_knn(ds.rows, cfg, args.top)
    _emit(args, _scores_out(args, s, "knn_score", **extra))
    if args.plot:
        from .plots import plot_scores
        plot_scores(ds.rows[:, 0] if ds.d == 1 else None, s, args.plot, "k-NN score")


def cmd_case(args):
    params = {}
    for item in args.param:
        if "=" not in item:
            raise IsoDepthError(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = _parse_value(v.strip())
    case = construct_case(args.kind, **params)
    report = case_report(case, args.detector, args.k, args.c)
    if args.dataset:
        mask = set(case.anomalies)
        rows = ((i + 1, float(x), int(i + 1 in mask)) for i, x in enumerate(case.sample.values))
        Path(args.dataset).write_text(
            _csv(args, ["index", "x", "anomaly"], rows, kind=args.kind, params=params), encoding="utf-8")
    if args.format == "json":
        _emit(args, _json(report.to_dict()))
    else:
        d = report.to_dict()
        flat = [(k, json.dumps(d[k], sort_keys=True) if isinstance(d[k], (dict, list)) else d[k])
                for k in sorted(d)]
        _emit(args, _csv(args, ["field", "value"], flat, kind=args.kind))
    if args.plot:
        from .plots import plot_depth_profile
        from .oracle import fast_profile
        plot_depth_profile(case.sample.values, fast_profile(case.sample.values), args.plot,
                           flagged=case.anomalies)


def cmd_verify(args):
    summary = verify_dataset(_load_matrix(args))
    if args.format == "json":
        _emit(args, _json({
            "columns": [{"column": c.column, "n": c.n, "kappa": None if math.isnan(c.kappa) else c.kappa,
                         "bound": c.bound, "passed": c.passed, "valid": c.valid} for c in summary.columns],
            "successful": summary.successful, "valid": summary.valid, "total": summary.total,
        }))
    else:
        rows = ((c.column, c.n, c.kappa, c.bound, int(c.passed), int(c.valid)) for c in summary.columns)
        _emit(args, _csv(args, ["column", "n", "kappa", "bound", "passed", "valid"], rows,
                         successful=summary.successful, valid=summary.valid, total=summary.total))
    print(f"{summary.successful}/{summary.valid} valid columns pass "
          f"({summary.total - summary.valid} invalid)", file=sys.stderr)


def cmd_converge(args):
    d = {}
    if args.config:
        d.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for key, val in (("generator", args.generator), ("n", args.n), ("psi", args.psi),
                     ("repeats", args.repeats), ("path", args.path), ("column", args.column)):
        if val is not None:
            d[key] = val
    if args.m_grid:
        d["M_grid"] = [int(m) for m in args.m_grid.split(",")]
    d["seed"] = args.seed
    cfg = ExperimentConfig.from_dict(d)
    res = convergence_experiment(cfg, n_jobs=args.n_jobs)
    if args.format == "json":
        _emit(args, res.to_json() + "\n")
    else:
        buf = _header(args, config=cfg.to_dict()) + res.to_csv()
        _emit(args, buf)
    if args.plot:
        from .plots import plot_convergence
        plot_convergence(res.summary(), args.plot)


def cmd_gapstats(args):
    g = uniform_gap_statistics(args.n, args.trials, args.seed)
    if args.format == "json":
        _emit(args, g.to_json() + "\n")
    else:
        rows = [("n", g.n), ("trials", g.trials), ("mean_min_gap", g.mean_min_gap),
                ("expected", g.expected), ("frac_kappa_ge_half_sqrt_n", g.frac_kappa_ge_half_sqrt_n)]
        rows += [(f"kappa_q{p}", v) for p, v in g.kappa_quantiles.items()]
        _emit(args, _csv(args, ["statistic", "value"], rows))


def cmd_profile(args):
    s, col = _load_sample(args)
    t = depth_profile_experiment(s, args.m, trees=args.trees, seed=args.seed, n_jobs=args.n_jobs)
    _emit(args, _header(args, column=col, m=args.m, trees=args.trees) + t.to_csv())
    if args.plot:
        from .plots import plot_depth_profile
        plot_depth_profile(s.values, [r.oracle_depth for r in t.rows], args.plot,
                           forest=[r.forest_depth for r in t.rows], flagged=t.flagged)


def cmd_calibrate(args):
    _emit(args, _json(run_calibration()))


COMMANDS = {
    "fit": cmd_fit, "score": cmd_score, "oracle": cmd_oracle, "walk": cmd_walk, "knn": cmd_knn,
    "case": cmd_case, "verify": cmd_verify, "converge": cmd_converge, "gapstats": cmd_gapstats,
    "profile": cmd_profile, "calibrate": cmd_calibrate,
}


def run(argv=None) -> int:
    """Parse ``argv`` and execute; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not 0 <= args.seed < 2**64:
        print(f"isodepth: error: seed must be in [0, 2**64), got {args.seed}", file=sys.stderr)
        return 2
    print(f"seed: {args.seed}", file=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except (IsoDepthError, ValueError, KeyError, OSError, IndexError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"isodepth {args.command}: error: {msg}", file=sys.stderr)
        if isinstance(exc, DuplicateValue) and hasattr(args, "jitter"):
            print("hint: --jitter EPS breaks ties with seeded noise", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
