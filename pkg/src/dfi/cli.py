"""Command-line interface: ``dfi analyze``, ``dfi simulate`` and ``dfi report``.

Exit codes are 0 on success, 1 on a runtime or statistical error and 2 on
a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import replace
from xml.sax.saxutils import escape

from . import __version__
from .baselines import cpi_importance, loco_importance
from .config import RegressorConfig, RunConfig
from .core import load_csv, load_json, names_to_indices, standardize, write_report
from .errors import DFIError
from .importance import run_dfi
from .simulation import MODELS, ModelSpec, coverage_study, oracle_config, replication_study

TRANSPORTS = {"bw": "bures_wasserstein", "triangular": "triangular"}
REGRESSORS = {"forest": "random_forest", "kernel": "kernel_smoother"}
CSV_HEADER = ["name", "estimate", "se", "ci_lo", "ci_hi", "z", "p"]


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dfi", description="Disentangled feature importance.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="estimate feature importance on a CSV dataset")
    a.add_argument("--input", required=True, help="CSV file with a header row")
    a.add_argument("--target", required=True, help="name of the response column")
    a.add_argument("--groups", help="JSON object mapping group names to lists of feature names")
    a.add_argument("--folds", type=int, default=2)
    a.add_argument("--m", type=_positive_int, default=50, help="resamples per observation")
    a.add_argument("--alpha", type=float, default=0.1)
    a.add_argument("--transport", choices=sorted(TRANSPORTS), default="bw")
    a.add_argument("--regressor", choices=sorted(REGRESSORS), default="forest")
    a.add_argument("--bandwidth", type=float, help="kernel regressor bandwidth")
    a.add_argument("--trees", type=_positive_int, default=500)
    a.add_argument("--min-leaf", type=_positive_int, default=5)
    a.add_argument("--no-standardize", action="store_true")
    a.add_argument("--with-loco", action="store_true")
    a.add_argument("--with-cpi", action="store_true")
    a.add_argument("--seed", type=int, required=True)
    a.add_argument("--output", required=True)
    a.add_argument("--threads", type=_positive_int, default=1)
    a.add_argument("--verbose", action="store_true", help="include transport matrices in the report")

    s = sub.add_parser("simulate", help="run a replication or coverage study")
    s.add_argument("--model", choices=MODELS, required=True)
    s.add_argument("--rho", type=float, default=0.0)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--reps", type=_positive_int, required=True)
    s.add_argument("--coverage", action="store_true")
    s.add_argument("--oracle", action="store_true", help="use the true regression function")
    s.add_argument("--exact-sigma", action="store_true", help="use the true covariance for the transport")
    s.add_argument("--alpha", type=float, default=0.1)
    s.add_argument("--m", type=_positive_int, default=50)
    s.add_argument("--trees", type=_positive_int, default=500)
    s.add_argument("--min-leaf", type=_positive_int, default=5)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--threads", type=_positive_int, default=1)

    r = sub.add_parser("report", help="render a report or study summary as SVG or CSV")
    r.add_argument("--input", required=True)
    r.add_argument("--format", choices=("svg", "csv"), default="svg")
    r.add_argument("--which", choices=("attributed", "latent", "groups"), default="attributed")
    r.add_argument("--out", required=True)
    return p


def _set_threads(n):
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _echo(config: RunConfig, **extra):
    print("config: " + json.dumps(config.to_dict() | extra, sort_keys=True), file=sys.stderr)


def _run_config(args, kind) -> RunConfig:
    reg = RegressorConfig(
        kind=kind,
        n_trees=args.trees,
        min_leaf=args.min_leaf,
        bandwidth=getattr(args, "bandwidth", None),
        seed=args.seed,
    )
    try:
        return RunConfig(
            n_folds=getattr(args, "folds", 2),
            m_resamples=args.m,
            alpha=args.alpha,
            seed=args.seed,
            transport_kind=TRANSPORTS[getattr(args, "transport", "bw")],
            regressor=reg,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _read_groups(path, names):
    spec = load_json(path)
    if not isinstance(spec, dict) or not all(isinstance(v, list) for v in spec.values()):
        raise DFIError(f"{path}: groups must be an object mapping names to lists of feature names")
    return {g: names_to_indices(names, members) for g, members in spec.items()}


def cmd_analyze(args) -> int:
    if args.regressor == "kernel" and args.bandwidth is None:
        raise UsageError("--regressor kernel requires --bandwidth")
    config = _run_config(args, REGRESSORS[args.regressor])
    _set_threads(args.threads)
    _echo(config, input=args.input, target=args.target, standardize=not args.no_standardize)
    ds = load_csv(args.input, args.target)
    info = None
    if not args.no_standardize:
        ds, info = standardize(ds)
    groups = _read_groups(args.groups, ds.feature_names) if args.groups else None
    report = run_dfi(ds, config, groups=groups, standardization=info, verbose=args.verbose)
    base = {}
    if args.with_loco:
        base["loco"] = loco_importance(ds, config).estimates
    if args.with_cpi:
        base["cpi"] = cpi_importance(ds, config).estimates
    if base:
        report = replace(report, baselines=base)
    write_report(report, args.output)
    return 0


def cmd_simulate(args) -> int:
    try:
        spec = ModelSpec(args.model, args.n, args.rho, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    config = _run_config(args, "random_forest")
    if args.oracle:
        config = oracle_config(spec, config)
    _set_threads(args.threads)
    _echo(config, model=spec.model, rho=spec.rho, n=spec.n, reps=args.reps, coverage=args.coverage)
    start = time.perf_counter()
    if args.coverage:
        res = coverage_study(spec, config, args.reps)
    else:
        res = replication_study(spec, config, args.reps, exact_sigma=args.exact_sigma)
    res.write(args.out)
    print(f"wall clock: {time.perf_counter() - start:.2f} s for {args.reps} replicates", file=sys.stderr)
    return 0


def _rows_from(data, which):
    """``(title, total, rows, is_study)`` where each row is a dict of CSV_HEADER keys."""
    if data.get("kind") == "study":
        if which != "attributed":
            raise DFIError("study summaries only hold attributed importances")
        rows = [{"name": f["name"], "estimate": f["mean"], "se": f["sd"]} for f in data["features"]]
        title = f"{data['model']} rho={data['rho']} n={data['n']} reps={data['reps']}"
        return title, data["total"]["mean"], rows, True
    try:
        ests = data[which]
        total = math.fsum(e["estimate"] for e in ests)
        rows = [
            {"name": e["name"], "estimate": e["estimate"], "se": e["se"], "ci_lo": e["ci"][0], "ci_hi": e["ci"][1], "z": e["z"], "p": e["p"]}
            for e in ests
        ]
    except (KeyError, TypeError, IndexError) as exc:
        raise DFIError(f"input is neither an importance report nor a study summary ({exc!r})") from exc
    return f"{which} importance", total, rows, False


def _fmt(v):
    return "" if v is None else repr(float(v))


def render_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r["name"]] + [_fmt(r.get(k)) for k in CSV_HEADER[1:]])
    return buf.getvalue()


def render_svg(title, total, rows, is_study) -> str:
    """Standalone 800x500 bar chart; negative estimates are drawn as empty bars."""
    width, height = 800, 500
    left, right, top, bottom = 70, 20, 50, 80
    plot_w, plot_h = width - left - right, height - top - bottom
    tops = [max(r["estimate"], 0.0) + abs(r["se"]) for r in rows] or [1.0]
    ymax = max(tops) or 1.0
    ymax *= 1.05
    slot = plot_w / max(len(rows), 1)

    def y(v):
        return top + plot_h * (1.0 - min(max(v, 0.0), ymax) / ymax)

    bar_label = "sd" if is_study else "se"
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f"<!-- generator: dfi {__version__} -->",
        '<rect x="0" y="0" width="800" height="500" fill="white"/>',
        f'<text class="title" x="{width / 2:.1f}" y="28" text-anchor="middle" font-family="sans-serif" font-size="16">'
        f"{escape(title)} (total = {total:.4g}; error bars: ±1 {bar_label})</text>",
        f'<line x1="{left}" y1="{top + plot_h}" x2="{width - right}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
    ]
    for k in range(5):
        v = ymax * k / 4
        out.append(
            f'<text x="{left - 6}" y="{y(v) + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3g}</text>'
        )
    for i, r in enumerate(rows):
        est, se = float(r["estimate"]), abs(float(r["se"]))
        cx = left + slot * (i + 0.5)
        bw = slot * 0.6
        h = (top + plot_h) - y(est)
        out.append(
            f'<rect class="bar" x="{cx - bw / 2:.2f}" y="{y(est):.2f}" width="{bw:.2f}" height="{h:.2f}" fill="#4878a8">'
            f"<title>{escape(r['name'])}: {est:.6g} ± {se:.3g}</title></rect>"
        )
        lo, hi = y(max(est, 0.0) - se), y(max(est, 0.0) + se)
        out.append(f'<line class="errorbar" x1="{cx:.2f}" y1="{lo:.2f}" x2="{cx:.2f}" y2="{hi:.2f}" stroke="black"/>')
        out.append(
            f'<text x="{cx:.2f}" y="{top + plot_h + 16}" text-anchor="middle" font-family="sans-serif" font-size="11">'
            f"{escape(r['name'])}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_report(args) -> int:
    data = load_json(args.input)
    if not isinstance(data, dict):
        raise DFIError(f"{args.input}: expected a JSON object")
    title, total, rows, is_study = _rows_from(data, args.which)
    text = render_csv(rows) if args.format == "csv" else render_svg(title, total, rows, is_study)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DFIError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
    return 0


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except (DFIError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
