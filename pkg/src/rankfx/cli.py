"""Command-line front end: ``rankfx analyze``, ``rankfx simulate`` and ``rankfx effect-fn``."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .contrasts import projection_from_contrast
from .dataio import LEUCOCYTE_LEVELS, load_csv, load_leucocytes, parse_levels, read_contrast
from .effects import empirical_effect_function
from .errors import RankFXError
from .inference import analyze
from .simulation import DISTRIBUTIONS, SimSetting, power_curve, type_one_error

__all__ = ["main", "build_parser", "render_text", "format_p", "load_data"]

METHOD_ALIASES = {"ats-f": "ats-f", "ats-box": "ats-box", "ats-eigen": "ats-eigen", "wald": "wald", "kw": "kruskal-wallis"}
P_DISPLAY_FLOOR = 1e-4


def format_p(p: float) -> str:
    return "<0.0001" if p < P_DISPLAY_FLOOR else f"{p:.4f}"


def _fmt(x) -> str:
    return f"{x:.12g}"


def _split(values):
    out = []
    for v in values or ():
        out.extend(s.strip() for s in v.split(",") if s.strip())
    return out


def load_data(args):
    """Dataset from ``--data`` (a CSV path, or ``leucocytes`` for the bundled data)."""
    factors = _split(args.factors)
    levels = parse_levels(args.levels)
    if args.data == "leucocytes" and not os.path.exists(args.data):
        if args.response is None and not factors and not levels:
            return load_leucocytes()
        from importlib import resources

        path = resources.files("rankfx") / "data" / "leucocytes.csv"
        response = args.response or "leucocytes"
        factors = factors or ["food", "treatment"]
        levels = levels or {f: LEUCOCYTE_LEVELS[f] for f in factors if f in LEUCOCYTE_LEVELS}
        with path.open("r", encoding="utf-8", newline="") as fh:
            return load_csv(fh, response, factors, levels)
    if args.response is None or not factors:
        raise RankFXError("--response and --factors are required for a CSV file")
    return load_csv(args.data, args.response, factors, levels)


def _hypotheses(names, data):
    out = []
    for name in _split(names):
        if name.startswith("custom:"):
            path = name[len("custom:"):]
            C = read_contrast(path, data.d)
            out.append(projection_from_contrast(C, label=f"custom:{os.path.basename(path)}"))
        else:
            out.append(name)
    return out or None


def _table(header, rows):
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(x).rjust(w) if j else str(x).ljust(w) for j, (x, w) in enumerate(zip(row, widths))))
    return "\n".join(lines)


def _df_text(test):
    df = test["df"]
    if test["method"] == "ats-eigen":
        return f"{len(df)} eigenvalue(s)"
    return ", ".join(_fmt(v) for v in df)


def render_text(report: dict) -> str:
    """Plain-text view of an analysis report dict (as emitted in the JSON report)."""
    meta = report["metadata"]
    parts = [f"Rank-based analysis of {len(report['cells'])} cells, N = {report['N']}"]
    if report.get("factors"):
        parts[0] += f" (factors: {', '.join(report['factors'])})"
    ci_by_index = {c["index"]: c for c in report["cis"]}
    rows = []
    for i, cell in enumerate(report["cells"]):
        ci = ci_by_index[i]
        rows.append([
            cell,
            report["n"][i],
            _fmt(report["effects"][i]),
            _fmt(report["weighted_effects"][i]),
            _fmt(ci["lower"]),
            _fmt(ci["upper"]),
        ])
    level = 100 * (1 - meta["alpha"])
    parts.append("Relative effects\n" + _table(["cell", "n", "p_hat", "r_hat", f"lower{level:g}%", f"upper{level:g}%"], rows))
    parts.append(f"Intervals use the {meta['transform']} transform; f1 = {_fmt(report['f1']) if report['f1'] is not None else 'undefined'}")
    if report.get("decomposition"):
        dec = report["decomposition"]
        parts.append("\n".join([
            "Additive decomposition",
            "  alpha: " + ", ".join(_fmt(v) for v in dec["alpha"]),
            "  beta:  " + ", ".join(_fmt(v) for v in dec["beta"]),
            "  gamma: " + "; ".join(", ".join(_fmt(v) for v in row) for row in dec["gamma"]),
        ]))
    rows = [
        [t["hypothesis"], t["method"], _fmt(t["statistic"]), _df_text(t), format_p(t["p_value"]), _fmt(t["critical_value"])]
        for t in report["tests"]
    ]
    parts.append("Tests\n" + _table(["hypothesis", "method", "statistic", "df", "p-value", "critical"], rows))
    parts.append(f"alpha = {meta['alpha']}, seed = {meta['seed']}, mc_runs = {meta['mc_runs']}")
    return "\n\n".join(parts) + "\n"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _stem(out, ext):
    for e in (".json", ".txt", ".csv"):
        if out.endswith(e):
            out = out[: -len(e)]
    return out + ext


def cmd_analyze(args):
    data = load_data(args)
    methods = [METHOD_ALIASES[m] for m in _split(args.methods)]
    report = analyze(
        data,
        hypotheses=_hypotheses(args.hypothesis, data),
        methods=methods,
        alpha=args.alpha,
        transform=args.transform,
        mc_runs=args.mc_runs,
        seed=args.seed,
    ).to_dict()
    text = render_text(report)
    if args.out:
        _write(_stem(args.out, ".json"), json.dumps(report, indent=2) + "\n")
        _write(_stem(args.out, ".txt"), text)
    sys.stdout.write(text)
    return 0


def cmd_simulate(args):
    methods = tuple(METHOD_ALIASES[m] for m in _split(args.methods))
    if args.power:
        deltas = [float(x) for x in _split(args.deltas)] if args.deltas else None
        report = power_curve(args.alt, deltas, args.n, args.nsim, args.seed, methods, args.alpha, args.mc_runs)
    else:
        reports = [
            type_one_error(SimSetting(args.setting, args.dist, int(m)), methods, args.nsim, args.alpha, args.seed, args.mc_runs)
            for m in _split(args.m)
        ]
        report = reports[0]
        for extra in reports[1:]:
            report.rows.extend(extra.rows)
            report.runtime += extra.runtime
    csv_text = report.to_csv()
    if args.out:
        _write(_stem(args.out, ".csv"), csv_text)
        _write(_stem(args.out, ".json"), report.to_json() + "\n")
    sys.stdout.write(csv_text)
    return 0


def cmd_effect_fn(args):
    data = load_data(args)
    coeffs = [float(c) for c in _split(args.coeffs)]
    grid = np.unique(data.pooled())
    if args.refine:
        grid = np.union1d(grid, np.linspace(grid[0], grid[-1], args.refine))
    rows = empirical_effect_function(data, coeffs, grid)
    text = "x,value\n" + "".join(f"{_fmt(x)},{_fmt(v)}\n" for x, v in rows)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV file, or 'leucocytes' for the bundled example")
    p.add_argument("--response", help="numeric response column")
    p.add_argument("--factors", action="append", help="factor column(s), comma-separated (one or two)")
    p.add_argument("--levels", action="append", help="explicit level order, e.g. treatment=placebo,drug")


def _probability(text):
    v = float(text)
    if not 0 < v <= 0.5:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 0.5], got {v}")
    return v


def _methods(text):
    names = _split([text])
    bad = [m for m in names if m not in METHOD_ALIASES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {sorted(METHOD_ALIASES)}")
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankfx", description="Rank-based inference for factorial designs")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="analyze a dataset")
    _add_data_args(a)
    a.add_argument("--hypothesis", action="append", help="oneway, A, B, AB or custom:<contrast.csv>")
    a.add_argument("--methods", type=_methods, action="append", default=None, help="ats-f, ats-box, ats-eigen, wald, kw")
    a.add_argument("--alpha", type=_probability, default=0.05)
    a.add_argument("--transform", choices=["logit", "identity"], default="logit")
    a.add_argument("--mc-runs", type=int, default=10_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", help="output stem; writes <out>.txt and <out>.json")
    a.set_defaults(func=cmd_analyze, default_methods="ats-f,ats-box,ats-eigen,wald,kw")

    s = sub.add_parser("simulate", help="type-I error or power simulation")
    s.add_argument("--setting", type=int, default=1, help="setting id 1-5")
    s.add_argument("--dist", choices=DISTRIBUTIONS, default="normal")
    s.add_argument("--m", action="append", default=None, help="size increment(s), comma-separated")
    s.add_argument("--nsim", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--methods", type=_methods, action="append", default=None)
    s.add_argument("--alpha", type=_probability, default=0.05)
    s.add_argument("--mc-runs", type=int, default=10_000)
    s.add_argument("--power", action="store_true", help="power curve instead of type-I error")
    s.add_argument("--alt", choices=["one-point", "trend"], default="one-point")
    s.add_argument("--n", type=int, default=15, help="group size for the power curve")
    s.add_argument("--deltas", action="append", help="shift grid, comma-separated (default 0, 0.1, ..., 1.6)")
    s.add_argument("--out", help="output stem; writes <out>.csv and <out>.json")
    s.set_defaults(func=cmd_simulate, default_methods="kw,wald,ats-eigen,ats-box,ats-f")

    e = sub.add_parser("effect-fn", help="export an empirical effect function as CSV")
    _add_data_args(e)
    e.add_argument("--coeffs", action="append", required=True, help="one coefficient per cell, comma-separated")
    e.add_argument("--refine", type=int, default=0, help="add this many evenly spaced grid points")
    e.add_argument("--out", help="CSV path (stdout if omitted)")
    e.set_defaults(func=cmd_effect_fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "methods") and args.methods is None:
        args.methods = [args.default_methods]
    if getattr(args, "command", None) == "simulate" and args.m is None:
        args.m = ["0"]
    try:
        return args.func(args)
    except (RankFXError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "groups", None):
            err["groups"] = list(exc.groups)
        sys.stderr.write(json.dumps(err) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
