"""Batch front door: derive groups, build designs, score and invert them.

Every randomized command takes --seed (default 0) and echoes it in the
report header, so rerunning with identical arguments reproduces each
output file byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .designs import (
    Design,
    WeightedModel,
    coordinate_exchange,
    criterion_imv,
    i_efficiency,
    weight_sweep,
)
from .dimension import DAModel, derive_model
from .geometry import region_for
from .ipsen import ipsen_derive, model_from_ipsen, render_csv, render_text
from .models import full_poly, moment_matrix
from .problems import ProblemFormatError, load_problem
from .robustda import empirical_model, maximin_over_w
from .uniform import DEFAULT_CLOUD, fff_select, rejection_sample

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

MOMENT_SAMPLES = 50_000


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _write(out_dir: Path, name: str, text: str) -> None:
    (out_dir / name).write_text(text, encoding="utf-8")


def _load(path: str):
    try:
        return load_problem(path)
    except FileNotFoundError:
        _err(f"no such problem file: {path}")
        return None
    except ProblemFormatError as e:
        for line in e.errors:
            _err(line)
        return None


def _build_model(problem) -> DAModel:
    if problem.ipsen_order is not None:
        return model_from_ipsen(problem)
    return derive_model(problem)


def _kept_response_names(model: DAModel) -> list[str]:
    dropped = {name for name, _ in model.excluded_responses}
    return [q.name for q in model.problem.responses if q.name not in dropped]


def _response_orders(args, n_resp: int) -> list[int] | None:
    if args.orders_per_response:
        try:
            orders = [int(t) for t in args.orders_per_response.split(",")]
        except ValueError:
            _err("--orders-per-response takes a comma-separated list of integers")
            return None
        if len(orders) != n_resp:
            _err(
                f"--orders-per-response lists {len(orders)} orders "
                f"but the model has {n_resp} response groups"
            )
            return None
    else:
        orders = [args.order] * n_resp
    if any(o < 1 for o in orders):
        _err("polynomial order must be at least 1")
        return None
    return orders


def _response_models(model: DAModel, orders: list[int]):
    """One polynomial per response group, on its declared factor subset."""
    kept = _kept_response_names(model)
    subsets = model.response_factor_subsets or {}
    out = []
    for i, g in enumerate(model.response_groups):
        rname = kept[g.response_index]
        idx = subsets.get(rname)
        factor_idx = None if idx is None else tuple(j - 1 for j in idx)
        out.append(
            full_poly(
                orders[i],
                model.n_factors,
                name=f"phi{i + 1}",
                map_kind="pi",
                factor_idx=factor_idx,
            )
        )
    return out


def _design_pi_csv(design: Design) -> str:
    names = design.region.map.factor_names
    header = ["run"] + [f"log_{s}" for s in names] + list(names)
    lp = design.pi_log
    rows = [
        [str(i + 1)] + [_fmt(v) for v in lp[i]] + [_fmt(v) for v in np.exp(lp[i])]
        for i in range(design.n)
    ]
    return _table(header, rows)


def _projection_csvs(tag: str, names, coords) -> dict[str, str]:
    """Pairwise 2-D scatter data, one file per coordinate pair."""
    out = {}
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            rows = [
                [str(k + 1), _fmt(coords[k, i]), _fmt(coords[k, j])]
                for k in range(coords.shape[0])
            ]
            out[f"proj_{tag}_{i + 1}_{j + 1}.csv"] = _table(
                ["run", names[i], names[j]], rows
            )
    return out


def _export_design(out_dir: Path, design: Design, chi_projections: bool) -> None:
    _write(out_dir, "design_factors.csv", design.to_csv())
    _write(out_dir, "design_pi.csv", _design_pi_csv(design))
    pmap = design.region.map
    for name, text in _projection_csvs(
        "pi", [f"log_{s}" for s in pmap.factor_names], design.pi_log
    ).items():
        _write(out_dir, name, text)
    if chi_projections:
        for name, text in _projection_csvs(
            "chi", list(pmap.input_names), design.chi
        ).items():
            _write(out_dir, name, text)


# ---------------------------------------------------------------------------
# derive


def cmd_derive(args) -> int:
    problem = _load(args.problem)
    if problem is None:
        return EXIT_USAGE
    try:
        model = _build_model(problem)
    except ValueError as e:
        _err(str(e))
        return EXIT_FAIL

    kept = _kept_response_names(model)
    c = model.counts
    lines = [f"problem: {problem.name or args.problem}"]
    lines.append(f"base dimensions: {', '.join(problem.base_dims)}")
    lines.append(
        f"quantities: {len(problem.responses)} responses, "
        f"{len(problem.predictors)} predictors, "
        f"{len(problem.constants)} held constant"
    )
    lines.append(
        f"counts: rank(B) = {c.rank_predictors}, "
        f"predictor groups = {len(model.predictor_groups)}, "
        f"responses kept = {c.n_kept}, response groups = {c.n_groups}"
    )
    lines.append(
        "span check: all response dimensions lie in the predictor span"
        if model.span_ok
        else "span check: some response dimensions fall outside the predictor "
             "span; groups may combine responses"
    )
    lines.append("predictor groups:")
    for i, g in enumerate(model.predictor_groups):
        lines.append(f"  pi_{i + 1} = {g.formula}")
    lines.append("response groups:")
    for i, g in enumerate(model.response_groups):
        rname = kept[g.response_index] if g.response_index is not None else "?"
        lines.append(f"  pi0_{i + 1} ({rname}) = {g.formula}")
    if model.excluded_responses:
        lines.append("excluded responses:")
        for name, reason in model.excluded_responses:
            lines.append(f"  {name}: {reason}")
    report = "\n".join(lines) + "\n"
    print(report, end="")

    tableau = None
    if args.tableau:
        tableau = ipsen_derive(problem)
        print(render_text(tableau))

    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write(out_dir, "report.txt", report)
        qnames = [q.name for q in problem.quantities]
        rows = []
        for i, g in enumerate(model.predictor_groups):
            rows.append(
                ["predictor", f"pi_{i + 1}", "", g.formula]
                + [str(g.exponent_of(nm)) for nm in qnames]
            )
        for i, g in enumerate(model.response_groups):
            rname = kept[g.response_index] if g.response_index is not None else ""
            rows.append(
                ["response", f"pi0_{i + 1}", rname, g.formula]
                + [str(g.exponent_of(nm)) for nm in qnames]
            )
        _write(
            out_dir,
            "groups.csv",
            _table(["kind", "group", "response", "formula"] + qnames, rows),
        )
        if tableau is not None:
            _write(out_dir, "tableau.csv", render_csv(tableau))

    if not model.response_groups:
        _err("no usable response groups")
        return EXIT_FAIL
    return EXIT_USAGE if model.excluded_responses else EXIT_OK


# ---------------------------------------------------------------------------
# design


def _report_header(args, problem, extra=()) -> list[str]:
    lines = [
        f"problem: {problem.name or args.problem}",
        f"mode: {args.mode}",
        f"n: {args.n}",
        f"seed: {args.seed}",
    ]
    lines.extend(extra)
    return lines


def _design_optimal(args, model, region, out_dir, lines) -> int:
    orders = _response_orders(args, len(model.response_groups))
    if orders is None:
        return EXIT_USAGE
    models = _response_models(model, orders)
    lines.append(f"orders: {', '.join(str(o) for o in orders)}")
    nsamp = args.samples or MOMENT_SAMPLES
    lines.append(f"moment samples: {nsamp}")
    mhats = [moment_matrix(m, region, n=nsamp, seed=args.seed) for m in models]

    if args.sweep:
        if len(models) != 2:
            _err("--sweep needs exactly two response models")
            return EXIT_USAGE
        sweep = weight_sweep(
            region, models, mhats, args.n, seed=args.seed,
            n_starts=5, jobs=args.jobs,
        )
        k = sweep.maximin_index
        design = sweep.designs[k]
        rows = [
            [_fmt(w), _fmt(e1), _fmt(e2)]
            for w, (e1, e2) in zip(sweep.grid, sweep.efficiencies)
        ]
        _write(out_dir, "weight_curve.csv", _table(["w1", "e_phi1", "e_phi2"], rows))
        lines.append(f"maximin weight w1* = {_fmt(sweep.maximin_weight)}")
        lines.append(
            f"efficiencies at w1*: e_phi1 = {_fmt(sweep.efficiencies[k, 0])}, "
            f"e_phi2 = {_fmt(sweep.efficiencies[k, 1])}"
        )
    else:
        if len(models) == 2:
            w1 = 0.5 if args.w1 is None else args.w1
            if not 0.0 <= w1 <= 1.0:
                _err("--w1 must lie in [0, 1]")
                return EXIT_USAGE
            weights = [w1, 1.0 - w1]
            lines.append(f"w1: {_fmt(w1)}")
        else:
            weights = [1.0 / len(models)] * len(models)
        wms = [
            WeightedModel(m, h, w)
            for m, h, w in zip(models, mhats, weights)
            if w > 0
        ]
        res = coordinate_exchange(
            region, wms, args.n, seed=args.seed, n_starts=5
        )
        design = res.design
        lines.append(f"criterion value: {_fmt(res.value)}")
        rep = criterion_imv(design, wms)
        for wm, tr in zip(wms, rep.traces):
            lines.append(f"trace[{wm.model.name}] = {_fmt(tr)}")

    _export_design(out_dir, design, chi_projections=False)
    return EXIT_OK


def _design_uniform(args, model, region, out_dir, lines) -> int:
    orders = _response_orders(args, len(model.response_groups))
    if orders is None:
        return EXIT_USAGE
    ncand = args.samples or DEFAULT_CLOUD
    cloud = rejection_sample(region, n=ncand, seed=args.seed)
    lines.append(f"candidates: {ncand}")
    lines.append(
        f"acceptance rate: {cloud.acceptance_rate:.4f} "
        f"({cloud.n}/{cloud.n_proposed} proposals)"
    )
    fff = fff_select(cloud, args.n, representative=args.representative)
    lines.append(f"representative: {args.representative}")
    design = fff.design
    _write(out_dir, "cloud.csv", cloud.to_csv())

    models = _response_models(model, orders)
    lines.append(f"orders: {', '.join(str(o) for o in orders)}")
    for m in models:
        mhat = moment_matrix(m, region, n=MOMENT_SAMPLES, seed=args.seed)
        wm = WeightedModel(m, mhat, 1.0)
        ref = coordinate_exchange(region, [wm], args.n, seed=args.seed, n_starts=5)
        eff = i_efficiency(design, ref.design, wm)
        lines.append(f"I-efficiency vs {m.name} optimum: {_fmt(eff)}")

    _export_design(out_dir, design, chi_projections=False)
    return EXIT_OK


def _design_robust(args, model, region, out_dir, lines) -> int:
    orders = _response_orders(args, len(model.response_groups))
    if orders is None:
        return EXIT_USAGE
    models = _response_models(model, orders)
    lines.append(f"orders: {', '.join(str(o) for o in orders)}")
    nsamp = args.samples or MOMENT_SAMPLES
    lines.append(f"moment samples: {nsamp}")
    da_wmodels = [
        WeightedModel(m, moment_matrix(m, region, n=nsamp, seed=args.seed),
                      1.0 / len(models))
        for m in models
    ]
    chi_model, chi_mhat = empirical_model(region.p)
    chi_wm = WeightedModel(chi_model, chi_mhat, 1.0)
    if args.n < max(chi_model.m, max(m.m for m in models)):
        _err(
            f"n={args.n} cannot support the largest model "
            f"(m={max(chi_model.m, max(m.m for m in models))})"
        )
        return EXIT_USAGE

    if args.sweep:
        grid = None
    else:
        w = 0.5 if args.w1 is None else args.w1
        if not 0.0 <= w <= 1.0:
            _err("--w1 must lie in [0, 1]")
            return EXIT_USAGE
        grid = [w]
    sweep = maximin_over_w(
        region, da_wmodels, chi_wm, args.n,
        grid=grid, seed=args.seed, n_starts=5, jobs=args.jobs,
    )
    k = sweep.maximin_index
    design = sweep.designs[k]
    _write(out_dir, "robust_curve.csv", sweep.curve_csv())
    lines.append(f"reference trace (DA): {_fmt(sweep.ref_da)}")
    lines.append(f"reference trace (chi): {_fmt(sweep.ref_chi)}")
    if args.sweep:
        lines.append(f"maximin weight w* = {_fmt(sweep.maximin_weight)}")
    else:
        lines.append(f"w: {_fmt(sweep.grid[k])}")
    lines.append(
        f"efficiencies: E_pi = {_fmt(sweep.efficiencies[k, 0])}, "
        f"E_chi = {_fmt(sweep.efficiencies[k, 1])}"
    )
    _export_design(out_dir, design, chi_projections=True)
    return EXIT_OK


def cmd_design(args) -> int:
    problem = _load(args.problem)
    if problem is None:
        return EXIT_USAGE
    if args.n < 1:
        _err("--n must be a positive run count")
        return EXIT_USAGE
    try:
        model = _build_model(problem)
    except ValueError as e:
        _err(str(e))
        return EXIT_FAIL
    if not model.response_groups:
        _err("no usable response groups")
        return EXIT_FAIL
    region = region_for(model)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = _report_header(args, problem)

    handler = {
        "optimal": _design_optimal,
        "uniform": _design_uniform,
        "robust": _design_robust,
    }[args.mode]
    try:
        code = handler(args, model, region, out_dir, lines)
    except (ValueError, RuntimeError) as e:
        _err(str(e))
        return EXIT_FAIL
    if code != EXIT_OK:
        return code
    report = "\n".join(lines) + "\n"
    print(report, end="")
    _write(out_dir, "report.txt", report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# efficiency


def _read_csv_columns(path: str, needed) -> np.ndarray | None:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            missing = [c for c in needed if c not in fields]
            if missing:
                _err(f"{path}: missing column(s): {', '.join(missing)}")
                return None
            rows = [[float(r[c]) for c in needed] for r in reader]
    except FileNotFoundError:
        _err(f"no such design file: {path}")
        return None
    except ValueError as e:
        _err(f"{path}: {e}")
        return None
    if not rows:
        _err(f"{path}: no data rows")
        return None
    return np.asarray(rows, dtype=float)


def cmd_efficiency(args) -> int:
    problem = _load(args.problem)
    if problem is None:
        return EXIT_USAGE
    try:
        model = _build_model(problem)
    except ValueError as e:
        _err(str(e))
        return EXIT_FAIL
    if not model.response_groups:
        _err("no usable response groups")
        return EXIT_FAIL
    region = region_for(model)

    chi = _read_csv_columns(args.design, list(region.map.input_names))
    if chi is None:
        return EXIT_USAGE
    if np.any(chi <= 0):
        _err("factor settings must be positive")
        return EXIT_USAGE
    design = Design(chi_log=np.log(chi), region=region)

    orders = _response_orders(args, len(model.response_groups))
    if orders is None:
        return EXIT_USAGE
    models = _response_models(model, orders)
    nsamp = args.samples or MOMENT_SAMPLES
    lines = [
        f"problem: {problem.name or args.problem}",
        f"design: {args.design} ({design.n} runs)",
        f"seed: {args.seed}",
        f"orders: {', '.join(str(o) for o in orders)}",
    ]
    for m in models:
        if design.n < m.m:
            _err(f"{m.name}: design has {design.n} runs, fewer than m={m.m} terms")
            return EXIT_USAGE
        mhat = moment_matrix(m, region, n=nsamp, seed=args.seed)
        wm = WeightedModel(m, mhat, 1.0)
        ref = coordinate_exchange(region, [wm], design.n, seed=args.seed, n_starts=5)
        eff = i_efficiency(design, ref.design, wm)
        lines.append(f"I-efficiency vs {m.name} optimum: {_fmt(eff)}")
    report = "\n".join(lines) + "\n"
    print(report, end="")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write(out_dir, "efficiency.txt", report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# backsolve


def cmd_backsolve(args) -> int:
    problem = _load(args.problem)
    if problem is None:
        return EXIT_USAGE
    try:
        model = _build_model(problem)
    except ValueError as e:
        _err(str(e))
        return EXIT_FAIL
    if not model.response_groups:
        _err("no usable response groups")
        return EXIT_FAIL
    region = region_for(model)

    pi = _read_csv_columns(args.points, list(region.map.factor_names))
    if pi is None:
        return EXIT_USAGE
    if np.any(pi <= 0):
        _err("group values must be positive")
        return EXIT_USAGE
    Y = np.log(pi)
    res = region.backsolve(Y)
    inside = res.resid <= region.tol
    header = (
        ["run"]
        + list(region.map.input_names)
        + ["residual", "in_region"]
    )
    rows = []
    for i in range(Y.shape[0]):
        rows.append(
            [str(i + 1)]
            + [_fmt(v) for v in res.chi[i]]
            + [f"{res.resid[i]:.3e}", "1" if inside[i] else "0"]
        )
    text = _table(header, rows)
    print(text, end="")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write(out_dir, "factors.csv", text)
    n_out = int(np.count_nonzero(~inside))
    if n_out:
        print(f"note: {n_out} point(s) fall outside the region", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pidesign",
        description="Dimensional-analysis model derivation and design of experiments.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0,
                       help="RNG seed, recorded in the report (default 0)")
        p.add_argument("--order", type=int, default=2,
                       help="polynomial order for every response model (default 2)")
        p.add_argument("--orders-per-response", default="",
                       help="comma-separated per-response orders, overrides --order")
        p.add_argument("--samples", type=int, default=0,
                       help="Monte Carlo sample count: candidate cloud size in "
                            "uniform mode (default 10000), moment-matrix samples "
                            "otherwise (default 50000)")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker cap (default 1)")
        p.add_argument("--out-dir", default="",
                       help="directory for CSV and report exports")

    p = sub.add_parser("derive", help="derive dimensionless groups from a problem file")
    p.add_argument("problem", help="problem definition (JSON)")
    p.add_argument("--tableau", action="store_true",
                   help="print the stepwise elimination tableau")
    p.add_argument("--out-dir", default="",
                   help="directory for CSV and report exports")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("design", help="construct a design on the group region")
    p.add_argument("problem")
    p.add_argument("--mode", choices=("optimal", "uniform", "robust"),
                   default="optimal")
    p.add_argument("--n", type=int, required=True, help="number of runs")
    p.add_argument("--w1", type=float, default=None,
                   help="optimal: weight on the first response model; "
                        "robust: compound weight w (default 0.5)")
    p.add_argument("--sweep", action="store_true",
                   help="sweep the weight grid and keep the maximin design")
    p.add_argument("--representative", choices=("maxpro", "centroid", "nearest"),
                   default="maxpro",
                   help="uniform mode: cluster representative rule (default maxpro)")
    common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("efficiency", help="score a factor-space design CSV")
    p.add_argument("design", help="CSV with one column per predictor")
    p.add_argument("problem")
    common(p)
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("backsolve", help="map group values back to factor settings")
    p.add_argument("points", help="CSV with one column per group")
    p.add_argument("problem")
    p.add_argument("--out-dir", default="")
    p.set_defaults(func=cmd_backsolve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
