"""Command-line front door: generate fleets, aggregate, settle, sweep, probe.

Every command is a pure function of its inputs and the explicit seed; a
manifest JSON with input/output hashes is written next to the primary
output so reruns can be verified byte for byte. Exit codes: 0 success,
2 invalid input or configuration, 3 exhausted budget or infeasibility.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .aggregation import sa_baseline, sag_baseline
from .datagen import FleetConfig, generate_fleet
from .heuristics import MaggConfig, run_magg
from .io import (
    read_aggregates_csv,
    read_flexoffers_csv,
    read_prices_csv,
    read_yearly_prices_csv,
    trade_report_to_dict,
    write_aggregates_csv,
    write_dropout_csv,
    write_flexoffers_csv,
    write_manifest,
    write_reductions_csv,
    write_schedule_csv,
)
from .market import (
    PriceCurve,
    RegulationModel,
    dropout_analysis,
    evaluate,
    flexorder_schedule,
    optimal_schedule,
    plugin_schedule,
    yearly_sweep,
)
from .oracle import OracleBudgetExceeded, solve_exact

HEURISTIC_VARIANTS = ("lp", "dp", "dtf")
ALL_VARIANTS = ("sa", "sag") + HEURISTIC_VARIANTS


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _parse_range(spec: str) -> list[int]:
    """``start:stop:step`` inclusive, e.g. 5000:40000:5000."""
    try:
        start, stop, step = (int(x) for x in spec.split(":"))
    except ValueError:
        raise CliError(2, f"bad --sizes value {spec!r}, expected start:stop:step")
    if step <= 0 or stop < start:
        raise CliError(2, f"bad --sizes range {spec!r}")
    return list(range(start, stop + 1, step))


def _parse_grid(spec: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise CliError(2, f"bad --q-grid value {spec!r}, expected start:stop:step")
    if step <= 0 or stop < start:
        raise CliError(2, f"bad --q-grid range {spec!r}")
    grid, q = [], start
    while q <= stop + 1e-12:
        grid.append(round(q, 10))
        q += step
    return grid


def _read_config_file(path: Path) -> dict[str, str]:
    """``key = value`` lines; blank lines and # comments ignored."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(2, f"{path}:{lineno}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key] = val
    return values


def _magg_config(args) -> MaggConfig:
    values: dict[str, str] = {}
    if getattr(args, "config", None):
        values = _read_config_file(Path(args.config))
    known = {"variant", "lot", "spt_base", "ppt", "e", "max_orders"}
    unknown = set(values) - known
    if unknown:
        raise CliError(2, f"unknown config keys: {', '.join(sorted(unknown))}")

    def pick(flag, key, cast, default):
        if flag is not None:
            return flag
        if key in values:
            return cast(values[key])
        return default

    variant = pick(getattr(args, "variant", None), "variant", str, "lp")
    lot = pick(args.lot, "lot", float, None)
    if lot is None:
        lot = float(values.get("spt_base", 100.0))
    e = pick(args.e, "e", float, None)
    ppt = pick(getattr(args, "ppt", None), "ppt", int, 23)
    max_orders = pick(getattr(args, "max_orders", None), "max_orders", int, 5)
    if variant in ("sa", "sag"):
        variant_for_cfg = "lp"   # thresholds only; baselines skip the loop
    else:
        variant_for_cfg = variant
    try:
        return MaggConfig(
            variant=variant_for_cfg, spt_base=lot, ppt=ppt, e=e, max_orders=max_orders
        )
    except ValueError as exc:
        raise CliError(2, str(exc))


def _require(path: Path, kind: str) -> Path:
    if not path.exists():
        raise CliError(2, f"{kind} file not found: {path}")
    return path


def cmd_generate(args) -> None:
    started = time.perf_counter()
    if (args.n is None) == (args.sizes is None):
        raise CliError(2, "exactly one of --n or --sizes is required")
    sizes = [args.n] if args.n is not None else _parse_range(args.sizes)
    out = Path(args.out)
    outputs = []
    for n in sizes:
        try:
            cfg = FleetConfig(
                n=n,
                seed=args.seed,
                charge_power=args.power,
                power_choices=(3.7, 7.4, 11.0) if args.power_mix else None,
                eta_charger=args.eta_charger,
                eta_battery=args.eta_battery,
            )
        except ValueError as exc:
            raise CliError(2, str(exc))
        try:
            fos = generate_fleet(cfg)
        except RuntimeError as exc:
            raise CliError(3, str(exc))
        if args.n is not None:
            fo_path = out
        else:
            out.mkdir(parents=True, exist_ok=True)
            fo_path = out / f"fleet_{n}.csv"
        write_flexoffers_csv(fos, fo_path)
        meta = {
            "n": n,
            "seed": args.seed,
            "charge_power": args.power,
            "power_mix": bool(args.power_mix),
            "eta_charger": args.eta_charger,
            "eta_battery": args.eta_battery,
            "generator_version": __version__,
        }
        meta_path = fo_path.with_suffix(".meta.json")
        meta_path.write_text(json.dumps(meta, indent=1) + "\n")
        outputs += [fo_path, meta_path]
    write_manifest(
        outputs[0].with_suffix(".manifest.json"),
        "generate", vars(args) | {"func": None}, [], outputs, args.seed, started,
    )


def cmd_aggregate(args) -> None:
    started = time.perf_counter()
    fos_path = _require(Path(args.fos), "flex-offer")
    fos = read_flexoffers_csv(fos_path)
    if not fos:
        raise CliError(2, f"{fos_path}: no offers")
    if args.variant not in ALL_VARIANTS:
        raise CliError(2, f"unknown variant {args.variant!r}")
    cfg = _magg_config(args)
    t0 = time.perf_counter()
    if args.variant == "sa":
        afos = sa_baseline(fos)
        stats = {"variant": "sa", "iterations": 0, "comparisons": 0}
    elif args.variant == "sag":
        afos = sag_baseline(fos)
        stats = {"variant": "sag", "iterations": 0, "comparisons": 0}
    else:
        result = run_magg(fos, cfg)
        afos = result.all_afos
        stats = {
            "variant": args.variant,
            "iterations": result.stats.iterations,
            "comparisons": result.stats.comparisons,
            "dtf_fallbacks": result.stats.dtf_fallbacks,
            "traded_afos": len(result.orders_afos),
        }
    stats["wall_time_s"] = round(time.perf_counter() - t0, 3)
    stats["n_afos"] = len(afos)

    out_afos = Path(args.out_afos)
    write_aggregates_csv(afos, out_afos)
    outputs = [out_afos]
    if args.out_stats:
        stats_path = Path(args.out_stats)
        stats_path.write_text(json.dumps(stats, indent=1) + "\n")
        outputs.append(stats_path)
    write_manifest(
        out_afos.with_suffix(".manifest.json"),
        "aggregate", vars(args) | {"func": None}, [fos_path], outputs, None, started,
    )


def _load_afo_sets(specs: list[str]) -> dict[str, Path]:
    sets = {}
    for spec in specs:
        if "=" in spec:
            name, path = spec.split("=", 1)
        else:
            path = spec
            name = Path(path).stem
        if name in sets:
            raise CliError(2, f"duplicate aggregate set name {name!r}")
        sets[name] = _require(Path(path), "aggregate")
    return sets


def cmd_settle(args) -> None:
    started = time.perf_counter()
    fos_path = _require(Path(args.fos), "flex-offer")
    prices_path = _require(Path(args.prices), "price")
    fos = read_flexoffers_csv(fos_path)
    curve = PriceCurve(tuple(read_prices_csv(prices_path)))
    horizon_needed = max(f.t_ls + f.num_slices for f in fos)
    if curve.horizon < horizon_needed:
        raise CliError(
            2,
            f"price horizon {curve.horizon} shorter than fleet horizon "
            f"{horizon_needed}",
        )
    lot = args.lot if args.lot is not None else 100.0
    max_orders = args.max_orders if args.max_orders is not None else 5
    reg = RegulationModel(beta=args.beta)
    afo_sets = _load_afo_sets(args.afos)
    by_id = {f.id: f for f in fos}

    reports = {}
    series: dict[str, list[float]] = {
        "plugin": plugin_schedule(fos, curve.horizon),
        "optimal": optimal_schedule(fos, curve),
    }
    for name, path in afo_sets.items():
        afos = read_aggregates_csv(path)
        report = evaluate(
            fos, afos, curve, reg, lot=lot, e=args.e, max_orders=max_orders
        )
        reports[name] = trade_report_to_dict(report)
        covered: set[int] = set()
        for afo in _top_afos(afos, max_orders):
            covered |= afo.constituents
        leftover = [by_id[i] for i in sorted(set(by_id) - covered)]
        series[name] = flexorder_schedule(
            report.orders, report.settlements, leftover, curve.horizon
        )

    out_report = Path(args.out_report)
    payload = next(iter(reports.values())) if len(reports) == 1 else reports
    out_report.write_text(json.dumps(payload, indent=1) + "\n")
    out_schedule = Path(args.out_schedule)
    write_schedule_csv(curve, series, out_schedule)
    outputs = [out_report, out_schedule]
    if args.figures:
        from .report import save_schedule_figure

        fig_path = out_schedule.with_suffix(".png")
        save_schedule_figure(curve, series, fig_path)
        outputs.append(fig_path)
    write_manifest(
        out_report.with_suffix(".manifest.json"),
        "settle", vars(args) | {"func": None},
        [fos_path, prices_path, *afo_sets.values()], outputs, None, started,
    )


def _top_afos(afos, max_orders):
    from .core import energy

    ranked = sorted(range(len(afos)), key=lambda i: (-energy(afos[i]), i))
    return [afos[i] for i in ranked[:max_orders]]


def cmd_sweep_year(args) -> None:
    started = time.perf_counter()
    fos_path = _require(Path(args.fos), "flex-offer")
    prices_path = _require(Path(args.prices), "yearly price")
    fos = read_flexoffers_csv(fos_path)
    try:
        daily = read_yearly_prices_csv(prices_path)
    except ValueError as exc:
        raise CliError(2, str(exc))
    if args.variant not in HEURISTIC_VARIANTS:
        raise CliError(2, f"sweep-year needs a heuristic variant, got {args.variant!r}")
    cfg = _magg_config(args)
    reg = RegulationModel(beta=args.beta)
    reductions, mean_reduction, _ = yearly_sweep(fos, cfg, daily, reg)
    out = Path(args.out)
    write_reductions_csv(reductions, out)
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(
        json.dumps({"mean_reduction_pct": round(mean_reduction, 6)}, indent=1) + "\n"
    )
    outputs = [out, summary_path]
    if args.figures:
        from .report import save_reduction_figure

        fig_path = out.with_suffix(".png")
        save_reduction_figure(reductions, fig_path)
        outputs.append(fig_path)
    write_manifest(
        out.with_suffix(".manifest.json"),
        "sweep-year", vars(args) | {"func": None},
        [fos_path, prices_path], outputs, None, started,
    )


def cmd_dropout(args) -> None:
    started = time.perf_counter()
    fos_path = _require(Path(args.fos), "flex-offer")
    afos_path = _require(Path(args.afos), "aggregate")
    prices_path = _require(Path(args.prices), "price")
    fos = read_flexoffers_csv(fos_path)
    afos = read_aggregates_csv(afos_path)
    curve = PriceCurve(tuple(read_prices_csv(prices_path)))
    grid = _parse_grid(args.q_grid)
    if any(q >= 1 for q in grid):
        raise CliError(2, "--q-grid values must stay below 1")
    reg = RegulationModel(beta=args.beta)
    lot = args.lot if args.lot is not None else 100.0
    max_orders = args.max_orders if args.max_orders is not None else 5
    try:
        report = dropout_analysis(
            fos, afos, curve, reg, q_grid=grid, seed=args.seed,
            lot=lot, e=args.e, max_orders=max_orders,
        )
    except ValueError as exc:
        raise CliError(2, str(exc))
    out = Path(args.out)
    write_dropout_csv(report, out)
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(
        json.dumps({"break_even_q": report.break_even_q}, indent=1) + "\n"
    )
    outputs = [out, summary_path]
    if args.figures:
        from .report import save_dropout_figure

        fig_path = out.with_suffix(".png")
        save_dropout_figure(report, fig_path)
        outputs.append(fig_path)
    write_manifest(
        out.with_suffix(".manifest.json"),
        "dropout", vars(args) | {"func": None},
        [fos_path, afos_path, prices_path], outputs, args.seed, started,
    )


def cmd_oracle(args) -> None:
    started = time.perf_counter()
    fos_path = _require(Path(args.fos), "flex-offer")
    fos = read_flexoffers_csv(fos_path)
    cfg = _magg_config(args)
    try:
        result = solve_exact(fos, cfg, budget=args.budget)
    except OracleBudgetExceeded as exc:
        raise CliError(3, str(exc))
    out = Path(args.out)
    data = {
        "best_energy_kwh": result.best_energy,
        "partitions": result.partitions,
        "explored": result.explored,
        "evaluated": result.evaluated,
        "best_partition": [
            {"block": list(ids), "alignment": al.as_dict() if al else None}
            for ids, al in result.best_partition
        ],
    }
    out.write_text(json.dumps(data, indent=1) + "\n")
    write_manifest(
        out.with_suffix(".manifest.json"),
        "oracle", vars(args) | {"func": None}, [fos_path], [out], None, started,
    )


def _add_market_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, default=0.5,
                   help="regulation price spread around spot (default 0.5)")
    p.add_argument("--lot", type=float, default=None,
                   help="trade lot in kW (default 100)")
    p.add_argument("--e", type=float, default=None,
                   help="per-slice deviation band in kW (default 5%% of lot)")
    p.add_argument("--max-orders", type=int, default=None, dest="max_orders",
                   help="orders per trading day (default 5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexbid",
        description="Aggregate flexible EV charging loads into day-ahead orders.",
    )
    parser.add_argument("--workdir", default=".", help="base directory for relative paths")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic flex-offer fleet")
    g.add_argument("--n", type=int, default=None, help="fleet size")
    g.add_argument("--sizes", default=None,
                   help="generate several fleets, start:stop:step")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--power", type=float, default=3.7, help="charge power kW")
    g.add_argument("--power-mix", action="store_true",
                   help="draw charge power from {3.7, 7.4, 11}")
    g.add_argument("--eta-charger", type=float, default=0.95)
    g.add_argument("--eta-battery", type=float, default=0.95)
    g.add_argument("--out", required=True,
                   help="CSV path (--n) or directory (--sizes)")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("aggregate", help="aggregate offers with one technique")
    a.add_argument("--fos", required=True)
    a.add_argument("--variant", required=True,
                   help="one of " + ", ".join(ALL_VARIANTS))
    a.add_argument("--config", default=None, help="key = value config file")
    a.add_argument("--ppt", type=int, default=None)
    a.add_argument("--lot", type=float, default=None)
    a.add_argument("--e", type=float, default=None)
    a.add_argument("--max-orders", type=int, default=None, dest="max_orders")
    a.add_argument("--out-afos", required=True, dest="out_afos")
    a.add_argument("--out-stats", default=None, dest="out_stats")
    a.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("settle", help="settle aggregates against a price curve")
    s.add_argument("--fos", required=True)
    s.add_argument("--afos", required=True, action="append",
                   help="aggregate CSV, optionally name=path; repeatable")
    s.add_argument("--prices", required=True)
    _add_market_flags(s)
    s.add_argument("--out-report", required=True, dest="out_report")
    s.add_argument("--out-schedule", required=True, dest="out_schedule")
    s.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    s.set_defaults(func=cmd_settle)

    y = sub.add_parser("sweep-year", help="re-settle one aggregation over 364 periods")
    y.add_argument("--fos", required=True)
    y.add_argument("--prices", required=True, help="8760-row hourly price CSV")
    y.add_argument("--variant", required=True)
    y.add_argument("--config", default=None)
    y.add_argument("--ppt", type=int, default=None)
    _add_market_flags(y)
    y.add_argument("--out", required=True)
    y.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    y.set_defaults(func=cmd_sweep_year)

    d = sub.add_parser("dropout", help="consumer price under forecast dropouts")
    d.add_argument("--fos", required=True)
    d.add_argument("--afos", required=True)
    d.add_argument("--prices", required=True)
    d.add_argument("--q-grid", default="0:0.5:0.05", dest="q_grid")
    d.add_argument("--seed", type=int, required=True)
    _add_market_flags(d)
    d.add_argument("--out", required=True)
    d.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    d.set_defaults(func=cmd_dropout)

    o = sub.add_parser("oracle", help="exhaustive optimum on a small instance")
    o.add_argument("--fos", required=True)
    o.add_argument("--lot", type=float, default=None)
    o.add_argument("--e", type=float, default=None)
    o.add_argument("--max-orders", type=int, default=None, dest="max_orders")
    o.add_argument("--budget", type=int, default=5_000_000)
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    workdir = Path(args.workdir)
    if not workdir.is_dir():
        print(f"ERROR 2: workdir not found: {workdir}", file=sys.stderr)
        return 2
    cwd = os.getcwd()
    try:
        os.chdir(workdir)
        args.func(args)
        return 0
    except CliError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, OSError) as exc:
        print(f"ERROR 2: {exc}", file=sys.stderr)
        return 2
    finally:
        os.chdir(cwd)


if __name__ == "__main__":
    sys.exit(main())
