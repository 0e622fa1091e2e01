"""File formats: flex-offer CSV/JSON, aggregate CSV, price CSV, reports.

Flex-offer CSV: header ``id,t_es,t_ls,profile`` with the profile as
semicolon-joined kW values at 3 decimal places. Aggregates add
``constituents`` (comma-joined ids) and ``starts`` (comma-joined absolute
start hours, in id order). Price CSV: header ``hour,price_eur_mwh``, one
row per hour, plain decimal points. All writers emit ``\n`` line endings
so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

from .aggregation import AggregatedFlexOffer
from .core import FlexOffer
from .market import DropoutReport, PriceCurve, TradeReport

FO_HEADER = ["id", "t_es", "t_ls", "profile"]
AFO_HEADER = FO_HEADER + ["constituents", "starts"]


def _fmt_profile(profile: Sequence[float]) -> str:
    return ";".join(f"{p:.3f}" for p in profile)


def write_flexoffers_csv(fos: Iterable[FlexOffer], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FO_HEADER)
        for f in sorted(fos, key=lambda f: f.id):
            w.writerow([f.id, f.t_es, f.t_ls, _fmt_profile(f.profile)])


def read_flexoffers_csv(path: Path) -> list[FlexOffer]:
    fos = []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames is None or [c.strip() for c in r.fieldnames[:4]] != FO_HEADER:
            raise ValueError(f"{path}: expected header {','.join(FO_HEADER)}")
        for row in r:
            fos.append(
                FlexOffer(
                    id=int(row["id"]),
                    t_es=int(row["t_es"]),
                    t_ls=int(row["t_ls"]),
                    profile=tuple(float(p) for p in row["profile"].split(";")),
                )
            )
    return fos


def write_flexoffers_json(fos: Iterable[FlexOffer], path: Path) -> None:
    data = [
        {"id": f.id, "t_es": f.t_es, "t_ls": f.t_ls, "profile": list(f.profile)}
        for f in sorted(fos, key=lambda f: f.id)
    ]
    path.write_text(json.dumps(data, indent=1) + "\n")


def read_flexoffers_json(path: Path) -> list[FlexOffer]:
    data = json.loads(path.read_text())
    return [
        FlexOffer(
            id=d["id"], t_es=d["t_es"], t_ls=d["t_ls"], profile=tuple(d["profile"])
        )
        for d in data
    ]


def write_aggregates_csv(afos: Iterable[AggregatedFlexOffer], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AFO_HEADER)
        for a in afos:
            ids = sorted(a.constituents)
            starts = [a.constituent_start(i) for i in ids]
            w.writerow(
                [
                    a.id,
                    a.t_es,
                    a.t_ls,
                    _fmt_profile(a.profile),
                    ",".join(str(i) for i in ids),
                    ",".join(str(s) for s in starts),
                ]
            )


def read_aggregates_csv(path: Path) -> list[AggregatedFlexOffer]:
    afos = []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames is None or [c.strip() for c in r.fieldnames] != AFO_HEADER:
            raise ValueError(f"{path}: expected header {','.join(AFO_HEADER)}")
        for row in r:
            ids = [int(i) for i in row["constituents"].split(",")]
            starts = [int(s) for s in row["starts"].split(",")]
            afos.append(
                AggregatedFlexOffer(
                    id=int(row["id"]),
                    t_es=int(row["t_es"]),
                    t_ls=int(row["t_ls"]),
                    profile=tuple(float(p) for p in row["profile"].split(";")),
                    constituents=frozenset(ids),
                    starts=tuple(zip(ids, starts)),
                )
            )
    return afos


def write_prices_csv(prices: Sequence[float], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", "price_eur_mwh"])
        for h, p in enumerate(prices):
            w.writerow([h, repr(float(p))])


def read_prices_csv(path: Path) -> list[float]:
    prices = []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames is None or [c.strip() for c in r.fieldnames] != [
            "hour",
            "price_eur_mwh",
        ]:
            raise ValueError(f"{path}: expected header hour,price_eur_mwh")
        for i, row in enumerate(r):
            if int(row["hour"]) != i:
                raise ValueError(f"{path}: hours must be contiguous from 0")
            prices.append(float(row["price_eur_mwh"]))
    if not prices:
        raise ValueError(f"{path}: no price rows")
    return prices


def read_yearly_prices_csv(path: Path) -> list[list[float]]:
    """An 8760-row price CSV split into a 365x24 table."""
    prices = read_prices_csv(path)
    if len(prices) != 8760:
        raise ValueError(f"{path}: yearly file must hold 8760 rows, got {len(prices)}")
    return [prices[d * 24 : (d + 1) * 24] for d in range(365)]


def _round_money(x: float) -> float:
    return round(x, 6)


def trade_report_to_dict(report: TradeReport) -> dict:
    d = asdict(report)
    for key in ("plugin_cost", "flexorder_cost", "optimal_cost"):
        d[key] = _round_money(d[key])
    for st in d["settlements"]:
        for key in ("spot_cost", "imbalance_cost", "total_cost"):
            st[key] = _round_money(st[key])
    for o in d["orders"]:
        if o["price_limit"] == float("inf"):
            o["price_limit"] = None
    return d


def write_trade_report_json(report: TradeReport, path: Path) -> None:
    path.write_text(json.dumps(trade_report_to_dict(report), indent=1) + "\n")


def write_schedule_csv(
    curve: PriceCurve, series: dict[str, Sequence[float]], path: Path
) -> None:
    """Plot-ready table: hour, price, and one scheduled-MW column per method."""
    names = list(series)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", "price_eur_mwh"] + [f"{n}_mw" for n in names])
        for h in range(curve.horizon):
            row = [h, repr(curve.prices[h])]
            row += [f"{series[n][h] / 1000.0:.6f}" for n in names]
            w.writerow(row)


def write_dropout_csv(report: DropoutReport, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "flex_price_eur_per_kwh", "plugin_price_eur_per_kwh"])
        for pt in report.points:
            w.writerow(
                [
                    f"{pt.q:.4f}",
                    f"{pt.flex_price_eur_per_kwh:.8f}",
                    f"{pt.plugin_price_eur_per_kwh:.8f}",
                ]
            )


def write_reductions_csv(reductions: Sequence[float], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "cost_reduction_pct"])
        for i, rdx in enumerate(reductions):
            w.writerow([i, f"{rdx:.6f}"])


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    path: Path,
    command: str,
    args: dict,
    inputs: Sequence[Path],
    outputs: Sequence[Path],
    seed: int | None,
    started: float,
) -> None:
    """Reproducibility record: config echo plus input/output hashes."""
    manifest = {
        "command": command,
        "args": {k: v for k, v in sorted(args.items())},
        "seed": seed,
        "inputs": {str(p): sha256_file(Path(p)) for p in inputs},
        "outputs": {str(p): sha256_file(Path(p)) for p in outputs},
        "elapsed_s": round(time.perf_counter() - started, 3),
    }
    path.write_text(json.dumps(manifest, indent=1) + "\n")
