"""Figure rendering for the report-producing commands.

Every figure is written next to its delimited output; the CSV/JSON files
remain the machine contract and the PNGs are the human view of the same
series.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .market import DropoutReport, PriceCurve


def save_schedule_figure(
    curve: PriceCurve, series: dict[str, Sequence[float]], path: Path
) -> None:
    """Hourly scheduled MW per method against the price curve."""
    fig, ax = plt.subplots(figsize=(9, 4.5))
    hours = range(curve.horizon)
    for name, load_kw in series.items():
        ax.step(hours, [p / 1000.0 for p in load_kw], where="post", label=name)
    ax.set_xlabel("hour")
    ax.set_ylabel("scheduled load [MW]")
    ax2 = ax.twinx()
    ax2.step(hours, curve.prices, where="post", color="black", ls="--", lw=1,
             label="price")
    ax2.set_ylabel("price [EUR/MWh]")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_reduction_figure(reductions: Sequence[float], path: Path) -> None:
    """Per-period cost reduction over the trading year."""
    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.plot(range(len(reductions)), reductions, lw=0.8)
    ax.axhline(0, color="black", lw=0.5)
    ax.set_xlabel("trading period")
    ax.set_ylabel("cost reduction [%]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_dropout_figure(report: DropoutReport, path: Path) -> None:
    """Consumer energy price against the dropout fraction."""
    fig, ax = plt.subplots(figsize=(6, 4))
    qs = [p.q * 100 for p in report.points]
    ax.plot(qs, [p.flex_price_eur_per_kwh for p in report.points],
            marker="o", ms=3, label="flexible orders")
    ax.plot(qs, [p.plugin_price_eur_per_kwh for p in report.points],
            ls="--", label="plug-in")
    if report.break_even_q is not None:
        ax.axvline(report.break_even_q * 100, color="gray", lw=0.8)
    ax.set_xlabel("EVs not needing the purchased energy [%]")
    ax.set_ylabel("price [EUR/kWh]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
