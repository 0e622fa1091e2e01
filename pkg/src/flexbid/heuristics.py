"""Market-based aggregation heuristics.

The main loop repeatedly (1) picks a seed offer and a processing set, (2)
grows the seed through pairwise aggregations that pull the profile toward
the current slice-power target, snapshotting a finished aggregate whenever
every slice lands inside the target band, and (3) decides whether the
remaining offers are still worth another round. Three initialization
variants differ in which offers they let into the processing set:

* ``lp`` seeds with the most flexible among the longest offers.
* ``dp`` first drops offers whose profile length lies above the Tukey
  upper fence.
* ``dtf`` raises the flexibility threshold to the Tukey lower fence of the
  time-flexibility distribution and drops everything below it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from statistics import median
from typing import Iterable, Literal, Sequence

from .aggregation import (
    Alignment,
    AggregatedFlexOffer,
    aggregate_at,
    binary_aggregation,
)
from .core import FlexOffer, energy

Variant = Literal["lp", "dp", "dtf"]


@dataclass(frozen=True)
class MaggConfig:
    """Thresholds mapping the flexible-order rules onto the aggregation loop.

    ``e`` defaults to 5% of the lot size so that desk-scale tests (lot 2 kW)
    and market scale (lot 100 kW) use proportionate bands.
    """

    variant: Variant = "lp"
    spt_base: float = 100.0          # trade lot, kW
    ppt: int = 23                    # max slices of an aggregate
    e: float | None = None           # allowed per-slice deviation, kW
    max_orders: int = 5

    def __post_init__(self):
        if self.e is None:
            object.__setattr__(self, "e", 0.05 * self.spt_base)
        if self.variant not in ("lp", "dp", "dtf"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.spt_base <= 0:
            raise ValueError("spt_base must be positive")
        if not 1 <= self.ppt <= 23:
            raise ValueError("ppt must be in [1, 23]")
        if not 0 <= self.e < self.spt_base / 2:
            raise ValueError("e must satisfy 0 <= e < spt_base/2")
        if self.max_orders < 1:
            raise ValueError("max_orders must be >= 1")


@dataclass
class MaggState:
    """Mutable loop state threaded through one processing round."""

    pf: list[FlexOffer]              # offers still available for pairing
    uf: list[FlexOffer]              # offers excluded by initialization
    af: list[AggregatedFlexOffer]    # completed aggregates, creation order
    f_ini: FlexOffer                 # the growing aggregate
    tft: float                       # time-flexibility threshold
    spt: float                       # current slice-power target


@dataclass
class ProcessTrace:
    """Instrumentation from one processing pass (used by property tests)."""

    comparisons: int = 0
    snapshot_spts: list[float] = field(default_factory=list)
    accepted: list[tuple[float, float]] = field(default_factory=list)  # (spt, rmse)
    f_a: AggregatedFlexOffer | None = None


@dataclass
class MaggStats:
    variant: str
    iterations: int = 0              # initialization phases executed
    comparisons: int = 0             # pair alignments evaluated
    wall_time_s: float = 0.0
    dtf_fallbacks: int = 0


@dataclass
class MaggResult:
    orders_afos: list[AggregatedFlexOffer]
    all_afos: list[AggregatedFlexOffer]
    leftover: list[FlexOffer]
    stats: MaggStats
    traces: list[ProcessTrace] = field(default_factory=list)


def tukey_hinges(values: Sequence[float]) -> tuple[float, float]:
    """(Q1, Q3) by the median-of-halves rule; odd counts share the median."""
    v = sorted(values)
    n = len(v)
    if n == 0:
        raise ValueError("no values")
    h = (n + 1) // 2
    return median(v[:h]), median(v[n - h:])


def upper_fence(values: Sequence[float]) -> float:
    q1, q3 = tukey_hinges(values)
    return q3 + 1.5 * (q3 - q1)


def lower_fence(values: Sequence[float]) -> float:
    q1, q3 = tukey_hinges(values)
    return q1 - 1.5 * (q3 - q1)


def is_order_conforming(f: FlexOffer, cfg: MaggConfig) -> bool:
    """Whether an aggregate satisfies all flexible-order requirements.

    Needs flexibility of at least one hour, at most ``ppt`` slices, and a
    single positive lot multiple that every slice approximates within ``e``
    (strictly; with ``e = 0`` the band collapses to exact multiples).
    """
    if f.time_flexibility < 1:
        return False
    if not 1 <= f.num_slices <= cfg.ppt:
        return False
    lot, e = cfg.spt_base, cfg.e
    x = max(1, round(f.profile[0] / lot))
    for p in f.profile:
        if e == 0:
            if p != x * lot:
                return False
        elif not (x * lot - e < p < x * lot + e):
            return False
    return True


def _select_seed(fos: Sequence[FlexOffer]) -> FlexOffer:
    """Most flexible among the longest offers; ties go to the lowest id."""
    return min(fos, key=lambda f: (-f.num_slices, -f.time_flexibility, f.id))


def initialize_lp(fos: Sequence[FlexOffer]):
    f_ini = _select_seed(fos)
    pf = [f for f in fos if f.id != f_ini.id]
    return pf, [], f_ini, 1.0, False


def initialize_dp(fos: Sequence[FlexOffer]):
    fence = upper_fence([f.num_slices for f in fos])
    pf = [f for f in fos if f.num_slices <= fence]
    uf = [f for f in fos if f.num_slices > fence]
    f_ini = _select_seed(pf)
    pf = [f for f in pf if f.id != f_ini.id]
    return pf, uf, f_ini, 1.0, False


def initialize_dtf(fos: Sequence[FlexOffer]):
    tft = max(1.0, lower_fence([f.time_flexibility for f in fos]))
    pf = [f for f in fos if f.time_flexibility >= tft]
    fallback = not pf
    if fallback:
        tft, pf, uf = 1.0, list(fos), []
    else:
        uf = [f for f in fos if f.time_flexibility < tft]
    f_ini = _select_seed(pf)
    pf = [f for f in pf if f.id != f_ini.id]
    return pf, uf, f_ini, tft, fallback


_INITIALIZERS = {"lp": initialize_lp, "dp": initialize_dp, "dtf": initialize_dtf}


def _rmse(profile: Sequence[float], spt: float) -> float:
    return math.sqrt(sum((p - spt) ** 2 for p in profile) / len(profile))


def _cv(profile: Sequence[float]) -> float:
    m = len(profile)
    mean = sum(profile) / m
    if mean == 0:
        return math.inf
    if m == 1:
        return 0.0
    return math.sqrt(sum((p - mean) ** 2 for p in profile) / (m - 1)) / mean


def _in_band(profile: Sequence[float], spt: float, e: float) -> bool:
    if e == 0:
        return all(p == spt for p in profile)
    return all(spt - e < p < spt + e for p in profile)


def _pair_offsets(f_ini: FlexOffer, f: FlexOffer):
    """Canonical shift pairs in the same order as enumerate_binary_alignments."""
    for sa in range(f_ini.time_flexibility + 1):
        if sa == 0:
            for sb in range(f.time_flexibility + 1):
                yield 0, sb
        else:
            yield sa, 0


def process(state: MaggState, cfg: MaggConfig) -> tuple[MaggState, ProcessTrace]:
    """One pass over the processing set, growing the seed aggregate.

    Offers are visited in descending time-flexibility order (ties by id).
    An offer joins the aggregate when some admissible alignment lowers the
    RMSE against the current target; among those the lowest-CV candidate
    wins. Whenever every slice of the aggregate falls strictly inside the
    target band, the aggregate is snapshotted, the merged offers leave the
    processing set, and the target climbs by one lot. Only the last
    snapshot of the pass is returned; offers merged after it stay in the
    processing set for later rounds.
    """
    trace = ProcessTrace()
    order = sorted(state.pf, key=lambda f: (-f.time_flexibility, f.id))
    remaining = {f.id: f for f in order}
    buffer: list[int] = []
    f_ini, tft, spt, e, ppt = state.f_ini, state.tft, state.spt, cfg.e, cfg.ppt

    for f in order:
        prof_i, prof_f = f_ini.profile, f.profile
        mi, mf = len(prof_i), len(prof_f)
        rmse_ini = _rmse(prof_i, spt)
        best_cv = math.inf
        best_offsets: tuple[int, int] | None = None
        for sa, sb in _pair_offsets(f_ini, f):
            trace.comparisons += 1
            a_i = f_ini.t_es + sa
            a_f = f.t_es + sb
            if min(f_ini.t_ls - a_i, f.t_ls - a_f) < tft:
                continue
            start = a_i if a_i < a_f else a_f
            end = max(a_i + mi, a_f + mf)
            if end - start > ppt:
                continue
            merged = [0.0] * (end - start)
            off = a_i - start
            for k in range(mi):
                merged[off + k] += prof_i[k]
            off = a_f - start
            for k in range(mf):
                merged[off + k] += prof_f[k]
            if _rmse(merged, spt) >= rmse_ini:
                continue
            cv = _cv(merged)
            if cv < best_cv:
                best_cv = cv
                best_offsets = (sa, sb)
        if best_offsets is not None:
            sa, sb = best_offsets
            al = Alignment.of({f_ini.id: f_ini.t_es + sa, f.id: f.t_es + sb})
            cand = binary_aggregation(f_ini, f, al, tft, ppt)
            assert cand is not None
            buffer.append(f.id)
            f_ini = cand
            trace.accepted.append((spt, _rmse(cand.profile, spt)))
        if _in_band(f_ini.profile, spt, e):
            trace.f_a = _snapshot(f_ini)
            for fid in buffer:
                del remaining[fid]
            buffer = []
            trace.snapshot_spts.append(spt)
            spt += cfg.spt_base

    new_af = state.af + ([trace.f_a] if trace.f_a is not None else [])
    new_pf = [f for f in order if f.id in remaining]
    new_state = MaggState(
        pf=new_pf, uf=state.uf, af=new_af, f_ini=f_ini, tft=tft, spt=spt
    )
    return new_state, trace


def _snapshot(f: FlexOffer) -> AggregatedFlexOffer:
    if isinstance(f, AggregatedFlexOffer):
        return f
    return aggregate_at([f], Alignment.of({f.id: f.t_es}))


def examine(
    pf: Sequence[FlexOffer],
    uf: Sequence[FlexOffer],
    af: Sequence[AggregatedFlexOffer],
    cfg: MaggConfig,
) -> tuple[list[FlexOffer], bool]:
    """Merge the leftovers and decide whether another round can still help.

    Stops when nothing is left, or when enough aggregates exist and the
    remaining offers cannot outweigh the smallest aggregate that would be
    traded.
    """
    pool = sorted(list(pf) + list(uf), key=lambda f: f.id)
    if not pool:
        return pool, False
    if len(af) >= cfg.max_orders:
        kth = sorted((energy(a) for a in af), reverse=True)[cfg.max_orders - 1]
        if sum(energy(f) for f in pool) < kth:
            return pool, False
    return pool, True


def run_magg(fos: Iterable[FlexOffer], cfg: MaggConfig) -> MaggResult:
    """Run the full aggregation loop for one variant over a set of offers.

    Deterministic for a given input and config. Every round consumes its
    seed offer, so the pool strictly shrinks and the loop terminates even
    when a pass produces no aggregate; seeds of such rounds end up in the
    leftover set. A belt-and-braces guard also stops any round that neither
    adds an aggregate nor shrinks the pool.
    """
    t0 = time.perf_counter()
    pool = sorted(fos, key=lambda f: f.id)
    if not pool:
        raise ValueError("cannot aggregate an empty set")
    if len({f.id for f in pool}) != len(pool):
        raise ValueError("offer ids must be unique")
    input_fos = list(pool)

    initialize = _INITIALIZERS[cfg.variant]
    stats = MaggStats(variant=cfg.variant)
    af: list[AggregatedFlexOffer] = []
    traces: list[ProcessTrace] = []

    while True:
        stats.iterations += 1
        pool_before = len(pool)
        pf, uf, f_ini, tft, fallback = initialize(pool)
        stats.dtf_fallbacks += int(fallback)
        state = MaggState(pf=pf, uf=uf, af=af, f_ini=f_ini, tft=tft, spt=cfg.spt_base)
        state, trace = process(state, cfg)
        stats.comparisons += trace.comparisons
        traces.append(trace)
        af = state.af
        pool, keep_going = examine(state.pf, uf, af, cfg)
        if not keep_going:
            break
        if trace.f_a is None and len(pool) >= pool_before:
            break

    conforming = [a for a in af if is_order_conforming(a, cfg)]
    ranked = sorted(
        range(len(conforming)), key=lambda i: (-energy(conforming[i]), i)
    )
    orders = [conforming[i] for i in ranked[: cfg.max_orders]]
    traded_ids = set().union(*(a.constituents for a in orders)) if orders else set()
    leftover = [f for f in input_fos if f.id not in traded_ids]

    stats.wall_time_s = time.perf_counter() - t0
    return MaggResult(
        orders_afos=orders,
        all_afos=af,
        leftover=leftover,
        stats=stats,
        traces=traces,
    )


def objective_energy(result: MaggResult) -> float:
    """Total slice-power sum of the traded aggregates (kWh)."""
    return sum(energy(a) for a in result.orders_afos)
