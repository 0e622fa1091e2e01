"""Day-ahead market simulation for aggregated flex-offers.

Aggregates become flexible orders (flat volume, duration, activation
interval); the market activates each order in its cheapest admissible
window. Per-slice deviations between the flat purchased volume and the
actual aggregate profile settle at regulation prices: deficits buy at
``spot * (1 + beta)``, surpluses sell back at ``spot * (1 - beta)``.
Costs are compared against plug-in charging (every EV starts at arrival)
and the non-realizable per-EV optimum.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .aggregation import AggregatedFlexOffer
from .core import FlexOffer, energy
from .heuristics import MaggConfig, MaggResult, is_order_conforming, run_magg

KW_PER_MW = 1000.0


@dataclass(frozen=True)
class PriceCurve:
    """Hourly day-ahead prices (EUR/MWh) over the trading horizon."""

    prices: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))
        if not self.prices:
            raise ValueError("price curve must not be empty")
        if any(not math.isfinite(p) for p in self.prices):
            raise ValueError("prices must be finite")

    @property
    def horizon(self) -> int:
        return len(self.prices)

    def __getitem__(self, hour: int) -> float:
        return self.prices[hour]


@dataclass(frozen=True)
class RegulationModel:
    """Two-sided regulation prices as a spread around spot."""

    beta: float = 0.5

    def buy(self, spot: float) -> float:
        return spot * (1.0 + self.beta)

    def sell(self, spot: float) -> float:
        return spot * (1.0 - self.beta)


@dataclass(frozen=True)
class FlexibleOrder:
    """A day-ahead purchase order with a flat hourly volume.

    The activation interval is ``[begin, end]``; the market may start the
    order at any hour in ``[begin, end - duration]``. ``slice_powers_kw``
    keeps the underlying aggregate profile so imbalances can be settled
    per slice.
    """

    name: str
    begin: int
    end: int
    duration: int
    volume_kw: float
    slice_powers_kw: tuple[float, ...]
    price_limit: float = math.inf
    source_afo: int = -1

    def __post_init__(self):
        if self.begin < 0:
            raise ValueError("order interval must start at hour >= 0")
        if not 1 <= self.duration <= 23:
            raise ValueError("order duration must be in [1, 23]")
        if self.end - self.begin < self.duration:
            raise ValueError("interval must exceed the duration by at least one hour")
        if self.volume_kw <= 0:
            raise ValueError("purchase volume must be positive")
        if len(self.slice_powers_kw) != self.duration:
            raise ValueError("slice powers must match the duration")

    @property
    def imbalance_per_slice(self) -> tuple[float, ...]:
        return tuple(abs(self.volume_kw - p) for p in self.slice_powers_kw)


@dataclass(frozen=True)
class SettlementReport:
    order_name: str
    activation_start: int | None
    spot_cost: float
    imbalance_cost: float
    surplus_energy_kwh: float
    total_cost: float

    @property
    def activated(self) -> bool:
        return self.activation_start is not None


@dataclass(frozen=True)
class TradeReport:
    plugin_cost: float
    flexorder_cost: float
    optimal_cost: float
    cost_reduction_pct: float
    optimal_reduction_pct: float
    participation_pct: float
    traded_energy_pct: float
    purchased_energy_kwh: float
    needed_energy_kwh: float
    purchased_over_needed: float
    orders: tuple[FlexibleOrder, ...]
    settlements: tuple[SettlementReport, ...]


@dataclass(frozen=True)
class DropoutPoint:
    q: float
    flex_price_eur_per_kwh: float
    plugin_price_eur_per_kwh: float


@dataclass(frozen=True)
class DropoutReport:
    points: tuple[DropoutPoint, ...]
    break_even_q: float | None


def _band_multiple(f: FlexOffer, lot: float, e: float) -> int:
    x = max(1, round(f.profile[0] / lot))
    for p in f.profile:
        if e == 0:
            if p != x * lot:
                raise ValueError("aggregate does not sit on an exact lot multiple")
        elif not (x * lot - e < p < x * lot + e):
            raise ValueError("aggregate slice outside the lot band")
    return x


def afo_to_order(
    f: AggregatedFlexOffer, lot: float, name: str, e: float | None = None
) -> FlexibleOrder:
    """Turn a conforming aggregate into an order at its shared lot multiple."""
    if e is None:
        e = 0.05 * lot
    cfg = MaggConfig(variant="lp", spt_base=lot, e=e)
    if not is_order_conforming(f, cfg):
        raise ValueError(f"aggregate {f.id} does not conform to order rules")
    x = _band_multiple(f, lot, e)
    return FlexibleOrder(
        name=name,
        begin=f.t_es,
        end=f.t_ls + f.num_slices,
        duration=f.num_slices,
        volume_kw=x * lot,
        slice_powers_kw=f.profile,
        source_afo=f.id,
    )


def afo_to_order_flattened(
    f: AggregatedFlexOffer, lot: float, name: str
) -> FlexibleOrder:
    """Order for a non-conforming aggregate: buy the peak slice for all hours.

    The volume is the highest slice power rounded up to the next lot
    multiple, so the purchased energy always covers the profile.
    """
    peak = max(f.profile)
    if peak <= 0:
        raise ValueError("cannot build an order from an all-zero profile")
    x = max(1, math.ceil(round(peak / lot, 9)))
    return FlexibleOrder(
        name=name,
        begin=f.t_es,
        end=f.t_ls + f.num_slices,
        duration=f.num_slices,
        volume_kw=x * lot,
        slice_powers_kw=f.profile,
        source_afo=f.id,
    )


def activate(
    order: FlexibleOrder, curve: PriceCurve, reg: RegulationModel | None = None
) -> SettlementReport:
    """Activate an order in its cheapest window and settle the deviations.

    The window minimizing the price sum wins (earliest on ties). A finite
    price limit below the window's average price leaves the order
    unactivated with zero cost and energy.
    """
    if reg is None:
        reg = RegulationModel()
    if order.end > curve.horizon:
        raise ValueError("order interval extends beyond the price horizon")
    best_start, best_sum = None, math.inf
    for h in range(order.begin, order.end - order.duration + 1):
        s = sum(curve.prices[h + k] for k in range(order.duration))
        if s < best_sum:
            best_sum, best_start = s, h
    if math.isfinite(order.price_limit) and best_sum / order.duration > order.price_limit:
        return SettlementReport(order.name, None, 0.0, 0.0, 0.0, 0.0)
    volume_mw = order.volume_kw / KW_PER_MW
    spot_cost = volume_mw * best_sum
    imbalance_cost = 0.0
    surplus_kwh = 0.0
    for k, p in enumerate(order.slice_powers_kw):
        spot = curve.prices[best_start + k]
        dev_kw = p - order.volume_kw
        if dev_kw > 0:
            imbalance_cost += dev_kw / KW_PER_MW * reg.buy(spot)
        elif dev_kw < 0:
            surplus_kwh += -dev_kw
            imbalance_cost -= -dev_kw / KW_PER_MW * reg.sell(spot)
    return SettlementReport(
        order.name, best_start, spot_cost, imbalance_cost, surplus_kwh,
        spot_cost + imbalance_cost,
    )


def plugin_cost(fos: Iterable[FlexOffer], curve: PriceCurve) -> float:
    """Cost of charging every offer from its earliest (plug-in) hour."""
    total = 0.0
    for f in fos:
        if f.t_es + f.num_slices > curve.horizon:
            raise ValueError(f"offer {f.id} profile exceeds the price horizon")
        total += sum(
            p / KW_PER_MW * curve.prices[f.t_es + k] for k, p in enumerate(f.profile)
        )
    return total


def _best_start(f: FlexOffer, prices: np.ndarray) -> int:
    window = prices[f.t_es : f.t_ls + f.num_slices]
    costs = np.correlate(window, np.asarray(f.profile), mode="valid")
    return f.t_es + int(np.argmin(costs))


def optimal_cost(fos: Iterable[FlexOffer], curve: PriceCurve) -> float:
    """Per-offer cheapest-start cost; a bound no single-market schedule beats."""
    prices = np.asarray(curve.prices)
    total = 0.0
    for f in fos:
        if f.t_ls + f.num_slices > curve.horizon:
            raise ValueError(f"offer {f.id} window exceeds the price horizon")
        s = _best_start(f, prices)
        total += sum(
            p / KW_PER_MW * curve.prices[s + k] for k, p in enumerate(f.profile)
        )
    return total


def plugin_schedule(fos: Iterable[FlexOffer], horizon: int) -> list[float]:
    """Hourly plug-in load in kW."""
    load = [0.0] * horizon
    for f in fos:
        for k, p in enumerate(f.profile):
            load[f.t_es + k] += p
    return load


def optimal_schedule(fos: Iterable[FlexOffer], curve: PriceCurve) -> list[float]:
    """Hourly load in kW with every offer at its cheapest start."""
    prices = np.asarray(curve.prices)
    load = [0.0] * curve.horizon
    for f in fos:
        s = _best_start(f, prices)
        for k, p in enumerate(f.profile):
            load[s + k] += p
    return load


def flexorder_schedule(
    orders: Sequence[FlexibleOrder],
    settlements: Sequence[SettlementReport],
    leftover: Iterable[FlexOffer],
    horizon: int,
) -> list[float]:
    """Hourly purchased volume of the activated orders plus plug-in leftovers."""
    load = plugin_schedule(leftover, horizon)
    for order, st in zip(orders, settlements):
        if st.activation_start is None:
            continue
        for k in range(order.duration):
            load[st.activation_start + k] += order.volume_kw
    return load


def _select_traded(
    afos: Sequence[AggregatedFlexOffer], max_orders: int
) -> list[AggregatedFlexOffer]:
    ranked = sorted(range(len(afos)), key=lambda i: (-energy(afos[i]), i))
    return [afos[i] for i in ranked[:max_orders]]


def build_orders(
    afos: Sequence[AggregatedFlexOffer],
    lot: float,
    e: float | None = None,
    max_orders: int = 5,
) -> list[FlexibleOrder]:
    """Orders for the largest aggregates: banded when conforming, else flattened."""
    if e is None:
        e = 0.05 * lot
    cfg = MaggConfig(variant="lp", spt_base=lot, e=e)
    orders = []
    for i, afo in enumerate(_select_traded(afos, max_orders)):
        name = f"order-{i + 1}"
        if is_order_conforming(afo, cfg):
            orders.append(afo_to_order(afo, lot, name, e))
        else:
            orders.append(afo_to_order_flattened(afo, lot, name))
    return orders


def evaluate(
    fos: Sequence[FlexOffer],
    afos: Sequence[AggregatedFlexOffer] | MaggResult,
    curve: PriceCurve,
    reg: RegulationModel | None = None,
    lot: float = 100.0,
    e: float | None = None,
    max_orders: int = 5,
) -> TradeReport:
    """Full financial comparison of flexible-order trading for one fleet.

    The flexible-order cost covers the traded aggregates' settlements plus
    plug-in purchases for every offer outside them. Reductions are quoted
    against plug-in cost; a zero plug-in cost defines the reduction as 0.
    """
    if isinstance(afos, MaggResult):
        afos = afos.orders_afos
    if reg is None:
        reg = RegulationModel()
    traded = _select_traded(list(afos), max_orders)
    orders = build_orders(traded, lot, e, max_orders)
    settlements = [activate(o, curve, reg) for o in orders]

    traded_ids: set[int] = set()
    for afo in traded:
        traded_ids |= afo.constituents
    by_id = {f.id: f for f in fos}
    leftover = [by_id[i] for i in sorted(set(by_id) - traded_ids)]

    p_cost = plugin_cost(fos, curve)
    o_cost = optimal_cost(fos, curve)
    f_cost = sum(st.total_cost for st in settlements) + plugin_cost(leftover, curve)

    fleet_kwh = sum(energy(f) for f in fos)
    traded_afo_kwh = sum(energy(a) for a in traded)
    traded_needed_kwh = sum(energy(by_id[i]) for i in traded_ids)
    purchased_kwh = sum(o.volume_kw * o.duration for o in orders)

    def reduction(cost: float) -> float:
        return 0.0 if p_cost == 0 else 100.0 * (p_cost - cost) / p_cost

    return TradeReport(
        plugin_cost=p_cost,
        flexorder_cost=f_cost,
        optimal_cost=o_cost,
        cost_reduction_pct=reduction(f_cost),
        optimal_reduction_pct=reduction(o_cost),
        participation_pct=100.0 * len(traded_ids) / len(fos) if fos else 0.0,
        traded_energy_pct=100.0 * traded_afo_kwh / fleet_kwh if fleet_kwh else 0.0,
        purchased_energy_kwh=purchased_kwh,
        needed_energy_kwh=fleet_kwh,
        purchased_over_needed=(
            purchased_kwh / traded_needed_kwh if traded_needed_kwh else 0.0
        ),
        orders=tuple(orders),
        settlements=tuple(settlements),
    )


def dropout_analysis(
    fos: Sequence[FlexOffer],
    afos: Sequence[AggregatedFlexOffer] | MaggResult,
    curve: PriceCurve,
    reg: RegulationModel | None = None,
    q_grid: Sequence[float] = (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5),
    seed: int = 0,
    lot: float = 100.0,
    e: float | None = None,
    max_orders: int = 5,
) -> DropoutReport:
    """Consumer price per kWh when a share of the aggregated EVs never shows.

    Orders stay as placed; the energy of dropped EVs sells back at the
    regulation sell price of its scheduled hours, and the remaining cost is
    spread over the remaining consumers' energy. The dropout sets are
    nested (one seeded shuffle, prefixes of increasing length), so prices
    move consistently along the grid.
    """
    if isinstance(afos, MaggResult):
        afos = afos.orders_afos
    if any(q < 0 or q >= 1 for q in q_grid):
        raise ValueError("dropout fractions must lie in [0, 1)")
    if reg is None:
        reg = RegulationModel()
    traded = _select_traded(list(afos), max_orders)
    orders = build_orders(traded, lot, e, max_orders)
    settlements = [activate(o, curve, reg) for o in orders]
    base_cost = sum(st.total_cost for st in settlements)

    by_id = {f.id: f for f in fos}
    # scheduled absolute start per participating offer, after activation shift
    placed: dict[int, int] = {}
    for afo, st in zip(traded, settlements):
        shift = (st.activation_start or afo.t_es) - afo.t_es
        for cid in sorted(afo.constituents):
            placed[cid] = afo.constituent_start(cid) + shift
    participants = sorted(placed)
    if not participants:
        raise ValueError("no participating offers to analyse")
    base_kwh = sum(energy(by_id[i]) for i in participants)
    plugin_price = plugin_cost([by_id[i] for i in participants], curve) / base_kwh

    shuffled = list(participants)
    random.Random(seed).shuffle(shuffled)

    def sellback(cid: int) -> float:
        f = by_id[cid]
        start = placed[cid]
        return sum(
            p / KW_PER_MW * reg.sell(curve.prices[start + k])
            for k, p in enumerate(f.profile)
        )

    points = []
    break_even = None
    for q in sorted(q_grid):
        dropped = shuffled[: int(math.floor(q * len(participants)))]
        credit = sum(sellback(cid) for cid in dropped)
        dropped_kwh = sum(energy(by_id[i]) for i in dropped)
        price = (base_cost - credit) / (base_kwh - dropped_kwh)
        points.append(DropoutPoint(q, price, plugin_price))
        if break_even is None and price > plugin_price:
            break_even = q
    return DropoutReport(tuple(points), break_even)


def yearly_sweep(
    fos: Sequence[FlexOffer],
    cfg: MaggConfig,
    daily_prices: Sequence[Sequence[float]],
    reg: RegulationModel | None = None,
) -> tuple[list[float], float, MaggResult]:
    """Re-settle one aggregation over 364 overlapping 48 h trading periods.

    ``daily_prices`` holds 365 days of 24 hourly prices; period ``i``
    concatenates days ``i`` and ``i+1``. Aggregation does not depend on
    prices, so it runs once. Returns the per-period cost reductions, their
    mean, and the aggregation result used.
    """
    if len(daily_prices) != 365 or any(len(day) != 24 for day in daily_prices):
        raise ValueError("daily_prices must be a 365x24 table")
    result = run_magg(fos, cfg)
    reductions = []
    for i in range(364):
        curve = PriceCurve(tuple(daily_prices[i]) + tuple(daily_prices[i + 1]))
        report = evaluate(
            fos, result, curve, reg, lot=cfg.spt_base, e=cfg.e,
            max_orders=cfg.max_orders,
        )
        reductions.append(report.cost_reduction_pct)
    return reductions, sum(reductions) / len(reductions), result
