"""Synthetic EV fleet generation.

Sessions are drawn from the same family of distributions as the reference
fleet: uniform battery capacity, truncated-Gaussian arrival/departure/SOC.
The timeline is a 48 h trading horizon; arrivals land on day one (hours
16-25, where 24-25 are the small-hours wrap past midnight) and departures
on day two (hours 29-36). Sessions too short for their charging duration
are resampled, never clamped, to avoid biasing the flexibility spread.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .core import EvSession, FlexOffer, session_to_flexoffer

RETRY_BUDGET = 100


@dataclass(frozen=True)
class FleetConfig:
    n: int
    seed: int
    capacity_range: tuple[float, float] = (16.0, 30.0)
    arrival: tuple[float, float, float, float] = (19.0, 2.0, 16.0, 25.0)    # mean, sd, lo, hi
    departure: tuple[float, float, float, float] = (31.0, 2.0, 29.0, 36.0)
    soc_initial_pct: tuple[float, float, float, float] = (75.0, 25.0, 20.0, 85.0)
    charge_power: float = 3.7
    power_choices: tuple[float, ...] | None = None   # e.g. (3.7, 7.4, 11.0)
    eta_charger: float = 0.95
    eta_battery: float = 0.95

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("fleet size must be >= 1")
        if self.capacity_range[0] >= self.capacity_range[1]:
            raise ValueError("capacity range must be non-degenerate")
        for power in self.power_choices or (self.charge_power,):
            if not 3.7 <= power <= 11.0:
                raise ValueError(
                    f"charge_power {power} outside household range [3.7, 11] kW"
                )
        for name in ("arrival", "departure", "soc_initial_pct"):
            _, sd, lo, hi = getattr(self, name)
            if lo >= hi or sd < 0:
                raise ValueError(f"invalid {name} distribution")


def sample_truncated_gaussian(
    mean: float, sd: float, lo: float, hi: float, rng: random.Random
) -> float:
    """Rejection-sample a normal draw restricted to [lo, hi]."""
    if lo >= hi:
        raise ValueError("lo must be below hi")
    while True:
        x = rng.gauss(mean, sd)
        if lo <= x <= hi:
            return x


def generate_sessions(cfg: FleetConfig) -> list[EvSession]:
    """Draw ``n`` feasible sessions; raises after the per-EV retry budget."""
    rng = random.Random(cfg.seed)
    sessions = []
    for i in range(cfg.n):
        for _ in range(RETRY_BUDGET):
            arrival = round(sample_truncated_gaussian(*cfg.arrival, rng))
            departure = round(sample_truncated_gaussian(*cfg.departure, rng))
            soc = sample_truncated_gaussian(*cfg.soc_initial_pct, rng) / 100.0
            capacity = rng.uniform(*cfg.capacity_range)
            if cfg.power_choices:
                power = rng.choice(cfg.power_choices)
            else:
                power = cfg.charge_power
            ev = EvSession(
                battery_capacity=capacity,
                soc_initial=soc,
                charge_power=power,
                arrival=arrival,
                departure=departure,
                eta_charger=cfg.eta_charger,
                eta_battery=cfg.eta_battery,
            )
            needed = math.ceil(
                (ev.soc_final - ev.soc_initial)
                * capacity
                / (cfg.eta_charger * cfg.eta_battery * power)
            )
            if departure - arrival >= needed:
                sessions.append(ev)
                break
        else:
            raise RuntimeError(
                f"could not draw a feasible session for EV {i} "
                f"within {RETRY_BUDGET} retries"
            )
    return sessions


def generate_fleet(cfg: FleetConfig) -> list[FlexOffer]:
    """Generate ``n`` flex-offers on the 48 h timeline, ids 0..n-1."""
    return [
        session_to_flexoffer(ev, i) for i, ev in enumerate(generate_sessions(cfg))
    ]
