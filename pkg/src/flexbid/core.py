"""Flex-offer model: EV charging sessions, their hourly-profile flex-offers,
and the elementary per-offer measures used throughout the package.

A flex-offer is an hourly power profile plus an interval of admissible start
hours. All hour indices live on a single non-negative trading-horizon
timeline (default 48 h); slices are always one hour long.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ENERGY_TOL = 1e-9


@dataclass(frozen=True)
class FlexOffer:
    """A time-shiftable charging job.

    ``profile`` holds the hourly slice powers in kW. The job may start at any
    integer hour in ``[t_es, t_ls]``; its time flexibility is ``t_ls - t_es``.
    """

    id: int
    t_es: int
    t_ls: int
    profile: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "profile", tuple(float(p) for p in self.profile))
        if self.t_es < 0:
            raise ValueError(f"t_es must be >= 0, got {self.t_es}")
        if self.t_ls < self.t_es:
            raise ValueError(f"t_ls ({self.t_ls}) < t_es ({self.t_es})")
        if len(self.profile) < 1:
            raise ValueError("profile must contain at least one slice")
        if any(p < 0 for p in self.profile):
            raise ValueError("slice powers must be non-negative")

    @property
    def time_flexibility(self) -> int:
        return self.t_ls - self.t_es

    @property
    def num_slices(self) -> int:
        return len(self.profile)


@dataclass(frozen=True)
class EvSession:
    """One plug-in event of an EV charging at constant power.

    State of charge is modelled on the constant-power region only: the car
    arrives with at least 20% and leaves at the 90% target. Efficiencies
    default to 0.95 each (charger and battery); both are configuration
    values, not measured constants.
    """

    battery_capacity: float          # kWh
    soc_initial: float               # fraction, in [0.20, 0.85]
    charge_power: float              # kW
    arrival: int                     # hour index
    departure: int                   # hour index
    soc_final: float = 0.90
    eta_charger: float = 0.95
    eta_battery: float = 0.95

    def __post_init__(self):
        if not 0.20 <= self.soc_initial <= 0.85:
            raise ValueError(f"soc_initial {self.soc_initial} outside [0.20, 0.85]")
        if self.soc_final != 0.90:
            raise ValueError("soc_final is fixed at 0.90")
        if self.departure <= self.arrival:
            raise ValueError("departure must be after arrival")
        if self.charge_power <= 0:
            raise ValueError("charge_power must be positive")
        if self.eta_charger <= 0 or self.eta_battery <= 0:
            raise ValueError("efficiencies must be positive")
        if self.battery_capacity <= 0:
            raise ValueError("battery_capacity must be positive")


def charging_duration(ev: EvSession) -> float:
    """Hours of constant-power charging needed to reach the final SOC."""
    return (
        (ev.soc_final - ev.soc_initial)
        * ev.battery_capacity
        / (ev.eta_charger * ev.eta_battery * ev.charge_power)
    )


def session_to_flexoffer(ev: EvSession, fo_id: int) -> FlexOffer:
    """Convert a session into an hourly flex-offer.

    The charging duration rarely lands on a whole hour, so the energy of the
    first and last partial hours is split evenly between the two end slices;
    middle slices run at full power. Raises ValueError when the plug-in
    window is shorter than the rounded-up charging duration.
    """
    d = charging_duration(ev)
    m = max(1, math.ceil(d))
    window = ev.departure - ev.arrival
    if window < m:
        raise ValueError(
            f"session infeasible: needs {m} h but window is {window} h"
        )
    p = ev.charge_power
    if m == 1:
        profile = (p * d,)
    else:
        end = p * (d - (m - 2)) / 2
        profile = (end,) + (p,) * (m - 2) + (end,)
    fo = FlexOffer(id=fo_id, t_es=ev.arrival, t_ls=ev.departure - m, profile=profile)
    assert abs(energy(fo) - p * d) < ENERGY_TOL
    return fo


def energy(f: FlexOffer) -> float:
    """Total energy of the profile in kWh (slices are one hour)."""
    return sum(f.profile)


def rmse_to_target(f: FlexOffer, spt: float) -> float:
    """Root mean square error between the slice powers and a flat target."""
    m = len(f.profile)
    return math.sqrt(sum((p - spt) ** 2 for p in f.profile) / m)


def coefficient_of_variation(f: FlexOffer) -> float:
    """Sample standard deviation of the slice powers over their mean.

    Single-slice profiles have no dispersion and return 0; a zero mean is
    reported as +inf so that callers minimising CV never select it.
    """
    m = len(f.profile)
    mean = sum(f.profile) / m
    if mean == 0:
        return math.inf
    if m == 1:
        return 0.0
    var = sum((p - mean) ** 2 for p in f.profile) / (m - 1)
    return math.sqrt(var) / mean
