"""Domain types for the EVSE reservation auction.

Conventions used throughout the package:

* time is a 1-based slot index ``t`` with ``1 <= t <= T``; internal arrays
  are 0-based and length ``T``
* energies are kWh, money is $, charge rates are kWh per slot
* all types here are immutable value data once constructed; the one
  exception is :class:`DemandState`, which only the auction engine mutates
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "AllocationResult",
    "ChargeOption",
    "DemandState",
    "GenerationPool",
    "Location",
    "Scenario",
    "ScenarioValidationError",
    "TimeGrid",
    "UserType",
    "ValueBounds",
    "Violation",
    "option_is_feasible",
    "validate_scenario",
]


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Violation:
    """One failed invariant: where it was found and what is wrong."""

    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


class ScenarioValidationError(ValueError):
    """Scenario or user data failed validation; carries all violations."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = tuple(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"{len(self.violations)} validation violation(s): {head}{more}")


@dataclass(frozen=True)
class TimeGrid:
    """Discrete scheduling horizon of ``slot_count`` equal slots."""

    slot_count: int
    slot_duration_minutes: int = 60


@dataclass(frozen=True)
class GenerationPool:
    """One energy supply serving one or more locations.

    ``solar_actual`` is the realized behind-the-meter generation per slot;
    ``solar_lower``/``solar_upper`` are the day-ahead forecast band. The
    grid side is a per-slot purchase price and a per-slot procurement limit
    (transformer limit), beyond which no energy can be bought.
    """

    pool_id: int
    solar_actual: np.ndarray
    solar_lower: np.ndarray
    solar_upper: np.ndarray
    grid_limit: np.ndarray
    grid_price: np.ndarray

    def __post_init__(self):
        for name in ("solar_actual", "solar_lower", "solar_upper", "grid_limit", "grid_price"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))


@dataclass(frozen=True)
class Location:
    """A parking site: ``evse_count`` identical stations, each with
    ``cables_per_evse`` cables and a per-slot charge-rate cap."""

    location_id: int
    evse_count: int
    cables_per_evse: int
    max_charge_rate: float
    pool_id: int


@dataclass(frozen=True)
class UserType:
    """One reservation request.

    The user commits to parking at one of ``preferred_locations`` over the
    closed slot interval ``[arrival, departure]`` and asks for
    ``energy_demand`` kWh in total. ``valuations`` is parallel to
    ``preferred_locations``. ``submission_time <= arrival``; requests are
    processed in submission order.

    ``explicit_schedules``, when present, replaces automatic option
    generation: each entry is a per-slot energy vector over the visit
    window, tried at every preferred location where it fits.
    """

    user_id: int
    submission_time: int
    arrival: int
    departure: int
    energy_demand: float
    preferred_locations: tuple[int, ...]
    valuations: tuple[float, ...]
    explicit_schedules: Optional[tuple[tuple[int, ...], ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "preferred_locations", tuple(self.preferred_locations))
        object.__setattr__(self, "valuations", tuple(float(v) for v in self.valuations))
        if self.explicit_schedules is not None:
            object.__setattr__(
                self,
                "explicit_schedules",
                tuple(tuple(int(e) for e in sched) for sched in self.explicit_schedules),
            )

    @property
    def window_length(self) -> int:
        return self.departure - self.arrival + 1

    def valuation_at(self, location_id: int) -> float:
        for lid, val in zip(self.preferred_locations, self.valuations):
            if lid == location_id:
                return val
        raise ValueError(f"user {self.user_id} has no valuation for location {location_id}")


@dataclass(frozen=True)
class ChargeOption:
    """One feasible fulfillment of a request at a specific location.

    ``cable_profile`` is 0/1 per slot (full horizon length); the cable is
    held for the whole visit. ``energy_schedule`` is kWh per slot; energy
    flows only in slots where a cable is held.
    """

    option_id: str
    location_id: int
    cable_profile: np.ndarray
    energy_schedule: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cable_profile", _frozen_array(self.cable_profile))
        object.__setattr__(self, "energy_schedule", _frozen_array(self.energy_schedule))

    @property
    def support(self) -> tuple[int, int]:
        """1-based closed slot interval touched by this option; (1, 0) if empty."""
        used = np.flatnonzero((self.cable_profile > 0) | (self.energy_schedule > 0))
        if used.size == 0:
            return (1, 0)
        return (int(used[0]) + 1, int(used[-1]) + 1)

    def schedule_text(self) -> str:
        lo, hi = self.support
        if hi < lo:
            return ""
        return "-".join(f"{self.energy_schedule[t]:g}" for t in range(lo - 1, hi))


@dataclass(frozen=True)
class ValueBounds:
    """Global lower/upper bounds on user value per resource unit.

    The cable pair is $ per cable-slot, the energy and generation pairs are
    $ per kWh. The generation pair must equal the energy pair, and its
    lower bound must exceed every grid price for the procurement price
    curve to be well formed.
    """

    cable_low: float
    cable_high: float
    energy_low: float
    energy_high: float
    generation_low: float
    generation_high: float


@dataclass(frozen=True)
class Scenario:
    """Full world description: time grid, supply pools, locations, value
    bounds, and the discrete per-slot energy levels options may use."""

    time_grid: TimeGrid
    pools: tuple[GenerationPool, ...]
    locations: tuple[Location, ...]
    bounds: ValueBounds
    energy_levels: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        object.__setattr__(self, "pools", tuple(self.pools))
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "energy_levels", tuple(sorted(set(int(v) for v in self.energy_levels))))

    @property
    def slot_count(self) -> int:
        return self.time_grid.slot_count

    @property
    def location_ids(self) -> tuple[int, ...]:
        return tuple(sorted(loc.location_id for loc in self.locations))

    def location(self, location_id: int) -> Location:
        for loc in self.locations:
            if loc.location_id == location_id:
                return loc
        raise ValueError(f"unknown location_id {location_id}")

    def pool(self, pool_id: int) -> GenerationPool:
        for pool in self.pools:
            if pool.pool_id == pool_id:
                return pool
        raise ValueError(f"unknown pool_id {pool_id}")

    def pool_of(self, location_id: int) -> GenerationPool:
        return self.pool(self.location(location_id).pool_id)


@dataclass(frozen=True)
class AllocationResult:
    """Outcome of one admission decision.

    Accepted results carry the chosen (location, EVSE, option) tuple, the
    posted payment and its breakdown; rejected users pay nothing and get
    zero utility (auxiliary parking).
    """

    user_id: int
    accepted: bool
    location_id: Optional[int] = None
    evse_index: Optional[int] = None
    option: Optional[ChargeOption] = None
    utility: float = 0.0
    payment: float = 0.0
    cable_paid: float = 0.0
    energy_paid: float = 0.0
    generation_paid: float = 0.0
    valuation: float = 0.0


class DemandState:
    """Running allocated quantities; the sole input to price quotes.

    ``cable[lid]`` and ``energy[lid]`` are (evse_count, T) arrays of
    cable-slots and kWh; ``procurement[pid]`` is the pool-aggregate kWh per
    slot. ``mode`` selects which solar series caps procurement: the actual
    series (``exact``) or the forecast lower band (``conservative``).
    """

    def __init__(self, scenario: Scenario, mode: str = "exact"):
        if mode not in ("exact", "conservative"):
            raise ValueError(f"unknown mode {mode!r}")
        self.scenario = scenario
        self.mode = mode
        T = scenario.slot_count
        self.cable = {
            loc.location_id: np.zeros((loc.evse_count, T)) for loc in scenario.locations
        }
        self.energy = {
            loc.location_id: np.zeros((loc.evse_count, T)) for loc in scenario.locations
        }
        self.procurement = {pool.pool_id: np.zeros(T) for pool in scenario.pools}
        self._caps = {}
        for pool in scenario.pools:
            solar = pool.solar_actual if mode == "exact" else pool.solar_lower
            cap = np.ascontiguousarray(solar + pool.grid_limit)
            cap.setflags(write=False)
            self._caps[pool.pool_id] = cap

    def procurement_cap(self, pool_id: int) -> np.ndarray:
        """Per-slot procurement ceiling for the state's mode."""
        return self._caps[pool_id]

    def apply(self, option: ChargeOption, evse_index: int) -> None:
        lid = option.location_id
        pid = self.scenario.location(lid).pool_id
        self.cable[lid][evse_index] += option.cable_profile
        self.energy[lid][evse_index] += option.energy_schedule
        self.procurement[pid] += option.energy_schedule

    def procurement_from_energy(self, pool_id: int) -> np.ndarray:
        """Recompute pool demand from per-EVSE energy (consistency check)."""
        total = np.zeros(self.scenario.slot_count)
        for loc in self.scenario.locations:
            if loc.pool_id == pool_id:
                total += self.energy[loc.location_id].sum(axis=0)
        return total

    def copy(self) -> "DemandState":
        dup = DemandState(self.scenario, self.mode)
        for lid in self.cable:
            dup.cable[lid][:] = self.cable[lid]
            dup.energy[lid][:] = self.energy[lid]
        for pid in self.procurement:
            dup.procurement[pid][:] = self.procurement[pid]
        return dup


def _check_series(out: list[Violation], path: str, arr: np.ndarray, T: int) -> bool:
    if arr.shape != (T,):
        out.append(Violation(path, f"series must have length {T}, got {arr.shape}"))
        return False
    if not np.all(np.isfinite(arr)):
        out.append(Violation(path, "series contains non-finite values"))
        return False
    return True


def validate_scenario(scenario: Scenario, users: Iterable[UserType] = ()) -> list[Violation]:
    """Check every type invariant; returns one entry per violation.

    Violations are data, not faults: an empty list means the scenario (and
    the users, if given) is ready to run.
    """
    out: list[Violation] = []
    T = scenario.slot_count
    if T < 1:
        out.append(Violation("time_grid.slot_count", "must be >= 1"))
    if scenario.time_grid.slot_duration_minutes < 1:
        out.append(Violation("time_grid.slot_duration_minutes", "must be >= 1"))

    pool_ids = set()
    for pool in scenario.pools:
        path = f"pools[{pool.pool_id}]"
        if pool.pool_id in pool_ids:
            out.append(Violation(path, "duplicate pool_id"))
        pool_ids.add(pool.pool_id)
        shapes_ok = all(
            _check_series(out, f"{path}.{name}", getattr(pool, name), T)
            for name in ("solar_actual", "solar_lower", "solar_upper", "grid_limit", "grid_price")
        )
        if not shapes_ok:
            continue
        if np.any(pool.solar_lower < 0):
            out.append(Violation(f"{path}.solar_lower", "must be >= 0"))
        if np.any(pool.solar_lower > pool.solar_actual):
            out.append(Violation(f"{path}.solar_lower", "must not exceed actual generation"))
        if np.any(pool.solar_actual > pool.solar_upper):
            out.append(Violation(f"{path}.solar_upper", "must be >= actual generation"))
        if np.any(pool.grid_limit < 0):
            out.append(Violation(f"{path}.grid_limit", "must be >= 0"))
        if np.any(pool.grid_price < 0):
            out.append(Violation(f"{path}.grid_price", "must be >= 0"))

    loc_ids = set()
    for loc in scenario.locations:
        path = f"locations[{loc.location_id}]"
        if loc.location_id in loc_ids:
            out.append(Violation(path, "duplicate location_id"))
        loc_ids.add(loc.location_id)
        if loc.evse_count < 1:
            out.append(Violation(f"{path}.evse_count", "must be >= 1"))
        if loc.cables_per_evse < 1:
            out.append(Violation(f"{path}.cables_per_evse", "cables_per_evse must be >= 1"))
        if loc.max_charge_rate <= 0:
            out.append(Violation(f"{path}.max_charge_rate", "must be > 0"))
        if loc.pool_id not in pool_ids:
            out.append(Violation(f"{path}.pool_id", f"references unknown pool {loc.pool_id}"))

    b = scenario.bounds
    if not (0 < b.cable_low < b.cable_high):
        out.append(Violation("bounds.cable", "need 0 < cable_low < cable_high"))
    if not (0 < b.energy_low < b.energy_high):
        out.append(Violation("bounds.energy", "need 0 < energy_low < energy_high"))
    if b.generation_low != b.energy_low or b.generation_high != b.energy_high:
        out.append(Violation("bounds.generation", "generation bounds must equal energy bounds"))
    used_pools = {loc.pool_id for loc in scenario.locations if loc.pool_id in pool_ids}
    for pid in sorted(used_pools):
        peak = float(np.max(scenario.pool(pid).grid_price)) if T else 0.0
        if b.generation_low <= peak:
            out.append(
                Violation(
                    "bounds.generation_low",
                    f"must exceed every grid price (pool {pid} peaks at {peak})",
                )
            )

    levels = scenario.energy_levels
    if not levels or levels[0] < 0:
        out.append(Violation("energy_levels", "must be non-negative integers"))
    elif 0 not in levels or max(levels) <= 0:
        out.append(Violation("energy_levels", "must contain 0 and a positive level"))

    seen_users = set()
    for user in users:
        path = f"users[{user.user_id}]"
        if user.user_id in seen_users:
            out.append(Violation(path, "duplicate user_id"))
        seen_users.add(user.user_id)
        if not (1 <= user.submission_time <= T):
            out.append(Violation(f"{path}.submission_time", f"must be in [1, {T}]"))
        if user.submission_time > user.arrival:
            out.append(Violation(f"{path}.submission_time", "must not exceed arrival"))
        if user.arrival >= user.departure:
            out.append(Violation(f"{path}.window", "arrival must precede departure"))
        if not (1 <= user.arrival and user.departure <= T):
            out.append(Violation(f"{path}.window", f"must lie within [1, {T}]"))
        if user.energy_demand <= 0:
            out.append(Violation(f"{path}.energy_demand", "must be > 0"))
        if not user.preferred_locations:
            out.append(Violation(f"{path}.preferred_locations", "must be non-empty"))
        if len(user.preferred_locations) != len(set(user.preferred_locations)):
            out.append(Violation(f"{path}.preferred_locations", "must be distinct"))
        if len(user.valuations) != len(user.preferred_locations):
            out.append(Violation(f"{path}.valuations", "one valuation per preferred location"))
        if any(v < 0 for v in user.valuations):
            out.append(Violation(f"{path}.valuations", "must be >= 0"))
        known = [lid for lid in user.preferred_locations if lid in loc_ids]
        if len(known) != len(user.preferred_locations):
            out.append(Violation(f"{path}.preferred_locations", "references unknown location"))
        if known and user.arrival <= user.departure:
            width = user.departure - user.arrival + 1
            if all(
                user.energy_demand > scenario.location(lid).max_charge_rate * width
                for lid in known
            ):
                out.append(
                    Violation(f"{path}.energy_demand", "exceeds window capacity at every preferred location")
                )
    return out


def option_is_feasible(option: ChargeOption, user: UserType, scenario: Scenario) -> bool:
    """True iff the option honors the user's window, demand, and rate caps."""
    loc = scenario.location(option.location_id)  # raises on malformed input
    if option.location_id not in user.preferred_locations:
        return False
    T = scenario.slot_count
    c = option.cable_profile
    e = option.energy_schedule
    if c.shape != (T,) or e.shape != (T,):
        return False
    inside = np.zeros(T, dtype=bool)
    inside[user.arrival - 1 : user.departure] = True
    if np.any((c != 0) & ~inside) or np.any((e != 0) & ~inside):
        return False
    if not np.all((c == 0) | (c == 1)):
        return False
    if np.any((e > 0) & (c != 1)):
        return False
    if np.any(e < 0) or np.any(e > loc.max_charge_rate):
        return False
    return bool(math.isclose(float(e.sum()), user.energy_demand, rel_tol=0.0, abs_tol=1e-9))
