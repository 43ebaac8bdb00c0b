"""Build the feasible charge-schedule options for a request.

Options are defined per location: every EVSE at a location is identical,
so the engine (not the option) picks the station. The cable is held for
the entire visit window; only the energy placement varies. Two policies:

* ``exhaustive`` enumerates every schedule over the allowed per-slot
  energy levels that meets the demand exactly (oracle-grade, small windows)
* ``heuristic-K`` emits at most K schedules: earliest-fill, latest-fill,
  cheapest at a price snapshot when one is supplied, and seeded random
  fills for the remainder
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .model import ChargeOption, Scenario, UserType

__all__ = ["generate_options", "parse_policy"]


def parse_policy(policy: str) -> tuple[str, Optional[int]]:
    """Split a policy string into kind and budget: 'exhaustive' or 'heuristic-K'."""
    if policy == "exhaustive":
        return "exhaustive", None
    if policy.startswith("heuristic-"):
        k = int(policy.split("-", 1)[1])
        if k < 1:
            raise ValueError("heuristic budget must be >= 1")
        return "heuristic", k
    raise ValueError(f"unknown option policy {policy!r}")


def _integral_demand(demand: float) -> Optional[int]:
    rounded = round(demand)
    if abs(demand - rounded) <= 1e-9:
        return int(rounded)
    return None


def _enumerate_schedules(width: int, demand: int, levels: tuple[int, ...], limit: Optional[int]):
    """All length-``width`` level sequences summing to ``demand``, in
    lexicographic order; stops early at ``limit`` when given."""
    top = max(levels)
    out: list[tuple[int, ...]] = []
    prefix = [0] * width

    def fill(i: int, remaining: int) -> bool:
        if i == width:
            if remaining == 0:
                out.append(tuple(prefix))
                return limit is not None and len(out) >= limit
            return False
        slots_left = width - i - 1
        for level in levels:
            if level > remaining or remaining - level > top * slots_left:
                continue
            prefix[i] = level
            if fill(i + 1, remaining - level):
                return True
        prefix[i] = 0
        return False

    fill(0, demand)
    return out


def _greedy_fill(order, demand: int, top: int, width: int) -> tuple[int, ...]:
    sched = [0] * width
    remaining = demand
    for i in order:
        if remaining <= 0:
            break
        take = min(top, remaining)
        sched[i] = take
        remaining -= take
    return tuple(sched)


def _heuristic_schedules(
    width: int,
    demand: int,
    levels: tuple[int, ...],
    budget: int,
    slot_prices: Optional[np.ndarray],
    rng: np.random.Generator,
) -> list[tuple[int, ...]]:
    top = max(levels)
    picked: list[tuple[int, ...]] = []
    seen = set()

    def add(sched: tuple[int, ...]) -> None:
        if sched not in seen and len(picked) < budget:
            seen.add(sched)
            picked.append(sched)

    add(_greedy_fill(range(width), demand, top, width))
    add(_greedy_fill(range(width - 1, -1, -1), demand, top, width))
    if slot_prices is not None:
        order = sorted(range(width), key=lambda i: (float(slot_prices[i]), i))
        add(_greedy_fill(order, demand, top, width))
    attempts = 0
    while len(picked) < budget and attempts < 4 * budget:
        order = rng.permutation(width)
        add(_greedy_fill([int(i) for i in order], demand, top, width))
        attempts += 1
    return picked


def generate_options(
    user: UserType,
    scenario: Scenario,
    policy: str = "exhaustive",
    max_options_per_location: Optional[int] = None,
    price_snapshot: Optional[Callable[[int], np.ndarray]] = None,
    rng: Optional[np.random.Generator] = None,
) -> list[ChargeOption]:
    """Feasible options for ``user``, sorted by (location, schedule).

    Returns an empty list when the demand fits no preferred location
    (the caller then sends the user to auxiliary parking). When the user
    carries explicit schedules those are used verbatim (where they fit)
    and the policy machinery is bypassed.

    ``price_snapshot`` maps a location id to a per-slot $ /kWh series used
    by the heuristic's cheapest-fill variant; it must be an immutable
    snapshot of current prices.
    """
    kind, budget = parse_policy(policy)
    if rng is None:
        rng = np.random.default_rng(0)
    T = scenario.slot_count
    start = user.arrival - 1
    width = user.window_length
    demand = _integral_demand(user.energy_demand)

    results: list[ChargeOption] = []
    for lid in sorted(user.preferred_locations):
        loc = scenario.location(lid)
        levels = tuple(v for v in scenario.energy_levels if v <= loc.max_charge_rate)
        if not levels or max(levels) == 0:
            continue

        if user.explicit_schedules is not None:
            schedules = [
                s
                for s in user.explicit_schedules
                if len(s) == width
                and abs(sum(s) - user.energy_demand) <= 1e-9
                and all(0 <= e <= loc.max_charge_rate for e in s)
            ]
        elif demand is None or demand > max(levels) * width:
            schedules = []
        else:
            cap = max_options_per_location
            if kind == "exhaustive":
                schedules = _enumerate_schedules(width, demand, levels, cap)
            else:
                quota = budget if cap is None else min(budget, cap)
                prices = None
                if price_snapshot is not None:
                    prices = np.asarray(price_snapshot(lid))[start : start + width]
                schedules = _heuristic_schedules(width, demand, levels, quota, prices, rng)

        for sched in sorted(set(schedules)):
            cable = np.zeros(T)
            cable[start : start + width] = 1.0
            energy = np.zeros(T)
            energy[start : start + width] = sched
            option_id = f"{lid}:" + "-".join(str(v) for v in sched)
            results.append(
                ChargeOption(
                    option_id=option_id,
                    location_id=lid,
                    cable_profile=cable,
                    energy_schedule=energy,
                )
            )
    return results
