"""The online reservation mechanism: quote, admit, and the full run.

Each arriving user is quoted take-it-or-leave-it marginal prices computed
from current demand only. The user is admitted iff some (option, EVSE,
location) tuple leaves strictly positive utility; the best tuple wins,
payment is fixed at the pre-admission prices, and demand (hence prices)
is updated. Decisions are never revoked.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels, pricing
from .model import (
    AllocationResult,
    ChargeOption,
    DemandState,
    Scenario,
    ScenarioValidationError,
    UserType,
    ValueBounds,
    validate_scenario,
)
from .options import generate_options, parse_policy

__all__ = [
    "AuctionOutcome",
    "AuctionState",
    "LocationStats",
    "Quote",
    "admit",
    "build_outcome",
    "quote",
    "run_auction",
]


@dataclass(frozen=True)
class Quote:
    """Payment breakdown for one (option, EVSE) pair at current prices.

    ``feasible`` is False when any slot would be pushed past a capacity;
    the payment parts are meaningless in that case (the engine treats the
    pair as priced out).
    """

    cable: float
    energy: float
    generation: float
    feasible: bool

    @property
    def total(self) -> float:
        return self.cable + self.energy + self.generation


@dataclass(frozen=True)
class LocationStats:
    location_id: int
    evse_count: int
    cables_per_evse: int
    evs_served: int
    valuation_sum: float
    revenue: float
    energy_delivered: float
    welfare: float
    peak_cable_price: float
    peak_generation_price: float


@dataclass
class AuctionOutcome:
    """Everything a run produces: the append-only ledger, aggregate
    accounting, per-location statistics, and the final demand state."""

    ledger: tuple[AllocationResult, ...]
    welfare: float
    revenue: float
    operational_cost: float
    user_surplus: float
    accepted_count: int
    per_location: tuple[LocationStats, ...]
    demand: DemandState
    mode: str
    policy: str
    seed: int


class AuctionState:
    """Mutable state of one auction: demand, ledger, and running totals."""

    def __init__(self, scenario: Scenario, bounds: ValueBounds, mode: str = "exact"):
        self.scenario = scenario
        self.bounds = bounds
        self.mode = mode
        self.demand = DemandState(scenario, mode)
        self.ledger: list[AllocationResult] = []
        self.k_scale = pricing.price_scale(scenario)


def _kernel_eval(
    state: AuctionState, option: ChargeOption, w0: int, w1: int
) -> tuple[np.ndarray, np.ndarray]:
    """Run the quote kernel for one option over slots [w0, w1) (0-based)."""
    scenario = state.scenario
    loc = scenario.location(option.location_id)
    pool = scenario.pool(loc.pool_id)
    b = state.bounds
    pay = np.empty((loc.evse_count, 3))
    ok = np.zeros(loc.evse_count, dtype=np.uint8)
    kernels.quote_options(
        state.demand.cable[loc.location_id][:, w0:w1],
        state.demand.energy[loc.location_id][:, w0:w1],
        state.demand.procurement[loc.pool_id][w0:w1],
        option.cable_profile[w0:w1],
        option.energy_schedule[w0:w1],
        float(loc.cables_per_evse),
        float(loc.max_charge_rate),
        state.demand.procurement_cap(loc.pool_id)[w0:w1],
        pool.grid_price[w0:w1],
        state.k_scale,
        b.cable_low,
        b.cable_high,
        b.energy_low,
        b.energy_high,
        b.generation_low,
        b.generation_high,
        pay,
        ok,
    )
    return pay, ok


def quote(state: AuctionState, option: ChargeOption, evse_index: int) -> Quote:
    """Payment for ``option`` on one EVSE at current (pre-update) prices."""
    pay, ok = _kernel_eval(state, option, 0, state.scenario.slot_count)
    return Quote(
        cable=float(pay[evse_index, 0]),
        energy=float(pay[evse_index, 1]),
        generation=float(pay[evse_index, 2]),
        feasible=bool(ok[evse_index]),
    )


def admit(state: AuctionState, user: UserType, options: Sequence[ChargeOption]) -> AllocationResult:
    """Decide one user: quote all tuples, pick the utility argmax, settle.

    Utility is the valuation at the option's location minus the quoted
    payment; zero utility (or no feasible tuple) means rejection. Ties
    break toward the lowest location id, then the lowest EVSE index, then
    the lexicographically smallest energy schedule — options must arrive
    sorted that way per location (``generate_options`` output order) and
    lie within the user's visit window.
    """
    w0 = user.arrival - 1
    w1 = user.departure
    by_loc: dict[int, list[ChargeOption]] = {}
    for opt in options:
        by_loc.setdefault(opt.location_id, []).append(opt)

    best_utility = 0.0
    best = None
    for lid in sorted(by_loc):
        value = user.valuation_at(lid)
        evaluated = [(opt,) + _kernel_eval(state, opt, w0, w1) for opt in by_loc[lid]]
        for m in range(state.scenario.location(lid).evse_count):
            for opt, pay, ok in evaluated:
                if not ok[m]:
                    continue
                utility = value - (float(pay[m, 0]) + float(pay[m, 1]) + float(pay[m, 2]))
                if utility > best_utility:
                    best_utility = utility
                    best = (lid, m, opt, float(pay[m, 0]), float(pay[m, 1]), float(pay[m, 2]))

    if best is None:
        result = AllocationResult(user_id=user.user_id, accepted=False)
    else:
        lid, m, opt, cable_paid, energy_paid, generation_paid = best
        result = AllocationResult(
            user_id=user.user_id,
            accepted=True,
            location_id=lid,
            evse_index=m,
            option=opt,
            utility=best_utility,
            payment=cable_paid + energy_paid + generation_paid,
            cable_paid=cable_paid,
            energy_paid=energy_paid,
            generation_paid=generation_paid,
            valuation=user.valuation_at(lid),
        )
        state.demand.apply(opt, m)
    state.ledger.append(result)
    return result


def _price_snapshot(state: AuctionState) -> "callable":
    """Per-location $/kWh series (energy + procurement) at current demand,
    using each location's least-loaded EVSE; immutable snapshot for the
    heuristic option policy."""
    scenario = state.scenario
    b = state.bounds
    k = state.k_scale
    cache: dict[int, np.ndarray] = {}

    def series(location_id: int) -> np.ndarray:
        if location_id not in cache:
            loc = scenario.location(location_id)
            pool = scenario.pool(loc.pool_id)
            rate = float(loc.max_charge_rate)
            y_e = state.demand.energy[location_id].min(axis=0)
            p_e = (b.energy_low / k) * (k * b.energy_high / b.energy_low) ** (y_e / rate)
            y_g = state.demand.procurement[loc.pool_id]
            cap = state.demand.procurement_cap(loc.pool_id)
            pi = pool.grid_price
            safe_cap = np.where(cap > 0, cap, 1.0)
            ramp = (k * (b.generation_high - pi) / (b.generation_low - pi)) ** (y_g / safe_cap)
            p_g = pi + ((b.generation_low - pi) / k) * ramp
            p_g = np.where(cap > 0, p_g, np.inf)  # capacity-free slots are unusable
            cache[location_id] = p_e + p_g
        return cache[location_id]

    return series


def run_auction(
    scenario: Scenario,
    users: Sequence[UserType],
    bounds: ValueBounds,
    mode: str = "exact",
    option_policy: str = "exhaustive",
    max_options_per_location: Optional[int] = None,
    seed: int = 0,
    options_by_user: Optional[Mapping[int, Sequence[ChargeOption]]] = None,
) -> AuctionOutcome:
    """Run the full mechanism over users in submission order.

    ``options_by_user`` pins the option sets (used when comparing against
    the offline oracles on identical inputs); otherwise options are
    generated per user under ``option_policy`` with randomness derived
    from ``seed`` and the user id.
    """
    violations = validate_scenario(scenario, users)
    if violations:
        raise ScenarioValidationError(violations)
    kind, _ = parse_policy(option_policy)
    state = AuctionState(scenario, bounds, mode)
    for user in sorted(users, key=lambda u: (u.submission_time, u.user_id)):
        if options_by_user is not None:
            opts = options_by_user.get(user.user_id, ())
        else:
            snapshot = _price_snapshot(state) if kind == "heuristic" else None
            rng = np.random.default_rng([seed, user.user_id])
            opts = generate_options(
                user,
                scenario,
                policy=option_policy,
                max_options_per_location=max_options_per_location,
                price_snapshot=snapshot,
                rng=rng,
            )
        admit(state, user, opts)
    return build_outcome(
        scenario, state.demand, tuple(state.ledger), bounds, mode, option_policy, seed
    )


def operational_cost(scenario: Scenario, demand: DemandState) -> float:
    """Total procurement cost of the allocated demand, at actual solar."""
    total = 0.0
    for pool in scenario.pools:
        load = demand.procurement[pool.pool_id]
        over = np.maximum(0.0, load - pool.solar_actual)
        total += float(np.dot(pool.grid_price, over))
    return total


def build_outcome(
    scenario: Scenario,
    demand: DemandState,
    ledger: tuple[AllocationResult, ...],
    bounds: Optional[ValueBounds],
    mode: str,
    policy: str,
    seed: int,
) -> AuctionOutcome:
    """Aggregate a finished run into totals and per-location statistics.

    Welfare is the valuation sum of admitted users minus the operational
    cost at actual solar (regardless of the pricing mode). Per-location
    welfare attributes each slot's cost in proportion to the location's
    share of pool demand. Peak prices are evaluated at final demand; a
    priceless run (``bounds=None``, the no-mechanism baseline) reports 0.
    """
    k = pricing.price_scale(scenario)
    valuation_total = sum(r.valuation for r in ledger if r.accepted)
    revenue = sum(r.payment for r in ledger if r.accepted)
    surplus = sum(r.utility for r in ledger if r.accepted)
    cost = operational_cost(scenario, demand)

    pool_cost = {}
    for pool in scenario.pools:
        load = demand.procurement[pool.pool_id]
        pool_cost[pool.pool_id] = pool.grid_price * np.maximum(0.0, load - pool.solar_actual)

    stats = []
    for lid in scenario.location_ids:
        loc = scenario.location(lid)
        pool = scenario.pool(loc.pool_id)
        served = sum(1 for r in ledger if r.accepted and r.location_id == lid)
        val_sum = sum(r.valuation for r in ledger if r.accepted and r.location_id == lid)
        rev_sum = sum(r.payment for r in ledger if r.accepted and r.location_id == lid)
        energy_series = demand.energy[lid].sum(axis=0)
        pool_load = demand.procurement[loc.pool_id]
        safe_load = np.where(pool_load > 0, pool_load, 1.0)
        share = np.where(pool_load > 0, energy_series / safe_load, 0.0)
        attributed = float(np.dot(pool_cost[loc.pool_id], share))
        peak_cable = 0.0
        peak_generation = 0.0
        if bounds is not None:
            peak_cable = pricing.cable_price(
                float(demand.cable[lid].max()), loc.cables_per_evse, bounds, k
            )
            active = np.flatnonzero(energy_series > 0)
            for t0 in active:
                p = pricing.generation_price(
                    float(pool_load[t0]), pool, int(t0) + 1, bounds, k, demand.mode
                )
                peak_generation = max(peak_generation, p)
        stats.append(
            LocationStats(
                location_id=lid,
                evse_count=loc.evse_count,
                cables_per_evse=loc.cables_per_evse,
                evs_served=served,
                valuation_sum=val_sum,
                revenue=rev_sum,
                energy_delivered=float(energy_series.sum()),
                welfare=val_sum - attributed,
                peak_cable_price=peak_cable,
                peak_generation_price=peak_generation,
            )
        )

    return AuctionOutcome(
        ledger=ledger,
        welfare=valuation_total - cost,
        revenue=revenue,
        operational_cost=cost,
        user_surplus=surplus,
        accepted_count=sum(1 for r in ledger if r.accepted),
        per_location=tuple(stats),
        demand=demand,
        mode=mode,
        policy=policy,
        seed=seed,
    )
