"""Offline references for the online mechanism.

Three yardsticks, all on identical inputs:

* an exact solver for the offline assignment problem (exhaustive search
  with branch-and-bound pruning; desk-scale instances only)
* a capacity-relaxed upper bound (every user served independently; energy
  beyond actual solar priced at the cheapest in-window grid price)
* the no-mechanism baseline: free first-come-first-served choice, with the
  operator absorbing procurement costs
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import pricing
from .engine import AuctionOutcome, build_outcome, operational_cost, run_auction
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
from .options import generate_options

__all__ = [
    "OfflineSolution",
    "OracleBudgetExceeded",
    "RatioReport",
    "empirical_ratio",
    "exhaustive_options",
    "no_mechanism_baseline",
    "offline_upper_bound",
    "search_budget",
    "solve_offline_exact",
]


class OracleBudgetExceeded(RuntimeError):
    """The instance's search tree exceeds the configured leaf budget; use
    offline_upper_bound instead."""


@dataclass
class OfflineSolution:
    """A globally optimal offline assignment.

    ``assignment`` maps each user id to its (location, EVSE, option)
    tuple, or None for unassigned users; ``demand`` is the implied final
    demand state and ``welfare`` the objective value at actual solar.
    """

    assignment: dict[int, Optional[tuple[int, int, ChargeOption]]]
    welfare: float
    demand: DemandState


def exhaustive_options(
    scenario: Scenario, users: Sequence[UserType]
) -> dict[int, list[ChargeOption]]:
    """All options for every user; the canonical oracle input."""
    return {u.user_id: generate_options(u, scenario, policy="exhaustive") for u in users}


def search_budget(
    scenario: Scenario, users: Sequence[UserType], options_by_user: Mapping[int, Sequence[ChargeOption]]
) -> int:
    """Leaf count of the full search tree (reject branch included)."""
    total_evse = sum(loc.evse_count for loc in scenario.locations)
    leaves = 1
    for user in users:
        leaves *= len(options_by_user.get(user.user_id, ())) * total_evse + 1
    return leaves


def solve_offline_exact(
    scenario: Scenario,
    users: Sequence[UserType],
    options_by_user: Mapping[int, Sequence[ChargeOption]],
    budget: int = 10_000_000,
    prune: bool = True,
) -> OfflineSolution:
    """Exact welfare-maximizing assignment by depth-first search.

    With ``prune`` on, subtrees that cannot beat the incumbent are cut
    (remaining users credited their best valuation for free) and EVSEs in
    identical state are collapsed; with it off the search is a naive full
    enumeration. Both return the same welfare.
    """
    violations = validate_scenario(scenario, users)
    if violations:
        raise ScenarioValidationError(violations)
    if search_budget(scenario, users, options_by_user) > budget:
        raise OracleBudgetExceeded(
            f"search tree exceeds {budget} leaves; use offline_upper_bound instead"
        )

    ordered = sorted(users, key=lambda u: (u.submission_time, u.user_id))
    n = len(ordered)
    T = scenario.slot_count

    cable = {loc.location_id: [[0.0] * T for _ in range(loc.evse_count)] for loc in scenario.locations}
    energy = {loc.location_id: [[0.0] * T for _ in range(loc.evse_count)] for loc in scenario.locations}
    pool_load = {p.pool_id: [0.0] * T for p in scenario.pools}
    pool_cap = {
        p.pool_id: [float(p.solar_actual[t] + p.grid_limit[t]) for t in range(T)]
        for p in scenario.pools
    }
    pool_solar = {p.pool_id: [float(s) for s in p.solar_actual] for p in scenario.pools}
    pool_price = {p.pool_id: [float(v) for v in p.grid_price] for p in scenario.pools}
    loc_cap = {
        loc.location_id: (float(loc.cables_per_evse), float(loc.max_charge_rate), loc.evse_count, loc.pool_id)
        for loc in scenario.locations
    }

    # per user: list of (value, lid, pid, option, cable_slots, energy_slots)
    choices = []
    for user in ordered:
        rows = []
        for opt in options_by_user.get(user.user_id, ()):
            lid = opt.location_id
            c_slots = [int(t) for t in np.flatnonzero(opt.cable_profile > 0)]
            e_slots = [
                (int(t), float(opt.energy_schedule[t]))
                for t in np.flatnonzero(opt.energy_schedule > 0)
            ]
            rows.append((user.valuation_at(lid), lid, loc_cap[lid][3], opt, c_slots, e_slots))
        choices.append(rows)

    suffix_best = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        best_v = max((row[0] for row in choices[i]), default=0.0)
        suffix_best[i] = suffix_best[i + 1] + best_v

    best_welfare = 0.0
    best_assign: list[Optional[tuple[int, int, ChargeOption]]] = [None] * n
    current: list[Optional[tuple[int, int, ChargeOption]]] = [None] * n

    def walk(i: int, value_sum: float, cost_sum: float) -> None:
        nonlocal best_welfare, best_assign
        if i == n:
            welfare = value_sum - cost_sum
            if welfare > best_welfare:
                best_welfare = welfare
                best_assign = current.copy()
            return
        if prune and value_sum + suffix_best[i] - cost_sum <= best_welfare:
            return
        for value, lid, pid, opt, c_slots, e_slots in choices[i]:
            c_cap, e_cap, evse_count, _ = loc_cap[lid]
            loc_cable = cable[lid]
            loc_energy = energy[lid]
            load = pool_load[pid]
            caps = pool_cap[pid]
            gen_ok = all(load[t] + e <= caps[t] for t, e in e_slots)
            if not gen_ok:
                continue
            solar = pool_solar[pid]
            price = pool_price[pid]
            delta_cost = 0.0
            for t, e in e_slots:
                y = load[t]
                delta_cost += price[t] * (max(0.0, y + e - solar[t]) - max(0.0, y - solar[t]))
            seen_states = set() if prune else None
            for m in range(evse_count):
                row_c = loc_cable[m]
                row_e = loc_energy[m]
                if any(row_c[t] + 1.0 > c_cap for t in c_slots):
                    continue
                if any(row_e[t] + e > e_cap for t, e in e_slots):
                    continue
                if seen_states is not None:
                    key = (
                        tuple(row_c[t] for t in c_slots),
                        tuple(row_e[t] for t, _ in e_slots),
                    )
                    if key in seen_states:
                        continue
                    seen_states.add(key)
                for t in c_slots:
                    row_c[t] += 1.0
                for t, e in e_slots:
                    row_e[t] += e
                    load[t] += e
                current[i] = (lid, m, opt)
                walk(i + 1, value_sum + value, cost_sum + delta_cost)
                current[i] = None
                for t in c_slots:
                    row_c[t] -= 1.0
                for t, e in e_slots:
                    row_e[t] -= e
                    load[t] -= e
        walk(i + 1, value_sum, cost_sum)  # reject branch, tried last

    walk(0, 0.0, 0.0)

    assignment = {ordered[i].user_id: best_assign[i] for i in range(n)}
    demand = DemandState(scenario, "exact")
    value_total = 0.0
    for i, user in enumerate(ordered):
        chosen = best_assign[i]
        if chosen is not None:
            lid, m, opt = chosen
            demand.apply(opt, m)
            value_total += user.valuation_at(lid)
    welfare = value_total - operational_cost(scenario, demand)
    return OfflineSolution(assignment=assignment, welfare=welfare, demand=demand)


def offline_upper_bound(scenario: Scenario, users: Sequence[UserType]) -> float:
    """Welfare bound with every station capacity (and the transformer
    limit) relaxed.

    Each user is served independently: in-window solar is free, anything
    beyond is priced at the cheapest in-window grid price, and the user
    contributes their best location's surplus when positive. Relaxation
    plus the supply cost's convexity make this an upper bound on the exact
    offline welfare.
    """
    total = 0.0
    for user in users:
        total += max(0.0, _best_relaxed_surplus(scenario, user)[0])
    return total


def upper_bound_by_location(scenario: Scenario, users: Sequence[UserType]) -> dict[int, float]:
    """Per-location split of offline_upper_bound (by each user's chosen
    location)."""
    split = {lid: 0.0 for lid in scenario.location_ids}
    for user in users:
        surplus, lid = _best_relaxed_surplus(scenario, user)
        if surplus > 0 and lid is not None:
            split[lid] += surplus
    return split


def _best_relaxed_surplus(scenario: Scenario, user: UserType) -> tuple[float, Optional[int]]:
    w0, w1 = user.arrival - 1, user.departure
    best = -math.inf
    best_lid = None
    for lid, value in zip(user.preferred_locations, user.valuations):
        pool = scenario.pool_of(lid)
        free = float(pool.solar_actual[w0:w1].sum())
        beyond = max(0.0, user.energy_demand - free)
        cost = beyond * float(pool.grid_price[w0:w1].min())
        if value - cost > best:
            best = value - cost
            best_lid = lid
    return best, best_lid


def no_mechanism_baseline(
    scenario: Scenario,
    users: Sequence[UserType],
    seed: int = 0,
    option_policy: str = "exhaustive",
    max_options_per_location: Optional[int] = None,
    options_by_user: Optional[Mapping[int, Sequence[ChargeOption]]] = None,
) -> AuctionOutcome:
    """First-come-first-served world without prices.

    Users take the feasible (capacity-respecting, finite-cost) option at
    their highest-value location, ties broken toward earliest-fill
    schedules, then lower location and EVSE index. Everybody pays zero and
    the operator absorbs the procurement cost.
    """
    violations = validate_scenario(scenario, users)
    if violations:
        raise ScenarioValidationError(violations)
    demand = DemandState(scenario, "exact")
    ledger: list[AllocationResult] = []
    for user in sorted(users, key=lambda u: (u.submission_time, u.user_id)):
        if options_by_user is not None:
            opts = options_by_user.get(user.user_id, ())
        else:
            rng = np.random.default_rng([seed, user.user_id])
            opts = generate_options(
                user,
                scenario,
                policy=option_policy,
                max_options_per_location=max_options_per_location,
                rng=rng,
            )
        w0, w1 = user.arrival - 1, user.departure
        chosen = None
        ranked = sorted(
            opts,
            key=lambda o: (
                -user.valuation_at(o.location_id),
                tuple(-e for e in o.energy_schedule[w0:w1]),
                o.location_id,
            ),
        )
        for opt in ranked:
            loc = scenario.location(opt.location_id)
            pool_id = loc.pool_id
            c = opt.cable_profile[w0:w1]
            e = opt.energy_schedule[w0:w1]
            gen_ok = np.all(
                demand.procurement[pool_id][w0:w1] + e <= demand.procurement_cap(pool_id)[w0:w1]
            )
            if not gen_ok:
                continue
            ok_rows = np.all(
                demand.cable[opt.location_id][:, w0:w1] + c <= loc.cables_per_evse, axis=1
            ) & np.all(
                demand.energy[opt.location_id][:, w0:w1] + e <= loc.max_charge_rate, axis=1
            )
            feasible = np.flatnonzero(ok_rows)
            if feasible.size:
                chosen = (opt, int(feasible[0]))
                break
        if chosen is None:
            ledger.append(AllocationResult(user_id=user.user_id, accepted=False))
        else:
            opt, m = chosen
            value = user.valuation_at(opt.location_id)
            demand.apply(opt, m)
            ledger.append(
                AllocationResult(
                    user_id=user.user_id,
                    accepted=True,
                    location_id=opt.location_id,
                    evse_index=m,
                    option=opt,
                    utility=value,
                    payment=0.0,
                    valuation=value,
                )
            )
    return build_outcome(scenario, demand, tuple(ledger), None, "exact", option_policy, seed)


@dataclass(frozen=True)
class RatioReport:
    """Observed offline/online welfare ratio next to the guarantees."""

    ratio: float
    alpha_1: float
    alpha_2: float
    online_welfare: float
    offline_welfare: float


def empirical_ratio(
    scenario: Scenario,
    users: Sequence[UserType],
    bounds: ValueBounds,
    trials: int = 1,
    seed: int = 0,
    budget: int = 10_000_000,
) -> RatioReport:
    """Exact offline welfare over online welfare, on exhaustive options.

    ``trials`` reruns the online side with derived seeds and keeps the
    worst (largest) ratio; with exhaustive options the runs coincide, so
    this matters only under bounded option policies. Conventions: a ratio
    of 1 when offline welfare is 0, an infinite sentinel when only the
    online welfare is 0.
    """
    opts = exhaustive_options(scenario, users)
    offline = solve_offline_exact(scenario, users, opts, budget=budget).welfare
    worst = -math.inf
    for trial in range(max(1, trials)):
        online = run_auction(
            scenario, users, bounds, seed=seed + trial, options_by_user=opts
        ).welfare
        if offline <= 0.0:
            ratio = 1.0
        elif online == 0.0:
            ratio = math.inf
        else:
            ratio = offline / online
        if ratio > worst:
            worst = ratio
            worst_online = online
    return RatioReport(
        ratio=worst,
        alpha_1=pricing.alpha_1(scenario, bounds),
        alpha_2=pricing.alpha_2(scenario, bounds),
        online_welfare=worst_online,
        offline_welfare=offline,
    )
