import dataclasses
import math

import numpy as np
import pytest

import evauction as ev
from evauction import oracle
from evauction.oracle import (
    OracleBudgetExceeded,
    empirical_ratio,
    exhaustive_options,
    no_mechanism_baseline,
    offline_upper_bound,
    solve_offline_exact,
)

from instances import micro_instance


def _user(uid, value, arrival=1, departure=4, demand=2.0, locs=(1,)):
    return ev.UserType(
        user_id=uid,
        submission_time=1,
        arrival=arrival,
        departure=departure,
        energy_demand=demand,
        preferred_locations=locs,
        valuations=tuple(value if isinstance(value, tuple) else (value,) * len(locs)),
    )


def test_single_user_within_solar(s1):
    scenario, users = s1
    opts = exhaustive_options(scenario, users)
    sol = solve_offline_exact(scenario, users, opts)
    assert sol.welfare == pytest.approx(2.0)
    assert sol.assignment[1] is not None


def test_two_users_one_cable_takes_higher_value(s1):
    scenario, _ = s1
    loc = dataclasses.replace(scenario.locations[0], cables_per_evse=1)
    sc = dataclasses.replace(scenario, locations=(loc,))
    users = [_user(1, 2.0), _user(2, 1.0)]
    opts = exhaustive_options(sc, users)
    sol = solve_offline_exact(sc, users, opts)
    assert sol.welfare == pytest.approx(2.0)
    assert sol.assignment[1] is not None and sol.assignment[2] is None


def test_transformer_bound_leaves_user_unassigned(s1):
    scenario, _ = s1
    pool = dataclasses.replace(
        scenario.pools[0],
        solar_actual=[0.0] * 4,
        solar_lower=[0.0] * 4,
        solar_upper=[0.0] * 4,
        grid_limit=[0.0] * 4,
    )
    sc = dataclasses.replace(scenario, pools=(pool,))
    users = [_user(1, 5.0, demand=1.0)]
    sol = solve_offline_exact(sc, users, exhaustive_options(sc, users))
    assert sol.assignment[1] is None and sol.welfare == 0.0


def test_budget_gate(s1):
    scenario, _ = s1
    users = [_user(i, 2.0, departure=4, demand=2.0) for i in range(1, 7)]
    opts = exhaustive_options(scenario, users)
    with pytest.raises(OracleBudgetExceeded):
        solve_offline_exact(scenario, users, opts, budget=10)


def test_pruned_equals_naive_small():
    for seed in (1, 2, 3, 4, 5, 6):
        scenario, users, options, _ = micro_instance(seed, leaf_limit=20_000)
        users = users[:6]
        options = {u.user_id: options[u.user_id] for u in users}
        fast = solve_offline_exact(scenario, users, options, prune=True)
        slow = solve_offline_exact(scenario, users, options, prune=False)
        assert fast.welfare == pytest.approx(slow.welfare, abs=1e-9)


def test_offline_solution_respects_constraints():
    scenario, users, options, _ = micro_instance(8)
    sol = solve_offline_exact(scenario, users, options)
    for loc in scenario.locations:
        assert np.all(sol.demand.cable[loc.location_id] <= loc.cables_per_evse)
        assert np.all(sol.demand.energy[loc.location_id] <= loc.max_charge_rate)
    for pool in scenario.pools:
        assert np.all(
            sol.demand.procurement[pool.pool_id] <= pool.solar_actual + pool.grid_limit + 1e-12
        )
    assigned = [a for a in sol.assignment.values() if a is not None]
    assert len(assigned) == len({id(a[2]) for a in assigned})  # one option per user


def test_upper_bound_free_when_solar_covers(s1):
    scenario, users = s1
    assert offline_upper_bound(scenario, users) == pytest.approx(2.0)


def test_upper_bound_charges_grid_leftover(s1):
    scenario, _ = s1
    pool = dataclasses.replace(
        scenario.pools[0],
        solar_actual=[0.0] * 4,
        solar_lower=[0.0] * 4,
        solar_upper=[0.0] * 4,
    )
    sc = dataclasses.replace(scenario, pools=(pool,))
    users = [_user(1, 2.0, demand=1.0)]
    assert offline_upper_bound(sc, users) == pytest.approx(1.8)


def test_upper_bound_filters_unprofitable(s1):
    scenario, _ = s1
    pool = dataclasses.replace(
        scenario.pools[0],
        solar_actual=[0.0] * 4,
        solar_lower=[0.0] * 4,
        solar_upper=[0.0] * 4,
    )
    sc = dataclasses.replace(scenario, pools=(pool,))
    users = [_user(1, 0.1, demand=1.0)]
    assert offline_upper_bound(sc, users) == 0.0


def test_baseline_uncongested_matches_auction_welfare(s1):
    scenario, _ = s1
    users = [
        _user(1, 2.0, arrival=1, departure=2, demand=1.0),
        _user(2, 1.5, arrival=3, departure=4, demand=1.0),
        _user(3, 1.0, arrival=1, departure=3, demand=1.0),
    ]
    auction = ev.run_auction(scenario, users, scenario.bounds)
    baseline = no_mechanism_baseline(scenario, users)
    assert [r.accepted for r in auction.ledger] == [r.accepted for r in baseline.ledger]
    assert auction.welfare == pytest.approx(baseline.welfare, abs=1e-9)
    assert baseline.revenue == 0.0


def test_baseline_displacement_loses_welfare(s1):
    scenario, _ = s1
    loc = dataclasses.replace(
        scenario.locations[0], cables_per_evse=1, evse_count=1
    )
    sc = dataclasses.replace(scenario, locations=(loc,))
    users = [
        _user(1, 0.5, arrival=1, departure=4, demand=2.0),
        _user(2, 5.0, arrival=1, departure=4, demand=2.0),
    ]
    baseline = no_mechanism_baseline(sc, users)
    auction = ev.run_auction(sc, users, sc.bounds)
    assert baseline.welfare == pytest.approx(0.5)
    assert auction.welfare == pytest.approx(5.0 - auction.operational_cost)
    assert auction.welfare > baseline.welfare


def test_baseline_empty(s1):
    scenario, _ = s1
    outcome = no_mechanism_baseline(scenario, [])
    assert outcome.welfare == 0.0 and outcome.ledger == ()


def test_baseline_earliest_fill_tiebreak(s1):
    scenario, _ = s1
    users = [_user(1, 2.0, arrival=1, departure=3, demand=1.0)]
    outcome = no_mechanism_baseline(scenario, users)
    assert tuple(outcome.ledger[0].option.energy_schedule[:3]) == (1, 0, 0)


def test_empirical_ratio_single_user(s1):
    scenario, users = s1
    report = empirical_ratio(scenario, users, scenario.bounds)
    assert report.ratio == pytest.approx(1.0)
    assert report.alpha_1 == pytest.approx(2 * math.log(56), abs=1e-9)


def test_empirical_ratio_adversarial(s1):
    scenario, _ = s1
    loc = dataclasses.replace(scenario.locations[0], cables_per_evse=1, evse_count=1)
    sc = dataclasses.replace(scenario, locations=(loc,))
    # the early user's value clears the empty-state price, so it occupies
    # the single cable and blocks the later high-value user
    users = [
        _user(1, 1.0, arrival=1, departure=4, demand=2.0),
        _user(2, 5.0, arrival=1, departure=4, demand=2.0),
    ]
    report = empirical_ratio(sc, users, sc.bounds)
    assert report.ratio > 1.0
    assert report.ratio <= report.alpha_1


def test_empirical_ratio_worthless_users(s1):
    scenario, _ = s1
    users = [_user(1, 0.0, demand=1.0)]
    report = empirical_ratio(scenario, users, scenario.bounds)
    assert report.ratio == 1.0
    assert report.offline_welfare == 0.0
