import math

import numpy as np
import pytest

import evauction as ev
from evauction.options import parse_policy


def _user(s1, arrival, departure, demand, explicit=None):
    return ev.UserType(
        user_id=1,
        submission_time=1,
        arrival=arrival,
        departure=departure,
        energy_demand=float(demand),
        preferred_locations=(1,),
        valuations=(2.0,),
        explicit_schedules=explicit,
    )


def test_parse_policy():
    assert parse_policy("exhaustive") == ("exhaustive", None)
    assert parse_policy("heuristic-5") == ("heuristic", 5)
    with pytest.raises(ValueError):
        parse_policy("heuristic-0")
    with pytest.raises(ValueError):
        parse_policy("greedy")


def test_exhaustive_three_slot_window(s1):
    scenario, _ = s1
    opts = ev.generate_options(_user(s1, 1, 3, 2), scenario)
    schedules = [tuple(o.energy_schedule[:3]) for o in opts]
    assert schedules == [(0, 1, 1), (1, 0, 1), (1, 1, 0)]
    for o in opts:
        assert list(o.cable_profile) == [1, 1, 1, 0]


def test_exact_fit_window(s1):
    scenario, _ = s1
    opts = ev.generate_options(_user(s1, 1, 2, 2), scenario)
    assert len(opts) == 1
    assert tuple(opts[0].energy_schedule[:2]) == (1, 1)


def test_demand_exceeding_window_is_empty(s1):
    scenario, _ = s1
    assert ev.generate_options(_user(s1, 1, 4, 5), scenario) == []


@pytest.mark.parametrize("width,demand", [(3, 1), (4, 2), (4, 3), (4, 4)])
def test_exhaustive_count_matches_binomial(s1, width, demand):
    scenario, _ = s1
    opts = ev.generate_options(_user(s1, 1, width, demand), scenario)
    assert len(opts) == math.comb(width, demand)


def test_all_options_feasible(s1):
    scenario, _ = s1
    user = _user(s1, 1, 4, 2)
    for opt in ev.generate_options(user, scenario):
        assert ev.option_is_feasible(opt, user, scenario)


def test_heuristic_subset_of_exhaustive(s1):
    scenario, _ = s1
    user = _user(s1, 1, 4, 2)
    full = {tuple(o.energy_schedule) for o in ev.generate_options(user, scenario)}
    for k in (1, 2, 3, 6):
        rng = np.random.default_rng(11)
        subset = ev.generate_options(user, scenario, policy=f"heuristic-{k}", rng=rng)
        assert len(subset) <= k
        assert {tuple(o.energy_schedule) for o in subset} <= full


def test_heuristic_deterministic_under_rng(s1):
    scenario, _ = s1
    user = _user(s1, 1, 4, 2)
    a = ev.generate_options(user, scenario, "heuristic-6", rng=np.random.default_rng(5))
    b = ev.generate_options(user, scenario, "heuristic-6", rng=np.random.default_rng(5))
    assert [o.option_id for o in a] == [o.option_id for o in b]


def test_heuristic_cheapest_uses_snapshot(s1):
    scenario, _ = s1
    user = _user(s1, 1, 4, 1)
    # slot 3 is by far the cheapest; the cheapest-fill schedule must use it
    snapshot = lambda lid: np.array([5.0, 5.0, 0.01, 5.0])
    opts = ev.generate_options(
        user, scenario, "heuristic-3", price_snapshot=snapshot, rng=np.random.default_rng(0)
    )
    assert (0, 0, 1, 0) in {tuple(o.energy_schedule) for o in opts}


def test_max_options_truncates(s1):
    scenario, _ = s1
    opts = ev.generate_options(_user(s1, 1, 4, 2), scenario, max_options_per_location=3)
    assert len(opts) == 3
    assert [tuple(o.energy_schedule[:4]) for o in opts] == [
        (0, 0, 1, 1),
        (0, 1, 0, 1),
        (0, 1, 1, 0),
    ]


def test_explicit_schedules_bypass_policy(s1):
    scenario, _ = s1
    user = _user(s1, 1, 2, 1, explicit=((1, 0), (0, 1), (1, 1)))
    opts = ev.generate_options(user, scenario)
    # the (1, 1) entry sums to 2 != demand and is dropped
    assert {tuple(o.energy_schedule[:2]) for o in opts} == {(1, 0), (0, 1)}


def test_multi_level_schedules():
    scenario, users = ev.build_preset("s1")
    import dataclasses

    loc = dataclasses.replace(scenario.locations[0], max_charge_rate=2.0)
    sc = dataclasses.replace(scenario, locations=(loc,), energy_levels=(0, 1, 2))
    user = ev.UserType(
        user_id=1,
        submission_time=1,
        arrival=1,
        departure=3,
        energy_demand=4.0,
        preferred_locations=(1,),
        valuations=(2.0,),
    )
    opts = ev.generate_options(user, sc)
    schedules = {tuple(o.energy_schedule[:3]) for o in opts}
    assert schedules == {(0, 2, 2), (1, 1, 2), (1, 2, 1), (2, 0, 2), (2, 1, 1), (2, 2, 0)}
