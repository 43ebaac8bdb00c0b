"""Cost functions, their convex conjugates, and the posted price curves.

Every price here is a pure function of the current allocated quantity, so
"updating prices" after an admission is just re-evaluation at the new
demand. All curves share the same shape: an exponential ramp from a level
tied to the lowest user value (so an empty resource admits anyone) up to
the highest user value at full capacity (so a full resource rejects
everyone). Procurement additionally floors the curve at the grid price so
no admitted kWh is ever sold below its purchase cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .model import ChargeOption, GenerationPool, Scenario, UserType, ValueBounds

__all__ = [
    "ConfigurationError",
    "DaprReport",
    "alpha_1",
    "alpha_2",
    "cable_alpha",
    "cable_dapr_inputs",
    "cable_price",
    "compute_bounds",
    "conjugate_cable",
    "conjugate_energy",
    "conjugate_generation",
    "energy_alpha",
    "energy_dapr_inputs",
    "energy_price",
    "generation_capacity",
    "generation_cost",
    "generation_dapr_inputs",
    "generation_price",
    "price_scale",
    "verify_dapr",
]


class ConfigurationError(ValueError):
    """Pricing parameters violate a structural precondition."""


def price_scale(scenario: Scenario) -> float:
    """Aggregate station scale used by every price curve.

    Grows with the number of EVSEs in the system; it both lowers the
    admit-anyone base price and steepens the ramp toward capacity.
    """
    return 4.0 * sum(loc.evse_count + 0.5 for loc in scenario.locations)


def generation_cost(y: float, pool: GenerationPool, t: int) -> float:
    """Operational cost of supplying ``y`` kWh at slot ``t`` (1-based).

    Zero while demand fits within on-site solar, then the grid price per
    extra kWh up to the procurement limit, then ``math.inf``. The infinite
    branch is a sentinel: callers must keep demand inside the limit, and
    welfare accounting never sums it.
    """
    if y < 0:
        raise ValueError("demand must be >= 0")
    solar = float(pool.solar_actual[t - 1])
    limit = float(pool.grid_limit[t - 1])
    if y <= solar:
        return 0.0
    if y <= solar + limit:
        return float(pool.grid_price[t - 1]) * (y - solar)
    return math.inf


def conjugate_cable(price: float, cables_per_evse: int) -> float:
    """Convex conjugate of the (free, capacitated) cable resource cost."""
    if price < 0:
        raise ValueError("price must be >= 0")
    return price * cables_per_evse


def conjugate_energy(price: float, max_charge_rate: float) -> float:
    """Convex conjugate of the (free, capacitated) EVSE energy cost."""
    if price < 0:
        raise ValueError("price must be >= 0")
    return price * max_charge_rate


def conjugate_generation(price: float, pool: GenerationPool, t: int) -> float:
    """Convex conjugate of the piecewise-linear procurement cost."""
    solar = float(pool.solar_actual[t - 1])
    grid_price = float(pool.grid_price[t - 1])
    limit = float(pool.grid_limit[t - 1])
    if price < grid_price:
        return solar * price
    return (solar + limit) * price - limit * grid_price


def _exp_price(y: float, cap: float, low: float, high: float, k: float) -> float:
    return (low / k) * (k * high / low) ** (y / cap)


def cable_price(y: float, cables_per_evse: int, bounds: ValueBounds, k: float) -> float:
    """Marginal $ per cable-slot at cable demand ``y`` on one EVSE."""
    if not 0 <= y <= cables_per_evse:
        raise ValueError(f"cable demand {y} outside [0, {cables_per_evse}]")
    return _exp_price(y, cables_per_evse, bounds.cable_low, bounds.cable_high, k)


def energy_price(y: float, max_charge_rate: float, bounds: ValueBounds, k: float) -> float:
    """Marginal $ per kWh at EVSE energy demand ``y``."""
    if not 0 <= y <= max_charge_rate:
        raise ValueError(f"energy demand {y} outside [0, {max_charge_rate}]")
    return _exp_price(y, max_charge_rate, bounds.energy_low, bounds.energy_high, k)


def generation_capacity(pool: GenerationPool, t: int, mode: str = "exact") -> float:
    """Procurement ceiling at slot ``t``: solar (actual or forecast lower
    band, per mode) plus the grid limit."""
    if mode == "exact":
        solar = float(pool.solar_actual[t - 1])
    elif mode == "conservative":
        solar = float(pool.solar_lower[t - 1])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return solar + float(pool.grid_limit[t - 1])


def generation_price(
    y: float,
    pool: GenerationPool,
    t: int,
    bounds: ValueBounds,
    k: float,
    mode: str = "exact",
) -> float:
    """Marginal $ per kWh of pool procurement at demand ``y``, slot ``t``.

    The grid price is a hard floor, so every admitted kWh is paid for at no
    less than what it may cost to buy.
    """
    grid_price = float(pool.grid_price[t - 1])
    if bounds.generation_low <= grid_price:
        raise ConfigurationError(
            f"generation_low {bounds.generation_low} must exceed grid price {grid_price}"
        )
    cap = generation_capacity(pool, t, mode)
    if cap <= 0:
        raise ConfigurationError(f"no procurement capacity at slot {t}")
    if not 0 <= y <= cap:
        raise ValueError(f"procurement demand {y} outside [0, {cap}]")
    return grid_price + _exp_price(
        y, cap, bounds.generation_low - grid_price, bounds.generation_high - grid_price, k
    )


def compute_bounds(
    users: Sequence[UserType],
    options_by_user: Mapping[int, Sequence[ChargeOption]],
    scenario: Scenario,
) -> ValueBounds:
    """Derive value bounds from a realized population and its options.

    This is experiment tooling: the online engine takes bounds as given
    (it cannot see future users). Lower bounds divide each value by twice
    the station-scale sum times the option's total resource use; upper
    bounds are the largest value per unit actually requested.
    """
    if not users:
        raise ValueError("cannot compute bounds from an empty user list")
    half_scale = 2.0 * sum(loc.evse_count + 0.5 for loc in scenario.locations)
    cable_lows, cable_highs, energy_lows, energy_highs = [], [], [], []
    for user in users:
        for option in options_by_user.get(user.user_id, ()):
            value = user.valuation_at(option.location_id)
            cable_total = float(option.cable_profile.sum())
            if cable_total > 0:
                cable_lows.append(value / (half_scale * cable_total))
                cable_highs.append(
                    max(value / float(c) for c in option.cable_profile if c > 0)
                )
            energy_total = float(option.energy_schedule.sum())
            if energy_total > 0:
                energy_lows.append(value / (half_scale * energy_total))
                energy_highs.append(
                    max(value / float(e) for e in option.energy_schedule if e > 0)
                )
    if not cable_lows or not energy_lows:
        raise ValueError("no options with nonzero resource use")
    energy_low, energy_high = min(energy_lows), max(energy_highs)
    return ValueBounds(
        cable_low=min(cable_lows),
        cable_high=max(cable_highs),
        energy_low=energy_low,
        energy_high=energy_high,
        generation_low=energy_low,
        generation_high=energy_high,
    )


def _pools_in_use(scenario: Scenario) -> list[GenerationPool]:
    seen = []
    for pid in sorted({loc.pool_id for loc in scenario.locations}):
        seen.append(scenario.pool(pid))
    return seen


def alpha_1(scenario: Scenario, bounds: ValueBounds) -> float:
    """Worst-case welfare ratio guaranteed under accurate solar data."""
    k = price_scale(scenario)
    worst = 0.0
    for pool in _pools_in_use(scenario):
        for t in range(1, scenario.slot_count + 1):
            grid_price = float(pool.grid_price[t - 1])
            if bounds.generation_low <= grid_price:
                raise ConfigurationError(
                    f"generation_low must exceed grid price {grid_price} (pool {pool.pool_id}, slot {t})"
                )
            worst = max(
                worst,
                math.log(
                    k
                    * (bounds.generation_high - grid_price)
                    / (bounds.generation_low - grid_price)
                ),
            )
    return 2.0 * worst


def alpha_2(scenario: Scenario, bounds: ValueBounds) -> float:
    """Worst-case welfare ratio when pricing against the solar lower band."""
    k = price_scale(scenario)
    worst = 0.0
    for pool in _pools_in_use(scenario):
        if np.any(pool.solar_lower > pool.solar_upper):
            raise ConfigurationError(f"pool {pool.pool_id} has an inverted forecast band")
        for t in range(1, scenario.slot_count + 1):
            grid_price = float(pool.grid_price[t - 1])
            if bounds.generation_low <= grid_price:
                raise ConfigurationError(
                    f"generation_low must exceed grid price {grid_price} (pool {pool.pool_id}, slot {t})"
                )
            limit = float(pool.grid_limit[t - 1])
            low_cap = float(pool.solar_lower[t - 1]) + limit
            high_cap = float(pool.solar_upper[t - 1]) + limit
            if low_cap <= 0:
                raise ConfigurationError(
                    f"pool {pool.pool_id} has no conservative capacity at slot {t}"
                )
            worst = max(
                worst,
                (high_cap / low_cap)
                * math.log(
                    k
                    * (bounds.generation_high - grid_price)
                    / (bounds.generation_low - grid_price)
                ),
            )
    return 2.0 * worst


def cable_alpha(scenario: Scenario, bounds: ValueBounds) -> float:
    """Ratio constant matched to the cable curve's ramp."""
    k = price_scale(scenario)
    return 2.0 * math.log(k * bounds.cable_high / bounds.cable_low)


def energy_alpha(scenario: Scenario, bounds: ValueBounds) -> float:
    """Ratio constant matched to the EVSE energy curve's ramp."""
    k = price_scale(scenario)
    return 2.0 * math.log(k * bounds.energy_high / bounds.energy_low)


@dataclass(frozen=True)
class DaprReport:
    """Result of the numeric allocation-payment check.

    ``min_slack`` is the most negative slack found over the grid (positive
    when the inequality holds everywhere); ``rows`` holds one
    (demand, price, slack) triple per forward-difference interval.
    """

    holds: bool
    min_slack: float
    worst_y: float
    alpha: float
    rows: tuple[tuple[float, float, float], ...]


def verify_dapr(
    price_fn: Callable[[float], float],
    cost_derivative: Callable[[float], float],
    conjugate_derivative: Callable[[float], float],
    cap: float,
    alpha: float,
    grid_points: int = 1000,
    tolerance: float = -1e-9,
) -> DaprReport:
    """Numerically check the differential allocation-payment inequality.

    On a uniform demand grid over [0, cap], with forward differences for
    the price increment, require

        (price(y) - cost'(y)) * dy  >=  (1/alpha) * conj'(price(y)) * dp

    at every interval. The check passes when no slack drops below
    ``tolerance``.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    ys = np.linspace(0.0, cap, grid_points)
    prices = [price_fn(float(y)) for y in ys]
    dy = cap / (grid_points - 1)
    rows = []
    min_slack = math.inf
    worst_y = 0.0
    for i in range(grid_points - 1):
        y = float(ys[i])
        p = prices[i]
        dp = prices[i + 1] - p
        slack = (p - cost_derivative(y)) * dy - (conjugate_derivative(p) / alpha) * dp
        rows.append((y, p, slack))
        if slack < min_slack:
            min_slack = slack
            worst_y = y
    return DaprReport(
        holds=min_slack >= tolerance,
        min_slack=min_slack,
        worst_y=worst_y,
        alpha=alpha,
        rows=tuple(rows),
    )


def generation_dapr_inputs(
    scenario: Scenario,
    pool: GenerationPool,
    t: int,
    bounds: ValueBounds,
    mode: str = "exact",
):
    """Price curve, exact branch derivatives, and domain cap for one
    procurement curve. The cost side always uses actual solar, even when
    the curve prices against the conservative band."""
    k = price_scale(scenario)
    solar = float(pool.solar_actual[t - 1])
    grid_price = float(pool.grid_price[t - 1])
    limit = float(pool.grid_limit[t - 1])

    def price(y: float) -> float:
        return generation_price(y, pool, t, bounds, k, mode)

    def cost_derivative(y: float) -> float:
        return 0.0 if y <= solar else grid_price

    def conjugate_derivative(p: float) -> float:
        return solar if p < grid_price else solar + limit

    return price, cost_derivative, conjugate_derivative, generation_capacity(pool, t, mode)


def cable_dapr_inputs(scenario: Scenario, location_id: int, bounds: ValueBounds):
    """Curve and derivatives for one location's cable resource (free up to
    capacity, so the cost derivative is zero and the conjugate slope is the
    cable count)."""
    k = price_scale(scenario)
    cables = scenario.location(location_id).cables_per_evse

    def price(y: float) -> float:
        return cable_price(y, cables, bounds, k)

    return price, (lambda y: 0.0), (lambda p: float(cables)), float(cables)


def energy_dapr_inputs(scenario: Scenario, location_id: int, bounds: ValueBounds):
    """Curve and derivatives for one location's EVSE energy resource."""
    k = price_scale(scenario)
    rate = scenario.location(location_id).max_charge_rate

    def price(y: float) -> float:
        return energy_price(y, rate, bounds, k)

    return price, (lambda y: 0.0), (lambda p: float(rate)), float(rate)
