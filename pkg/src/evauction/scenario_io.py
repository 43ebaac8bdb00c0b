"""Scenario assembly: file formats, trace ingestion, and populations.

File formats (documented in the README):

* scenario: one JSON document with ``time_grid``, ``pools``, ``locations``,
  ``bounds``, ``energy_levels``
* users: newline-delimited records,
  ``id,submission,arrival,departure,demand,loc:val;loc:val[,schedules=1-0|0-1]``
* traces: CSV with a header row and (timestamp, value) columns; solar may
  carry explicit (lower, upper) band columns
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .model import (
    GenerationPool,
    Location,
    Scenario,
    TimeGrid,
    UserType,
    ValueBounds,
)

__all__ = [
    "PRESET_NAMES",
    "ScenarioFormatError",
    "UserPopulationSpec",
    "build_preset",
    "generate_users",
    "load_price_trace",
    "load_scenario",
    "load_solar_trace",
    "load_users",
    "save_scenario",
    "save_users",
    "scenario_from_dict",
    "scenario_to_dict",
]


class ScenarioFormatError(ValueError):
    """A scenario, user, or trace file does not parse."""


# ---------------------------------------------------------------------------
# scenario JSON

def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "time_grid": {
            "slot_count": scenario.time_grid.slot_count,
            "slot_duration_minutes": scenario.time_grid.slot_duration_minutes,
        },
        "pools": [
            {
                "pool_id": p.pool_id,
                "solar_actual": [float(v) for v in p.solar_actual],
                "solar_lower": [float(v) for v in p.solar_lower],
                "solar_upper": [float(v) for v in p.solar_upper],
                "grid_limit": [float(v) for v in p.grid_limit],
                "grid_price": [float(v) for v in p.grid_price],
            }
            for p in scenario.pools
        ],
        "locations": [
            {
                "location_id": l.location_id,
                "evse_count": l.evse_count,
                "cables_per_evse": l.cables_per_evse,
                "max_charge_rate": l.max_charge_rate,
                "pool_id": l.pool_id,
            }
            for l in scenario.locations
        ],
        "bounds": {
            "cable_low": scenario.bounds.cable_low,
            "cable_high": scenario.bounds.cable_high,
            "energy_low": scenario.bounds.energy_low,
            "energy_high": scenario.bounds.energy_high,
            "generation_low": scenario.bounds.generation_low,
            "generation_high": scenario.bounds.generation_high,
        },
        "energy_levels": list(scenario.energy_levels),
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        grid = TimeGrid(
            slot_count=int(data["time_grid"]["slot_count"]),
            slot_duration_minutes=int(data["time_grid"].get("slot_duration_minutes", 60)),
        )
        pools = tuple(
            GenerationPool(
                pool_id=int(p["pool_id"]),
                solar_actual=p["solar_actual"],
                solar_lower=p["solar_lower"],
                solar_upper=p["solar_upper"],
                grid_limit=p["grid_limit"],
                grid_price=p["grid_price"],
            )
            for p in data["pools"]
        )
        locations = tuple(
            Location(
                location_id=int(l["location_id"]),
                evse_count=int(l["evse_count"]),
                cables_per_evse=int(l["cables_per_evse"]),
                max_charge_rate=float(l["max_charge_rate"]),
                pool_id=int(l["pool_id"]),
            )
            for l in data["locations"]
        )
        b = data["bounds"]
        bounds = ValueBounds(
            cable_low=float(b["cable_low"]),
            cable_high=float(b["cable_high"]),
            energy_low=float(b["energy_low"]),
            energy_high=float(b["energy_high"]),
            generation_low=float(b["generation_low"]),
            generation_high=float(b["generation_high"]),
        )
        levels = tuple(int(v) for v in data.get("energy_levels", (0, 1)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"bad scenario document: {exc}") from exc
    return Scenario(time_grid=grid, pools=pools, locations=locations, bounds=bounds, energy_levels=levels)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(f"{path}: {exc}") from exc
    return scenario_from_dict(data)


# ---------------------------------------------------------------------------
# user records

def _user_to_line(user: UserType) -> str:
    pairs = ";".join(
        f"{lid}:{val!r}" for lid, val in zip(user.preferred_locations, user.valuations)
    )
    line = (
        f"{user.user_id},{user.submission_time},{user.arrival},{user.departure},"
        f"{user.energy_demand!r},{pairs}"
    )
    if user.explicit_schedules is not None:
        scheds = "|".join("-".join(str(e) for e in s) for s in user.explicit_schedules)
        line += f",schedules={scheds}"
    return line


def _user_from_line(line: str, lineno: int) -> UserType:
    parts = line.split(",")
    if len(parts) not in (6, 7):
        raise ScenarioFormatError(f"line {lineno}: expected 6 or 7 fields, got {len(parts)}")
    try:
        uid, sub, arr, dep = (int(x) for x in parts[:4])
        demand = float(parts[4])
        prefs, vals = [], []
        for chunk in parts[5].split(";"):
            lid, val = chunk.split(":")
            prefs.append(int(lid))
            vals.append(float(val))
        schedules = None
        if len(parts) == 7:
            key, _, body = parts[6].partition("=")
            if key != "schedules":
                raise ValueError(f"unknown field {key!r}")
            schedules = tuple(
                tuple(int(e) for e in s.split("-")) for s in body.split("|") if s
            )
    except (ValueError, IndexError) as exc:
        raise ScenarioFormatError(f"line {lineno}: {exc}") from exc
    return UserType(
        user_id=uid,
        submission_time=sub,
        arrival=arr,
        departure=dep,
        energy_demand=demand,
        preferred_locations=tuple(prefs),
        valuations=tuple(vals),
        explicit_schedules=schedules,
    )


def save_users(users: Sequence[UserType], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# id,submission,arrival,departure,demand,loc:val;...[,schedules=...]\n")
        for user in users:
            fh.write(_user_to_line(user) + "\n")


def load_users(path) -> list[UserType]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            out.append(_user_from_line(line, lineno))
    return out


# ---------------------------------------------------------------------------
# traces

def _read_trace(path, want_band: bool):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ScenarioFormatError(f"{path}: empty trace")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                value = float(row[1])
                band = None
                if want_band and len(row) >= 4:
                    band = (float(row[2]), float(row[3]))
                rows.append((value, band))
            except (ValueError, IndexError) as exc:
                raise ScenarioFormatError(f"{path}: line {lineno}: {exc}") from exc
    return rows


def _resample(values: Sequence[float], slot_count: int, how: str) -> np.ndarray:
    n = len(values)
    if n == slot_count:
        return np.asarray(values, dtype=float)
    if n > slot_count and n % slot_count == 0:
        arr = np.asarray(values, dtype=float).reshape(slot_count, n // slot_count)
        return arr.mean(axis=1) if how == "mean" else arr.sum(axis=1)
    raise ScenarioFormatError(f"cannot resample {n} rows onto {slot_count} slots")


def load_price_trace(path, slot_count: int) -> np.ndarray:
    """Grid price series resampled onto the slot grid by block mean
    (prices are $/kWh, an intensive quantity)."""
    values = [v for v, _ in _read_trace(path, want_band=False)]
    if any(v < 0 for v in values):
        raise ScenarioFormatError(f"{path}: negative prices are not modeled")
    return _resample(values, slot_count, "mean")


def load_solar_trace(path, band_fraction: float, slot_count: int):
    """Solar series (kWh per slot, resampled by block sum) plus a forecast
    band: explicit (lower, upper) columns win; otherwise a symmetric
    ``band_fraction`` scaling of the actual series."""
    if not 0 <= band_fraction < 1:
        raise ValueError("band_fraction must be in [0, 1)")
    rows = _read_trace(path, want_band=True)
    values = [v for v, _ in rows]
    if any(v < 0 for v in values):
        raise ScenarioFormatError(f"{path}: negative generation")
    actual = _resample(values, slot_count, "sum")
    bands = [b for _, b in rows]
    if all(b is not None for b in bands) and bands:
        lower = _resample([b[0] for b in bands], slot_count, "sum")
        upper = _resample([b[1] for b in bands], slot_count, "sum")
    else:
        lower = (1.0 - band_fraction) * actual
        upper = (1.0 + band_fraction) * actual
    if np.any(lower < 0) or np.any(lower > actual) or np.any(actual > upper):
        raise ScenarioFormatError(f"{path}: inconsistent forecast band")
    return actual, lower, upper


# ---------------------------------------------------------------------------
# synthetic populations

@dataclass(frozen=True)
class UserPopulationSpec:
    """Seeded description of a synthetic arrival population.

    ``arrival_weights`` is one weight per slot for the visit start;
    ``duration_weights`` and ``demand_weights`` map slot-lengths and kWh
    to weights. Per-location valuations are drawn per kWh so each total
    lands in ``value_range``, then sorted descending onto the preference
    order. ``location_weights`` biases which locations users prefer.
    """

    count: int
    arrival_weights: tuple[float, ...]
    duration_weights: Mapping[int, float]
    demand_weights: Mapping[int, float]
    value_range: tuple[float, float] = (1.5, 7.5)
    preferred_count: int = 3
    location_weights: Optional[Mapping[int, float]] = None
    submission_lead_max: int = 3
    seed: int = 0


def generate_users(spec: UserPopulationSpec, scenario: Scenario) -> list[UserType]:
    """Draw ``spec.count`` users; deterministic under ``spec.seed``."""
    T = scenario.slot_count
    durations = sorted(d for d, w in spec.duration_weights.items() if w > 0)
    if not durations:
        raise ValueError("duration_weights has no support")
    if durations[0] < 2:
        raise ValueError("visits must span at least 2 slots")
    if durations[-1] > T:
        raise ValueError(f"duration {durations[-1]} exceeds the {T}-slot horizon")
    d_weights = np.array([spec.duration_weights[d] for d in durations], dtype=float)
    d_weights /= d_weights.sum()
    demands = sorted(h for h, w in spec.demand_weights.items() if w > 0)
    if not demands or demands[0] < 1:
        raise ValueError("demand_weights needs positive kWh support")
    h_weights = np.array([spec.demand_weights[h] for h in demands], dtype=float)
    h_weights /= h_weights.sum()
    arrival = np.asarray(spec.arrival_weights, dtype=float)
    if arrival.shape != (T,) or np.any(arrival < 0):
        raise ValueError(f"arrival_weights must be {T} non-negative weights")

    ids = list(scenario.location_ids)
    k = min(spec.preferred_count, len(ids))
    if spec.location_weights is None:
        loc_w = np.ones(len(ids))
    else:
        loc_w = np.array([spec.location_weights.get(lid, 0.0) for lid in ids], dtype=float)
    if loc_w.sum() <= 0:
        raise ValueError("location_weights has no support")
    loc_w = loc_w / loc_w.sum()
    max_level = max(scenario.energy_levels)
    lo_total, hi_total = spec.value_range

    rng = np.random.default_rng(spec.seed)
    users = []
    for i in range(spec.count):
        d = int(rng.choice(durations, p=d_weights))
        window_w = arrival[: T - d + 1]
        if window_w.sum() <= 0:
            raise ValueError(f"no feasible arrival slot for duration {d}")
        start = int(rng.choice(len(window_w), p=window_w / window_w.sum())) + 1
        depart = start + d - 1
        prefs = [int(x) for x in rng.choice(ids, size=k, replace=False, p=loc_w)]
        rate_cap = max(scenario.location(lid).max_charge_rate for lid in prefs)
        h = int(rng.choice(demands, p=h_weights))
        h = max(1, min(h, d * max_level, int(d * rate_cap)))
        per_kwh = rng.uniform(lo_total / h, hi_total / h, size=k)
        vals = sorted((float(r * h) for r in per_kwh), reverse=True)
        lead = int(rng.integers(0, spec.submission_lead_max + 1))
        users.append(
            UserType(
                user_id=i + 1,
                submission_time=max(1, start - lead),
                arrival=start,
                departure=depart,
                energy_demand=float(h),
                preferred_locations=tuple(prefs),
                valuations=tuple(vals),
            )
        )
    return users


# ---------------------------------------------------------------------------
# presets

PRESET_NAMES = ("s1", "downtown9")

_DOWNTOWN_EVSES = (4, 4, 8, 8, 2, 8, 2, 4, 2)
_DOWNTOWN_PRICES = (
    0.030, 0.028, 0.027, 0.027, 0.028, 0.032, 0.040, 0.055, 0.060, 0.055, 0.050, 0.048,
    0.046, 0.048, 0.055, 0.075, 0.120, 0.200, 0.250, 0.180, 0.110, 0.070, 0.050, 0.038,
)


def _s1_scenario_dict() -> dict:
    return {
        "time_grid": {"slot_count": 4, "slot_duration_minutes": 60},
        "pools": [
            {
                "pool_id": 1,
                "solar_actual": [1.0, 1.0, 1.0, 1.0],
                "solar_lower": [0.5, 0.5, 0.5, 0.5],
                "solar_upper": [1.0, 1.0, 1.0, 1.0],
                "grid_limit": [2.0, 2.0, 2.0, 2.0],
                "grid_price": [0.2, 0.2, 0.2, 0.2],
            }
        ],
        "locations": [
            {
                "location_id": 1,
                "evse_count": 1,
                "cables_per_evse": 2,
                "max_charge_rate": 1.0,
                "pool_id": 1,
            }
        ],
        "bounds": {
            "cable_low": 0.05,
            "cable_high": 3.0,
            "energy_low": 0.5,
            "energy_high": 3.0,
            "generation_low": 0.5,
            "generation_high": 3.0,
        },
        "energy_levels": [0, 1],
    }


def _downtown9_scenario_dict(band_fraction: float) -> dict:
    T = 24
    solar = [512.0 * math.exp(-((t - 13.0) ** 2) / 18.0) if 7 <= t <= 19 else 0.0 for t in range(1, T + 1)]
    return {
        "time_grid": {"slot_count": T, "slot_duration_minutes": 60},
        "pools": [
            {
                "pool_id": 1,
                "solar_actual": solar,
                "solar_lower": [(1.0 - band_fraction) * s for s in solar],
                "solar_upper": [(1.0 + band_fraction) * s for s in solar],
                "grid_limit": [512.0] * T,
                "grid_price": list(_DOWNTOWN_PRICES),
            }
        ],
        "locations": [
            {
                "location_id": i + 1,
                "evse_count": m,
                "cables_per_evse": 4,
                "max_charge_rate": 1.0,
                "pool_id": 1,
            }
            for i, m in enumerate(_DOWNTOWN_EVSES)
        ],
        "bounds": {
            "cable_low": 0.002,
            "cable_high": 7.5,
            "energy_low": 0.3,
            "energy_high": 7.5,
            "generation_low": 0.3,
            "generation_high": 7.5,
        },
        "energy_levels": [0, 1],
    }


def downtown9_population(seed: int, count: int = 1000) -> UserPopulationSpec:
    """Two-peak (morning/midday) arrivals over the downtown preset, with
    the large sites also the most desired."""
    arrival = tuple(
        0.05
        + 1.0 * math.exp(-((t - 8.5) ** 2) / 2.88)
        + 0.8 * math.exp(-((t - 13.0) ** 2) / 4.5)
        if t <= 16
        else 0.0
        for t in range(1, 25)
    )
    return UserPopulationSpec(
        count=count,
        arrival_weights=arrival,
        duration_weights={4: 2.0, 5: 3.0, 6: 3.0, 7: 2.0, 8: 1.0},
        demand_weights={1: 3.0, 2: 3.0, 3: 2.5, 4: 2.0, 5: 1.0, 6: 0.5},
        location_weights={1: 0.5, 2: 0.5, 3: 2.5, 4: 2.5, 5: 0.3, 6: 2.5, 7: 0.3, 8: 0.5, 9: 0.3},
        preferred_count=3,
        submission_lead_max=3,
        seed=seed,
    )


def _apply_override(data: dict, key: str, raw: str) -> None:
    parts = key.split(".")
    try:
        if parts[0] == "bounds" and len(parts) == 2:
            if parts[1] not in data["bounds"]:
                raise KeyError(parts[1])
            data["bounds"][parts[1]] = float(raw)
            return
        if parts[0] == "location" and len(parts) == 3:
            lid = int(parts[1])
            for loc in data["locations"]:
                if loc["location_id"] == lid:
                    if parts[2] not in loc:
                        raise KeyError(parts[2])
                    cast = float if parts[2] == "max_charge_rate" else int
                    loc[parts[2]] = cast(raw)
                    return
            raise KeyError(f"location {lid}")
        if parts[0] == "pool" and len(parts) == 3 and parts[2] in ("grid_limit", "grid_price"):
            pid = int(parts[1])
            for pool in data["pools"]:
                if pool["pool_id"] == pid:
                    pool[parts[2]] = [float(raw)] * len(pool[parts[2]])
                    return
            raise KeyError(f"pool {pid}")
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad override {key}={raw}: {exc}") from exc
    raise ValueError(f"unsupported override key {key!r}")


def build_preset(
    name: str,
    seed: int = 0,
    overrides: Sequence[str] = (),
    band_fraction: float = 0.25,
    user_count: Optional[int] = None,
    price_trace: Optional[str] = None,
    solar_trace: Optional[str] = None,
) -> tuple[Scenario, list[UserType]]:
    """Materialize a named preset into a scenario and its user population.

    ``overrides`` are ``key=value`` strings (``location.<id>.<field>``,
    ``pool.<id>.grid_limit|grid_price``, ``bounds.<field>``,
    ``users.count``). ``price_trace``/``solar_trace`` replace every pool's
    grid-price or solar series with data loaded from file.
    """
    if name == "s1":
        data = _s1_scenario_dict()
    elif name == "downtown9":
        data = _downtown9_scenario_dict(band_fraction)
    else:
        raise ValueError(f"unknown preset {name!r}")

    count_override = user_count
    for item in overrides:
        key, _, raw = item.partition("=")
        if not raw:
            raise ValueError(f"override {item!r} is not key=value")
        if key == "users.count":
            count_override = int(raw)
        else:
            _apply_override(data, key, raw)
    slot_count = int(data["time_grid"]["slot_count"])
    if price_trace is not None:
        series = [float(v) for v in load_price_trace(price_trace, slot_count)]
        for pool in data["pools"]:
            pool["grid_price"] = series
    if solar_trace is not None:
        actual, lower, upper = load_solar_trace(solar_trace, band_fraction, slot_count)
        for pool in data["pools"]:
            pool["solar_actual"] = [float(v) for v in actual]
            pool["solar_lower"] = [float(v) for v in lower]
            pool["solar_upper"] = [float(v) for v in upper]
    scenario = scenario_from_dict(data)

    if name == "s1":
        users = [
            UserType(
                user_id=1,
                submission_time=1,
                arrival=1,
                departure=2,
                energy_demand=1.0,
                preferred_locations=(1,),
                valuations=(2.0,),
                explicit_schedules=((1, 0),),
            )
        ]
        if count_override is not None:
            users = users[:count_override]
    else:
        spec = downtown9_population(seed, count_override or 1000)
        users = generate_users(spec, scenario)
    return scenario, users
