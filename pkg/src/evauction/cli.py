"""Experiment runner.

Subcommands: ``simulate`` (one online run), ``compare`` (online vs
no-mechanism baseline vs offline reference), ``validate-dapr`` (numeric
check of the pricing inequality), ``gen-scenario`` (materialize a preset).
Exit codes: 0 success, 2 validation error, 3 oracle budget exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

from . import oracle, pricing
from .engine import AuctionOutcome, run_auction
from .model import Scenario, ScenarioValidationError, validate_scenario
from .oracle import OracleBudgetExceeded
from .scenario_io import (
    PRESET_NAMES,
    ScenarioFormatError,
    build_preset,
    load_scenario,
    load_users,
    save_scenario,
    save_users,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(x) -> str:
    """Exact, deterministic float text (round-trips via float())."""
    return repr(float(x))


def write_ledger_csv(outcome: AuctionOutcome, path) -> None:
    lines = [
        "user_id,decision,location_id,evse_index,window_start,window_end,schedule,"
        "valuation,utility,payment,cable_paid,energy_paid,generation_paid"
    ]
    for r in outcome.ledger:
        if r.accepted:
            lo, hi = r.option.support
            lines.append(
                f"{r.user_id},accepted,{r.location_id},{r.evse_index},{lo},{hi},"
                f"{r.option.schedule_text()},{_fmt(r.valuation)},{_fmt(r.utility)},"
                f"{_fmt(r.payment)},{_fmt(r.cable_paid)},{_fmt(r.energy_paid)},"
                f"{_fmt(r.generation_paid)}"
            )
        else:
            zero = _fmt(0.0)
            lines.append(f"{r.user_id},rejected,,,,,,{zero},{zero},{zero},{zero},{zero},{zero}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_locations_csv(outcome: AuctionOutcome, path) -> None:
    lines = [
        "location_id,evse_count,cables_per_evse,evs_served,valuation_sum,revenue,"
        "energy_delivered,welfare,peak_cable_price,peak_generation_price"
    ]
    for s in outcome.per_location:
        lines.append(
            f"{s.location_id},{s.evse_count},{s.cables_per_evse},{s.evs_served},"
            f"{_fmt(s.valuation_sum)},{_fmt(s.revenue)},{_fmt(s.energy_delivered)},"
            f"{_fmt(s.welfare)},{_fmt(s.peak_cable_price)},{_fmt(s.peak_generation_price)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _bounds_dict(scenario: Scenario) -> dict:
    b = scenario.bounds
    return {
        "cable_low": b.cable_low,
        "cable_high": b.cable_high,
        "energy_low": b.energy_low,
        "energy_high": b.energy_high,
        "generation_low": b.generation_low,
        "generation_high": b.generation_high,
    }


def _alphas(scenario: Scenario) -> tuple:
    try:
        return (
            pricing.alpha_1(scenario, scenario.bounds),
            pricing.alpha_2(scenario, scenario.bounds),
        )
    except pricing.ConfigurationError:
        return (None, None)


def _summary(scenario_path, users_path, scenario, outcome: AuctionOutcome) -> dict:
    a1, a2 = _alphas(scenario)
    return {
        "scenario_digest": _digest(scenario_path),
        "users_digest": _digest(users_path),
        "mode": outcome.mode,
        "policy": outcome.policy,
        "seed": outcome.seed,
        "bounds": _bounds_dict(scenario),
        "alpha_1": a1,
        "alpha_2": a2,
        "welfare": outcome.welfare,
        "revenue": outcome.revenue,
        "operational_cost": outcome.operational_cost,
        "user_surplus": outcome.user_surplus,
        "accepted": outcome.accepted_count,
        "rejected": len(outcome.ledger) - outcome.accepted_count,
    }


def _write_json(data: dict, path) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_and_validate(args):
    scenario = load_scenario(args.scenario)
    users = load_users(args.users)
    violations = validate_scenario(scenario, users)
    if violations:
        for v in violations:
            print(f"validation: {v}", file=sys.stderr)
        raise ScenarioValidationError(violations)
    return scenario, users


def cmd_simulate(args) -> int:
    scenario, users = _load_and_validate(args)
    outcome = run_auction(
        scenario,
        users,
        scenario.bounds,
        mode=args.mode,
        option_policy=args.policy,
        max_options_per_location=args.max_options,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ledger_csv(outcome, out / "ledger.csv")
    write_locations_csv(outcome, out / "locations.csv")
    _write_json(_summary(args.scenario, args.users, scenario, outcome), out / "summary.json")
    print(
        f"simulate: {outcome.accepted_count}/{len(outcome.ledger)} accepted, "
        f"welfare={outcome.welfare:.6g} revenue={outcome.revenue:.6g} "
        f"cost={outcome.operational_cost:.6g} -> {out}"
    )
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario, users = _load_and_validate(args)
    opts = oracle.exhaustive_options(scenario, users)
    budget_needed = oracle.search_budget(scenario, users, opts)
    use_exact = budget_needed <= args.budget
    if args.offline == "exact" and not use_exact:
        print(
            f"offline search needs {budget_needed} leaves > budget {args.budget}",
            file=sys.stderr,
        )
        return EXIT_BUDGET
    if args.offline == "bound":
        use_exact = False

    if use_exact:
        online = run_auction(
            scenario, users, scenario.bounds, mode=args.mode, seed=args.seed, options_by_user=opts
        )
        baseline = oracle.no_mechanism_baseline(scenario, users, seed=args.seed, options_by_user=opts)
        offline_welfare = oracle.solve_offline_exact(
            scenario, users, opts, budget=args.budget, prune=not args.no_prune
        ).welfare
        offline_kind = "exact"
    else:
        online = run_auction(
            scenario,
            users,
            scenario.bounds,
            mode=args.mode,
            option_policy=args.policy,
            max_options_per_location=args.max_options,
            seed=args.seed,
        )
        baseline = oracle.no_mechanism_baseline(
            scenario,
            users,
            seed=args.seed,
            option_policy=args.policy,
            max_options_per_location=args.max_options,
        )
        offline_welfare = oracle.offline_upper_bound(scenario, users)
        offline_kind = "upper_bound"

    bound_by_loc = oracle.upper_bound_by_location(scenario, users)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["location_id,online_welfare,baseline_welfare,upper_bound"]
    base_by_loc = {s.location_id: s for s in baseline.per_location}
    for s in online.per_location:
        lines.append(
            f"{s.location_id},{_fmt(s.welfare)},{_fmt(base_by_loc[s.location_id].welfare)},"
            f"{_fmt(bound_by_loc[s.location_id])}"
        )
    (out / "welfare_by_location.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_ledger_csv(online, out / "ledger.csv")
    a1, a2 = _alphas(scenario)
    summary = {
        "scenario_digest": _digest(args.scenario),
        "users_digest": _digest(args.users),
        "mode": args.mode,
        "seed": args.seed,
        "alpha_1": a1,
        "alpha_2": a2,
        "online_welfare": online.welfare,
        "online_revenue": online.revenue,
        "baseline_welfare": baseline.welfare,
        "offline_welfare": offline_welfare,
        "offline_kind": offline_kind,
        "empirical_ratio": (
            1.0
            if offline_welfare <= 0
            else (math.inf if online.welfare == 0 else offline_welfare / online.welfare)
        ),
    }
    _write_json(summary, out / "summary.json")
    print(
        f"compare: online={online.welfare:.6g} baseline={baseline.welfare:.6g} "
        f"offline[{offline_kind}]={offline_welfare:.6g} -> {out}"
    )
    return EXIT_OK


def cmd_validate_dapr(args) -> int:
    scenario = load_scenario(args.scenario)
    violations = validate_scenario(scenario)
    if violations:
        for v in violations:
            print(f"validation: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    bounds = scenario.bounds
    curves = []  # (label, inputs, alpha)
    for lid in scenario.location_ids:
        curves.append(
            (f"cable[{lid}]", pricing.cable_dapr_inputs(scenario, lid, bounds),
             pricing.cable_alpha(scenario, bounds))
        )
        curves.append(
            (f"energy[{lid}]", pricing.energy_dapr_inputs(scenario, lid, bounds),
             pricing.energy_alpha(scenario, bounds))
        )
    gen_alpha = pricing.alpha_1(scenario, bounds) if args.mode == "exact" else pricing.alpha_2(scenario, bounds)
    for pid in sorted({loc.pool_id for loc in scenario.locations}):
        pool = scenario.pool(pid)
        for t in range(1, scenario.slot_count + 1):
            curves.append(
                (
                    f"generation[{pid}]@t{t}",
                    pricing.generation_dapr_inputs(scenario, pool, t, bounds, mode=args.mode),
                    gen_alpha,
                )
            )

    rows = ["curve,y,price,slack"]
    worst = (math.inf, "")
    failures = 0
    for label, (price_fn, cost_d, conj_d, cap), alpha in curves:
        if args.alpha is not None:
            alpha = args.alpha
        alpha *= args.alpha_scale
        report = pricing.verify_dapr(price_fn, cost_d, conj_d, cap, alpha, args.grid_points)
        if not report.holds:
            failures += 1
        if report.min_slack < worst[0]:
            worst = (report.min_slack, label)
        for y, p, slack in report.rows:
            rows.append(f"{label},{_fmt(y)},{_fmt(p)},{_fmt(slack)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dapr.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    if failures:
        print(f"DAPR violated on {failures}/{len(curves)} curves (worst slack {worst[0]:.3g} at {worst[1]})")
    else:
        print(f"DAPR holds across {len(curves)} curves (min slack {worst[0]:.3g} at {worst[1]})")
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    scenario, users = build_preset(
        args.preset,
        seed=args.seed,
        overrides=args.set or (),
        band_fraction=args.band_fraction,
        price_trace=args.price_trace,
        solar_trace=args.solar_trace,
    )
    violations = validate_scenario(scenario, users)
    if violations:
        for v in violations:
            print(f"validation: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scenario(scenario, out / "scenario.json")
    save_users(users, out / "users.txt")
    print(f"gen-scenario: {args.preset} ({len(users)} users) -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evauction", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, users=True):
        p.add_argument("--scenario", required=True, help="scenario JSON path")
        if users:
            p.add_argument("--users", required=True, help="user records path")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=("exact", "conservative"), default="exact")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="run the online mechanism")
    common(p)
    p.add_argument("--policy", default="exhaustive", help="exhaustive or heuristic-K")
    p.add_argument("--max-options", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="online vs baseline vs offline reference")
    common(p)
    p.add_argument("--policy", default="exhaustive")
    p.add_argument("--max-options", type=int, default=None)
    p.add_argument("--budget", type=int, default=10_000_000, help="offline search leaf budget")
    p.add_argument("--offline", choices=("auto", "exact", "bound"), default="auto")
    p.add_argument("--no-prune", action="store_true", help="disable search pruning (debugging)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate-dapr", help="numeric allocation-payment check")
    p.add_argument("--scenario", required=True)
    p.add_argument("--mode", choices=("exact", "conservative"), default="exact")
    p.add_argument("--grid-points", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=None, help="override every curve's ratio")
    p.add_argument("--alpha-scale", type=float, default=1.0, help="stress factor on each ratio")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_validate_dapr)

    p = sub.add_parser("gen-scenario", help="materialize a named preset")
    p.add_argument("--preset", required=True, choices=PRESET_NAMES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--band-fraction", type=float, default=0.25)
    p.add_argument("--price-trace", default=None, help="CSV replacing the pools' grid price")
    p.add_argument("--solar-trace", default=None, help="CSV replacing the pools' solar series")
    p.set_defaults(func=cmd_gen_scenario)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioFormatError, ScenarioValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OracleBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
