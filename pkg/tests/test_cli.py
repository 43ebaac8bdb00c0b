import json

import pytest

from evauction.cli import main


def _gen(tmp_path, preset="s1", seed=0, extra=()):
    out = tmp_path / f"{preset}-{seed}"
    code = main(
        ["gen-scenario", "--preset", preset, "--seed", str(seed), "--out", str(out), *extra]
    )
    assert code == 0
    return out / "scenario.json", out / "users.txt"


def test_gen_scenario_and_simulate_s1(tmp_path, capsys):
    scenario, users = _gen(tmp_path)
    out = tmp_path / "run"
    code = main(
        ["simulate", "--scenario", str(scenario), "--users", str(users), "--out", str(out)]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["welfare"] == pytest.approx(2.0)
    assert summary["revenue"] == pytest.approx(0.35)
    assert summary["operational_cost"] == 0.0
    assert summary["user_surplus"] == pytest.approx(1.65)
    assert summary["accepted"] == 1
    ledger = (out / "ledger.csv").read_text().splitlines()
    assert len(ledger) == 2 and ledger[1].startswith("1,accepted,1,0,1,2,1-0,2.0,")
    assert (out / "locations.csv").exists()


def test_simulate_missing_users_file(tmp_path, capsys):
    scenario, _ = _gen(tmp_path)
    code = main(
        [
            "simulate",
            "--scenario", str(scenario),
            "--users", str(tmp_path / "nope.txt"),
            "--out", str(tmp_path / "x"),
        ]
    )
    assert code == 2


def test_simulate_rejects_invalid_scenario(tmp_path):
    scenario, users = _gen(tmp_path)
    bad = json.loads(scenario.read_text())
    bad["locations"][0]["cables_per_evse"] = 0
    scenario.write_text(json.dumps(bad))
    code = main(
        ["simulate", "--scenario", str(scenario), "--users", str(users), "--out", str(tmp_path / "y")]
    )
    assert code == 2


def test_gen_scenario_unknown_preset(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["gen-scenario", "--preset", "uptown", "--out", str(tmp_path)])
    assert err.value.code == 2


def test_gen_scenario_override_reflected(tmp_path):
    scenario, _ = _gen(tmp_path, extra=("--set", "location.1.evse_count=10"))
    data = json.loads(scenario.read_text())
    assert data["locations"][0]["evse_count"] == 10


def test_compare_s1(tmp_path, capsys):
    scenario, users = _gen(tmp_path)
    out = tmp_path / "cmp"
    code = main(
        ["compare", "--scenario", str(scenario), "--users", str(users), "--out", str(out)]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["offline_kind"] == "exact"
    assert summary["online_welfare"] == pytest.approx(2.0)
    assert summary["baseline_welfare"] == pytest.approx(2.0)
    assert summary["offline_welfare"] == pytest.approx(2.0)
    assert summary["empirical_ratio"] == pytest.approx(1.0)
    table = (out / "welfare_by_location.csv").read_text().splitlines()
    assert table[0] == "location_id,online_welfare,baseline_welfare,upper_bound"
    assert len(table) == 2


def test_compare_budget_exceeded(tmp_path):
    scenario, users = _gen(tmp_path)
    code = main(
        [
            "compare",
            "--scenario", str(scenario),
            "--users", str(users),
            "--out", str(tmp_path / "cmp2"),
            "--offline", "exact",
            "--budget", "1",
        ]
    )
    assert code == 3


def test_validate_dapr_s1(tmp_path, capsys):
    scenario, _ = _gen(tmp_path)
    out = tmp_path / "dapr"
    code = main(["validate-dapr", "--scenario", str(scenario), "--out", str(out)])
    assert code == 0
    assert "DAPR holds" in capsys.readouterr().out
    rows = (out / "dapr.csv").read_text().splitlines()
    assert rows[0] == "curve,y,price,slack"
    assert len(rows) > 1000


def test_validate_dapr_detects_stress_violation(tmp_path, capsys):
    scenario, _ = _gen(tmp_path)
    out = tmp_path / "dapr2"
    code = main(
        [
            "validate-dapr",
            "--scenario", str(scenario),
            "--out", str(out),
            "--alpha-scale", "0.125",
        ]
    )
    assert code == 0
    assert "DAPR violated" in capsys.readouterr().out


def test_simulate_byte_identical_reruns(tmp_path):
    scenario, users = _gen(tmp_path, preset="downtown9", seed=3, extra=("--set", "users.count=120"))
    a = tmp_path / "runA"
    b = tmp_path / "runB"
    for out in (a, b):
        code = main(
            [
                "simulate",
                "--scenario", str(scenario),
                "--users", str(users),
                "--seed", "5",
                "--out", str(out),
            ]
        )
        assert code == 0
    assert (a / "ledger.csv").read_bytes() == (b / "ledger.csv").read_bytes()
    assert (a / "locations.csv").read_bytes() == (b / "locations.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
