import hashlib
import json
import os
import subprocess

import pytest

import gdp_sim

SHORT = ["duration_ticks=150", "drain_ticks=30"]


def test_builtins_listed():
    names = gdp_sim.builtin_scenarios()
    assert "baseline" in names and "collusion_below_quorum" in names
    assert len(names) == 8


def test_quorum_rule():
    assert gdp_sim.default_quorum(5) == 4
    assert gdp_sim.aggregate_rule(5, 0, 5, 4) == "Witnessed"
    assert gdp_sim.aggregate_rule(3, 2, 5, 4) == "Disputed"
    assert gdp_sim.aggregate_rule(1, 4, 5, 4) == "Rejected"


def test_deterrence_margin():
    assert gdp_sim.deterrence_margin(1.0, 0.05, 50.0) == pytest.approx(-1.55)


def test_sha256_matches_hashlib():
    for data in [b"", b"abc", bytes(range(256)) * 3]:
        assert gdp_sim.sha256_hex(data) == hashlib.sha256(data).hexdigest()


def test_run_baseline_is_live_and_safe():
    r = gdp_sim.run("baseline", seed=4, overrides=SHORT)
    t = r["transactions"]
    assert t["submitted"] > 0
    assert t["committed"] == t["submitted"]
    assert t["false_commit_count"] == 0
    assert r["safety"]["no_false_commits"]


def test_same_seed_same_report():
    a = gdp_sim.run("equivocation", seed=9, overrides=SHORT)
    b = gdp_sim.run("equivocation", seed=9, overrides=SHORT)
    assert gdp_sim.diff_reports(a, b) == []
    c = gdp_sim.run("equivocation", seed=10, overrides=SHORT)
    assert "seed" in gdp_sim.diff_reports(a, c)


def test_scenario_round_trip():
    cfg = gdp_sim.scenario("forged_sync", seed=5)
    assert cfg["seed"] == 5
    assert gdp_sim.validate(cfg) == []
    cfg["panel"]["k"] = 0
    assert any("panel.k" in m for m in gdp_sim.validate(cfg))


def test_invalid_config_raises():
    with pytest.raises(gdp_sim.GdpError, match="inspection.rate_txn"):
        gdp_sim.run("baseline", overrides=["inspection.rate_txn=2"])


def test_world_steps_and_matches_run():
    w = gdp_sim.World("baseline", seed=2, overrides=SHORT)
    rows = w.step()
    assert w.tick == 1
    assert ("world.csv", "0,heartbeat,world,") in rows
    while not w.finished:
        w.step()
    v = gdp_sim.World("baseline", seed=2, overrides=SHORT)
    v.run()
    assert v.state_digest() == w.state_digest()
    assert json.loads(w.snapshot_json())["tick"] == 150


def test_cli_agrees_with_module(tmp_path):
    exe = os.environ.get("GDP_SIM_PATH")
    if not exe:
        pytest.skip("GDP_SIM_PATH not set")
    args = [exe, "run", "--config", "baseline", "--seed", "4", "--out", str(tmp_path)]
    for o in SHORT:
        args += ["--set", o]
    subprocess.run(args, check=True, capture_output=True)
    from_cli = json.loads((tmp_path / "report.json").read_text())
    assert gdp_sim.diff_reports(from_cli, gdp_sim.run("baseline", seed=4, overrides=SHORT)) == []
