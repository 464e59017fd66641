import copy
import csv
import json
import os

import numpy as np
import pytest

from jumprestore.finite import random_instance, two_state_fixture, load_instances, fixture_path
from jumprestore.harness import PRESETS, ConfigError, run, validate_config, verify_instances

FILES = ("estimate.json", "histogram.csv")


def small(preset, events=60_000, **over):
    cfg = copy.deepcopy(PRESETS[preset])
    cfg["budget"] = {"events": events}
    cfg.update(over)
    return cfg


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_defaults_are_filled():
    cfg = validate_config({"schema_version": 1, "target": {"name": "gaussian-mixture", "params": {
        "weights": [1.0], "means": [[0.5]], "sds": [[0.1]], "space": "torus"}},
        "sampler": "restore", "budget": {"tours": 10}})
    assert cfg["local"]["sigma"] == 0.01 and cfg["lambda"] == 0.3 and cfg["kappa0"] == 1.0
    assert cfg["space"]["kind"] == "torus" and cfg["workers"] >= 1


@pytest.mark.parametrize("mutate, msg", [
    (lambda c: c.update(budget={"events": 10, "tours": 3}), "budget"),
    (lambda c: c.update(budget={}), "budget"),
    (lambda c: c.update(schema_version=2), "schema_version"),
    (lambda c: c.update(**{"lambda": 1.5}), "lambda"),
    (lambda c: c.update(sampler="gibbs"), "sampler"),
    (lambda c: c.update(kappa0=1.0, c=2.0), "either kappa0 or c"),
    (lambda c: c.update(sampler="mh-mixture", budget={"tours": 5}), "events budget"),
    (lambda c: c["local"].update(sigma=-1.0), "local/sigma"),
    (lambda c: c.update(surprise=1), "surprise"),
])
def test_invalid_configs_are_rejected(mutate, msg):
    cfg = copy.deepcopy(PRESETS["trimodal-restore"])
    mutate(cfg)
    with pytest.raises(ConfigError, match=msg):
        validate_config(cfg)


def test_all_tours_dead_is_an_error():
    cfg = small("trimodal-restore")
    cfg["space"] = {"kind": "euclidean", "lo": [5000.0], "hi": [5001.0]}
    cfg["budget"] = {"tours": 50}
    from jumprestore import EmptyEstimateError

    with pytest.raises(EmptyEstimateError):
        run(cfg, workers=1)


@pytest.mark.parametrize("preset", ["trimodal-restore", "trimodal-mh-mixture", "torus-default"])
def test_worker_count_does_not_change_outputs(tmp_path, preset):
    cfg = small(preset)
    outs = {}
    for w in (1, 2, 8):
        d = tmp_path / f"w{w}"
        run(cfg, out_dir=str(d), workers=w)
        outs[w] = [read(d / f) for f in FILES]
    assert outs[1] == outs[2] == outs[8]


def test_repeat_runs_are_byte_identical(tmp_path):
    cfg = small("trimodal-restore", events=20_000)
    run(cfg, out_dir=str(tmp_path / "a"), workers=3)
    run(cfg, out_dir=str(tmp_path / "b"), workers=3)
    for f in FILES:
        assert read(tmp_path / "a" / f) == read(tmp_path / "b" / f)


def test_output_files_and_invariants(tmp_path):
    res = run(small("trimodal-restore", events=100_000), out_dir=str(tmp_path), workers=2)
    with open(tmp_path / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["events", "process_time", "wall_seconds", "estimate", "se"]
    ev = [int(r["events"]) for r in rows]
    pt = [float(r["process_time"]) for r in rows]
    assert ev == sorted(ev) and pt == sorted(pt)
    with open(tmp_path / "histogram.csv") as fh:
        hist = list(csv.DictReader(fh))
    assert list(hist[0]) == ["bin_lo", "bin_hi", "mass"] and len(hist) == 200
    assert abs(sum(float(h["mass"]) for h in hist) - 1) < 1e-9
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    est = json.loads((tmp_path / "estimate.json").read_text())
    assert diag["killed"] + diag["budget_exhausted"] == diag["tours"] == est["tours"]
    assert diag["events"] >= 100_000 and diag["events_overshoot"] == diag["events"] - 100_000
    assert res["diagnostics"]["killed"] == diag["killed"]
    assert "wall_seconds" not in est


def test_kill_count_matches_replayed_tours():
    res = run(small("trimodal-restore", events=30_000), workers=2)
    tours = res["diagnostics"]["replay_budget"]["tours"]
    cfg = small("trimodal-restore")
    cfg["budget"] = {"tours": tours}
    again = run(cfg, workers=1)
    assert again["diagnostics"]["killed"] == res["diagnostics"]["killed"]
    assert again["estimate"]["estimates"] == res["estimate"]["estimates"]


def test_wall_clock_budget_reports_replay_count():
    cfg = small("torus-default")
    cfg["budget"] = {"wall_seconds": 0.2}
    res = run(cfg, workers=1)
    assert res["diagnostics"]["replay_budget"]["tours"] == res["diagnostics"]["tours"] > 0


def test_mh_mixture_reports_acceptance_and_chains():
    res = run(small("trimodal-mh-mixture", events=30_000), workers=3)
    d = res["diagnostics"]
    assert d["chains"] == 3 and len(d["per_chain_acceptance"]) == 3
    assert 0 < d["acceptance_rate"] < 1
    assert d["large_step_proposals"] > 0
    assert res["estimate"]["events"] == 30_000


def test_verify_bundled_fixtures():
    good = verify_instances(load_instances(fixture_path("two_state")))
    assert good["summary"]["worst_invariance_residual"] < 1e-14
    assert good["summary"]["invariance_failures"] == 0
    bad = verify_instances(load_instances(fixture_path("two_state_perturbed")))
    assert bad["summary"]["invariance_failures"] == 1
    assert bad["instances"][0]["invariance_residual"] > 1e-3
    assert not bad["summary"]["pass"]


def test_verify_random_instances_reports_ordering():
    rep = verify_instances([random_instance(s) for s in range(10)], n_f=5)
    s = rep["summary"]
    assert s["instances"] == 10 and s["invariance_failures"] == 0
    assert s["ordering_checked"] == 10
    assert s["ordering_violations"] == sum(r["ordering"]["violated"] for r in rep["instances"])
    row = rep["instances"][0]
    assert set(row["ordering"]["argument_step_failures"]) >= {"difference>=drop_E0", "final_line>=0"}
    assert all("restore" in p for p in row["asymptotic_variance"])
