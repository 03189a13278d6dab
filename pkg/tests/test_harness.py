import csv
import json
import os

import pytest

from privpredict.cli import main
from privpredict.concepts import ThresholdHypothesis
from privpredict.core import ConfigurationError, GridDistribution, NoiseSource, draw_sample
from privpredict.harness import (
    CSV_COLUMNS,
    AuditToy,
    ExperimentConfig,
    evaluate_gates,
    hypotheses_from_payload,
    majority_vote_error,
    run_experiment,
    run_trial,
)
from privpredict.predictor import RunSpec, run
from privpredict.adversaries import ObliviousAdversary


def _small_config(tmp_path, **overrides):
    base = dict(
        mode="oblivious",
        t_rounds=32,
        trials=2,
        seed=10,
        domain_size=1024,
        k=52,
        m=4,
        bt_eps=8.0,
        bt_delta=1e-3,
        out_dir=str(tmp_path),
    )
    base.update(overrides)
    return ExperimentConfig.from_dict(base)


def test_config_roundtrip_and_digest(tmp_path):
    cfg = _small_config(tmp_path)
    clone = ExperimentConfig.from_dict(json.loads(cfg.canonical_json()))
    assert clone == cfg
    assert clone.digest() == cfg.digest()
    assert _small_config(tmp_path, seed=11).digest() != cfg.digest()
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"mode": "oblivious", "bogus_key": 1})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"mode": "no-such-mode"})


def test_empty_run_row(tmp_path):
    cfg = _small_config(tmp_path, t_rounds=0, trials=1)
    result = run_experiment(cfg)
    assert len(result.rows) == 1
    assert result.rows[0]["top_count"] == 0
    assert result.rows[0]["final_eps"] == 0.0


def test_csv_schema_and_byte_identical_reruns(tmp_path):
    cfg = _small_config(tmp_path)
    first = run_experiment(cfg)
    blob1 = open(first.csv_path, "rb").read()
    second = run_experiment(cfg)
    blob2 = open(second.csv_path, "rb").read()
    assert blob1 == blob2
    with open(first.csv_path) as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == CSV_COLUMNS
        rows = list(reader)
    assert len(rows) == cfg.trials
    for raw, row in zip(rows, first.rows):
        # lossless parse back
        assert int(raw["seed"]) == row["seed"]
        assert int(raw["top_count"]) == row["top_count"]
        assert float(raw["max_block_error"]) == row["max_block_error"]
        assert float(raw["final_eps"]) == row["final_eps"]


def test_per_seed_reports_on_disk(tmp_path):
    cfg = _small_config(tmp_path)
    result = run_experiment(cfg)
    files = sorted(p for p in os.listdir(result.out_dir) if p.endswith(".json"))
    assert files == ["10.json", "11.json"]
    payload = json.loads(open(os.path.join(result.out_dir, "10.json")).read())
    assert payload["seed"] == 10
    assert payload["config_digest"] == cfg.digest()


def test_workers_do_not_change_results(tmp_path):
    serial = run_experiment(_small_config(tmp_path / "a"))
    parallel = run_experiment(_small_config(tmp_path / "b", workers=2))
    assert serial.rows == parallel.rows


def test_gate_evaluation():
    rows = [{"top_count": 0}, {"top_count": 2}, {"top_count": 5}]
    gates = [{"column": "top_count", "max": 4, "fraction": 0.6}]
    [res] = evaluate_gates(rows, gates)
    assert res["passed"] and res["observed_fraction"] == pytest.approx(2 / 3)
    [strict] = evaluate_gates(rows, [{"column": "top_count", "max": 4}])
    assert not strict["passed"]


def test_run_trial_heldout_and_payload(tmp_path):
    cfg = _small_config(tmp_path, heldout=2000)
    row, payload = run_trial(cfg, 0)
    assert 0.0 <= payload["heldout_error"] <= 1.0
    assert row["seed"] == 10
    hyps = hypotheses_from_payload(payload)
    assert len(hyps) == 52


def test_enumerated_concept_mode(tmp_path):
    import itertools

    cls_path = tmp_path / "cls.json"
    patterns = [list(p) for p in itertools.product((-1, 1), repeat=4)]
    cls_path.write_text(json.dumps({"points": [1, 2, 3, 4], "patterns": patterns}))
    cfg = _small_config(tmp_path, concept_file=str(cls_path), t_rounds=16, trials=1)
    row, payload = run_trial(cfg, 0)
    assert all(h["kind"] == "enumerated" for h in payload["final_hypotheses"])
    assert len(payload["rounds"]) == 16


def test_stochastic_baseline_mode(tmp_path):
    cfg = _small_config(tmp_path, mode="stochastic-baseline", trials=1)
    row, payload = run_trial(cfg, 0)
    assert len(payload["rounds"]) == cfg.t_rounds
    assert row["top_count"] >= 0


def test_majority_vote_error_matches_direct_count():
    dist = GridDistribution(256, 100)
    fresh = draw_sample(dist, 500, NoiseSource(4))
    hyps = [ThresholdHypothesis(t) for t in (80, 100, 120)]
    fast = majority_vote_error(hyps, fresh)
    direct = 0
    for p, lab in fresh.records():
        votes = sum(h.evaluate(p) for h in hyps)
        direct += (1 if votes >= 0 else -1) != lab
    assert fast == direct / len(fresh)


def test_cli_run_and_gates(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg = _small_config(tmp_path, gates=[{"column": "top_count", "max": 50}])
    cfg_path.write_text(cfg.canonical_json())
    assert main(["run", "--config", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "config digest" in out
    # an impossible gate fails the run
    bad = _small_config(tmp_path, gates=[{"column": "top_count", "max": -1}])
    bad_path = tmp_path / "bad.json"
    bad_path.write_text(bad.canonical_json())
    assert main(["run", "--config", str(bad_path)]) == 1


def test_cli_seed_override_env(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(_small_config(tmp_path, trials=1).canonical_json())
    os.environ["PREDICT_SEED"] = "77"
    try:
        assert main(["run", "--config", str(cfg_path)]) == 0
    finally:
        del os.environ["PREDICT_SEED"]
    digest_dirs = os.listdir(tmp_path / "runs")
    found = []
    for d in digest_dirs:
        found += [f for f in os.listdir(tmp_path / "runs" / d) if f.endswith(".json")]
    assert "77.json" in found


def test_cli_plan_output(capsys):
    rc = main(["plan", "--mode", "oblivious", "--d", "1", "--T", "1024",
               "--alpha", "0.1", "--beta", "0.1", "--eps", "1", "--delta", "1e-6"])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["k"] == 28230
    rc_bad = main(["plan", "--mode", "oblivious", "--d", "1", "--T", "16",
                   "--alpha", "0.1", "--beta", "0.1", "--eps", "1", "--delta", "1e-6"])
    assert rc_bad == 1


def test_cli_audit_quick(capsys):
    # 2e4 trials is the smallest scale at which the honest channel's rare events
    # have enough mass on both sides to avoid a spurious divergence flag
    rc = main(["audit", "--trials", "20000"])
    out = capsys.readouterr().out
    assert "eps_hat" in out
    assert "WITHIN BUDGET" in out
    assert rc == 0


def test_audit_toy_mechanism_matches_full_predictor_loop():
    """The lean audited channel reproduces the full loop bit for bit."""
    toy = AuditToy()
    sample, _ = toy.samples()
    mech = toy.mechanism()
    from privpredict.concepts import ThresholdClass

    spec = RunSpec(
        generator="oblivious",
        k=toy.k,
        m=1,
        t_rounds=toy.t_rounds,
        bt_eps=toy.bt_eps,
        bt_delta=toy.bt_delta,
        v_max=0,
        t_lower=toy.t_lower,
        t_upper=toy.t_upper,
    )
    for seed in range(6):
        lean = mech(sample, NoiseSource(seed))
        full = run(spec, sample, ObliviousAdversary(tuple(toy.stream())),
                   NoiseSource(seed), concept=ThresholdClass(toy.domain))
        assert lean == full.observable()
