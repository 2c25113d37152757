"""Batch drivers: config handling, deterministic sweeps, worker equivalence,
coupled windows, aggregation, and the CSV/report/manifest outputs."""

import json
import math

import pytest

from gwlab import (
    RNG_ALGORITHM,
    ExperimentConfig,
    ValidationError,
    aggregate,
    coupled_window_study,
    load_config,
    read_summaries_csv,
    run_experiment,
    sign_test_p,
    write_outputs,
    write_summaries_csv,
)
from gwlab.experiments import CSV_COLUMNS, mean_and_se


def cfg_for(construction, n_runs=4, **kw):
    base = dict(name="t", construction=construction, n_runs=n_runs,
                base_seed=99, window_L=25.0)
    if construction == "intersecting":
        base["alpha"] = math.pi / 3
    elif construction != "single-line":
        base["separation_r"] = 1.0
    if construction == "parallel-thinned":
        base["thinning_p"] = 0.5
    if construction == "parallel-shifted":
        base["shift_s"] = 0.3
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValidationError):
        cfg_for("diagonal")
    with pytest.raises(ValidationError):
        cfg_for("single-line", n_runs=0)
    with pytest.raises(ValidationError):
        cfg_for("single-line", workers=0)


def test_to_spec_surfaces_domain_errors():
    # missing per-construction parameters fail at spec build time
    with pytest.raises(ValidationError):
        cfg_for("intersecting", alpha=None).to_spec()
    with pytest.raises(ValidationError):
        cfg_for("parallel-thinned", thinning_p=None).to_spec()
    with pytest.raises(ValidationError):
        cfg_for("parallel-shifted", shift_s=0.9).to_spec()
    assert cfg_for("parallel-shifted", shift_s=0.9,
                   allow_unproven_shift=True).to_spec().shift_s == 0.9


def test_run_experiment_preflights_before_work():
    bad = cfg_for("intersecting", alpha=None, workers=3)
    with pytest.raises(ValidationError):
        run_experiment(bad)


def test_load_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({
        "name": "demo", "construction": "parallel-thinned", "n_runs": 3,
        "base_seed": 5, "separation_r": 1.0, "thinning_p": 0.2,
    }))
    cfg = load_config(p)
    assert cfg.name == "demo" and cfg.thinning_p == 0.2
    assert cfg.window_L == 50.0  # default

    p.write_text(json.dumps({"name": "x", "construction": "single-line",
                             "n_runs": 1, "base_seed": 0, "sep_r": 1.0}))
    with pytest.raises(ValidationError, match="sep_r"):
        load_config(p)


def test_run_experiment_deterministic():
    cfg = cfg_for("parallel-thinned", n_runs=5)
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    assert a == b
    assert [r.run_index for r in a] == [0, 1, 2, 3, 4]
    assert len({r.seed for r in a}) == 5
    assert all(r.lemma_failures == 0 for r in a)


def test_worker_count_equivalence():
    serial = run_experiment(cfg_for("parallel-duplicated", n_runs=6))
    pooled = run_experiment(cfg_for("parallel-duplicated", n_runs=6, workers=2))
    assert serial == pooled


def test_workers_env_override(monkeypatch):
    baseline = run_experiment(cfg_for("single-line", n_runs=3))
    monkeypatch.setenv("GWLAB_WORKERS", "1")
    assert run_experiment(cfg_for("single-line", n_runs=3, workers=4)) == baseline
    monkeypatch.setenv("GWLAB_WORKERS", "zero")
    with pytest.raises(ValidationError):
        run_experiment(cfg_for("single-line", n_runs=3))
    monkeypatch.setenv("GWLAB_WORKERS", "0")
    with pytest.raises(ValidationError):
        run_experiment(cfg_for("single-line", n_runs=3))


def test_summary_optional_columns():
    inter = run_experiment(cfg_for("intersecting", n_runs=2))
    assert all(r.a_events is None for r in inter)     # no parallel events
    assert all(r.lemma_failures is None for r in inter)  # audit skipped

    single = run_experiment(cfg_for("single-line", n_runs=2))
    assert all(r.a_events is None for r in single)
    assert all(r.lemma_failures == 0 for r in single)

    off = run_experiment(cfg_for("parallel-duplicated", n_runs=2,
                                 audit=False, detect_events=False))
    assert all(r.a_events is None and r.lemma_failures is None for r in off)

    on = run_experiment(cfg_for("parallel-duplicated", n_runs=2))
    assert all(r.a_events is not None and r.lemma_failures == 0 for r in on)


def test_coupled_window_study():
    cfg = cfg_for("parallel-thinned", n_runs=4, window_L=50.0)
    res = coupled_window_study(cfg, [50.0, 25.0])
    assert sorted(res) == [25.0, 50.0]
    for small, big in zip(res[25.0], res[50.0]):
        assert small.run_index == big.run_index
        assert small.seed == big.seed
        assert small.window_L == 25.0 and big.window_L == 50.0
        assert small.n_steps <= big.n_steps
        assert small.n_points <= big.n_points
    with pytest.raises(ValidationError):
        coupled_window_study(cfg, [])
    with pytest.raises(ValidationError):
        coupled_window_study(cfg, [-1.0, 25.0])


def test_sign_test_p():
    assert sign_test_p([1.0] * 10) == pytest.approx(0.5 ** 10)
    assert sign_test_p([1.0, 1.0, 1.0, -1.0]) == pytest.approx(5 / 16)
    assert sign_test_p([0.0, 0.0]) == 1.0
    assert sign_test_p([]) == 1.0
    assert sign_test_p([-1.0, -2.0]) == 1.0


def test_mean_and_se():
    m, se = mean_and_se([1.0, 2.0, 3.0])
    assert m == 2.0
    assert se == pytest.approx(1.0 / math.sqrt(3.0))
    m1, se1 = mean_and_se([5.0])
    assert m1 == 5.0 and math.isnan(se1)
    m0, se0 = mean_and_se([])
    assert math.isnan(m0) and math.isnan(se0)


def test_aggregate():
    rows = run_experiment(cfg_for("parallel-duplicated", n_runs=5))
    agg = aggregate(rows)
    assert agg["n_runs"] == 5
    assert agg["audited_runs"] == 5
    assert agg["lemma_failures_total"] == 0
    assert sum(agg["stop_reasons"].values()) == 5
    assert agg["crossings"]["min"] <= agg["crossings"]["mean"] <= agg["crossings"]["max"]
    assert "by_window" not in agg

    cfg = cfg_for("parallel-duplicated", n_runs=3, window_L=50.0)
    res = coupled_window_study(cfg, [25.0, 50.0])
    both = aggregate(res[25.0] + res[50.0])
    assert sorted(both["by_window"]) == ["25.0", "50.0"]
    assert both["by_window"]["25.0"]["n_runs"] == 3


def test_csv_roundtrip(tmp_path):
    rows = run_experiment(cfg_for("parallel-thinned", n_runs=4))
    rows += run_experiment(cfg_for("intersecting", n_runs=2))
    path = tmp_path / "rows.csv"
    write_summaries_csv(rows, path)
    assert read_summaries_csv(path) == rows
    header = path.read_text().splitlines()[0]
    assert tuple(header.split(",")) == CSV_COLUMNS


def test_csv_header_rejected(tmp_path):
    path = tmp_path / "rows.csv"
    write_summaries_csv(run_experiment(cfg_for("single-line", n_runs=1)), path)
    lines = path.read_text().splitlines()
    lines[0] = lines[0].replace("crossings", "xings")
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError):
        read_summaries_csv(bad)


def test_write_outputs(tmp_path):
    cfg = cfg_for("parallel-shifted", n_runs=3)
    rows = run_experiment(cfg)
    p1 = write_outputs(cfg, rows, tmp_path / "a")
    p2 = write_outputs(cfg, rows, tmp_path / "b")
    for kind in ("csv", "report"):
        b1 = open(p1[kind], "rb").read()
        b2 = open(p2[kind], "rb").read()
        assert b1 == b2  # byte-determinism contract

    manifest = json.loads(open(p1["manifest"]).read())
    assert manifest["rng_algorithm"] == RNG_ALGORITHM
    assert manifest["config"]["construction"] == "parallel-shifted"
    assert manifest["outputs"] == ["t.csv", "t.report.json"]
    assert "created_utc" in manifest and "version" in manifest

    report = json.loads(open(p1["report"]).read())
    assert report == aggregate(rows)
