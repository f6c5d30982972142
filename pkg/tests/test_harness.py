"""Benchmark harness: config handling, records, summaries, determinism."""

import json

import numpy as np
import pytest

from ldscluster.harness import (ExperimentConfig, load_config, run_experiment)
from ldscluster.metrics import aggregate, f1_pair

FAST_FIT = {"restarts": 1, "max_outer_iters": 30, "rel_tol": 1e-6}


def _synth_config(out_dir, **kw):
    base = dict(
        dataset={"kind": "synthetic", "k": 2, "horizon": 20, "seed": 11,
                 "cov_grid": [0.0004, 0.0064]},
        methods=["fft"],
        out_dir=str(out_dir),
        k=2,
        hidden_dims=[2],
        trials=2,
        base_seed=7,
        fit=dict(FAST_FIT),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def _strip_runtime(text):
    rows = []
    for line in text.strip().split("\n"):
        cells = line.split(",")
        del cells[8]  # runtime_ms column
        rows.append(",".join(cells))
    return "\n".join(rows)


# ---------------------------------------------------------------- config

def test_config_validation():
    with pytest.raises(ValueError, match="trials"):
        _synth_config("/tmp/x", trials=0)
    with pytest.raises(ValueError, match="method"):
        _synth_config("/tmp/x", methods=["kmeans"])
    with pytest.raises(ValueError, match="method"):
        _synth_config("/tmp/x", methods=[])
    with pytest.raises(ValueError, match="kind"):
        _synth_config("/tmp/x", dataset={"kind": "bogus"})
    with pytest.raises(FileNotFoundError):
        _synth_config("/tmp/x", dataset={"kind": "ucr", "path": "/absent.tsv"})


def test_config_ucr_needs_windows(tmp_path):
    path = tmp_path / "mini.csv"
    path.write_text("1,0.0,1.0\n2,1.0,0.0\n")
    with pytest.raises(ValueError, match="windows"):
        _synth_config(tmp_path, dataset={"kind": "ucr", "path": str(path)})
    cfg = _synth_config(tmp_path, dataset={"kind": "ucr", "path": str(path)},
                        windows=[2])
    assert cfg.windows == (2,)


def test_load_config_overrides_and_unknown_keys(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "dataset": {"kind": "synthetic"},
        "methods": ["fft"],
        "out_dir": str(tmp_path / "out"),
    }))
    cfg = load_config(cfg_path, overrides={"trials": 3, "restarts": 2,
                                           "base_seed": None})
    assert cfg.trials == 3
    assert cfg.fit["restarts"] == 2
    assert cfg.base_seed == 0  # None overrides are ignored

    cfg_path.write_text(json.dumps({
        "dataset": {"kind": "synthetic"},
        "methods": ["fft"],
        "out_dir": "x",
        "mystery": 1,
    }))
    with pytest.raises(ValueError, match="mystery"):
        load_config(cfg_path)
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.json")


# ---------------------------------------------------------------- records

def test_run_experiment_row_bookkeeping(tmp_path):
    out = tmp_path / "out"
    records, stats = run_experiment(_synth_config(out))
    assert len(records) == 2  # trials=2, one method, one cell
    lines = (out / "records.csv").read_text().strip().split("\n")
    assert lines[0] == "method,dataset,n,T,seed,f1,objective,iterations,runtime_ms,converged"
    assert len(lines) == 3
    assert [r.seed for r in records] == [7, 8]
    for rec in records:
        assert rec.method == "fft"
        assert 0.0 <= rec.f1 <= 1.0
        assert rec.objective is None and rec.converged is None


def test_run_experiment_determinism(tmp_path):
    cfg_a = _synth_config(tmp_path / "a", methods=["em", "fft"])
    cfg_b = _synth_config(tmp_path / "b", methods=["em", "fft"])
    run_experiment(cfg_a)
    run_experiment(cfg_b)
    rec_a = (tmp_path / "a" / "records.csv").read_text()
    rec_b = (tmp_path / "b" / "records.csv").read_text()
    assert _strip_runtime(rec_a) == _strip_runtime(rec_b)
    assert ((tmp_path / "a" / "summary.csv").read_text()
            == (tmp_path / "b" / "summary.csv").read_text())


def test_run_experiment_summary_matches_aggregate(tmp_path):
    out = tmp_path / "out"
    config = _synth_config(out, trials=4, methods=["em", "fft"],
                           em={"n_init": 2})
    records, stats = run_experiment(config)
    for key, ts in stats.items():
        raw = [r.f1 for r in records
               if (r.method, r.dataset, r.n, r.t_len) == key]
        expect = aggregate(raw)
        assert ts.mean == expect.mean
        assert abs(ts.ci_half_width - expect.ci_half_width) < 1e-12
    lines = (out / "summary.csv").read_text().strip().split("\n")
    assert lines[0] == "method,dataset,n,T,trials,f1_mean,f1_ci95"
    assert len(lines) == 1 + len(stats)


def test_run_experiment_assignment_dumps_recompute(tmp_path):
    out = tmp_path / "out"
    records, _ = run_experiment(_synth_config(out, methods=["em"],
                                              em={"n_init": 1}))
    for rec in records:
        dump = out / "assignments" / f"em-synthetic-n2-T20/{rec.seed}.json"
        payload = json.loads(dump.read_text())
        recomputed = f1_pair(np.array(payload["labels"]),
                             np.array(payload["truth"]))
        assert recomputed == rec.f1 == payload["f1"]


def test_run_experiment_renders_figures(tmp_path):
    out = tmp_path / "out"
    run_experiment(_synth_config(out))
    for name in ("f1.png", "runtime.png"):
        fig = out / name
        assert fig.is_file()
        assert fig.stat().st_size > 1000
        assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_run_experiment_oracle_budget_error_marked(tmp_path):
    # default synthetic dataset has N=8 here; shrink nothing, just pick a
    # k making the oracle infeasible so the row records an error marker
    out = tmp_path / "out"
    config = _synth_config(out, methods=["oracle"], k=8,
                           dataset={"kind": "synthetic", "k": 8, "horizon": 10,
                                    "seed": 1, "cov_grid": [0.0004, 0.0064]})
    records, stats = run_experiment(config)
    assert all(r.error is not None for r in records)
    assert stats == {}
    lines = (out / "records.csv").read_text().strip().split("\n")
    for line in lines[1:]:
        assert line.endswith(",error")


def test_run_experiment_ucr_cells(tmp_path, ecg_path):
    out = tmp_path / "out"
    config = ExperimentConfig(
        dataset={"kind": "ucr", "path": str(ecg_path), "per_class": 5},
        methods=["fft"],
        out_dir=str(out),
        hidden_dims=[2],
        windows=[20, 30],
        trials=2,
        base_seed=1,
    )
    records, stats = run_experiment(config)
    assert len(records) == 4  # 2 windows x 2 trials
    t_lens = sorted({r.t_len for r in records})
    assert t_lens == [20, 30]
    name = ecg_path.stem
    assert all(r.dataset == name for r in records)
