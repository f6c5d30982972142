"""Benchmark harness: seeded trials over (method, dataset, n, T) cells.

A run is a pure function of its config: trial k uses seed base_seed + k,
synthetic datasets are fixed per cell (trial seeds only vary the method's
initialization, mirroring the repeated-seed protocol), and UCR datasets
are resampled per trial.  Results stream to records.csv row by row so a
crash loses at most the trial in flight; per-trial assignments are dumped
as JSON, and a summary CSV plus rendered figures land next to the records.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import plots
from .baselines import baseline_cluster
from .cluster import EmOptions, em_cluster, oracle_cluster
from .data import (DEFAULT_COV_GRID, SyntheticSpec, default_models,
                   generate_synthetic, load_ucr, sample_two_class)
from .fit import FitOptions
from .metrics import TrialStats, aggregate, f1_pair

__all__ = ["ExperimentConfig", "RunRecord", "load_config", "run_experiment",
           "trial_dataset", "RECORD_COLUMNS", "SUMMARY_COLUMNS"]

KNOWN_METHODS = ("em", "oracle", "dtw", "fft")
RECORD_COLUMNS = ("method", "dataset", "n", "T", "seed", "f1", "objective",
                  "iterations", "runtime_ms", "converged")
SUMMARY_COLUMNS = ("method", "dataset", "n", "T", "trials", "f1_mean", "f1_ci95")


@dataclass
class ExperimentConfig:
    """One benchmark run.

    dataset is either {"kind": "synthetic", ...} with optional m, horizon,
    cov_grid, seed, or {"kind": "ucr", "path": ..., ...} with optional
    normal_label, abnormal_label, per_class.  hidden_dims gives the fit
    (and, for synthetic data, generation) state dimensions; windows gives
    the UCR window lengths.  fit and em hold FitOptions/EmOptions fields.
    """

    dataset: dict
    methods: list
    out_dir: str
    k: int = 2
    hidden_dims: tuple = (2,)
    windows: tuple = ()
    trials: int = 50
    base_seed: int = 0
    fit: dict = field(default_factory=dict)
    em: dict = field(default_factory=dict)

    def __post_init__(self):
        self.methods = list(self.methods)
        self.hidden_dims = tuple(int(v) for v in self.hidden_dims)
        self.windows = tuple(int(v) for v in self.windows)
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.methods:
            raise ValueError("config needs at least one method")
        for m in self.methods:
            if m not in KNOWN_METHODS:
                raise ValueError(f"unknown method {m!r} (choose from {KNOWN_METHODS})")
        if not self.hidden_dims:
            raise ValueError("hidden_dims must be non-empty")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.base_seed < 0:
            raise ValueError(f"base_seed must be non-negative, got {self.base_seed}")
        kind = self.dataset.get("kind")
        if kind == "ucr":
            path = self.dataset.get("path")
            if not path:
                raise ValueError("ucr dataset config needs a 'path'")
            if not Path(path).is_file():
                raise FileNotFoundError(f"no such data file: {path}")
            if not self.windows:
                raise ValueError("ucr dataset config needs non-empty 'windows'")
        elif kind != "synthetic":
            raise ValueError(f"dataset kind must be 'synthetic' or 'ucr', got {kind!r}")

    def fit_options(self, n: int) -> FitOptions:
        return FitOptions(hidden_dim=n, **self.fit)

    def em_options(self) -> EmOptions:
        return EmOptions(**self.em)


@dataclass
class RunRecord:
    """One trial of one method on one cell; error carries a failure
    message with the scientific fields left unset."""

    method: str
    dataset: str
    n: int
    t_len: int
    seed: int
    f1: float | None
    objective: float | None
    iterations: int | None
    runtime_ms: int
    converged: bool | None
    error: str | None = None


@dataclass
class _Cell:
    dataset_id: str
    n: int
    t_len: int


def load_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config file; overrides (from CLI flags) replace fields."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such config file: {path}")
    raw = json.loads(path.read_text())
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("max_outer_iters", "rel_tol", "restarts"):
                raw.setdefault("fit", {})[key] = value
            else:
                raw[key] = value
    known = {"dataset", "methods", "out_dir", "k", "hidden_dims", "windows",
             "trials", "base_seed", "fit", "em"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**raw)


def _cells(config: ExperimentConfig) -> list[_Cell]:
    out = []
    if config.dataset["kind"] == "synthetic":
        horizon = int(config.dataset.get("horizon", 100))
        for n in config.hidden_dims:
            out.append(_Cell("synthetic", n, horizon))
    else:
        name = Path(config.dataset["path"]).stem
        for n in config.hidden_dims:
            for w in config.windows:
                out.append(_Cell(name, n, w))
    return out


def trial_dataset(config: ExperimentConfig, cell: _Cell, trial_seed: int,
                  caches: dict | None = None):
    """Build the dataset one trial sees (public so results can be audited).

    Synthetic cells ignore trial_seed: the dataset is fixed per cell and
    seeded by the dataset config.  UCR cells resample per trial with a
    stream derived from (trial_seed, 2).
    """
    caches = caches if caches is not None else {}
    ds = config.dataset
    if ds["kind"] == "synthetic":
        key = ("synthetic", cell.n)
        if key not in caches:
            models = default_models(config.k, cell.n, int(ds.get("m", 2)))
            spec = SyntheticSpec(
                cluster_models=models,
                horizon=cell.t_len,
                cov_grid=tuple(ds.get("cov_grid", DEFAULT_COV_GRID)),
                seed=int(ds.get("seed", config.base_seed)),
            )
            caches[key] = generate_synthetic(spec)
        return caches[key]
    if "ucr" not in caches:
        caches["ucr"] = load_ucr(ds["path"])
    rng = np.random.default_rng(np.random.SeedSequence([trial_seed, 2]))
    return sample_two_class(
        caches["ucr"],
        normal_label=int(ds.get("normal_label", 1)),
        abnormal_label=int(ds.get("abnormal_label", 2)),
        per_class=int(ds.get("per_class", 10)),
        window=cell.t_len,
        rng=rng,
    )


def _run_method(method: str, data, truth, config: ExperimentConfig,
                cell: _Cell, trial_seed: int):
    if method == "em":
        res = em_cluster(data, config.k, config.fit_options(cell.n),
                         config.em_options(), seed=trial_seed)
        return (res.assignment, res.joint_objective, res.iterations, res.converged)
    if method == "oracle":
        res = oracle_cluster(data, config.k, config.fit_options(cell.n),
                             seed=trial_seed)
        return (res.assignment, res.joint_objective, res.iterations, res.converged)
    rng = np.random.default_rng(np.random.SeedSequence([trial_seed, 3]))
    assignment = baseline_cluster(data, config.k, method, rng)
    return (assignment, None, None, None)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


def _record_row(rec: RunRecord) -> str:
    converged = "error" if rec.error is not None else _fmt(rec.converged)
    cells = [rec.method, rec.dataset, str(rec.n), str(rec.t_len), str(rec.seed),
             _fmt(rec.f1), _fmt(rec.objective), _fmt(rec.iterations),
             str(rec.runtime_ms), converged]
    return ",".join(cells)


def run_experiment(config: ExperimentConfig):
    """Execute every (cell, trial, method) combination.

    Returns (records, stats) where stats maps (method, dataset, n, T) to
    TrialStats over the scored trials.  Writes records.csv (appended and
    flushed per row), summary.csv, assignments/<method-cell>/<seed>.json,
    and the f1/runtime figures into config.out_dir.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records: list[RunRecord] = []
    caches: dict = {}
    with open(out / "records.csv", "w") as fh:
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        fh.flush()
        for cell in _cells(config):
            for trial in range(config.trials):
                trial_seed = config.base_seed + trial
                data = trial_dataset(config, cell, trial_seed, caches)
                truth = np.array([x.true_label for x in data])
                for method in config.methods:
                    start = time.perf_counter()
                    try:
                        assignment, objective, iterations, converged = _run_method(
                            method, data, truth, config, cell, trial_seed)
                        f1 = f1_pair(assignment, truth, config.k)
                        error = None
                    except Exception as exc:  # noqa: BLE001 - per-row marker
                        assignment = None
                        f1 = objective = iterations = converged = None
                        error = f"{type(exc).__name__}: {exc}"
                    runtime_ms = int(round((time.perf_counter() - start) * 1000))
                    rec = RunRecord(method, cell.dataset_id, cell.n, cell.t_len,
                                    trial_seed, f1, objective, iterations,
                                    runtime_ms, converged, error)
                    records.append(rec)
                    fh.write(_record_row(rec) + "\n")
                    fh.flush()
                    if assignment is not None:
                        _save_assignment(out, rec, assignment, truth)

    stats = _summarize(records)
    _write_summary(out / "summary.csv", stats)
    plots.render_figures(out, _summary_rows(stats), records)
    return records, stats


def _save_assignment(out: Path, rec: RunRecord, assignment, truth) -> None:
    cell_dir = out / "assignments" / f"{rec.method}-{rec.dataset}-n{rec.n}-T{rec.t_len}"
    cell_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "method": rec.method,
        "dataset": rec.dataset,
        "n": rec.n,
        "T": rec.t_len,
        "seed": rec.seed,
        "labels": assignment.to_list(),
        "truth": [int(v) for v in truth],
        "f1": rec.f1,
    }
    (cell_dir / f"{rec.seed}.json").write_text(json.dumps(payload, indent=1) + "\n")


def _summarize(records) -> dict:
    stats: dict[tuple, TrialStats] = {}
    keys = []
    for rec in records:
        key = (rec.method, rec.dataset, rec.n, rec.t_len)
        if key not in keys:
            keys.append(key)
    for key in keys:
        scores = [rec.f1 for rec in records
                  if (rec.method, rec.dataset, rec.n, rec.t_len) == key
                  and rec.f1 is not None]
        if len(scores) >= 2:
            stats[key] = aggregate(scores)
        elif len(scores) == 1:
            stats[key] = TrialStats(mean=scores[0], ci_half_width=0.0,
                                    n_trials=1, raw=np.array(scores))
    return stats


def _summary_rows(stats: dict) -> list[dict]:
    rows = []
    for (method, dataset, n, t_len), ts in stats.items():
        rows.append({
            "method": method, "dataset": dataset, "n": n, "T": t_len,
            "trials": ts.n_trials, "f1_mean": ts.mean, "f1_ci95": ts.ci_half_width,
        })
    return rows


def _write_summary(path: Path, stats: dict) -> None:
    lines = [",".join(SUMMARY_COLUMNS)]
    for (method, dataset, n, t_len), ts in stats.items():
        lines.append(",".join([
            method, dataset, str(n), str(t_len), str(ts.n_trials),
            repr(ts.mean), repr(ts.ci_half_width),
        ]))
    path.write_text("\n".join(lines) + "\n")
