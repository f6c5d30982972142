"""Joint partitioning and per-cluster LDS fitting.

em_cluster implements the alternating heuristic: fit an LDS per cluster,
reassign every trajectory to the cluster whose fitted output it matches
best, repeat until the labels stop changing.  oracle_cluster certifies it
on small instances by enumerating every partition.

Both share one subproblem-seeding rule: the fit of a cluster part is
seeded from the sorted ids of its members (plus the run seed).  A given
part therefore produces the identical ClusterFit wherever it appears, so
every intermediate EM iterate is, by construction, a candidate the oracle
also evaluates, and the oracle objective is a true lower bound on EM's.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ClusterFit, Trajectory, dataset_shape, trajectory_error
from .fit import FitOptions, fit_cluster

__all__ = [
    "Assignment",
    "EmOptions",
    "ClusteringResult",
    "eval_joint",
    "reassign",
    "em_cluster",
    "oracle_cluster",
    "ORACLE_BUDGET",
    "clustering_result_to_json",
    "save_clustering_result",
]

# Largest k**N the oracle will enumerate.
ORACLE_BUDGET = 2 ** 20


@dataclass(eq=False)
class Assignment:
    """Cluster labels for a dataset: labels[i] in [0, k)."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise ValueError(f"labels must be 1-D, got shape {self.labels.shape}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ValueError(f"labels must lie in [0, {self.k})")

    def to_list(self) -> list[int]:
        return [int(v) for v in self.labels]


@dataclass
class EmOptions:
    """max_em_iters bounds the fit/reassign loop; n_init is the number of
    independent random initial partitions (the EM restarts)."""

    max_em_iters: int = 100
    n_init: int = 1

    def __post_init__(self):
        if self.max_em_iters < 1:
            raise ValueError(f"max_em_iters must be >= 1, got {self.max_em_iters}")
        if self.n_init < 1:
            raise ValueError(f"n_init must be >= 1, got {self.n_init}")


@dataclass(eq=False)
class ClusteringResult:
    assignment: Assignment
    fits: list[ClusterFit]
    joint_objective: float
    iterations: int
    converged: bool
    seed: int


def eval_joint(dataset: list[Trajectory], assignment: Assignment,
               fits: list[ClusterFit]) -> float:
    """Joint objective: per-trajectory error against its cluster's outputs
    plus every cluster's residual penalties."""
    labels = assignment.labels
    if len(labels) != len(dataset):
        raise ValueError(f"{len(labels)} labels for {len(dataset)} trajectories")
    if assignment.k != len(fits) or (labels.size and labels.max() >= len(fits)):
        raise ValueError(f"assignment needs {assignment.k} fits, got {len(fits)}")
    # fsum keeps the value independent of term order, so relabeling the
    # clusters cannot shift the objective by even an ulp.
    terms = [trajectory_error(x, fits[lab].outputs) for x, lab in zip(dataset, labels)]
    for f in fits:
        terms.append(float(np.sum(f.output_residuals ** 2)))
        terms.append(float(np.sum(f.state_residuals ** 2)))
    return math.fsum(terms)


def reassign(dataset: list[Trajectory], fits: list[ClusterFit]) -> Assignment:
    """Label each trajectory with its nearest cluster output (argmin of
    squared error; ties go to the lowest cluster index)."""
    if not fits:
        raise ValueError("reassign requires at least one fit")
    errs = np.array([[trajectory_error(x, f.outputs) for f in fits] for x in dataset])
    return Assignment(errs.argmin(axis=1), len(fits))


def _zero_fit(t_len: int, m: int, n: int) -> ClusterFit:
    # Placeholder for an empty cluster: all-zero system, zero objective.
    return ClusterFit(
        transition=np.zeros((n, n)),
        observation=np.zeros((n, m)),
        states=np.zeros((t_len, n)),
        outputs=np.zeros((t_len, m)),
        state_residuals=np.zeros((max(t_len - 1, 0), n)),
        output_residuals=np.zeros((t_len, m)),
        objective=0.0,
        member_count=0,
        converged=True,
        iterations=0,
    )


def _check_dataset(dataset: list[Trajectory]):
    t_len, m = dataset_shape(dataset)
    ids = [x.id for x in dataset]
    if len(set(ids)) != len(ids):
        raise ValueError("trajectory ids must be unique within a dataset")
    if any(i < 0 for i in ids):
        raise ValueError("trajectory ids must be non-negative")
    return t_len, m


class _PartFitter:
    """Memoized per-part subproblem solver with content-derived seeds.

    The rng for a part is seeded by (seed, 0, sorted member ids), so the
    fit depends only on which trajectories form the part, never on how the
    caller labeled it or in which order it was requested.
    """

    def __init__(self, dataset, opts: FitOptions, seed: int):
        self.dataset = dataset
        self.opts = opts
        self.seed = seed
        self.cache: dict[tuple, ClusterFit] = {}

    def fit(self, idxs) -> ClusterFit:
        key = tuple(sorted(self.dataset[i].id for i in idxs))
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0, *key]))
        members = [self.dataset[i] for i in sorted(idxs)]
        result = fit_cluster(members, self.opts, rng)
        self.cache[key] = result
        return result


def _fits_for(labels, k, fitter: _PartFitter, t_len, m, n):
    fits = []
    for c in range(k):
        idxs = np.flatnonzero(labels == c)
        if idxs.size == 0:
            fits.append(_zero_fit(t_len, m, n))
        else:
            fits.append(fitter.fit(idxs))
    return fits


def _repair_empty(labels, k, dataset, fitter, t_len, m, n):
    """Refill empty clusters by donating the worst-fit trajectory.

    The donor is the trajectory with the largest error against its own
    cluster's outputs, drawn only from clusters that keep at least one
    member.  Returns the (possibly updated) fits for the final labels.
    """
    fits = _fits_for(labels, k, fitter, t_len, m, n)
    while True:
        sizes = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(sizes == 0)
        if empties.size == 0:
            break
        donor_mask = sizes[labels] >= 2
        if not donor_mask.any():
            break  # k exceeds the number of usable trajectories
        errs = np.full(len(dataset), -np.inf)
        for i in np.flatnonzero(donor_mask):
            errs[i] = trajectory_error(dataset[i], fits[labels[i]].outputs)
        donor = int(np.argmax(errs))
        labels[donor] = empties[0]
        fits = _fits_for(labels, k, fitter, t_len, m, n)
    return fits


def em_cluster(dataset: list[Trajectory], k: int, opts: FitOptions,
               em_opts: EmOptions | None = None, seed: int = 0) -> ClusteringResult:
    """Alternating fit/reassign clustering.

    Each of em_opts.n_init runs starts from a uniform random labeling
    (seeded by (seed, 1, run index)) and alternates per-cluster fits with
    nearest-output reassignment until the labels are stable or
    max_em_iters is hit; empty clusters are repaired by moving in the
    worst-fit trajectory.  The returned result is the best-objective
    iterate encountered across all runs and iterations, which by the
    shared part seeding can never beat oracle_cluster on the same seed.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    em_opts = em_opts if em_opts is not None else EmOptions()
    t_len, m = _check_dataset(dataset)
    n = opts.hidden_dim
    fitter = _PartFitter(dataset, opts, seed)

    best = None  # (objective, labels, fits, iteration, init converged flag)
    for run in range(em_opts.n_init):
        init_rng = np.random.default_rng(np.random.SeedSequence([seed, 1, run]))
        labels = init_rng.integers(0, k, size=len(dataset))
        run_best = None
        converged = False
        iters = 0
        for it in range(1, em_opts.max_em_iters + 1):
            iters = it
            fits = _repair_empty(labels, k, dataset, fitter, t_len, m, n)
            obj = eval_joint(dataset, Assignment(labels.copy(), k), fits)
            if run_best is None or obj < run_best[0]:
                run_best = (obj, labels.copy(), fits, it)
            new_labels = reassign(dataset, fits).labels
            if np.array_equal(new_labels, labels):
                converged = True
                break
            labels = new_labels
        obj, lab, fits, it = run_best
        if best is None or obj < best[0]:
            best = (obj, lab, fits, it, converged, iters)

    obj, labels, fits, _, converged, iters = best
    return ClusteringResult(
        assignment=Assignment(labels, k),
        fits=fits,
        joint_objective=obj,
        iterations=iters,
        converged=converged,
        seed=seed,
    )


def _canonical_assignments(n_items: int, k: int):
    # Assignments in first-occurrence order (label j appears only after
    # 0..j-1 have), one representative per relabeling class.
    for tup in itertools.product(range(k), repeat=n_items):
        top = -1
        ok = True
        for v in tup:
            if v > top + 1:
                ok = False
                break
            if v == top + 1:
                top = v
        if ok:
            yield tup


def oracle_cluster(dataset: list[Trajectory], k: int, opts: FitOptions,
                   seed: int = 0) -> ClusteringResult:
    """Exact assignment optimum by exhaustive enumeration.

    Evaluates every partition of the dataset into at most k clusters
    (one representative per relabeling class), fitting each part with the
    same content-seeded subproblem solver em_cluster uses, and returns the
    minimum joint objective.  Rejects instances with k**N > 2**20.
    iterations reports the number of assignments evaluated.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    t_len, m = _check_dataset(dataset)
    n_items = len(dataset)
    if k ** n_items > ORACLE_BUDGET:
        raise ValueError(
            f"oracle instance too large: {k}^{n_items} assignments exceed the "
            f"budget of 2^20"
        )
    n = opts.hidden_dim
    fitter = _PartFitter(dataset, opts, seed)

    best = None
    count = 0
    for tup in _canonical_assignments(n_items, k):
        count += 1
        labels = np.array(tup, dtype=np.int64)
        fits = _fits_for(labels, k, fitter, t_len, m, n)
        obj = eval_joint(dataset, Assignment(labels, k), fits)
        if best is None or obj < best[0]:
            best = (obj, labels, fits)

    obj, labels, fits = best
    return ClusteringResult(
        assignment=Assignment(labels, k),
        fits=fits,
        joint_objective=obj,
        iterations=count,
        converged=True,
        seed=seed,
    )


def clustering_result_to_json(result: ClusteringResult) -> dict:
    return {
        "assignment": result.assignment.to_list(),
        "k": result.assignment.k,
        "fits": [f.to_json_dict() for f in result.fits],
        "joint_objective": result.joint_objective,
        "iterations": result.iterations,
        "converged": result.converged,
        "seed": result.seed,
    }


def save_clustering_result(result: ClusteringResult, path: str | Path) -> None:
    Path(path).write_text(json.dumps(clustering_result_to_json(result), indent=1) + "\n")
