"""Alternating clustering, exhaustive oracle, and the joint objective."""

import itertools
import json

import numpy as np
import pytest

from ldscluster.cluster import (Assignment, EmOptions, eval_joint, em_cluster,
                                oracle_cluster, reassign,
                                save_clustering_result)
from ldscluster.core import Trajectory, trajectory_error
from ldscluster.data import SyntheticSpec, default_models, generate_synthetic
from ldscluster.fit import FitOptions, fit_cluster


def _opts(**kw):
    base = dict(hidden_dim=2, max_outer_iters=60, rel_tol=1e-7, restarts=2)
    base.update(kw)
    return FitOptions(**base)


def _noiseless_pair(t_len=30, reps=3, seed=0):
    """reps copies each of two noiseless rotation trajectories."""
    base = generate_synthetic(SyntheticSpec(
        default_models(2, 2, 2), horizon=t_len, cov_grid=[0.0], seed=seed))
    data = []
    for c in (0, 1):
        for r in range(reps):
            data.append(Trajectory(id=c * reps + r, values=base[c].values.copy(),
                                   true_label=c))
    return data


def _fits_for_labels(data, labels, k, opts, seed):
    fits = []
    for c in range(k):
        members = [x for x, lab in zip(data, labels) if lab == c]
        key = tuple(sorted(x.id for x in members))
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0, *key]))
        fits.append(fit_cluster(members, opts, rng))
    return fits


# ---------------------------------------------------------------- eval_joint

def test_eval_joint_zero_on_perfect_fit():
    rng = np.random.default_rng(1)
    data = [Trajectory(i, rng.normal(size=(4, 2))) for i in range(2)]
    fits = _fits_for_labels(data, [0, 1], 2, _opts(), seed=0)
    for f in fits:
        f.output_residuals = np.zeros_like(f.output_residuals)
        f.state_residuals = np.zeros_like(f.state_residuals)
        f.outputs = None
    fits[0].outputs = data[0].values.copy()
    fits[1].outputs = data[1].values.copy()
    assert eval_joint(data, Assignment([0, 1], 2), fits) == 0.0


def test_eval_joint_identical_fits_assignment_independent():
    rng = np.random.default_rng(2)
    data = [Trajectory(i, rng.normal(size=(5, 2))) for i in range(4)]
    fit = fit_cluster(data, _opts(), np.random.default_rng(0))
    for labels in itertools.product(range(2), repeat=4):
        a = eval_joint(data, Assignment(list(labels), 2), [fit, fit])
        b = eval_joint(data, Assignment([0] * 4, 2), [fit, fit])
        assert a == b


def test_eval_joint_matches_naive_sum():
    rng = np.random.default_rng(3)
    data = [Trajectory(i, rng.normal(size=(6, 2))) for i in range(5)]
    labels = [0, 1, 0, 1, 1]
    fits = _fits_for_labels(data, labels, 2, _opts(), seed=4)
    naive = 0.0
    for x, lab in zip(data, labels):
        naive += np.sum((x.values - fits[lab].outputs) ** 2)
    for f in fits:
        naive += np.sum(f.output_residuals ** 2) + np.sum(f.state_residuals ** 2)
    got = eval_joint(data, Assignment(labels, 2), fits)
    assert got == pytest.approx(naive, rel=1e-12)


def test_eval_joint_relabeling_symmetry_exact():
    rng = np.random.default_rng(5)
    data = [Trajectory(i, rng.normal(size=(6, 2))) for i in range(5)]
    labels = np.array([0, 1, 2, 1, 0])
    fits = _fits_for_labels(data, labels, 3, _opts(), seed=9)
    base = eval_joint(data, Assignment(labels, 3), fits)
    for perm in itertools.permutations(range(3)):
        mapping = np.array(perm)
        permuted_fits = [None] * 3
        for c in range(3):
            permuted_fits[mapping[c]] = fits[c]
        got = eval_joint(data, Assignment(mapping[labels], 3), permuted_fits)
        assert got == base  # fsum makes the value order-independent


def test_eval_joint_rejects_bad_labels():
    data = [Trajectory(0, np.ones((3, 1)))]
    fit = fit_cluster(data, _opts(hidden_dim=1), np.random.default_rng(0))
    with pytest.raises(ValueError):
        eval_joint(data, Assignment([0], 2), [fit])
    with pytest.raises(ValueError):
        eval_joint(data, Assignment([0, 0], 1), [fit])


# ---------------------------------------------------------------- reassign

def test_reassign_exact_match_and_tie_rule():
    a = np.zeros((4, 1))
    b = np.ones((4, 1))
    fits = _fits_for_labels(
        [Trajectory(0, a), Trajectory(1, b)], [0, 1], 2,
        _opts(hidden_dim=1, restarts=4, max_outer_iters=200), seed=0)
    data = [
        Trajectory(10, fits[0].outputs.copy()),   # exactly cluster 0
        Trajectory(11, fits[1].outputs.copy()),   # exactly cluster 1
        Trajectory(12, (fits[0].outputs + fits[1].outputs) / 2.0),  # tie
    ]
    labels = reassign(data, fits).to_list()
    assert labels[0] == 0
    assert labels[1] == 1
    assert labels[2] == 0  # equidistant goes to the lowest index


def test_reassign_matches_brute_force():
    rng = np.random.default_rng(6)
    data = [Trajectory(i, rng.normal(size=(5, 2))) for i in range(7)]
    fits = _fits_for_labels(data[:4], [0, 1, 2, 1], 3, _opts(), seed=2)
    got = reassign(data, fits).to_list()
    for i, x in enumerate(data):
        errs = [trajectory_error(x, f.outputs) for f in fits]
        assert got[i] == int(np.argmin(errs))


def test_reassign_no_single_swap_improves():
    rng = np.random.default_rng(7)
    data = [Trajectory(i, rng.normal(size=(5, 2))) for i in range(6)]
    fits = _fits_for_labels(data, [0, 0, 0, 1, 1, 1], 2, _opts(), seed=3)
    labels = reassign(data, fits).labels
    base = sum(trajectory_error(x, fits[lab].outputs)
               for x, lab in zip(data, labels))
    for i in range(len(data)):
        for c in range(2):
            if c == labels[i]:
                continue
            moved = labels.copy()
            moved[i] = c
            alt = sum(trajectory_error(x, fits[lab].outputs)
                      for x, lab in zip(data, moved))
            assert alt >= base - 1e-12


# ---------------------------------------------------------------- em_cluster

def test_em_single_cluster_degenerate():
    rng = np.random.default_rng(8)
    data = [Trajectory(i, rng.normal(size=(6, 2))) for i in range(3)]
    res = em_cluster(data, 1, _opts(), seed=0)
    assert res.assignment.to_list() == [0, 0, 0]
    assert res.converged
    assert res.iterations == 1
    assert len(res.fits) == 1


def test_em_noiseless_recovery():
    data = _noiseless_pair(t_len=40, reps=4)
    truth = np.array([x.true_label for x in data])
    res = em_cluster(data, 2, _opts(restarts=1), EmOptions(n_init=10), seed=0)
    got = res.assignment.labels
    assert (np.array_equal(got, truth) or np.array_equal(got, 1 - truth))


def test_em_objective_matches_recompute():
    rng = np.random.default_rng(9)
    data = [Trajectory(i, rng.normal(size=(6, 2))) for i in range(5)]
    res = em_cluster(data, 2, _opts(), seed=5)
    recomputed = eval_joint(data, res.assignment, res.fits)
    assert abs(recomputed - res.joint_objective) <= 1e-10 * max(abs(recomputed), 1.0)
    assert res.seed == 5


def test_em_deterministic():
    rng = np.random.default_rng(10)
    data = [Trajectory(i, rng.normal(size=(6, 2))) for i in range(5)]
    a = em_cluster(data, 2, _opts(), EmOptions(n_init=2), seed=3)
    b = em_cluster(data, 2, _opts(), EmOptions(n_init=2), seed=3)
    assert a.joint_objective == b.joint_objective
    assert a.assignment.to_list() == b.assignment.to_list()


def test_em_more_inits_never_worse():
    rng = np.random.default_rng(11)
    data = [Trajectory(i, rng.normal(size=(6, 2))) for i in range(6)]
    one = em_cluster(data, 2, _opts(), EmOptions(n_init=1), seed=4)
    four = em_cluster(data, 2, _opts(), EmOptions(n_init=4), seed=4)
    assert four.joint_objective <= one.joint_objective


def test_em_longer_runs_never_worse():
    rng = np.random.default_rng(12)
    data = [Trajectory(i, rng.normal(size=(6, 2))) for i in range(6)]
    short = em_cluster(data, 2, _opts(), EmOptions(max_em_iters=1), seed=4)
    longer = em_cluster(data, 2, _opts(), EmOptions(max_em_iters=12), seed=4)
    assert longer.joint_objective <= short.joint_objective


def test_em_repairs_empty_clusters():
    # k = N forces initially empty clusters with high probability; every
    # cluster must end up nonempty when enough trajectories exist
    rng = np.random.default_rng(13)
    data = [Trajectory(i, rng.normal(size=(5, 1)) + 10 * i) for i in range(4)]
    res = em_cluster(data, 4, _opts(hidden_dim=1), seed=1)
    sizes = np.bincount(res.assignment.labels, minlength=4)
    assert (sizes >= 1).all()


def test_em_input_validation():
    data = [Trajectory(0, np.ones((3, 1)))]
    with pytest.raises(ValueError):
        em_cluster(data, 0, _opts(hidden_dim=1))
    with pytest.raises(ValueError):
        em_cluster(data, 1, _opts(hidden_dim=1), seed=-1)
    dup = [Trajectory(0, np.ones((3, 1))), Trajectory(0, np.ones((3, 1)))]
    with pytest.raises(ValueError, match="unique"):
        em_cluster(dup, 1, _opts(hidden_dim=1))


# ---------------------------------------------------------------- oracle

def test_oracle_splits_two_distinct():
    data = [
        Trajectory(0, np.zeros((6, 1))),
        Trajectory(1, np.ones((6, 1)) * 5),
    ]
    res = oracle_cluster(data, 2, _opts(hidden_dim=1), seed=0)
    assert sorted(res.assignment.to_list()) == [0, 1]
    assert res.iterations == 2  # canonical assignments of 2 items into <= 2 parts


def test_oracle_recovers_noiseless_partition():
    data = _noiseless_pair(t_len=25, reps=3)
    truth = np.array([x.true_label for x in data])
    res = oracle_cluster(data, 2, _opts(restarts=1), seed=0)
    got = res.assignment.labels
    assert (np.array_equal(got, truth) or np.array_equal(got, 1 - truth))
    recomputed = eval_joint(data, res.assignment, res.fits)
    assert abs(recomputed - res.joint_objective) <= 1e-10 * max(abs(recomputed), 1.0)


def test_oracle_counts_canonical_assignments():
    rng = np.random.default_rng(15)
    data = [Trajectory(i, rng.normal(size=(4, 1))) for i in range(5)]
    res = oracle_cluster(data, 2, _opts(hidden_dim=1, restarts=1), seed=0)
    assert res.iterations == 2 ** 4  # 16 canonical two-part assignments of 5 items
    assert res.converged


def test_oracle_budget_error():
    data = [Trajectory(i, np.ones((2, 1))) for i in range(21)]
    with pytest.raises(ValueError, match="budget"):
        oracle_cluster(data, 2, _opts(hidden_dim=1))


def test_em_never_beats_oracle():
    rng = np.random.default_rng(16)
    for seed in range(4):
        data = [Trajectory(i, rng.normal(size=(8, 1))) for i in range(5)]
        opts = _opts(hidden_dim=1, restarts=1, max_outer_iters=30, rel_tol=1e-6)
        em = em_cluster(data, 2, opts, EmOptions(n_init=3), seed=seed)
        orc = oracle_cluster(data, 2, opts, seed=seed)
        assert em.joint_objective >= orc.joint_objective


# ---------------------------------------------------------------- export

def test_save_clustering_result_round_trip(tmp_path):
    rng = np.random.default_rng(17)
    data = [Trajectory(i, rng.normal(size=(4, 1))) for i in range(3)]
    res = em_cluster(data, 2, _opts(hidden_dim=1), seed=0)
    out = tmp_path / "result.json"
    save_clustering_result(res, out)
    back = json.loads(out.read_text())
    assert back["assignment"] == res.assignment.to_list()
    assert back["k"] == 2
    assert back["joint_objective"] == res.joint_objective
    assert back["seed"] == 0
    assert len(back["fits"]) == 2
    assert np.array_equal(np.array(back["fits"][0]["transition"]),
                          res.fits[0].transition)
