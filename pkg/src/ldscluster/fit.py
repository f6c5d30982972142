"""Per-cluster LDS identification by exact block-coordinate descent.

The subproblem: given member trajectories X^1..X^{N_c} of a cluster, find
(G, F, f, phi) minimizing

    sum_i sum_t ||X^i_t - f_t||^2
      + sum_t ||f_t - F' phi_t||^2
      + sum_{t>=2} ||phi_t - G phi_{t-1}||^2.

Every block has a closed-form minimizer, so descent alternates exact
updates and the objective is non-increasing by construction:

  * f-step: per-time convex combination of the member mean and F'phi_t.
  * (G, F)-step: two independent linear least-squares problems, entries
    clamped to [-B, B] to remove the scale degeneracy between phi and F.
  * phi-step: a symmetric block-tridiagonal positive-semidefinite system,
    solved in banded form.

The data enters only through the pointwise mean X-bar and the member count
N_c (the sum over members collapses to N_c ||X-bar_t - f_t||^2 plus a
constant scatter term), which fit_cluster exploits throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .core import ClusterFit, Trajectory, dataset_shape

__all__ = ["FitOptions", "fit_cluster", "solve_states", "solve_matrices", "update_outputs"]

# Ridge added to the state system diagonal when the unregularized solve
# reports a singular matrix; approximates the minimum-norm solution.
STATE_RIDGE = 1e-10


@dataclass
class FitOptions:
    """Knobs for fit_cluster.

    hidden_dim is the state dimension n; the rest control the descent:
    restarts independent random initializations, up to max_outer_iters
    sweeps each, stopping when the relative objective improvement falls
    below rel_tol.  matrix_bound clamps G and F entries; init_scale sets
    the half-width of the uniform initialization for G and F.
    """

    hidden_dim: int
    max_outer_iters: int = 500
    rel_tol: float = 1e-7
    restarts: int = 10
    matrix_bound: float = 10.0
    init_scale: float = 1.0

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.max_outer_iters < 1:
            raise ValueError(f"max_outer_iters must be >= 1, got {self.max_outer_iters}")
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if not self.matrix_bound > 0:
            raise ValueError(f"matrix_bound must be positive, got {self.matrix_bound}")
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")


def update_outputs(mean_traj: np.ndarray, weight: float, f_mat: np.ndarray,
                   states: np.ndarray) -> np.ndarray:
    """Closed-form f-step.

    Minimizes weight*||xbar_t - f_t||^2 + ||f_t - F'phi_t||^2 per time step:
    f_t = (weight*xbar_t + F'phi_t) / (weight + 1).
    """
    return (weight * mean_traj + states @ f_mat) / (weight + 1.0)


def solve_matrices(states: np.ndarray, outputs: np.ndarray, bound: float,
                   g_prev: np.ndarray | None = None,
                   f_prev: np.ndarray | None = None):
    """Least-squares (G, F)-step with entry clamping.

    G minimizes sum_{t>=2} ||phi_t - G phi_{t-1}||^2 and F minimizes
    sum_t ||f_t - F'phi_t||^2; both via minimum-norm least squares, then
    every entry clipped to [-bound, bound].  Clipping a minimizer can make
    it worse than the incumbent, so when a previous matrix is supplied and
    clipping actually modified the solution, whichever of the two scores
    better on its own term is kept; the step is then never objective-
    increasing.  With T = 1 there is no transition data, so G is returned
    unchanged (zeros when no g_prev is supplied).  All-zero states yield
    G = 0, F = 0.
    """
    t_len, n = states.shape
    if t_len >= 2:
        g_raw = np.linalg.lstsq(states[:-1], states[1:], rcond=None)[0].T
        g = np.clip(g_raw, -bound, bound)
        if g_prev is not None and not np.array_equal(g, g_raw):
            prev = np.clip(g_prev, -bound, bound)
            cand_err = np.sum((states[1:] - states[:-1] @ g.T) ** 2)
            prev_err = np.sum((states[1:] - states[:-1] @ prev.T) ** 2)
            if prev_err < cand_err:
                g = prev
    elif g_prev is not None:
        g = np.clip(g_prev, -bound, bound)
    else:
        g = np.zeros((n, n))

    f_raw = np.linalg.lstsq(states, outputs, rcond=None)[0]
    f_mat = np.clip(f_raw, -bound, bound)
    if f_prev is not None and not np.array_equal(f_mat, f_raw):
        prev = np.clip(f_prev, -bound, bound)
        cand_err = np.sum((outputs - states @ f_mat) ** 2)
        prev_err = np.sum((outputs - states @ prev) ** 2)
        if prev_err < cand_err:
            f_mat = prev
    return g, f_mat


def _banded_block(diag_block: np.ndarray, sub_block: np.ndarray) -> np.ndarray:
    # Lower-form banded columns for one n x n diagonal block with sub_block
    # directly below it: column c holds diag_block[c:, c] then sub_block[:, c].
    n = diag_block.shape[0]
    big = np.vstack([diag_block, sub_block, np.zeros((n, n))])
    rows = np.arange(2 * n)[:, None] + np.arange(n)[None, :]
    return big[rows, np.arange(n)[None, :]]


def _dense_state_system(g: np.ndarray, f_mat: np.ndarray, t_len: int) -> np.ndarray:
    n = g.shape[0]
    q = f_mat @ f_mat.T
    gtg = g.T @ g
    eye = np.eye(n)
    a = np.zeros((t_len * n, t_len * n))
    for t in range(t_len):
        d = q.copy()
        if t >= 1:
            d += eye
        if t < t_len - 1:
            d += gtg
        a[t * n:(t + 1) * n, t * n:(t + 1) * n] = d
        if t < t_len - 1:
            a[(t + 1) * n:(t + 2) * n, t * n:(t + 1) * n] = -g
            a[t * n:(t + 1) * n, (t + 1) * n:(t + 2) * n] = -g.T
    return a


def solve_states(g: np.ndarray, f_mat: np.ndarray, outputs: np.ndarray) -> np.ndarray:
    """phi-step: exact minimizer of the state quadratic with (G, F, f) fixed.

    Solves the normal equations of

        sum_t ||f_t - F'phi_t||^2 + sum_{t>=2} ||phi_t - G phi_{t-1}||^2

    whose Hessian is symmetric block-tridiagonal with bandwidth 2n-1:
    diagonal blocks FF' + G'G (t=1), FF' + I + G'G (1<t<T), FF' + I (t=T),
    off-diagonal blocks -G.  Solved via a banded Cholesky factorization.
    Singular systems return the minimum-norm solution: structurally
    rank-deficient ones (n > m*T) go straight to a dense least-squares
    solve, and a numerically singular factorization retries with a ridge
    of 1e-10 on the diagonal before the same dense fallback.
    """
    g = np.asarray(g, dtype=np.float64)
    f_mat = np.asarray(f_mat, dtype=np.float64)
    outputs = np.asarray(outputs, dtype=np.float64)
    t_len, m = outputs.shape
    n = g.shape[0]
    if f_mat.shape != (n, m):
        raise ValueError(f"observation map must be ({n}, {m}), got {f_mat.shape}")
    rhs = (outputs @ f_mat.T).ravel()

    if n > m * t_len:
        # The Hessian has rank at most m*T + n*(T-1) < n*T: the minimizer
        # is never unique, so take the minimum-norm solution directly.
        dense = _dense_state_system(g, f_mat, t_len)
        return np.linalg.lstsq(dense, rhs, rcond=None)[0].reshape(t_len, n)

    q = f_mat @ f_mat.T
    if t_len == 1:
        try:
            return np.linalg.solve(q, rhs).reshape(1, n)
        except np.linalg.LinAlgError:
            try:
                return np.linalg.solve(q + STATE_RIDGE * np.eye(n), rhs).reshape(1, n)
            except np.linalg.LinAlgError:
                return np.linalg.lstsq(q, rhs, rcond=None)[0].reshape(1, n)

    gtg = g.T @ g
    eye = np.eye(n)
    first = _banded_block(q + gtg, -g)
    last = _banded_block(q + eye, np.zeros((n, n)))
    if t_len == 2:
        ab = np.hstack([first, last])
    else:
        mid = _banded_block(q + eye + gtg, -g)
        ab = np.hstack([first, np.tile(mid, (1, t_len - 2)), last])

    try:
        sol = solveh_banded(ab, rhs, lower=True)
    except np.linalg.LinAlgError:
        ab_r = ab.copy()
        ab_r[0] += STATE_RIDGE
        try:
            sol = solveh_banded(ab_r, rhs, lower=True)
        except np.linalg.LinAlgError:
            dense = _dense_state_system(g, f_mat, t_len)
            sol = np.linalg.lstsq(dense, rhs, rcond=None)[0]
    return sol.reshape(t_len, n)


def _descent_objective(mean_traj, weight, g, f_mat, states, outputs):
    # Objective with the constant within-cluster scatter dropped; all
    # descent decisions (monotonicity, convergence, restart choice) use
    # this so they depend on members only through (mean, weight).
    data = weight * float(np.sum((mean_traj - outputs) ** 2))
    obs_pen = float(np.sum((outputs - states @ f_mat) ** 2))
    if states.shape[0] >= 2:
        proc_pen = float(np.sum((states[1:] - states[:-1] @ g.T) ** 2))
    else:
        proc_pen = 0.0
    return data + obs_pen + proc_pen


def fit_cluster(members: list[Trajectory], opts: FitOptions, rng: np.random.Generator,
                member_count: int | None = None) -> ClusterFit:
    """Fit one cluster's LDS by multi-start block-coordinate descent.

    Runs opts.restarts independent descents from random (G, F) and keeps
    the strictly best objective (ties resolved to the earliest restart).
    Within a restart the objective never increases: each sweep applies the
    exact per-block minimizers, and a sweep that fails to improve (possible
    only through entry clamping or the singular-system ridge) is discarded,
    ending that restart at the previous iterate.

    member_count overrides the weight on the data term; by default it is
    len(members).  Fitting the pointwise-mean trajectory with member_count
    forced to N_c reproduces the exact fit of the N_c members (the
    objectives differ by the constant within-cluster scatter).
    """
    if not members:
        raise ValueError("fit_cluster requires at least one member trajectory")
    t_len, m = dataset_shape(members)
    n = opts.hidden_dim
    weight = float(len(members) if member_count is None else member_count)
    if weight < 1:
        raise ValueError(f"member_count must be >= 1, got {member_count}")

    stack = np.stack([x.values for x in members])
    mean_traj = stack.mean(axis=0)
    if not np.all(np.isfinite(mean_traj)):
        raise ValueError("member data contains non-finite values")
    scatter = float(np.sum((stack - mean_traj) ** 2))

    best = None
    bound = opts.matrix_bound
    for _ in range(opts.restarts):
        g = np.clip(rng.uniform(-opts.init_scale, opts.init_scale, (n, n)), -bound, bound)
        f_mat = np.clip(rng.uniform(-opts.init_scale, opts.init_scale, (n, m)), -bound, bound)
        states = solve_states(g, f_mat, mean_traj)
        outputs = update_outputs(mean_traj, weight, f_mat, states)
        obj = _descent_objective(mean_traj, weight, g, f_mat, states, outputs)
        converged = False
        iters = 0
        for it in range(1, opts.max_outer_iters + 1):
            g_new, f_new = solve_matrices(states, outputs, opts.matrix_bound,
                                          g_prev=g, f_prev=f_mat)
            states_new = solve_states(g_new, f_new, outputs)
            outputs_new = update_outputs(mean_traj, weight, f_new, states_new)
            obj_new = _descent_objective(mean_traj, weight, g_new, f_new,
                                         states_new, outputs_new)
            if not np.isfinite(obj_new) or obj_new > obj:
                converged = True
                break
            iters = it
            g, f_mat, states, outputs = g_new, f_new, states_new, outputs_new
            improvement = (obj - obj_new) / max(obj, 1e-300)
            obj = obj_new
            if improvement < opts.rel_tol:
                converged = True
                break
        if best is None or obj < best[0]:
            best = (obj, g, f_mat, states, outputs, converged, iters)

    obj, g, f_mat, states, outputs, converged, iters = best
    obs_residuals = outputs - states @ f_mat
    state_residuals = states[1:] - states[:-1] @ g.T
    # Reported objective restores the scatter constant so it equals the
    # true member-sum subproblem value; weight/len rescales correctly when
    # member_count was forced.
    objective = obj + (weight / len(members)) * scatter
    return ClusterFit(
        transition=g,
        observation=f_mat,
        states=states,
        outputs=outputs,
        state_residuals=state_residuals,
        output_residuals=obs_residuals,
        objective=float(objective),
        member_count=int(weight),
        converged=converged,
        iterations=iters,
    )
