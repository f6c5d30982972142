"""Domain types and simulation for discrete-time linear dynamical systems.

A system is the quadruple (G, F, Sigma_H, Sigma_O) plus an initial state
phi_0, generating observations through

    phi_t = G phi_{t-1} + w_t,      w_t ~ N(0, Sigma_H)
    x_t   = F' phi_t + v_t,         v_t ~ N(0, Sigma_O)

for t = 1..T, where phi_t is the hidden n-dimensional state and x_t the
observed m-dimensional output.  Everything here is deterministic given an
explicit seeded generator: Gaussian draws go through a fixed inverse-CDF
transform rather than whatever rejection sampler the RNG library ships,
so the same seed gives bit-identical trajectories everywhere.

Conventions: time series are stored as (T, m) arrays with time along rows;
hidden state paths as (T, n).  The observation map F has shape (n, m) and
is applied as its transpose, so output rows are `states @ F`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtri

__all__ = [
    "Trajectory",
    "LdsModel",
    "ClusterFit",
    "standard_normals",
    "simulate",
    "trajectory_error",
    "validate_cluster_fit",
    "dataset_shape",
    "save_dataset",
    "load_dataset",
]

PSD_TOL = 1e-10


@dataclass(eq=False)
class Trajectory:
    """One observed multivariate time series.

    Attributes
    ----------
    id : int
        Identifier, unique within a dataset.
    values : ndarray, shape (T, m)
        Observations, one row per time step.
    true_label : int or None
        Ground-truth class tag when known (synthetic data, UCR labels).
    """

    id: int
    values: np.ndarray
    true_label: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"trajectory values must be 2-D (T, m), got shape {self.values.shape}")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError(f"trajectory needs T >= 1 and m >= 1, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"trajectory {self.id} contains non-finite values")

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.values.shape[1]


@dataclass(eq=False)
class LdsModel:
    """Linear dynamical system parameters.

    Attributes
    ----------
    transition : ndarray, shape (n, n)
        State transition matrix.
    observation : ndarray, shape (n, m)
        Output map, applied as its transpose: x_t = observation' phi_t + noise.
    state_noise_cov : ndarray, shape (n, n)
        Process-noise covariance (PSD).
    obs_noise_cov : ndarray, shape (m, m)
        Observation-noise covariance (PSD).
    init_state : ndarray, shape (n,)
        Initial hidden state phi_0.
    """

    transition: np.ndarray
    observation: np.ndarray
    state_noise_cov: np.ndarray
    obs_noise_cov: np.ndarray
    init_state: np.ndarray

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=np.float64)
        self.observation = np.asarray(self.observation, dtype=np.float64)
        self.state_noise_cov = np.asarray(self.state_noise_cov, dtype=np.float64)
        self.obs_noise_cov = np.asarray(self.obs_noise_cov, dtype=np.float64)
        self.init_state = np.asarray(self.init_state, dtype=np.float64)
        n = self.transition.shape[0]
        if self.transition.shape != (n, n) or n < 1:
            raise ValueError(f"transition must be square n x n with n >= 1, got {self.transition.shape}")
        m = self.observation.shape[1] if self.observation.ndim == 2 else 0
        if self.observation.shape != (n, m) or m < 1:
            raise ValueError(f"observation must be (n, m) = ({n}, m>=1), got {self.observation.shape}")
        if self.state_noise_cov.shape != (n, n):
            raise ValueError(f"state_noise_cov must be ({n}, {n}), got {self.state_noise_cov.shape}")
        if self.obs_noise_cov.shape != (m, m):
            raise ValueError(f"obs_noise_cov must be ({m}, {m}), got {self.obs_noise_cov.shape}")
        if self.init_state.shape != (n,):
            raise ValueError(f"init_state must be ({n},), got {self.init_state.shape}")
        for name in ("transition", "observation", "state_noise_cov", "obs_noise_cov", "init_state"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def hidden_dim(self) -> int:
        return self.transition.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.observation.shape[1]

    def validate(self, tol: float = PSD_TOL) -> None:
        """Raise if either noise covariance is not symmetric PSD within tol."""
        for name in ("state_noise_cov", "obs_noise_cov"):
            _noise_factor(getattr(self, name), name, tol)


@dataclass(eq=False)
class ClusterFit:
    """Fitted per-cluster solution of the identification subproblem.

    Residuals are stored so that the defining recurrences hold exactly:
    ``states[t] = states[t-1] @ transition.T + state_residuals[t-1]`` for
    t >= 1 and ``outputs = states @ observation + output_residuals``.
    """

    transition: np.ndarray        # (n, n)
    observation: np.ndarray       # (n, m)
    states: np.ndarray            # (T, n)
    outputs: np.ndarray           # (T, m)
    state_residuals: np.ndarray   # (T-1, n), transition residuals for t = 2..T
    output_residuals: np.ndarray  # (T, m)
    objective: float
    member_count: int
    converged: bool = True
    iterations: int = 0

    def to_json_dict(self) -> dict:
        return {
            "transition": self.transition.tolist(),
            "observation": self.observation.tolist(),
            "states": self.states.tolist(),
            "outputs": self.outputs.tolist(),
            "state_residuals": self.state_residuals.tolist(),
            "output_residuals": self.output_residuals.tolist(),
            "objective": self.objective,
            "member_count": self.member_count,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def standard_normals(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normal draws via a documented deterministic transform.

    Draws 53-bit integers from the generator, maps them to the open unit
    interval as (k + 0.5) / 2**53, and applies the inverse normal CDF.
    This avoids rejection sampling, so the number of values consumed from
    the bit stream depends only on `shape`.
    """
    k = rng.integers(0, 1 << 53, size=shape)
    u = (k.astype(np.float64) + 0.5) / float(1 << 53)
    return ndtri(u)


def _noise_factor(cov: np.ndarray, name: str, tol: float = PSD_TOL) -> np.ndarray:
    """Factor L with L @ L.T = cov, rejecting non-PSD input by name."""
    if not np.allclose(cov, cov.T, atol=tol, rtol=0.0):
        raise ValueError(f"{name} is not symmetric")
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    # Semi-definite covariances (e.g. rank deficient) are legal; factor via
    # the symmetric eigendecomposition instead.
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() < -tol:
        raise ValueError(
            f"{name} is not positive semidefinite (min eigenvalue {evals.min():.3e})"
        )
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


def simulate(
    model: LdsModel,
    horizon: int,
    rng: np.random.Generator,
    traj_id: int = 0,
    true_label: int | None = None,
) -> Trajectory:
    """Draw one trajectory of length `horizon` from the system.

    The state at t = 1 is one transition step from `model.init_state`,
    i.e. phi_1 = G phi_0 + w_1.  Process noises for t = 1..T are drawn
    first as a (T, n) block, then observation noises as a (T, m) block,
    each via :func:`standard_normals` times the covariance factor.

    Parameters
    ----------
    model : LdsModel
    horizon : int
        Number of observations T >= 1.
    rng : numpy.random.Generator
        Seeded stream; identical seeds reproduce the trajectory bit for bit.
    traj_id, true_label :
        Passed through to the returned :class:`Trajectory`.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    n, m = model.hidden_dim, model.obs_dim
    lh = _noise_factor(model.state_noise_cov, "state_noise_cov")
    lo = _noise_factor(model.obs_noise_cov, "obs_noise_cov")
    w = standard_normals(rng, (horizon, n)) @ lh.T
    v = standard_normals(rng, (horizon, m)) @ lo.T

    states = np.empty((horizon, n))
    prev = model.init_state
    for t in range(horizon):
        prev = model.transition @ prev + w[t]
        states[t] = prev
    x = states @ model.observation + v
    return Trajectory(id=traj_id, values=x, true_label=true_label)


def trajectory_error(x: Trajectory, outputs: np.ndarray) -> float:
    """Sum over time of squared Euclidean distance between x and outputs."""
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.shape != x.values.shape:
        raise ValueError(
            f"shape mismatch: trajectory {x.values.shape} vs outputs {outputs.shape}"
        )
    d = x.values - outputs
    return float(np.sum(d * d))


def validate_cluster_fit(
    fit: ClusterFit,
    members: list[Trajectory],
    feas_tol: float = 1e-8,
    obj_rtol: float = 1e-10,
) -> None:
    """Check the stored fit against its defining constraints.

    Verifies the transition and observation recurrences entrywise to
    `feas_tol` and that `objective` matches the value recomputed from the
    stored fields and member data to relative `obj_rtol`.
    """
    t_len = fit.states.shape[0]
    if t_len >= 2:
        pred = fit.states[:-1] @ fit.transition.T + fit.state_residuals
        err = np.max(np.abs(fit.states[1:] - pred))
        if err > feas_tol:
            raise AssertionError(f"transition recurrence violated by {err:.3e}")
    pred_out = fit.states @ fit.observation + fit.output_residuals
    err = np.max(np.abs(fit.outputs - pred_out))
    if err > feas_tol:
        raise AssertionError(f"observation recurrence violated by {err:.3e}")

    # member_count may legitimately differ from len(members): fitting a
    # single mean trajectory with a forced weight is part of the contract.
    scale = fit.member_count / len(members)
    data_term = scale * sum(trajectory_error(x, fit.outputs) for x in members)
    recomputed = (
        data_term
        + float(np.sum(fit.output_residuals ** 2))
        + float(np.sum(fit.state_residuals ** 2))
    )
    denom = max(abs(recomputed), 1e-300)
    if abs(recomputed - fit.objective) / denom > obj_rtol:
        raise AssertionError(
            f"objective {fit.objective!r} != recomputed {recomputed!r}"
        )


def dataset_shape(dataset: list[Trajectory]) -> tuple[int, int]:
    """Return the shared (T, m) of a dataset, rejecting mixed shapes."""
    if not dataset:
        raise ValueError("empty dataset")
    t_len, m = dataset[0].values.shape
    for x in dataset:
        if x.values.shape != (t_len, m):
            raise ValueError(
                f"trajectory {x.id} has shape {x.values.shape}, expected {(t_len, m)}"
            )
    return t_len, m


# ---------------------------------------------------------------------------
# Serialization: one CSV per trajectory (rows = time steps, columns x_1..x_m)
# plus a JSON sidecar {id, T, m, true_label, seed}.  Floats are written with
# repr(), which round-trips bit-exactly in <= 17 significant digits.

def _traj_basename(traj_id: int) -> str:
    return f"traj_{traj_id:04d}"


def save_trajectory(traj: Trajectory, directory: str | Path, seed: int | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = directory / _traj_basename(traj.id)
    t_len, m = traj.values.shape
    lines = [",".join(f"x_{j + 1}" for j in range(m))]
    for row in traj.values:
        lines.append(",".join(repr(float(v)) for v in row))
    (base.with_suffix(".csv")).write_text("\n".join(lines) + "\n")
    manifest = {
        "id": traj.id,
        "T": t_len,
        "m": m,
        "true_label": traj.true_label,
        "seed": seed,
    }
    (base.with_suffix(".json")).write_text(json.dumps(manifest, indent=1) + "\n")
    return base.with_suffix(".csv")


def load_trajectory(csv_path: str | Path) -> Trajectory:
    csv_path = Path(csv_path)
    manifest = json.loads(csv_path.with_suffix(".json").read_text())
    lines = csv_path.read_text().strip().split("\n")
    rows = [[float(c) for c in line.split(",")] for line in lines[1:]]
    values = np.array(rows, dtype=np.float64)
    if values.shape != (manifest["T"], manifest["m"]):
        raise ValueError(
            f"{csv_path}: data shape {values.shape} disagrees with manifest "
            f"({manifest['T']}, {manifest['m']})"
        )
    return Trajectory(id=manifest["id"], values=values, true_label=manifest["true_label"])


def save_dataset(
    dataset: list[Trajectory], directory: str | Path, seeds: list[int] | None = None
) -> None:
    for i, traj in enumerate(dataset):
        save_trajectory(traj, directory, seed=None if seeds is None else seeds[i])


def load_dataset(directory: str | Path) -> list[Trajectory]:
    directory = Path(directory)
    paths = sorted(directory.glob("traj_*.csv"))
    if not paths:
        raise ValueError(f"no trajectory files found in {directory}")
    dataset = [load_trajectory(p) for p in paths]
    dataset_shape(dataset)
    return dataset
