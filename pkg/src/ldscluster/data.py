"""Dataset construction: seeded synthetic LDS families and UCR-format files.

The synthetic protocol fixes each cluster's system matrices and sweeps a
grid of isotropic noise covariances: one trajectory per (process,
observation) variance combination, so a grid of 4 values yields 16
trajectories per cluster.  UCR files are delimiter-separated rows with the
integer class label in column 0, all rows the same length.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .core import LdsModel, Trajectory, simulate

__all__ = [
    "SyntheticSpec",
    "UcrDataset",
    "default_models",
    "generate_synthetic",
    "load_ucr",
    "sample_two_class",
    "DEFAULT_COV_GRID",
]

DEFAULT_COV_GRID = (0.0004, 0.0016, 0.0036, 0.0064)

# Fixed entropy for the observation-map draws in default_models, so the
# default cluster systems are the same in every process.
_MODEL_SEED = 186282


@dataclass(eq=False)
class SyntheticSpec:
    """Recipe for one synthetic dataset.

    cov_grid entries are variance scalars; each cluster simulates one
    trajectory for every (sigma_h, sigma_o) pair in cov_grid x cov_grid
    with covariances sigma*I.  cluster_models fix (G, F, phi0) per cluster;
    their own covariance fields are ignored.
    """

    cluster_models: list[LdsModel]
    horizon: int = 100
    cov_grid: tuple = DEFAULT_COV_GRID
    seed: int = 0

    def __post_init__(self):
        if not self.cluster_models:
            raise ValueError("need at least one cluster model")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        self.cov_grid = tuple(float(v) for v in self.cov_grid)
        if not self.cov_grid:
            raise ValueError("cov_grid must be non-empty")
        if min(self.cov_grid) < 0:
            raise ValueError("cov_grid entries must be non-negative")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        n = self.cluster_models[0].hidden_dim
        m = self.cluster_models[0].obs_dim
        for c, model in enumerate(self.cluster_models):
            if model.hidden_dim != n or model.obs_dim != m:
                raise ValueError(f"cluster model {c} has mismatched dimensions")

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_models)

    @property
    def size(self) -> int:
        return self.n_clusters * len(self.cov_grid) ** 2


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def default_models(k: int = 2, n: int = 2, m: int = 2) -> list[LdsModel]:
    """Documented default cluster systems.

    Cluster c gets G = 0.99 * rotation(0.3 + 0.9c rad) in the leading 2x2
    block with 0.9 on any remaining diagonal (stable, spectrally distinct
    across clusters), an observation map drawn uniform from a fixed seed,
    and phi0 = (1, 0, ..., 0).  Covariance fields are zero placeholders.
    """
    if n < 2:
        raise ValueError(f"default models need hidden dim >= 2, got {n}")
    if k < 1 or m < 1:
        raise ValueError(f"need k >= 1 and m >= 1, got k={k}, m={m}")
    models = []
    for c in range(k):
        g = 0.9 * np.eye(n)
        g[:2, :2] = 0.99 * _rotation(0.3 + 0.9 * c)
        rng = np.random.default_rng(np.random.SeedSequence([_MODEL_SEED, c, n, m]))
        f_mat = rng.uniform(-1.0, 1.0, (n, m))
        phi0 = np.zeros(n)
        phi0[0] = 1.0
        models.append(LdsModel(
            transition=g,
            observation=f_mat,
            state_noise_cov=np.zeros((n, n)),
            obs_noise_cov=np.zeros((m, m)),
            init_state=phi0,
        ))
    return models


def generate_synthetic(spec: SyntheticSpec) -> list[Trajectory]:
    """Simulate the full covariance grid for every cluster.

    Each trajectory's stream is seeded by (spec seed, cluster, grid row,
    grid column), making the dataset a pure function of the spec.
    """
    n = spec.cluster_models[0].hidden_dim
    m = spec.cluster_models[0].obs_dim
    dataset = []
    traj_id = 0
    for c, template in enumerate(spec.cluster_models):
        for (a, sigma_h), (b, sigma_o) in product(
            enumerate(spec.cov_grid), enumerate(spec.cov_grid)
        ):
            model = LdsModel(
                transition=template.transition,
                observation=template.observation,
                state_noise_cov=sigma_h * np.eye(n),
                obs_noise_cov=sigma_o * np.eye(m),
                init_state=template.init_state,
            )
            rng = np.random.default_rng(np.random.SeedSequence([spec.seed, c, a, b]))
            dataset.append(simulate(model, spec.horizon, rng,
                                    traj_id=traj_id, true_label=c))
            traj_id += 1
    return dataset


@dataclass(eq=False)
class UcrDataset:
    """Rows of a UCR-format file: (label, length-L vector) pairs."""

    sequences: list
    source: str
    length: int

    def label_counts(self) -> dict:
        counts: dict[int, int] = {}
        for label, _ in self.sequences:
            counts[label] = counts.get(label, 0) + 1
        return counts


def load_ucr(path: str | Path, delimiter: str | None = None) -> UcrDataset:
    """Parse a UCR-format file: label in column 0, then L values per row.

    The delimiter is auto-detected (tab if the first data line contains
    one, else comma) unless given.  Ragged rows, non-numeric cells, and
    non-integral labels are rejected with the offending line number.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    sequences = []
    length = None
    delim = delimiter
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if delim is None:
                delim = "\t" if "\t" in line else ","
            parts = line.split(delim)
            if len(parts) < 2:
                raise ValueError(
                    f"{path}:{lineno}: expected a label plus at least one value"
                )
            try:
                row = [float(tok) for tok in parts]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric cell") from None
            label = row[0]
            if label != int(label):
                raise ValueError(f"{path}:{lineno}: label {label!r} is not integral")
            values = np.array(row[1:], dtype=np.float64)
            if length is None:
                length = len(values)
            elif len(values) != length:
                raise ValueError(
                    f"{path}:{lineno}: row has {len(values)} values, expected {length}"
                )
            sequences.append((int(label), values))
    if not sequences:
        raise ValueError(f"{path}: no data rows")
    return UcrDataset(sequences=sequences, source=str(path), length=length)


def sample_two_class(ucr: UcrDataset, normal_label: int, abnormal_label: int,
                     per_class: int, window: int,
                     rng: np.random.Generator) -> list[Trajectory]:
    """Sample per_class rows of each label and window them to length T.

    Sequences are truncated to their first `window` points and emitted as
    univariate trajectories: ids 0..per_class-1 are the normal class
    (true_label 0), the rest the abnormal class (true_label 1).
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if window < 1 or window > ucr.length:
        raise ValueError(f"window must be in [1, {ucr.length}], got {window}")
    dataset = []
    traj_id = 0
    for cluster, wanted in ((0, normal_label), (1, abnormal_label)):
        rows = [seq for label, seq in ucr.sequences if label == wanted]
        if len(rows) < per_class:
            raise ValueError(
                f"class {wanted} has {len(rows)} rows, need {per_class}"
            )
        picks = rng.choice(len(rows), size=per_class, replace=False)
        for idx in picks:
            values = rows[int(idx)][:window, None]
            dataset.append(Trajectory(id=traj_id, values=values, true_label=cluster))
            traj_id += 1
    return dataset
