"""Joint clustering and linear dynamical system identification.

Partitions a set of multivariate time series into K clusters while fitting
one linear dynamical system per cluster, by minimizing a shared
least-squares objective.  Ships an alternating fit/reassign heuristic, an
exhaustive exact oracle for small instances, DTW and Fourier-distance
baselines, F1 scoring, synthetic and UCR-format data handling, and a
seeded benchmark harness with CSV and figure output.
"""

from .baselines import (DistanceMatrix, baseline_cluster, distance_matrix,
                        dtw_distance, fft_distance, kmedoids)
from .cluster import (Assignment, ClusteringResult, EmOptions, em_cluster,
                      eval_joint, oracle_cluster, reassign)
from .core import (ClusterFit, LdsModel, Trajectory, load_dataset,
                   save_dataset, simulate, standard_normals, trajectory_error,
                   validate_cluster_fit)
from .data import (SyntheticSpec, UcrDataset, default_models,
                   generate_synthetic, load_ucr, sample_two_class)
from .fit import FitOptions, fit_cluster, solve_matrices, solve_states, update_outputs
from .harness import ExperimentConfig, RunRecord, load_config, run_experiment
from .metrics import TrialStats, aggregate, f1_pair

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "ClusterFit",
    "ClusteringResult",
    "DistanceMatrix",
    "EmOptions",
    "ExperimentConfig",
    "FitOptions",
    "LdsModel",
    "RunRecord",
    "SyntheticSpec",
    "Trajectory",
    "TrialStats",
    "UcrDataset",
    "aggregate",
    "baseline_cluster",
    "default_models",
    "distance_matrix",
    "dtw_distance",
    "em_cluster",
    "eval_joint",
    "fft_distance",
    "f1_pair",
    "fit_cluster",
    "generate_synthetic",
    "kmedoids",
    "load_config",
    "load_dataset",
    "load_ucr",
    "oracle_cluster",
    "reassign",
    "run_experiment",
    "sample_two_class",
    "save_dataset",
    "simulate",
    "solve_matrices",
    "solve_states",
    "standard_normals",
    "trajectory_error",
    "update_outputs",
    "validate_cluster_fit",
]
