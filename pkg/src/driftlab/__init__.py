"""driftlab: probabilistic ocean-drift simulation and dataset tooling.

Builds probability-density-map datasets from Lagrangian particle ensembles:
synthetic or ingested velocity fields, RK4 particle advection with boundary
termination, perturbed-ensemble trajectories, density-map construction, and
masked loss evaluation.
"""

from .advection import (
    AdvectionConfig,
    Particle,
    ParticleStatus,
    advect_trajectory,
    check_boundary,
    rk4_step,
    sample_velocity,
)
from .backend import BACKEND_NAME, available_backends, get_kernels
from .dataset import (
    DatasetSplit,
    DriftDataset,
    SnapshotPair,
    extract_pairs,
    read_dataset,
    split_trajectories,
    velocity_channels,
    write_dataset,
)
from .density import (
    DensityMap,
    build_density_map,
    histogram,
    read_density_map,
    read_map_values,
    smooth,
    write_density_map,
)
from .ensemble import (
    DeploymentPlan,
    EnsembleConfig,
    ProbabilisticTrajectory,
    deploy,
    deployment_days,
    perturb_initial,
    read_trajectory,
    simulate_probabilistic_trajectory,
    write_trajectory,
)
from .errors import DataError, FormatError
from .grid import (
    DomainGrid,
    SyntheticFlowSpec,
    VelocityFieldSeries,
    align_staggered_to_centers,
    downgrade_resolution,
    generate_synthetic_series,
    load_field_series,
    store_field_series,
    synthetic_land_mask,
)
from .metrics import (
    LossKind,
    LossReport,
    clip_negative,
    evaluate_predictions,
    identity_baseline,
    l_drift,
    l_position,
    l_threshold,
    read_loss_report,
    read_prediction_set,
    recover_from_drift,
    write_loss_report,
    write_prediction_set,
)

__version__ = "0.1.0"

__all__ = [
    "AdvectionConfig",
    "BACKEND_NAME",
    "DataError",
    "DatasetSplit",
    "DensityMap",
    "DeploymentPlan",
    "DomainGrid",
    "DriftDataset",
    "EnsembleConfig",
    "FormatError",
    "LossKind",
    "LossReport",
    "Particle",
    "ParticleStatus",
    "ProbabilisticTrajectory",
    "SnapshotPair",
    "SyntheticFlowSpec",
    "VelocityFieldSeries",
    "advect_trajectory",
    "align_staggered_to_centers",
    "available_backends",
    "build_density_map",
    "check_boundary",
    "clip_negative",
    "deploy",
    "deployment_days",
    "downgrade_resolution",
    "evaluate_predictions",
    "extract_pairs",
    "generate_synthetic_series",
    "get_kernels",
    "histogram",
    "identity_baseline",
    "l_drift",
    "l_position",
    "l_threshold",
    "load_field_series",
    "perturb_initial",
    "read_dataset",
    "read_density_map",
    "read_loss_report",
    "read_map_values",
    "read_prediction_set",
    "read_trajectory",
    "recover_from_drift",
    "rk4_step",
    "sample_velocity",
    "simulate_probabilistic_trajectory",
    "smooth",
    "split_trajectories",
    "store_field_series",
    "synthetic_land_mask",
    "velocity_channels",
    "write_dataset",
    "write_density_map",
    "write_loss_report",
    "write_prediction_set",
    "write_trajectory",
]
