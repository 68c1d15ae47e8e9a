"""Neural drift predictor: training, inference, and probes over the
file-level interchange formats of the simulation package (VFLD velocity
series, DMAP density maps, dataset directories, prediction indexes)."""

from .data import DriftData
from .formats import (
    FieldSeries,
    FormatError,
    read_field_series,
    read_manifest,
    read_map_values,
    write_map_values,
    write_prediction_set,
)
from .losses import batch_loss, drift_loss, position_loss, threshold_loss
from .predict import finalize_maps, predict
from .probe import centroid, validate_report, velocity_inversion_probe, write_report
from .train import (
    TrainConfig,
    TrainResult,
    TrainingError,
    load_checkpoint,
    save_checkpoint,
    train,
    train_one,
)
from .unet import ModelSpec, UNet

__all__ = [
    "DriftData",
    "FieldSeries",
    "FormatError",
    "ModelSpec",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "UNet",
    "batch_loss",
    "centroid",
    "drift_loss",
    "finalize_maps",
    "load_checkpoint",
    "position_loss",
    "predict",
    "read_field_series",
    "read_manifest",
    "read_map_values",
    "save_checkpoint",
    "threshold_loss",
    "train",
    "train_one",
    "validate_report",
    "velocity_inversion_probe",
    "write_map_values",
    "write_prediction_set",
    "write_report",
]
