"""Convex displacement interpolation for parametric fields with moving structures."""
from .cdi import CdiEstimate, CdiModel, cdi_estimate, convex_interpolation, optimal_s, two_field_cdi
from .core import (Disk, Grid, Interval, PointCloud, Rectangle, Snapshot, SortedPointCloud,
                   TrainingDataset, load_dataset, save_dataset)
from .kernels import BACKEND
from .registration import ElasticityConfig, RegistrationConfig, build_registration
from .regression import CloudRegressor

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CdiEstimate", "CdiModel", "CloudRegressor", "Disk", "ElasticityConfig", "Grid",
    "Interval", "PointCloud", "Rectangle", "RegistrationConfig", "Snapshot", "SortedPointCloud",
    "TrainingDataset", "build_registration", "cdi_estimate", "convex_interpolation",
    "load_dataset", "optimal_s", "save_dataset", "two_field_cdi",
]
