"""Exports grid-CDF predictive distributions from tabular foundation models."""

from .export import export_bootstrap, export_ppd, export_rollout, read_training_csv
from .models import LocalGaussianStub, ModelUnavailable, TabPFNModel, make_model

__version__ = "0.1.0"
