"""All-MLP spatial-temporal forecaster with frequency-domain mixing layers
and fixed random projection layers."""

from .model import ModelConfig, RPMixerModel, build_model, path_decompose
from .training import Standardizer, fit

__all__ = ["ModelConfig", "RPMixerModel", "build_model", "path_decompose",
           "Standardizer", "fit"]

__version__ = "0.1.0"
