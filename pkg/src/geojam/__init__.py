"""Simulation and detection of RF jamming on a GEO satellite uplink."""

from .adaptive import AdaptiveConfig, calibrate, detect
from .evaluation import ConfusionMatrix, class_metrics, confusion, cross_domain_eval, roc
from .scenario import StationaryConfig, TimeVariantConfig, gen_stationary, gen_timevariant
from .signal import FEATURE_NAMES, RfLinkConfig
from .stationary import StationaryDetector, fit_detector, load_detector, save_detector

__version__ = "0.1.0"

__all__ = [
    "AdaptiveConfig",
    "ConfusionMatrix",
    "FEATURE_NAMES",
    "RfLinkConfig",
    "StationaryConfig",
    "StationaryDetector",
    "TimeVariantConfig",
    "calibrate",
    "class_metrics",
    "confusion",
    "cross_domain_eval",
    "detect",
    "fit_detector",
    "gen_stationary",
    "gen_timevariant",
    "load_detector",
    "roc",
    "save_detector",
]
