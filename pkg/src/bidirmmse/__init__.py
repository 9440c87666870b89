"""Bidirectional MMSE adaptive receivers for DS-CDMA over time-varying fading."""

from .estimators import (
    BidirectionalCG,
    BidirectionalNLMS,
    ConventionalCG,
    ConventionalNLMS,
    ConventionalRLS,
    DifferentialCG,
    DifferentialNLMS,
)
from .signal import CooperativeConfig, SystemConfig, generate_packet

__version__ = "0.1.0"

__all__ = [
    "BidirectionalCG",
    "BidirectionalNLMS",
    "ConventionalCG",
    "ConventionalNLMS",
    "ConventionalRLS",
    "DifferentialCG",
    "DifferentialNLMS",
    "CooperativeConfig",
    "SystemConfig",
    "generate_packet",
]
