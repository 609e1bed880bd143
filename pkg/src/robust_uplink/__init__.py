"""Robust two-cell uplink: layered broadcast coding over two-state backhaul."""
from .errors import (
    ConfigError,
    DegenerateCapacityError,
    DomainError,
    InfeasibleError,
    NoPositiveRootError,
    RobustUplinkError,
    SingularCovarianceError,
    SingularDenominatorError,
)
from .model import BackhaulState, ChannelGains, HermitianM2, SystemParams
from .nonfading import (
    achievable_throughput,
    layer_bounds,
    optimize_scheme,
    sigma_joint,
    sigma_separate,
    upper_bound,
)
from .fading import FadingRates, mc_average_throughput, optimize_fading
from .estimators import FadingBroadcastOptimizer, LayeredBroadcastOptimizer

__version__ = "0.1.0"

__all__ = [
    "BackhaulState",
    "ChannelGains",
    "ConfigError",
    "DegenerateCapacityError",
    "DomainError",
    "FadingBroadcastOptimizer",
    "FadingRates",
    "HermitianM2",
    "InfeasibleError",
    "LayeredBroadcastOptimizer",
    "NoPositiveRootError",
    "RobustUplinkError",
    "SingularCovarianceError",
    "SingularDenominatorError",
    "SystemParams",
    "achievable_throughput",
    "layer_bounds",
    "mc_average_throughput",
    "optimize_fading",
    "optimize_scheme",
    "sigma_joint",
    "sigma_separate",
    "upper_bound",
]
