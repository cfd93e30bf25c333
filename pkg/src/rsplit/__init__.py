"""Rate-splitting MU-MIMO downlink under finite PSK constellations.

Monte-Carlo and closed-form ergodic sum-rate evaluation for
constructive-interference (CI) and zero-forcing (ZF) private precoding with
an MRT common stream, under perfect and imperfect CSIT, plus power-split
optimization between the common and private messages.
"""

from .config import PowerSplit, SystemConfig, derive_power_split, pathloss_matrix, sample_user_distance
from .constellation import difference_set, psk_alphabet, stream_vectors
from .errors import (
    ConfigError,
    NotSaturatedError,
    NumericError,
    ResourceCapError,
    RsplitError,
    SingularChannelError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "NotSaturatedError",
    "NumericError",
    "PowerSplit",
    "ResourceCapError",
    "RsplitError",
    "SingularChannelError",
    "SystemConfig",
    "derive_power_split",
    "difference_set",
    "pathloss_matrix",
    "psk_alphabet",
    "sample_user_distance",
    "stream_vectors",
]
