"""Energy-efficient precoding for two-hop amplify-and-forward MIMO relays.

Computes source covariance and relay amplification matrices maximizing
the bits-per-Joule efficiency of a dual-hop link, under perfect channel
knowledge or statistical (correlation-only) knowledge of either hop.
"""

from .beamforming import (BeamformingVerdict, BeamInstanceG, BeamInstanceH,
                          fp_condition_g, fp_condition_h, p_cap_g, p_cap_h,
                          threshold_scan_h)
from .fractional import (ConstraintSet, DinkelbachResult, FractionalProblem,
                         InfeasibleStart, LinearCap, QoSConstraint,
                         SubproblemFailure, dinkelbach_maximize)
from .matops import ContractViolation
from .system_model import (ChannelRealization, GEEReport, KroneckerModel,
                           LinkBudget, PrecoderSolution, SystemDims, gee)

__all__ = [
    "BeamformingVerdict", "BeamInstanceG", "BeamInstanceH",
    "ChannelRealization", "ConstraintSet", "ContractViolation",
    "DinkelbachResult", "FractionalProblem", "GEEReport", "InfeasibleStart",
    "KroneckerModel", "LinearCap", "LinkBudget", "PrecoderSolution",
    "QoSConstraint", "SubproblemFailure", "SystemDims",
    "dinkelbach_maximize", "fp_condition_g", "fp_condition_h", "gee",
    "p_cap_g", "p_cap_h", "threshold_scan_h",
]

__version__ = "0.1.0"
