"""Max-min capacity of an RIS-assisted multi-antenna multicast channel.

Solvers (barrier gradient descent, alternating optimization, single-user
special case), validation oracles (brute force, closed forms), asymptotic
bound curves, and a reproducible Monte-Carlo sweep harness.
"""

from . import (alternating, barrier, baselines, bounds, harness, intervals,
               model, objective, sdp_engine, special_case)
from .model import (ChannelRealization, Geometry, RicianParams, SystemDims,
                    pathloss_gain, sample_channels, ura_response)
from .objective import (PhaseConfig, TransmitCovariance, min_rate, rate, snr,
                        trig_expansion)
from .report import SolveReport

__version__ = "0.1.0"

__all__ = [
    "alternating", "barrier", "baselines", "bounds", "harness", "intervals",
    "model", "objective", "sdp_engine", "special_case",
    "ChannelRealization", "Geometry", "RicianParams", "SystemDims",
    "pathloss_gain", "sample_channels", "ura_response",
    "PhaseConfig", "TransmitCovariance", "min_rate", "rate", "snr",
    "trig_expansion", "SolveReport", "__version__",
]
