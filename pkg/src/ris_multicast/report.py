"""Solution container shared by every solver and baseline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class SolveReport:
    method: str
    Q: Optional[np.ndarray]        # M x M covariance actually transmitted
    theta: Optional[np.ndarray]    # RIS phases in [0, 2*pi)
    gamma: float                   # achieved min SNR (linear)
    capacity_bits: float
    per_user_snr: Optional[np.ndarray] = None
    per_user_rate: Optional[np.ndarray] = None
    trace: list = field(default_factory=list)
    iterations: int = 0
    status: str = "optimal"
    extras: dict = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        def conv(x):
            if isinstance(x, np.ndarray):
                if np.iscomplexobj(x):
                    return {"re": x.real.tolist(), "im": x.imag.tolist()}
                return x.tolist()
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            return x

        return {
            "method": self.method,
            "Q": conv(self.Q),
            "theta": conv(self.theta),
            "gamma": conv(self.gamma),
            "capacity_bits": conv(self.capacity_bits),
            "per_user_snr": conv(self.per_user_snr),
            "per_user_rate": conv(self.per_user_rate),
            "trace": [conv(v) for v in self.trace],
            "iterations": self.iterations,
            "status": self.status,
            "extras": {k: conv(v) for k, v in self.extras.items()},
        }
