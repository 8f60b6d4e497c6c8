"""Channel model for the RIS-assisted multicast link.

Rician fading with uniform-rectangular-array (URA) line-of-sight components,
direct BS-user links, cascaded BS-RIS-user channels, and far-field path loss.
All draws are driven by a counter-based (Philox) generator so a (dims, params,
seed) triple replays bit-identically regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

TWO_PI = 2.0 * np.pi

# 3GPP-style large-scale fading used for the geometry experiments.
PATHLOSS_REF = 10.0 ** (-3.75)
PATHLOSS_EXPONENT = 3.76


def pathloss_gain(distance_m: float) -> float:
    """Linear power gain at distance d meters: 10^-3.75 / d^3.76."""
    if not distance_m > 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return PATHLOSS_REF * float(distance_m) ** (-PATHLOSS_EXPONENT)


def wrap_angle(theta):
    """Wrap angles (scalar or array) into [0, 2*pi)."""
    return np.mod(theta, TWO_PI)


def ura_response(m1: int, m2: int, omega: float, theta: float,
                 d_over_lambda: float) -> np.ndarray:
    """URA response vector of length m1*m2.

    Column-stacking of the rank-1 outer product of the two axis responses,
    a(m1) along x (phase step sin(omega)cos(theta)) and the conjugated a(m2)
    along y (phase step sin(omega)sin(theta)). Every entry has unit modulus
    and the first entry is exactly 1.
    """
    if m1 < 1 or m2 < 1:
        raise ValueError("URA factors must be >= 1")
    step1 = TWO_PI * d_over_lambda * np.sin(omega) * np.cos(theta)
    step2 = TWO_PI * d_over_lambda * np.sin(omega) * np.sin(theta)
    a1 = np.exp(1j * step1 * np.arange(m1))
    a2 = np.exp(1j * step2 * np.arange(m2))
    return np.outer(a1, a2.conj()).ravel(order="F")


@dataclass(frozen=True)
class SystemDims:
    """Antenna / element / user counts with their URA factorizations."""

    M: int
    N: int
    K: int
    M1: Optional[int] = None
    M2: Optional[int] = None
    N1: Optional[int] = None
    N2: Optional[int] = None

    def __post_init__(self):
        for name in ("M", "N", "K"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        # default to linear arrays when no factorization is given
        if self.M1 is None:
            object.__setattr__(self, "M1", self.M)
            object.__setattr__(self, "M2", 1)
        if self.N1 is None:
            object.__setattr__(self, "N1", self.N)
            object.__setattr__(self, "N2", 1)
        if self.M1 * self.M2 != self.M:
            raise ValueError(f"M1*M2 = {self.M1 * self.M2} != M = {self.M}")
        if self.N1 * self.N2 != self.N:
            raise ValueError(f"N1*N2 = {self.N1 * self.N2} != N = {self.N}")


@dataclass(frozen=True)
class LinkAngles:
    """AoA/AoD pairs (omega, theta), all in radians, wrapped to [0, 2*pi).

    ris_aoa / bs_aod parameterize the BS-RIS line-of-sight; ris_user_aod[k]
    and bs_user_aod[k] parameterize the RIS-user and BS-user links.
    """

    ris_aoa: tuple
    bs_aod: tuple
    ris_user_aod: np.ndarray  # (K, 2)
    bs_user_aod: np.ndarray   # (K, 2)

    def __post_init__(self):
        object.__setattr__(self, "ris_aoa", tuple(wrap_angle(np.asarray(self.ris_aoa, float))))
        object.__setattr__(self, "bs_aod", tuple(wrap_angle(np.asarray(self.bs_aod, float))))
        for name in ("ris_user_aod", "bs_user_aod"):
            arr = wrap_angle(np.asarray(getattr(self, name), dtype=float))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class RicianParams:
    """Fading parameters. B = math.inf is the explicit pure-LoS flag."""

    B: float = 1.0
    d_over_lambda: float = 1.0
    angles: Optional[LinkAngles] = None
    seed: int = 0

    def __post_init__(self):
        if not (self.B >= 0):
            raise ValueError(f"Rician factor must be >= 0, got {self.B}")
        if not self.d_over_lambda > 0:
            raise ValueError("d_over_lambda must be positive")

    @property
    def pure_los(self) -> bool:
        return math.isinf(self.B)


@dataclass(frozen=True)
class Geometry:
    """Far-field layout in meters plus the receiver noise floor."""

    bs_position: tuple
    ris_position: tuple
    user_positions: np.ndarray  # (K, 2)
    noise_power_dBm: float = -80.0

    def __post_init__(self):
        arr = np.asarray(self.user_positions, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "user_positions", arr)

    def noise_power_watts(self) -> float:
        return 10.0 ** ((self.noise_power_dBm - 30.0) / 10.0)


@dataclass(frozen=True)
class ChannelRealization:
    """One Monte-Carlo draw of every channel the solvers consume.

    H is the N x M BS-to-RIS matrix. h[k] and t[k] store the row entries of
    the paper-style channel rows (RIS-to-user and BS-to-user), so the
    effective channel seen by user k at phases u is  u @ cascade[k] + t[k]
    with cascade[k] = diag(h[k]) @ H.
    """

    H: np.ndarray        # (N, M)
    h: np.ndarray        # (K, N)
    t: np.ndarray        # (K, M)
    cascade: np.ndarray  # (K, N, M)
    gains: Optional[dict] = None

    def __post_init__(self):
        N, M = self.H.shape
        K = self.h.shape[0]
        if self.h.shape != (K, N) or self.t.shape != (K, M):
            raise ValueError("inconsistent channel dimensions")
        if self.cascade.shape != (K, N, M):
            raise ValueError("cascade shape mismatch")
        for name in ("H", "h", "t", "cascade"):
            getattr(self, name).flags.writeable = False

    @property
    def M(self) -> int:
        return self.H.shape[1]

    @property
    def N(self) -> int:
        return self.H.shape[0]

    @property
    def K(self) -> int:
        return self.h.shape[0]


def _draw_angles(K: int, rng: np.random.Generator) -> LinkAngles:
    u = rng.uniform(0.0, TWO_PI, size=8 + 4 * K)
    return LinkAngles(
        ris_aoa=(u[0], u[1]),
        bs_aod=(u[2], u[3]),
        ris_user_aod=u[8:8 + 2 * K].reshape(K, 2),
        bs_user_aod=u[8 + 2 * K:].reshape(K, 2),
    )


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0,1): real and imaginary parts each N(0, 1/2)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(dims: SystemDims, params: RicianParams,
                    geometry: Optional[Geometry] = None) -> ChannelRealization:
    """Draw one channel realization. Deterministic given (dims, params, seed)."""
    rng = np.random.Generator(np.random.Philox(key=params.seed))
    angles = params.angles if params.angles is not None else _draw_angles(dims.K, rng)

    d = params.d_over_lambda
    a_ris_in = ura_response(dims.N1, dims.N2, *angles.ris_aoa, d)
    a_bs_out = ura_response(dims.M1, dims.M2, *angles.bs_aod, d)
    los_H = np.outer(a_ris_in, a_bs_out.conj())
    los_h = np.stack([ura_response(dims.N1, dims.N2, *angles.ris_user_aod[k], d)
                      for k in range(dims.K)])
    los_t = np.stack([ura_response(dims.M1, dims.M2, *angles.bs_user_aod[k], d).conj()
                      for k in range(dims.K)])

    if params.pure_los:
        H, h, t = los_H, los_h, los_t
    else:
        w_los = np.sqrt(params.B / (params.B + 1.0))
        w_nlos = np.sqrt(1.0 / (params.B + 1.0))
        H = w_los * los_H + w_nlos * _cn(rng, (dims.N, dims.M))
        h = w_los * los_h + w_nlos * _cn(rng, (dims.K, dims.N))
        t = w_los * los_t + w_nlos * _cn(rng, (dims.K, dims.M))

    gains = None
    if geometry is not None:
        bs = np.asarray(geometry.bs_position, float)
        ris = np.asarray(geometry.ris_position, float)
        users = geometry.user_positions
        sigma = np.sqrt(geometry.noise_power_watts())
        amp_H = np.sqrt(pathloss_gain(float(np.linalg.norm(ris - bs))))
        # receive-side links absorb the 1/sigma noise normalization so the
        # per-user noise variance is 1 in the SNR expressions
        amp_h = np.array([np.sqrt(pathloss_gain(float(np.linalg.norm(users[k] - ris)))) / sigma
                          for k in range(dims.K)])
        amp_t = np.array([np.sqrt(pathloss_gain(float(np.linalg.norm(users[k] - bs)))) / sigma
                          for k in range(dims.K)])
        H = amp_H * H
        h = amp_h[:, None] * h
        t = amp_t[:, None] * t
        gains = {"H": float(amp_H), "h": amp_h, "t": amp_t}

    cascade = h[:, :, None] * H[None, :, :]
    return ChannelRealization(H=H, h=h, t=t, cascade=cascade, gains=gains)


def derive_seed(base_seed: int, point_index: int, trial_index: int) -> int:
    """Collision-free per-trial sub-seed for sweep replay determinism."""
    ss = np.random.SeedSequence(entropy=int(base_seed),
                                spawn_key=(int(point_index), int(trial_index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
