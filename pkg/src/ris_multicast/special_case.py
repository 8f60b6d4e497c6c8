"""Single-user-dominant special case: if maximizing the rate of one user k0
alone leaves it the worst user, that solution is globally optimal for the
max-min problem. Detection tries candidates ordered weakest-channel-first.

The per-user problem splits into a phase alignment (P3-style maximization of
the effective channel norm) and the closed-form rank-1 MISO covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .alternating import _kkt_polish, build_kkt, krawczyk_solve, _softmin_ascent
from .model import ChannelRealization, wrap_angle
from .objective import (PhaseConfig, TransmitCovariance, all_snrs,
                        effective_row, phase_gradient)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SpecialCaseResult:
    k0: int
    theta: PhaseConfig
    Q: TransmitCovariance
    capacity_bits: float
    condition22_margins: np.ndarray  # R_k - R_{k0} for every k
    degenerate: bool = False


def _single_user_channel(ch: ChannelRealization, k0: int) -> ChannelRealization:
    return ChannelRealization(H=ch.H.copy(), h=ch.h[k0:k0 + 1].copy(),
                              t=ch.t[k0:k0 + 1].copy(),
                              cascade=ch.cascade[k0:k0 + 1].copy())


def closed_form_theta_m1(ch: ChannelRealization, k0: int) -> np.ndarray:
    """M = 1 alignment: each cascade term is rotated onto the direct link.

    theta_n = -(arg h_{k0,n} + arg H_{n,1} + arg t_col) where t_col is the
    conjugate of the stored direct-link row entry; with no direct link the
    cascade terms are simply aligned with each other.
    """
    if ch.M != 1:
        raise ValueError("closed form requires M = 1")
    t_entry = ch.t[k0, 0]
    t_phase = np.angle(np.conj(t_entry)) if np.abs(t_entry) > 0 else 0.0
    return wrap_angle(-(np.angle(ch.h[k0]) + np.angle(ch.H[:, 0]) + t_phase))


def _norm2_objective(ch: ChannelRealization, k0: int, theta) -> float:
    e = effective_row(PhaseConfig.from_theta(theta), ch, k0)
    return float(np.real(e @ e.conj()))


def solve_p3(ch: ChannelRealization, k0: int, restarts: int = 32,
             seed: int = 0) -> PhaseConfig:
    """Phases maximizing the effective channel norm of user k0.

    Best stationary point over the closed form (M = 1), certified interval
    roots (N <= 4), and multi-start gradient ascent; the winner is polished
    to stationarity residual <= 1e-6.
    """
    if not 0 <= k0 < ch.K:
        raise ValueError(f"user index {k0} out of range")
    eye_cov = TransmitCovariance(Q=np.eye(ch.M, dtype=complex), p_max=float(ch.M) + 1.0)
    sub = _single_user_channel(ch, k0)
    system = build_kkt(eye_cov, sub, [1.0])
    if system.degenerate:
        return PhaseConfig.from_theta(np.zeros(ch.N))  # objective is flat in theta

    candidates = []
    if ch.M == 1:
        candidates.append(closed_form_theta_m1(ch, k0))
    if ch.N <= 4:
        candidates.extend(krawczyk_solve(system).roots)
    rng = np.random.default_rng(seed)
    starts = [rng.uniform(0.0, TWO_PI, ch.N) for _ in range(restarts)]
    candidates.extend(_softmin_ascent(eye_cov.Q, sub, s) for s in starts)

    vals = [_norm2_objective(ch, k0, th) for th in candidates]
    theta = candidates[int(np.argmax(vals))]
    theta = _kkt_polish(eye_cov, sub, theta)
    return PhaseConfig.from_theta(theta)


def solve_p3_residual(ch: ChannelRealization, k0: int, theta) -> float:
    """Max-norm of the stationarity system of the norm objective at theta."""
    g = phase_gradient(np.eye(ch.M, dtype=complex), ch, k0, np.asarray(theta, float))
    return float(np.max(np.abs(g)))


def miso_capacity_and_q(theta, ch: ChannelRealization, k0: int, p_max: float):
    """Closed-form single-user capacity and rank-1 covariance at fixed phases."""
    phase = theta if isinstance(theta, PhaseConfig) else PhaseConfig.from_theta(theta)
    g = effective_row(phase, ch, k0)
    ns = float(np.real(g @ g.conj()))
    if ns <= 1e-30:
        return 0.0, TransmitCovariance(Q=np.zeros((ch.M, ch.M), dtype=complex),
                                       p_max=float(p_max))
    Q = p_max * np.outer(g.conj(), g) / ns
    Q = 0.5 * (Q + Q.conj().T)
    capacity = float(np.log2(1.0 + p_max * ns))
    return capacity, TransmitCovariance(Q=Q, p_max=float(p_max))


def detect_and_solve(ch: ChannelRealization, p_max: float, restarts: int = 32,
                     seed: int = 0) -> Optional[SpecialCaseResult]:
    """Try each user as the dominant one (weakest aggregate channel first);
    return the first whose single-user optimum satisfies condition (22)."""
    strength = [np.linalg.norm(ch.cascade[k]) + np.linalg.norm(ch.t[k])
                for k in range(ch.K)]
    for k0 in np.argsort(strength):
        k0 = int(k0)
        phase = solve_p3(ch, k0, restarts=restarts, seed=seed)
        capacity, Q = miso_capacity_and_q(phase, ch, k0, p_max)
        rates = np.log2(1.0 + all_snrs(Q, phase, ch))
        margins = rates - rates[k0]
        if np.min(margins) >= -1e-9:
            degen = capacity == 0.0
            return SpecialCaseResult(k0=k0, theta=phase, Q=Q,
                                     capacity_bits=capacity,
                                     condition22_margins=margins,
                                     degenerate=degen)
    return None
