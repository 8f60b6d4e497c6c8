"""Joint gradient descent on (Q, theta, gamma) of the log-barrier objective

    Gamma_t = -gamma - (1/t) * [ sum_k log(-gamma + snr_k)
                                 + log(P - tr Q) + log det Q ],

with backtracking line search and an outer barrier schedule. The descent
direction is the negative gradient of Gamma_t; its components are checked
against central finite differences by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import ChannelRealization, wrap_angle
from .objective import PhaseConfig, TransmitCovariance, all_snrs
from .report import SolveReport

STALL_STEP = 1e-12


class InteriorError(ValueError):
    """Raised when a state violates one of the barrier domains."""


@dataclass(frozen=True)
class BarrierConfig:
    t0: float = 1.0
    rho: float = 10.0        # outer barrier multiplier
    alpha: float = 0.1       # sufficient-decrease parameter
    eta: float = 0.5         # step shrink factor
    delta1: float = 1e-6     # outer stop: 1/t <= delta1
    delta2: float = 1e-8     # inner stop: |Gamma_j - Gamma_{j-1}| <= delta2
    max_inner: int = 2000
    max_outer: int = 32

    def __post_init__(self):
        if not self.t0 > 0 or not self.rho > 1:
            raise ValueError("require t0 > 0 and rho > 1")
        if not (0 < self.alpha < 0.5) or not (0 < self.eta < 1):
            raise ValueError("require alpha in (0, 0.5) and eta in (0, 1)")
        if not self.delta1 > 0 or not self.delta2 > 0:
            raise ValueError("tolerances must be positive")


@dataclass
class BarrierState:
    Q: np.ndarray
    theta: np.ndarray
    gamma: float
    p_max: float
    t: float
    ch: ChannelRealization
    trace: list = field(default_factory=list)

    def slacks(self):
        """(per-user SNR slacks, power slack, snr vector); None entries if violated."""
        phase = PhaseConfig.from_theta(self.theta)
        cov = _unchecked_cov(self.Q, self.p_max)
        snrs = all_snrs(cov, phase, self.ch)
        s_user = -self.gamma + snrs
        s_pow = self.p_max - float(np.real(np.trace(self.Q)))
        return s_user, s_pow, snrs


def _unchecked_cov(Q, p_max):
    # bypass TransmitCovariance validation inside hot loops
    cov = object.__new__(TransmitCovariance)
    object.__setattr__(cov, "Q", Q)
    object.__setattr__(cov, "p_max", p_max)
    return cov


def barrier_value(state: BarrierState) -> float:
    s_user, s_pow, _ = state.slacks()
    if np.any(s_user <= 0):
        k = int(np.argmin(s_user))
        raise InteriorError(f"SNR slack of user {k} is non-positive")
    if s_pow <= 0:
        raise InteriorError("power slack is non-positive")
    try:
        L = np.linalg.cholesky(state.Q)  # certifies Q > 0, unlike slogdet sign
    except np.linalg.LinAlgError:
        raise InteriorError("Q is not positive definite") from None
    logdet = 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))
    f = float(np.sum(np.log(s_user)) + np.log(s_pow) + logdet)
    return -state.gamma - f / state.t


def _barrier_value_or_none(state: BarrierState):
    try:
        return barrier_value(state)
    except InteriorError:
        return None


def gradients(state: BarrierState):
    """Descent direction (dQ, dtheta, dgamma) = -grad Gamma_t.

    dQ is the Hermitian gradient matrix (so Q + l*dQ stays Hermitian),
    dtheta the exact theta-gradient, dgamma the scalar component.
    """
    s_user, s_pow, _ = state.slacks()
    if np.any(s_user <= 0) or s_pow <= 0:
        raise InteriorError("state is not interior")
    u = np.exp(1j * state.theta)
    E = u @ state.ch.cascade + state.ch.t          # (K, M) effective rows
    t = state.t

    dQ = np.linalg.inv(state.Q) / t
    dQ -= np.eye(state.Q.shape[0]) / (t * s_pow)
    dQ += np.einsum("k,ka,kb->ab", 1.0 / (t * s_user), E.conj(), E)
    dQ = 0.5 * (dQ + dQ.conj().T)

    # d snr_k / d theta_n = -2 Im(u_n * (cascade_k Q conj(e_k))_n)
    W = np.einsum("kna,ab,kb->kn", state.ch.cascade, state.Q, E.conj())
    dtheta = np.sum(-2.0 * np.imag(u[None, :] * W) / (t * s_user)[:, None], axis=0)

    dgamma = 1.0 - float(np.sum(1.0 / (t * s_user)))
    return dQ, dtheta, dgamma


def backtrack(state: BarrierState, direction, alpha: float, eta: float):
    """Largest l = eta^j satisfying the sufficient-decrease rule while staying
    interior. Returns (l, stepped state, new Gamma) or (None, None, None) when
    the search stalls below 1e-12."""
    dQ, dtheta, dgamma = direction
    norm2 = float(np.sum(np.abs(dQ) ** 2) + np.sum(dtheta ** 2) + dgamma ** 2)
    g0 = barrier_value(state)
    if norm2 < 1e-30:
        return 1.0, state, g0  # zero direction: trivially converged
    l = 1.0
    while l > STALL_STEP:
        cand = BarrierState(Q=state.Q + l * dQ, theta=wrap_angle(state.theta + l * dtheta),
                            gamma=state.gamma + l * dgamma, p_max=state.p_max,
                            t=state.t, ch=state.ch)
        g1 = _barrier_value_or_none(cand)
        if g1 is not None and g1 < g0 - alpha * l * norm2:
            return l, cand, g1
        l *= eta
    return None, None, None


def initial_state(ch: ChannelRealization, p_max: float, cfg: BarrierConfig,
                  init=None, seed: Optional[int] = None) -> BarrierState:
    if init is not None:
        Q0, theta0 = init
        Q0 = np.asarray(Q0, dtype=complex)
        theta0 = wrap_angle(np.asarray(theta0, dtype=float))
        # pull strictly inside the domain if the caller's point sits on it
        if np.real(np.trace(Q0)) > 0.95 * p_max or np.linalg.eigvalsh(Q0)[0] < 1e-9 * p_max:
            Q0 = 0.9 * Q0 + 0.1 * (p_max / (2.0 * ch.M)) * np.eye(ch.M)
    else:
        rng = np.random.default_rng(seed)
        Q0 = (p_max / (2.0 * ch.M)) * np.eye(ch.M, dtype=complex)
        theta0 = rng.uniform(0.0, 2.0 * np.pi, ch.N)
    snrs = all_snrs(_unchecked_cov(Q0, p_max), PhaseConfig.from_theta(theta0), ch)
    m = float(np.min(snrs))
    gamma0 = 0.9 * m if m > 1e-12 else m - 1.0
    return BarrierState(Q=Q0, theta=theta0, gamma=gamma0, p_max=p_max, t=cfg.t0, ch=ch)


def solve(ch: ChannelRealization, p_max: float, cfg: BarrierConfig = BarrierConfig(),
          init=None, seed: Optional[int] = None) -> SolveReport:
    """Algorithm-1 style two-level barrier descent for the max-min problem."""
    if not p_max > 0:
        raise ValueError("p_max must be positive")
    state = initial_state(ch, p_max, cfg, init=init, seed=seed)
    stalled = False
    total_inner = 0
    full_trace = []

    outer = 0
    while outer < cfg.max_outer:
        outer += 1
        g_prev = barrier_value(state)
        state.trace = [g_prev]
        stalled = False
        for _ in range(cfg.max_inner):
            direction = gradients(state)
            l, stepped, g_new = backtrack(state, direction, cfg.alpha, cfg.eta)
            if l is None:
                stalled = True
                break
            if stepped is state:  # zero direction
                g_new = g_prev
            else:
                stepped.trace = state.trace
                state = stepped
            state.trace.append(g_new)
            total_inner += 1
            if abs(g_new - g_prev) <= cfg.delta2:
                break
            g_prev = g_new
        full_trace.append(list(state.trace))
        if 1.0 / state.t <= cfg.delta1:
            break
        state = BarrierState(Q=state.Q, theta=state.theta, gamma=state.gamma,
                             p_max=p_max, t=state.t * cfg.rho, ch=ch)

    phase = PhaseConfig.from_theta(state.theta)
    cov = TransmitCovariance(Q=0.5 * (state.Q + state.Q.conj().T), p_max=p_max)
    snrs = all_snrs(cov, phase, ch)
    gamma = float(state.gamma)
    if 1.0 / state.t > cfg.delta1:
        status = "max-iters"
    elif stalled:
        status = "stalled"
    else:
        status = "optimal"
    return SolveReport(
        method="barrier",
        Q=cov.Q,
        theta=phase.theta,
        gamma=gamma,
        capacity_bits=float(np.log2(1.0 + max(gamma, 0.0))),
        per_user_snr=snrs,
        per_user_rate=np.log2(1.0 + snrs),
        trace=full_trace,
        iterations=total_inner,
        status=status,
        extras={"final_t": state.t, "min_snr": float(np.min(snrs))},
    )
