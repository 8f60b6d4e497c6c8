"""Alternating optimization: SDP covariance step, then a phase step that
solves the KKT stationarity system of the weighted SNR objective.

The phase step has two engines. For small N the stationarity equations

    sum_{j != n} bbar[n,j] sin(theta_n - theta_j + psibar[n,j])
        + cbar[n] sin(theta_n + obar[n]) = 0

are enclosed by a Krawczyk interval iteration over multiplier vectors lambda
sampled at the simplex vertices and barycenter (the active set of the max-min
optimum is unknown a priori). For general N a multi-start projected gradient
ascent on a log-sum-exp soft minimum of the per-user SNRs is used. Either way
the step never returns phases worse than its starting point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import nnls

from . import intervals
from .intervals import krawczyk_roots
from .model import ChannelRealization, wrap_angle
from .objective import (PhaseConfig, TransmitCovariance, all_snrs,
                        phase_gradient, trig_expansion)
from .report import SolveReport
from .sdp_engine import maxmin_q_step

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class AlternatingConfig:
    J: int = 16                        # random initializations
    delta: float = 1e-6                # absolute convergence tolerance on gamma
    delta_rel: float = 0.0             # optional relative complement to delta
    max_outer: int = 60
    theta_step_method: str = "auto"    # "krawczyk" | "multistart" | "auto"
    krawczyk_max_N: int = 4
    multistart_restarts: int = 8
    krawczyk_max_boxes: int = 20000
    sdp_tol: float = 1e-8

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("J must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.theta_step_method not in ("krawczyk", "multistart", "auto"):
            raise ValueError(f"unknown theta_step_method {self.theta_step_method!r}")


# ---------------------------------------------------------------------------
# KKT system of the phase subproblem


@dataclass(frozen=True)
class KktSystem:
    """Aggregated stationarity system for multipliers lam on the simplex."""

    lam: np.ndarray
    pair: np.ndarray      # (N, N) complex, sum_k 2 lam_k pair_k, zero diagonal
    direct: np.ndarray    # (N,) complex, sum_k 2 lam_k direct_k
    b_bar: np.ndarray
    psi_bar: np.ndarray
    c_bar: np.ndarray
    omega_bar: np.ndarray

    @property
    def N(self) -> int:
        return self.direct.shape[0]

    @property
    def degenerate(self) -> bool:
        return max(np.max(self.b_bar, initial=0.0), np.max(self.c_bar, initial=0.0)) < 1e-13

    def residual(self, theta) -> np.ndarray:
        u = np.exp(1j * np.asarray(theta, float))
        mat = self.pair * np.outer(u, u.conj())
        return np.imag(mat.sum(axis=1)) + np.imag(self.direct * u)

    def jacobian(self, theta) -> np.ndarray:
        u = np.exp(1j * np.asarray(theta, float))
        re = np.real(self.pair * np.outer(u, u.conj()))
        J = -re
        J[np.diag_indices(self.N)] = re.sum(axis=1) + np.real(self.direct * u)
        return J

    def interval_residual(self, lo, hi):
        alo = lo[:, None] - hi[None, :] + self.psi_bar
        ahi = hi[:, None] - lo[None, :] + self.psi_bar
        slo, shi = intervals.isin(alo, ahi)
        plo, phi = self.b_bar * slo, self.b_bar * shi
        dlo, dhi = intervals.isin(lo + self.omega_bar, hi + self.omega_bar)
        return (plo.sum(axis=1) + self.c_bar * dlo,
                phi.sum(axis=1) + self.c_bar * dhi)

    def interval_jacobian(self, lo, hi):
        alo = lo[:, None] - hi[None, :] + self.psi_bar
        ahi = hi[:, None] - lo[None, :] + self.psi_bar
        clo, chi = intervals.icos(alo, ahi)
        # off-diagonal: -b cos(arg); diagonal: row sum of b cos + c cos
        off_lo, off_hi = -self.b_bar * chi, -self.b_bar * clo
        dlo_, dhi_ = intervals.icos(lo + self.omega_bar, hi + self.omega_bar)
        diag_lo = (self.b_bar * clo).sum(axis=1) + self.c_bar * dlo_
        diag_hi = (self.b_bar * chi).sum(axis=1) + self.c_bar * dhi_
        Jlo, Jhi = off_lo, off_hi
        Jlo[np.diag_indices(self.N)] = diag_lo
        Jhi[np.diag_indices(self.N)] = diag_hi
        return Jlo, Jhi


def build_kkt(Q: TransmitCovariance, ch: ChannelRealization, lam) -> KktSystem:
    """Aggregate the per-user cosine expansions with simplex weights lam.

    The aggregated (b_bar, psi_bar) are defined through phasor addition
    sum_k 2 lam_k b_k e^{j psi_k}; the resulting residual is the negative
    theta-gradient of sum_k lam_k snr_k (checked by finite differences in
    the tests).
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (ch.K,) or np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > 1e-9:
        raise ValueError("lambda must lie on the probability simplex")
    pair = np.zeros((ch.N, ch.N), dtype=complex)
    direct = np.zeros(ch.N, dtype=complex)
    for k in range(ch.K):
        if lam[k] == 0.0:
            continue
        te = trig_expansion(Q, ch, k)
        pair += 2.0 * lam[k] * te.pair_phasor
        direct += 2.0 * lam[k] * te.direct_phasor
    return KktSystem(lam=lam, pair=pair, direct=direct,
                     b_bar=np.abs(pair), psi_bar=np.angle(pair),
                     c_bar=np.abs(direct), omega_bar=np.angle(direct))


def krawczyk_solve(system: KktSystem, box=None, *, root_tol=1e-8,
                   max_boxes=20000) -> intervals.KrawczykResult:
    """Certified stationary points of the system inside [0, 2*pi)^N."""
    if system.degenerate:
        return intervals.KrawczykResult(degenerate=True)
    pad = 0.15  # let roots on the period boundary sit inside a box
    if box is None:
        lo = np.full(system.N, -pad)
        hi = np.full(system.N, TWO_PI + pad)
    else:
        lo, hi = (np.asarray(b, float) for b in box)
    res = krawczyk_roots(system.residual, system.jacobian,
                         system.interval_residual, system.interval_jacobian,
                         lo, hi, root_tol=root_tol, max_boxes=max_boxes)
    res.roots = _dedupe_mod_2pi([wrap_angle(r) for r in res.roots])
    return res


def _dedupe_mod_2pi(points, tol=1e-6):
    kept = []
    for p in points:
        dup = False
        for q in kept:
            d = np.abs(np.mod(p - q + np.pi, TWO_PI) - np.pi)
            if np.max(d) < tol:
                dup = True
                break
        if not dup:
            kept.append(p)
    return kept


# ---------------------------------------------------------------------------
# Multiplier recovery and KKT polish


def recover_multipliers(Qmat: np.ndarray, ch: ChannelRealization, theta,
                        active_tol=1e-4):
    """Simplex weights on the active users minimizing the combined gradient.

    Returns (lam, stationarity residual norm)."""
    phase = PhaseConfig.from_theta(theta)
    cov = TransmitCovariance.__new__(TransmitCovariance)
    object.__setattr__(cov, "Q", np.asarray(Qmat, complex))
    object.__setattr__(cov, "p_max", np.inf)
    snrs = all_snrs(cov, phase, ch)
    lo = snrs.min()
    active = np.where(snrs <= lo + active_tol * max(1.0, lo))[0]
    G = np.stack([phase_gradient(Qmat, ch, int(k), phase.theta) for k in active])
    rho = 10.0 * max(1.0, np.abs(G).max())
    A = np.vstack([G.T, rho * np.ones((1, len(active)))])
    b = np.concatenate([np.zeros(ch.N), [rho]])
    w, _ = nnls(A, b)
    if w.sum() <= 0:
        w = np.ones(len(active))
    w = w / w.sum()
    lam = np.zeros(ch.K)
    lam[active] = w
    resid = float(np.linalg.norm(w @ G))
    return lam, resid


def kkt_residual(Q: TransmitCovariance, ch: ChannelRealization, theta) -> float:
    """Stationarity residual at theta for the recovered multipliers."""
    lam, _ = recover_multipliers(Q.Q, ch, theta)
    system = build_kkt(Q, ch, lam)
    return float(np.max(np.abs(system.residual(theta))))


def _kkt_polish(Q: TransmitCovariance, ch: ChannelRealization, theta,
                rounds=6):
    """Damped Newton on the recovered-multiplier system; keeps gamma intact."""
    theta = np.asarray(theta, float).copy()
    phase = PhaseConfig.from_theta(theta)
    best_gamma = float(all_snrs(Q, phase, ch).min())
    for _ in range(rounds):
        lam, _ = recover_multipliers(Q.Q, ch, theta)
        system = build_kkt(Q, ch, lam)
        r = system.residual(theta)
        if np.max(np.abs(r)) < 1e-12:
            break
        try:
            step = np.linalg.solve(system.jacobian(theta), r)
        except np.linalg.LinAlgError:
            break
        improved = False
        s = 1.0
        for _ in range(20):
            cand = theta - s * step
            if np.max(np.abs(system.residual(cand))) < np.max(np.abs(r)):
                g = float(all_snrs(Q, PhaseConfig.from_theta(cand), ch).min())
                if g >= best_gamma - 1e-9 * max(1.0, best_gamma):
                    theta = wrap_angle(cand)
                    best_gamma = max(best_gamma, g)
                    improved = True
                    break
            s *= 0.5
        if not improved:
            break
    return theta


# ---------------------------------------------------------------------------
# Soft-min gradient ascent (general-N phase engine)


def _softmin_ascent(Qmat: np.ndarray, ch: ChannelRealization, theta0,
                    taus=(10.0, 100.0, 1000.0), iters=80):
    cov = TransmitCovariance.__new__(TransmitCovariance)
    object.__setattr__(cov, "Q", Qmat)
    object.__setattr__(cov, "p_max", np.inf)

    def snr_vec(th):
        return all_snrs(cov, PhaseConfig.from_theta(th), ch)

    theta = np.asarray(theta0, float).copy()
    s = snr_vec(theta)
    scale = max(float(np.mean(s)), 1e-9)  # temperatures act on snr / scale

    def value_weights(th):
        v = snr_vec(th) / scale
        shift = v.min()
        w = np.exp(-tau * (v - shift))
        w /= w.sum()
        val = shift - np.log(np.sum(np.exp(-tau * (v - shift)))) / tau
        return val, w

    for tau in taus:
        step = 0.5
        val, w = value_weights(theta)
        for _ in range(iters):
            grad = np.zeros(ch.N)
            for k in range(ch.K):
                if w[k] > 1e-12:
                    grad += w[k] * phase_gradient(Qmat, ch, k, theta) / scale
            gn = float(np.linalg.norm(grad))
            if gn < 1e-12:
                break
            accepted = False
            while step > 1e-12:
                cand = wrap_angle(theta + step * grad)
                v2, w2 = value_weights(cand)
                if v2 > val + 1e-14:
                    theta, val, w = cand, v2, w2
                    step *= 1.5
                    accepted = True
                    break
                step *= 0.4
            if not accepted:
                break
    return theta


# ---------------------------------------------------------------------------
# The two alternating steps and the outer loop


def q_step(theta, ch: ChannelRealization, p_max: float, tol: float = 1e-8):
    """(P2.1): optimal covariance for fixed phases via the SDP engine."""
    phase = PhaseConfig.from_theta(theta)
    E = phase.u @ ch.cascade + ch.t
    R_list = [np.outer(E[k].conj(), E[k]) for k in range(ch.K)]
    return maxmin_q_step(R_list, p_max, tol=tol)


def _gamma_of(Q: TransmitCovariance, ch, theta) -> float:
    return float(all_snrs(Q, PhaseConfig.from_theta(theta), ch).min())


def _lambda_samples(K: int):
    for k in range(K):
        e = np.zeros(K)
        e[k] = 1.0
        yield e
    if K > 1:
        yield np.full(K, 1.0 / K)


def theta_step(Q: TransmitCovariance, ch: ChannelRealization, theta_init,
               cfg: AlternatingConfig = AlternatingConfig(),
               rng: Optional[np.random.Generator] = None):
    """Improve the phases for fixed Q; never degrades the starting gamma."""
    rng = rng if rng is not None else np.random.default_rng(0)
    theta_init = wrap_angle(np.asarray(theta_init, float))
    gamma_init = _gamma_of(Q, ch, theta_init)

    method = cfg.theta_step_method
    if method == "auto":
        method = "krawczyk" if ch.N <= cfg.krawczyk_max_N else "multistart"

    candidates = [theta_init]
    if method == "krawczyk":
        for lam in _lambda_samples(ch.K):
            result = krawczyk_solve(build_kkt(Q, ch, lam),
                                    max_boxes=cfg.krawczyk_max_boxes)
            candidates.extend(result.roots)
    # the sampled-lambda enclosures cannot cover active sets with uneven
    # multipliers, so the soft-min ascent always contributes candidates too
    starts = [theta_init] + [rng.uniform(0.0, TWO_PI, ch.N)
                             for _ in range(cfg.multistart_restarts)]
    candidates.extend(_softmin_ascent(Q.Q, ch, s) for s in starts)

    gammas = np.array([_gamma_of(Q, ch, th) for th in candidates])
    order = np.argsort(-gammas)
    best = order[0]
    # deterministic tie-break: lexicographically smallest theta
    ties = [i for i in order if gammas[i] >= gammas[best] - 1e-12]
    if len(ties) > 1:
        best = min(ties, key=lambda i: tuple(np.round(candidates[i], 12)))
    theta_best, gamma_best = candidates[best], float(gammas[best])

    polished = _kkt_polish(Q, ch, theta_best)
    gamma_pol = _gamma_of(Q, ch, polished)
    if gamma_pol >= gamma_best - 1e-9 * max(1.0, gamma_best):
        theta_best, gamma_best = polished, max(gamma_best, gamma_pol)

    if gamma_best < gamma_init:
        return theta_init, gamma_init
    return wrap_angle(theta_best), gamma_best


def solve(ch: ChannelRealization, p_max: float,
          cfg: AlternatingConfig = AlternatingConfig(), seed: int = 0,
          extra_theta_inits=None) -> SolveReport:
    """Alternating optimization with J random phase initializations."""
    if not p_max > 0:
        raise ValueError("p_max must be positive")
    rng = np.random.default_rng(seed)
    inits = [rng.uniform(0.0, TWO_PI, ch.N) for _ in range(cfg.J)]
    if extra_theta_inits is not None:
        inits.extend(wrap_angle(np.asarray(t, float)) for t in extra_theta_inits)

    best = None
    for idx, th in enumerate(inits):
        Q, gamma = q_step(th, ch, p_max, tol=cfg.sdp_tol)
        if best is None or gamma > best[0]:
            best = (gamma, Q, th, idx)
    gamma, Q, theta, init_idx = best

    trace = [gamma]
    status = "max-iters"
    for _ in range(cfg.max_outer):
        theta_new, _ = theta_step(Q, ch, theta, cfg, rng)
        Q_new, gamma_new = q_step(theta_new, ch, p_max, tol=cfg.sdp_tol)
        if gamma_new < gamma:
            # both steps are non-degrading in exact arithmetic, so a dip is
            # engine wiggle at convergence: decline the step and stop
            trace.append(gamma)
            status = "optimal"
            break
        theta, Q = theta_new, Q_new
        trace.append(gamma_new)
        tol = cfg.delta + cfg.delta_rel * max(1.0, abs(gamma_new))
        if abs(gamma_new - gamma) <= tol:
            gamma = gamma_new
            status = "optimal"
            break
        gamma = gamma_new

    phase = PhaseConfig.from_theta(theta)
    snrs = all_snrs(Q, phase, ch)
    gamma_final = float(snrs.min())
    return SolveReport(
        method="alternating",
        Q=Q.Q,
        theta=phase.theta,
        gamma=gamma_final,
        capacity_bits=float(np.log2(1.0 + max(gamma_final, 0.0))),
        per_user_snr=snrs,
        per_user_rate=np.log2(1.0 + snrs),
        trace=trace,
        iterations=len(trace) - 1,
        status=status,
        extras={"init_index": init_idx},
    )
