"""Comparison schemes: brute-force grid search, rank-1 beamforming via
semidefinite relaxation, transmission without the RIS, and robust beamforming
under a Frobenius-norm-bounded cascaded-CSI error.

The robust design alternates an SDP power-minimization step in v with a
convex-concave phase step in u. Both subproblems certify the worst-case rate
through an S-procedure LMI built on the standard first-order minorant
|z|^2 >= 2 Re(z_ref^* z) - |z_ref|^2 of the received power, so any returned
design is robust by construction; for rank-1 transmit vectors the exact worst
case over the uncertainty ball also has a closed form,

    worst_snr_k = max(0, |beta_k| - eps_k ||v|| sqrt(N))^2,

which is used for initialization and for independent verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import alternating
from .alternating import AlternatingConfig, q_step, theta_step
from .model import ChannelRealization, wrap_angle
from .objective import (PhaseConfig, TransmitCovariance, all_snrs,
                        trig_expansion)
from .report import SolveReport
from .sdp_engine import AffineLMI, ConicProblem, ScalarIneq, maxmin_q_step, solve

TWO_PI = 2.0 * np.pi


class BudgetExceededError(RuntimeError):
    def __init__(self, required, budget):
        super().__init__(f"grid needs {required:.3g} evaluations, budget is {budget:.3g}")
        self.required = required
        self.budget = budget


@dataclass(frozen=True)
class GridSpec:
    phase_levels: int = 360
    q_eig_levels: int = 5       # power split grid (M = 2 only)
    q_angle_levels: int = 8     # eigvector rotation grid per angle (M = 2 only)
    budget: float = 1e8

    def __post_init__(self):
        if self.phase_levels < 2:
            raise ValueError("need at least 2 phase levels")


def _q_candidates(p_max: float, grid: GridSpec):
    """Trace-p_max PSD candidates for M = 2: eigenvalue split x eigvector."""
    for f in np.linspace(0.0, 0.5, grid.q_eig_levels):
        lams = np.array([f, 1.0 - f]) * p_max
        for phi in np.linspace(0.0, np.pi / 2, grid.q_angle_levels):
            c, s = np.cos(phi), np.sin(phi)
            for chi in np.linspace(0.0, TWO_PI, grid.q_angle_levels, endpoint=False):
                U = np.array([[c, -s * np.exp(-1j * chi)],
                              [s * np.exp(1j * chi), c]])
                yield (U * lams) @ U.conj().T


def brute_force(ch: ChannelRealization, p_max: float,
                grid: GridSpec = GridSpec()) -> SolveReport:
    """Exhaustive search over the phase grid (and a Q grid when M = 2)."""
    if ch.M > 2 or ch.N > 4:
        raise ValueError("brute force is guarded to M <= 2, N <= 4")
    L = grid.phase_levels
    n_q = 1 if ch.M == 1 else grid.q_eig_levels * grid.q_angle_levels ** 2
    required = float(L) ** ch.N * n_q * ch.K
    if required > grid.budget:
        raise BudgetExceededError(required, grid.budget)

    lev = np.linspace(0.0, TWO_PI, L, endpoint=False)
    # enumerate the first N-1 phase axes as one flat block, loop the last
    if ch.N == 1:
        head = np.zeros((1, 0))
    else:
        mesh = np.meshgrid(*([lev] * (ch.N - 1)), indexing="ij")
        head = np.stack([m.ravel() for m in mesh], axis=-1)
    u_head = np.exp(1j * head)                                # (G, N-1)
    part = np.einsum("gn,knm->gkm", u_head, ch.cascade[:, :-1, :]) + ch.t[None, :, :]

    qs = [np.array([[p_max]], dtype=complex)] if ch.M == 1 else list(_q_candidates(p_max, grid))
    best = (-1.0, None, None)
    for j, th_last in enumerate(lev):
        E = part + np.exp(1j * th_last) * ch.cascade[None, :, -1, :]   # (G, K, M)
        for Qm in qs:
            s = np.real(np.einsum("gkm,mn,gkn->gk", E, Qm, E.conj()))
            mins = s.min(axis=1)
            g = int(np.argmax(mins))
            if mins[g] > best[0]:
                theta = np.concatenate([head[g], [th_last]]) if ch.N > 1 else np.array([th_last])
                best = (float(mins[g]), theta, Qm)

    gamma, theta, Qm = best
    cov = TransmitCovariance(Q=Qm, p_max=float(p_max))
    phase = PhaseConfig.from_theta(theta)
    snrs = all_snrs(cov, phase, ch)

    # Lipschitz bound on the phase-grid resolution error
    h = TWO_PI / L
    worst_err = 0.0
    for k in range(ch.K):
        te = trig_expansion(cov, ch, k)
        lips = 2.0 * np.abs(te.pair_phasor).sum(axis=1) + 2.0 * te.c
        worst_err = max(worst_err, float(np.sum(lips) * h / 2.0))
    err_bits = worst_err / ((1.0 + gamma) * math.log(2.0))

    return SolveReport(method="brute_force", Q=cov.Q, theta=phase.theta,
                       gamma=gamma, capacity_bits=float(np.log2(1.0 + gamma)),
                       per_user_snr=snrs, per_user_rate=np.log2(1.0 + snrs),
                       iterations=int(L ** ch.N * len(qs)), status="optimal",
                       extras={"grid_error_bits": err_bits})


# ---------------------------------------------------------------------------
# Rank-1 beamforming via SDR + Gaussian randomization


def _extract_beamformer(Q: TransmitCovariance, ch: ChannelRealization,
                        theta, p_max: float, rng, samples: int = 64):
    w, U = np.linalg.eigh(Q.Q)
    phase = PhaseConfig.from_theta(theta)
    E = phase.u @ ch.cascade + ch.t

    def min_snr(v):
        return float(np.min(np.abs(E @ v) ** 2))

    v_best = math.sqrt(p_max) * U[:, -1]
    best = min_snr(v_best)
    if w[-2] > 1e-7 * w[-1]:  # meaningfully rank > 1: randomize
        root = U * np.sqrt(np.maximum(w, 0.0))
        for _ in range(samples):
            g = (rng.standard_normal(ch.M) + 1j * rng.standard_normal(ch.M)) / np.sqrt(2.0)
            cand = root @ g
            nrm = np.linalg.norm(cand)
            if nrm < 1e-12:
                continue
            cand = math.sqrt(p_max) * cand / nrm
            val = min_snr(cand)
            if val > best:
                best, v_best = val, cand
    return v_best, best


def beamforming(ch: ChannelRealization, p_max: float, restarts: int = 3,
                seed: int = 0, max_rounds: int = 12) -> SolveReport:
    """Alternating SDR beamforming: covariance SDP, rank-1 extraction with
    Gaussian randomization, then a phase step on the rank-1 covariance."""
    if not p_max > 0:
        raise ValueError("p_max must be positive")
    rng = np.random.default_rng(seed)
    theta_cfg = AlternatingConfig(J=1, multistart_restarts=4)
    best = (-1.0, None, None)  # (min snr, v, theta)
    for r in range(restarts):
        theta = rng.uniform(0.0, TWO_PI, ch.N)
        prev = -1.0
        for _ in range(max_rounds):
            Qcov, _ = q_step(theta, ch, p_max)
            v, val = _extract_beamformer(Qcov, ch, theta, p_max, rng)
            if val > best[0]:
                best = (val, v, np.array(theta))
            rank1 = TransmitCovariance(Q=np.outer(v, v.conj()), p_max=p_max)
            theta, val2 = theta_step(rank1, ch, theta, theta_cfg, rng)
            if val2 > best[0]:
                best = (val2, v, np.array(theta))
            if val2 - prev <= 1e-6 * max(1.0, abs(prev)):
                break
            prev = val2

    gamma, v, theta = best
    phase = PhaseConfig.from_theta(theta)
    cov = TransmitCovariance(Q=np.outer(v, v.conj()), p_max=float(p_max))
    snrs = all_snrs(cov, phase, ch)
    gamma = float(snrs.min())
    return SolveReport(method="beamforming", Q=cov.Q, theta=phase.theta,
                       gamma=gamma, capacity_bits=float(np.log2(1.0 + gamma)),
                       per_user_snr=snrs, per_user_rate=np.log2(1.0 + snrs),
                       status="optimal", extras={"v": v})


def no_ris(ch: ChannelRealization, p_max: float) -> SolveReport:
    """Max-min covariance design using the direct links only."""
    R_list = [np.outer(ch.t[k].conj(), ch.t[k]) for k in range(ch.K)]
    cov, gamma = maxmin_q_step(R_list, p_max)
    gamma = max(gamma, 0.0)
    snrs = np.array([max(float(np.real(ch.t[k] @ cov.Q @ ch.t[k].conj())), 0.0)
                     for k in range(ch.K)])
    return SolveReport(method="no_ris", Q=cov.Q, theta=np.zeros(ch.N),
                       gamma=gamma, capacity_bits=float(np.log2(1.0 + gamma)),
                       per_user_snr=snrs, per_user_rate=np.log2(1.0 + snrs),
                       status="optimal")


# ---------------------------------------------------------------------------
# Robust beamforming under bounded cascaded-CSI error


@dataclass(frozen=True)
class UncertaintyModel:
    """Estimated cascades with Frobenius error radii and the target rate."""

    C_hat: np.ndarray   # (K, N, M)
    eps: np.ndarray     # (K,)
    R: float            # bits

    def __post_init__(self):
        C = np.asarray(self.C_hat, dtype=complex)
        e = np.asarray(self.eps, dtype=float)
        if np.any(e < 0):
            raise ValueError("uncertainty radii must be >= 0")
        object.__setattr__(self, "C_hat", C)
        object.__setattr__(self, "eps", e)

    @property
    def K(self):
        return self.C_hat.shape[0]

    @property
    def N(self):
        return self.C_hat.shape[1]

    @property
    def M(self):
        return self.C_hat.shape[2]


@dataclass(frozen=True)
class RobustConfig:
    iota0: float = 1.0
    iota_mult: float = 3.0
    iota_cap: float = 1e6
    delta1: float = 1e-4      # outer stop on | ||v_i|| - ||v_{i-1}|| |
    delta2: float = 1e-3      # inner stop on ||u_j - u_{j-1}||
    max_outer: int = 12
    max_inner: int = 8
    dim_guard: int = 4        # LMI size is N*M + 1


@dataclass
class RobustResult:
    v: Optional[np.ndarray]
    u: Optional[np.ndarray]
    theta: Optional[np.ndarray]
    power: float
    status: str
    worst_rates: Optional[np.ndarray] = None
    power_trace: list = field(default_factory=list)


def _beta(Chat_k, t_k, v, u):
    return complex((u @ Chat_k + t_k) @ v)


def worst_case_snr(model: UncertaintyModel, t_rows, v, u) -> np.ndarray:
    """Exact worst case of |(u(C_hat+Delta) + t) v|^2 over each error ball."""
    out = np.empty(model.K)
    for k in range(model.K):
        beta = _beta(model.C_hat[k], t_rows[k], v, u)
        qn = float(np.linalg.norm(v) * np.linalg.norm(u))
        out[k] = max(0.0, abs(beta) - model.eps[k] * qn) ** 2
    return out


def worst_case_delta(model: UncertaintyModel, t_rows, v, u, k) -> np.ndarray:
    """A Delta C_k on the ball boundary attaining the worst case."""
    q = np.kron(v, u)
    beta = _beta(model.C_hat[k], t_rows[k], v, u)
    if abs(beta) < 1e-15 or np.linalg.norm(q) < 1e-15:
        y = np.zeros(model.N * model.M, dtype=complex)
        y[0] = model.eps[k]
    else:
        y = -model.eps[k] * q.conj() * beta / (np.linalg.norm(q) * abs(beta))
    return y.reshape((model.N, model.M), order="F")


def _lin_parts(Chat_k, t_k, v, u, v_ref, u_ref):
    """(A, l, phi) of the first-order minorant quadratic form in vec(DeltaC)."""
    q = np.kron(v, u)
    q_ref = np.kron(v_ref, u_ref)
    beta = _beta(Chat_k, t_k, v, u)
    beta_ref = _beta(Chat_k, t_k, v_ref, u_ref)
    A = (np.outer(q_ref.conj(), q) + np.outer(q.conj(), q_ref)
         - np.outer(q_ref.conj(), q_ref))
    l = beta * q_ref.conj() + beta_ref * q.conj() - beta_ref * q_ref.conj()
    phi = 2.0 * np.real(np.conj(beta_ref) * beta) - abs(beta_ref) ** 2
    return A, l, phi


def _robust_lmi(Chat_k, t_k, eps_k, g, v, u, v_ref, u_ref, wk, beta_slack=0.0):
    A, l, phi = _lin_parts(Chat_k, t_k, v, u, v_ref, u_ref)
    d = A.shape[0]
    out = np.empty((d + 1, d + 1), dtype=complex)
    out[:d, :d] = A + wk * np.eye(d)
    out[:d, d] = l
    out[d, :d] = l.conj()
    out[d, d] = phi - g - beta_slack - wk * eps_k ** 2
    return out


def _start_multiplier(lmi_fn, base_x, w_index, scale):
    """Scan the S-procedure multiplier for the most interior LMI start."""
    best_w, best_eig = None, -np.inf
    for w in scale * np.logspace(-3.0, 6.0, 32):
        x = base_x.copy()
        x[w_index] = w
        eig = float(np.linalg.eigvalsh(lmi_fn(x))[0])
        if eig > best_eig:
            best_w, best_eig = w, eig
    return best_w, best_eig


def _v_step(model, t_rows, g, v_ref, u_ref):
    """(P5.1): minimize ||v||^2 under the robust-rate LMIs, u fixed."""
    M, N, K = model.M, model.N, model.K
    nv = 2 * M
    ns = nv + K + 1  # v (re, im), S-procedure multipliers, epigraph s

    def v_of(x):
        return x[:M] + 1j * x[M:nv]

    prob = ConicProblem(mat_dim=0, num_scalars=ns, maximize=False,
                        obj_c=np.concatenate([np.zeros(ns - 1), [1.0]]))
    lmi_fns = []
    for k in range(K):
        a = np.zeros(ns)
        a[nv + k] = 1.0
        prob.scalar_ineqs.append(ScalarIneq(a=a, b=0.0))  # w_k >= 0

        def lmi_fn(x, k=k):
            return _robust_lmi(model.C_hat[k], t_rows[k], model.eps[k], g,
                               v_of(x), u_ref, v_ref, u_ref, x[nv + k])

        lmi_fns.append(lmi_fn)
        prob.lmis.append(AffineLMI.from_function(lmi_fn, ns))

    def epi_fn(x):
        out = np.zeros((M + 1, M + 1), dtype=complex)
        out[0, 0] = x[ns - 1]
        out[0, 1:] = v_of(x).conj()
        out[1:, 0] = v_of(x)
        out[1:, 1:] = np.eye(M)
        return out

    prob.lmis.append(AffineLMI.from_function(epi_fn, ns))

    # strictly interior start: inflate the reference beamformer a little and
    # pick each multiplier by a scan (the S-procedure is tight at the
    # reference, so a near-optimal w_k makes the block comfortably PD)
    v0 = 1.02 * v_ref
    x0 = np.concatenate([v0.real, v0.imag, np.ones(K),
                         [float(np.linalg.norm(v0) ** 2 + 1.0)]])
    for k in range(K):
        qn2 = float(np.linalg.norm(v0) ** 2 * model.N)
        x0[nv + k], _ = _start_multiplier(lmi_fns[k], x0, nv + k, max(qn2, 1.0))
    sol = solve(prob, tol=1e-7, start=(None, x0))
    if sol.status == "infeasible-detected" or sol.x is None:
        return None
    return v_of(sol.x)


def _u_step(model, t_rows, g, v_ref, u_ref, iota):
    """(P5.2*): maximize the rate margins minus the unit-modulus penalty."""
    M, N, K = model.M, model.N, model.K
    nu = 2 * N
    ns = nu + K + K + N  # u (re, im), w_k, beta_k, delta_n

    def u_of(x):
        return x[:N] + 1j * x[N:nu]

    c = np.zeros(ns)
    c[nu + K:nu + 2 * K] = 1.0
    c[nu + 2 * K:] = -iota
    prob = ConicProblem(mat_dim=0, num_scalars=ns, maximize=True, obj_c=c)
    lmi_fns = []
    for k in range(K):
        for idx in (nu + k, nu + K + k):  # w_k >= 0, beta_k >= 0
            a = np.zeros(ns)
            a[idx] = 1.0
            prob.scalar_ineqs.append(ScalarIneq(a=a, b=0.0))

        def lmi_fn(x, k=k):
            return _robust_lmi(model.C_hat[k], t_rows[k], model.eps[k], g,
                               v_ref, u_of(x), v_ref, u_ref,
                               x[nu + k], beta_slack=x[nu + K + k])

        lmi_fns.append(lmi_fn)
        prob.lmis.append(AffineLMI.from_function(lmi_fn, ns))
    for n in range(N):
        a = np.zeros(ns)
        a[nu + 2 * K + n] = 1.0
        prob.scalar_ineqs.append(ScalarIneq(a=a, b=0.0))  # delta_n >= 0
        # linearized unit-modulus floor: delta_n - 1 - |u_ref_n|^2
        #   + 2 Re(conj(u_n) u_ref_n) >= 0
        a = np.zeros(ns)
        a[n] = 2.0 * u_ref[n].real
        a[N + n] = 2.0 * u_ref[n].imag
        a[nu + 2 * K + n] = 1.0
        prob.scalar_ineqs.append(ScalarIneq(a=a, b=float(-1.0 - abs(u_ref[n]) ** 2)))

        def cap_fn(x, n=n):  # |u_n|^2 <= 1 as a 2x2 Schur block
            out = np.empty((2, 2), dtype=complex)
            out[0, 0] = 1.0
            out[0, 1] = np.conj(u_of(x)[n])
            out[1, 0] = u_of(x)[n]
            out[1, 1] = 1.0
            return out

        prob.lmis.append(AffineLMI.from_function(cap_fn, ns))

    x0 = np.concatenate([0.999 * u_ref.real, 0.999 * u_ref.imag,
                         np.ones(K), 1e-4 * np.ones(K), 0.1 * np.ones(N)])
    qn2 = float(np.linalg.norm(v_ref) ** 2 * N)
    for k in range(K):
        x0[nu + k], _ = _start_multiplier(lmi_fns[k], x0, nu + k, max(qn2, 1.0))
    sol = solve(prob, tol=1e-7, start=(None, x0))
    if sol.status == "infeasible-detected" or sol.x is None:
        return None
    u = u_of(sol.x)
    mags = np.abs(u)
    return np.where(mags > 1e-9, u / np.maximum(mags, 1e-12), u_ref)


def _feasible_init(model, t_rows, g):
    """Bisection-free scaled matched filter; None if no direction works."""
    K, N, M = model.K, model.N, model.M
    u0 = np.ones(N, dtype=complex)
    rows = np.stack([u0 @ model.C_hat[k] + t_rows[k] for k in range(K)])
    dirs = [rows[int(np.argmin(np.linalg.norm(rows, axis=1)))].conj(),
            rows.sum(axis=0).conj()]
    best = None
    for d in dirs:
        nd = np.linalg.norm(d)
        if nd < 1e-12:
            continue
        d = d / nd
        margins = np.array([abs(_beta(model.C_hat[k], t_rows[k], d, u0))
                            - model.eps[k] * np.sqrt(N) for k in range(K)])
        if np.min(margins) <= 1e-9:
            continue
        c = math.sqrt(g) / float(np.min(margins)) * 1.05 + 1e-6
        v0 = c * d
        if best is None or np.linalg.norm(v0) < np.linalg.norm(best):
            best = v0
    return (best, u0) if best is not None else None


def robust_beamforming(model: UncertaintyModel, t_rows,
                       cfg: RobustConfig = RobustConfig(),
                       init=None) -> RobustResult:
    """Algorithm-3 style alternation for the power-minimal robust design."""
    t_rows = np.asarray(t_rows, dtype=complex)
    if model.N * model.M > cfg.dim_guard ** 2:
        raise ValueError("robust design is guarded to N*M <= dim_guard^2")
    g = 2.0 ** model.R - 1.0

    if init is not None:
        v, u = (np.asarray(init[0], complex), np.asarray(init[1], complex))
        if np.min(worst_case_snr(model, t_rows, v, u)) < g:
            scaled = _rescale_to_target(model, t_rows, v, u, g)
            if scaled is None:
                init = None
            else:
                v = scaled
    if init is None:
        got = _feasible_init(model, t_rows, g)
        if got is None:
            return RobustResult(v=None, u=None, theta=None, power=math.inf,
                                status="infeasible")
        v, u = got

    # iterate with worst-case SNR headroom so each linearized subproblem has a
    # strict interior; compare and report on the tight-equivalent power
    headroom = 1.2

    def tight_power(vv, uu):
        tight = _rescale_to_target(model, t_rows, vv, uu, g)
        return (math.inf if tight is None else float(np.linalg.norm(tight) ** 2))

    v = _rescale_to_target(model, t_rows, v, u, g * headroom)
    if v is None:
        return RobustResult(v=None, u=None, theta=None, power=math.inf,
                            status="infeasible")
    best_tp = tight_power(v, u)
    power_trace = [best_tp]
    status = "max-iters"
    for _ in range(cfg.max_outer):
        v_new = _v_step(model, t_rows, g, v, u)
        if v_new is not None and tight_power(v_new, u) <= best_tp:
            best_tp = tight_power(v_new, u)
            v = _rescale_to_target(model, t_rows, v_new, u, g * headroom)
        iota = cfg.iota0
        u_cand = u
        for _ in range(cfg.max_inner):
            u_next = _u_step(model, t_rows, g, v, u_cand, iota)
            if u_next is None:
                break
            moved = float(np.linalg.norm(u_next - u_cand))
            u_cand = u_next
            iota *= cfg.iota_mult
            if moved <= cfg.delta2 or iota > cfg.iota_cap:
                break
        if tight_power(v, u_cand) <= best_tp:
            best_tp = tight_power(v, u_cand)
            u = u_cand
            v = _rescale_to_target(model, t_rows, v, u, g * headroom)
        power_trace.append(best_tp)
        if abs(math.sqrt(power_trace[-1]) - math.sqrt(power_trace[-2])) <= cfg.delta1:
            status = "optimal"
            break

    v = _rescale_to_target(model, t_rows, v, u, g)
    worst = worst_case_snr(model, t_rows, v, u)
    return RobustResult(v=v, u=u, theta=wrap_angle(np.angle(u)),
                        power=float(np.linalg.norm(v) ** 2), status=status,
                        worst_rates=np.log2(1.0 + worst),
                        power_trace=power_trace)


def _rescale_to_target(model, t_rows, v, u, target):
    """Scale v along its ray so the minimum worst-case SNR sits at target
    (up when infeasible, down when there is slack to shed power)."""
    K = model.K
    margins = np.array([abs(_beta(model.C_hat[k], t_rows[k], v, u))
                        - model.eps[k] * np.linalg.norm(v) * np.linalg.norm(u)
                        for k in range(K)])
    m = float(np.min(margins))
    if m <= 1e-12:
        return None
    return v * (math.sqrt(target) / m) * (1.0 + 1e-12)
