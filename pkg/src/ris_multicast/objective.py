"""Per-user SNR and rate for fixed (Q, theta), and the cosine expansion of the
SNR in the phase variables that drives the KKT phase step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelRealization, wrap_angle

EIG_TRUNCATION = 1e-12  # eigenvalues of Q below this are treated as exactly 0


@dataclass(frozen=True)
class PhaseConfig:
    """RIS phase vector theta and its unit-modulus row u, u_n = exp(j theta_n)."""

    theta: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.theta.flags.writeable = False
        self.u.flags.writeable = False

    @classmethod
    def from_theta(cls, theta) -> "PhaseConfig":
        th = wrap_angle(np.asarray(theta, dtype=float).ravel())
        return cls(theta=th, u=np.exp(1j * th))


@dataclass(frozen=True)
class TransmitCovariance:
    """Hermitian PSD transmit covariance with its power budget."""

    Q: np.ndarray
    p_max: float

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=complex)
        object.__setattr__(self, "Q", Q)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")
        if np.max(np.abs(Q - Q.conj().T)) > 1e-10:
            raise ValueError("Q is not Hermitian to 1e-10")
        w = np.linalg.eigvalsh(Q)
        if w[0] < -1e-9:
            raise ValueError(f"Q has eigenvalue {w[0]:.3e} < -1e-9")
        if np.real(np.trace(Q)) > self.p_max + 1e-9:
            raise ValueError("trace(Q) exceeds the power budget")
        Q.flags.writeable = False


def effective_row(phase: PhaseConfig, ch: ChannelRealization, k: int) -> np.ndarray:
    """Effective 1 x M channel row of user k: u @ cascade[k] + t[k]."""
    if phase.u.shape[0] != ch.N:
        raise ValueError(f"phase length {phase.u.shape[0]} != N = {ch.N}")
    return phase.u @ ch.cascade[k] + ch.t[k]


def snr(Q: TransmitCovariance, phase: PhaseConfig, ch: ChannelRealization, k: int) -> float:
    if Q.Q.shape[0] != ch.M:
        raise ValueError(f"Q is {Q.Q.shape[0]}x{Q.Q.shape[0]} but M = {ch.M}")
    e = effective_row(phase, ch, k)
    val = float(np.real(e @ Q.Q @ e.conj()))
    return max(val, 0.0)


def rate(Q: TransmitCovariance, phase: PhaseConfig, ch: ChannelRealization, k: int) -> float:
    return float(np.log2(1.0 + snr(Q, phase, ch, k)))


def all_snrs(Q: TransmitCovariance, phase: PhaseConfig, ch: ChannelRealization) -> np.ndarray:
    E = phase.u @ ch.cascade + ch.t  # (K, M)
    vals = np.real(np.einsum("km,mn,kn->k", E, Q.Q, E.conj()))
    return np.maximum(vals, 0.0)


def min_rate(Q: TransmitCovariance, phase: PhaseConfig, ch: ChannelRealization):
    """Minimum per-user rate and its argmin (ties broken by lowest index)."""
    rates = np.log2(1.0 + all_snrs(Q, phase, ch))
    k = int(np.argmin(rates))
    return float(rates[k]), k


def _sqrt_factor(Q: np.ndarray):
    """U, sqrt(Sigma) of the PSD eigendecomposition with tiny eigenvalues zeroed."""
    w, U = np.linalg.eigh(Q)
    if w[0] < -1e-6:
        raise ValueError(f"Q eigenvalue {w[0]:.3e} < -1e-6: not PSD")
    w = np.where(w < EIG_TRUNCATION, 0.0, w)
    return U, np.sqrt(w)


@dataclass(frozen=True)
class TrigExpansion:
    """SNR_k as a constant plus pairwise and direct cosine terms.

    snr(theta) = a + sum_{i<j} 2 b[i,j] cos(theta_i - theta_j + psi[i,j])
                   + sum_i 2 c[i] cos(theta_i + omega[i])

    pair_phasor[i,j] = b[i,j] e^{j psi[i,j]} (full matrix, conjugate-symmetric
    with zero diagonal) and direct_phasor[i] = c[i] e^{j omega[i]} carry the
    same data in complex form for aggregation.
    """

    a: float
    b: np.ndarray      # (N, N) upper-triangular magnitudes
    psi: np.ndarray    # (N, N) matching phases
    c: np.ndarray      # (N,)
    omega: np.ndarray  # (N,)
    pair_phasor: np.ndarray    # (N, N) complex
    direct_phasor: np.ndarray  # (N,) complex

    def evaluate(self, theta) -> float:
        u = np.exp(1j * np.asarray(theta, dtype=float).ravel())
        pair = np.real(np.sum(np.triu(self.pair_phasor, 1) * np.outer(u, u.conj())))
        direct = np.real(np.sum(self.direct_phasor * u))
        return float(self.a + 2.0 * pair + 2.0 * direct)


def trig_expansion(Q: TransmitCovariance, ch: ChannelRealization, k: int) -> TrigExpansion:
    """Expand snr(Q, theta, ch, k) into the cosine form above.

    Uses V = H U sqrt(Sigma) and p = sqrt(Sigma) U^H t_col from the
    eigendecomposition of Q; the result is verified against the direct
    quadratic form by the test suite rather than trusted algebraically.
    """
    U, s = _sqrt_factor(Q.Q)
    t_col = ch.t[k].conj()
    p = (U * s).conj().T @ t_col       # sqrt(Sigma) U^H t_col
    # rows of cascade @ U sqrt(Sigma) are h_i v_i^H, folding the per-element
    # channel into the square-root factor rows
    Vc = ch.cascade[k] @ (U * s)

    gram = Vc @ Vc.conj().T
    pair = gram.copy()
    np.fill_diagonal(pair, 0.0)
    direct = Vc @ p

    a = float(np.sum(np.real(np.diag(gram))) + np.real(ch.t[k] @ Q.Q @ t_col))
    return TrigExpansion(
        a=a,
        b=np.triu(np.abs(pair), 1),
        psi=np.triu(np.angle(pair), 1),
        c=np.abs(direct),
        omega=np.angle(direct),
        pair_phasor=pair,
        direct_phasor=direct,
    )


def phase_gradient(Qmat: np.ndarray, ch: ChannelRealization, k: int,
                   theta: np.ndarray) -> np.ndarray:
    """Gradient of snr_k with respect to theta at the given phases."""
    u = np.exp(1j * theta)
    e = u @ ch.cascade[k] + ch.t[k]
    w = ch.cascade[k] @ (Qmat @ e.conj())
    return -2.0 * np.imag(u * w)
