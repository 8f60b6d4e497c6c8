"""Small dense interior-point engine for linear objectives over one Hermitian
PSD matrix variable plus a real scalar block, under scalar linear
inequalities, PSD-of-variable, and affine LMI constraints.

Log-barrier path following with damped Newton steps on the real
parameterization of the Hermitian variable. Dimensions here are tiny
(M <= 32, LMI blocks <= NM+1), so everything is dense and direct.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .objective import TransmitCovariance


class EngineError(RuntimeError):
    """Numerical breakdown; carries the last iterate for diagnosis."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


# ---------------------------------------------------------------------------
# Hermitian matrix <-> real coordinates (orthonormal under the trace inner
# product: diagonal entries, then sqrt(2)-scaled real/imag upper triangle).

_BASIS_CACHE: dict = {}


def herm_dim(M: int) -> int:
    return M * M


def herm_to_vec(A: np.ndarray) -> np.ndarray:
    M = A.shape[0]
    iu = np.triu_indices(M, 1)
    upper = A[iu]
    return np.concatenate([np.real(np.diag(A)),
                           np.sqrt(2.0) * upper.real,
                           np.sqrt(2.0) * upper.imag])


def vec_to_herm(z: np.ndarray, M: int) -> np.ndarray:
    iu = np.triu_indices(M, 1)
    m2 = len(iu[0])
    A = np.zeros((M, M), dtype=complex)
    A[np.diag_indices(M)] = z[:M]
    upper = (z[M:M + m2] + 1j * z[M + m2:M + 2 * m2]) / np.sqrt(2.0)
    A[iu] = upper
    A[(iu[1], iu[0])] = upper.conj()
    return A


def _basis_matrix(M: int) -> np.ndarray:
    """Columns are vec(E_p) (column-major) of the orthonormal Hermitian basis."""
    if M in _BASIS_CACHE:
        return _BASIS_CACHE[M]
    r = herm_dim(M)
    J = np.zeros((M * M, r), dtype=complex)
    for p in range(r):
        z = np.zeros(r)
        z[p] = 1.0
        J[:, p] = vec_to_herm(z, M).ravel(order="F")
    _BASIS_CACHE[M] = J
    return J


# ---------------------------------------------------------------------------
# Problem description


@dataclass
class ScalarIneq:
    """Re tr(A Q) + a . x + b >= 0 (either of A, a may be absent)."""

    A: Optional[np.ndarray] = None
    a: Optional[np.ndarray] = None
    b: float = 0.0


@dataclass
class AffineLMI:
    """F0 + sum_i x_i F[i]  >= 0, affine in the scalar block only."""

    F0: np.ndarray
    F: np.ndarray  # (num_scalars, d, d)

    def __post_init__(self):
        self.F0 = 0.5 * (self.F0 + self.F0.conj().T)
        self.F = 0.5 * (self.F + np.transpose(self.F, (0, 2, 1)).conj())

    @classmethod
    def from_function(cls, fn, num_scalars: int) -> "AffineLMI":
        """Build from any affine map x -> Hermitian matrix by probing it."""
        F0 = np.asarray(fn(np.zeros(num_scalars)), dtype=complex)
        F = np.empty((num_scalars, *F0.shape), dtype=complex)
        for i in range(num_scalars):
            e = np.zeros(num_scalars)
            e[i] = 1.0
            F[i] = np.asarray(fn(e), dtype=complex) - F0
        return cls(F0=F0, F=F)

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.F0 + np.tensordot(x, self.F, axes=1)


@dataclass
class ConicProblem:
    mat_dim: int = 0
    num_scalars: int = 0
    maximize: bool = True
    obj_C: Optional[np.ndarray] = None   # objective term Re tr(C Q)
    obj_c: Optional[np.ndarray] = None   # objective term c . x
    psd: bool = True                     # barrier on Q itself (when mat_dim > 0)
    scalar_ineqs: list = field(default_factory=list)
    lmis: list = field(default_factory=list)

    def barrier_degree(self) -> int:
        nu = len(self.scalar_ineqs)
        if self.mat_dim > 0 and self.psd:
            nu += self.mat_dim
        nu += sum(l.F0.shape[0] for l in self.lmis)
        return nu


@dataclass
class ConicSolution:
    Q: Optional[np.ndarray]
    x: Optional[np.ndarray]
    objective: float
    gap: float
    iterations: int
    status: str
    stage_objectives: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Barrier machinery


class _Workspace:
    def __init__(self, problem: ConicProblem):
        self.p = problem
        self.r = herm_dim(problem.mat_dim) if problem.mat_dim > 0 else 0
        self.s = problem.num_scalars
        self.n = self.r + self.s
        # linear objective in z, as a minimization
        g0 = np.zeros(self.n)
        if problem.obj_C is not None:
            g0[:self.r] = herm_to_vec(problem.obj_C)
        if problem.obj_c is not None:
            g0[self.r:] = np.asarray(problem.obj_c, dtype=float)
        self.obj_vec = g0.copy()
        self.g0 = -g0 if problem.maximize else g0
        # scalar constraints as coefficient rows
        self.coefs = []
        self.offsets = []
        for con in problem.scalar_ineqs:
            c = np.zeros(self.n)
            if con.A is not None:
                c[:self.r] = herm_to_vec(con.A)
            if con.a is not None:
                c[self.r:] = np.asarray(con.a, dtype=float)
            self.coefs.append(c)
            self.offsets.append(float(con.b))
        self.coefs = np.array(self.coefs) if self.coefs else np.zeros((0, self.n))
        self.offsets = np.array(self.offsets)
        self.J = _basis_matrix(problem.mat_dim) if self.r else None

    def objective_value(self, z):
        return float(self.obj_vec @ z)

    def split(self, z):
        Q = vec_to_herm(z[:self.r], self.p.mat_dim) if self.r else None
        return Q, z[self.r:]

    def barrier(self, z):
        """phi(z), or None if z is not strictly interior."""
        phi = 0.0
        if len(self.coefs):
            sig = self.coefs @ z + self.offsets
            if np.any(sig <= 0):
                return None
            phi -= float(np.sum(np.log(sig)))
        Q, x = self.split(z)
        if self.r and self.p.psd:
            try:
                L = np.linalg.cholesky(Q)
            except np.linalg.LinAlgError:
                return None
            phi -= 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))
        for lmi in self.p.lmis:
            S = lmi.value(x)
            try:
                L = np.linalg.cholesky(S)
            except np.linalg.LinAlgError:
                return None
            phi -= 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))
        return phi

    def grad_hess(self, z, t):
        g = t * self.g0.copy()
        H = np.zeros((self.n, self.n))
        if len(self.coefs):
            sig = self.coefs @ z + self.offsets
            g -= self.coefs.T @ (1.0 / sig)
            H += (self.coefs / sig[:, None] ** 2).T @ self.coefs
        Q, x = self.split(z)
        if self.r and self.p.psd:
            W = np.linalg.inv(Q)
            W = 0.5 * (W + W.conj().T)
            g[:self.r] -= herm_to_vec(W)
            KW = np.kron(W.T, W)
            H[:self.r, :self.r] += np.real(self.J.conj().T @ (KW @ self.J))
        for lmi in self.p.lmis:
            S = lmi.value(x)
            G = np.linalg.solve(S, lmi.F)  # (s, d, d), G[i] = S^-1 F_i
            tr = np.real(np.einsum("iaa->i", G))
            g[self.r:] -= tr
            H[self.r:, self.r:] += np.real(np.einsum("iab,jba->ij", G, G))
        return g, H


def _center(ws: _Workspace, z, t, inner_max=60, inner_tol=1e-10, early_stop=None):
    """Damped Newton on t*f0 + phi from a strictly interior z."""
    phi = ws.barrier(z)
    if phi is None:
        raise EngineError("initial point is not strictly interior", iterate=z)
    psi = t * float(ws.g0 @ z) + phi
    newton_iters = 0
    for _ in range(inner_max):
        if early_stop is not None and early_stop(z):
            break
        g, H = ws.grad_hess(z, t)
        ridge = 0.0
        for attempt in range(8):
            try:
                dz = np.linalg.solve(H + ridge * np.eye(ws.n), -g)
                break
            except np.linalg.LinAlgError:
                ridge = max(ridge * 10.0, 1e-10 * (1.0 + np.trace(H) / ws.n))
        else:
            raise EngineError("Newton system unsolvable", iterate=z)
        if not np.all(np.isfinite(dz)):
            raise EngineError("non-finite Newton step", iterate=z)
        dec2 = float(-g @ dz)
        newton_iters += 1
        if dec2 / 2.0 <= inner_tol:
            break
        step = 1.0
        accepted = False
        while step > 1e-14:
            z2 = z + step * dz
            phi2 = ws.barrier(z2)
            if phi2 is not None:
                psi2 = t * float(ws.g0 @ z2) + phi2
                if psi2 <= psi + 0.25 * step * float(g @ dz):
                    z, psi = z2, psi2
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            break  # stalled at this centering accuracy
    return z, newton_iters


def solve(problem: ConicProblem, tol: float = 1e-8, max_iters: int = 40,
          start=None) -> ConicSolution:
    """Barrier path following. `start` is (Q0, x0); phase-I is run when the
    problem has no matrix variable and no strictly feasible start is given."""
    ws = _Workspace(problem)
    z0 = np.zeros(ws.n)
    if start is not None:
        Q0, x0 = start
        if Q0 is not None:
            z0[:ws.r] = herm_to_vec(np.asarray(Q0, dtype=complex))
        if x0 is not None:
            z0[ws.r:] = np.asarray(x0, dtype=float)

    if ws.barrier(z0) is None:
        if problem.mat_dim > 0:
            raise EngineError("no strictly feasible start for matrix problem",
                              iterate=z0)
        z0 = _phase_one(problem, z0[ws.r:])
        if z0 is None:
            return ConicSolution(Q=None, x=None, objective=np.nan, gap=np.inf,
                                 iterations=0, status="infeasible-detected")
        z0 = np.concatenate([np.zeros(ws.r), z0])

    nu = max(problem.barrier_degree(), 1)
    t = 1.0
    z = z0
    total = 0
    stage_objs = []
    while True:
        z, it = _center(ws, z, t)
        total += it
        stage_objs.append(ws.objective_value(z))
        if 1.0 / t <= tol:
            status = "optimal"
            break
        if len(stage_objs) >= max_iters:
            status = "max-iters"
            break
        t *= 10.0

    Q, x = ws.split(z)
    if Q is not None:
        Q = 0.5 * (Q + Q.conj().T)
    return ConicSolution(Q=Q, x=x, objective=ws.objective_value(z),
                         gap=nu / t, iterations=total, status=status,
                         stage_objectives=stage_objs)


def _phase_one(problem: ConicProblem, x0: np.ndarray):
    """Minimize an added slack w with every constraint shifted by w; returns a
    strictly feasible x for the original problem, or None."""
    s = problem.num_scalars
    aug = ConicProblem(mat_dim=0, num_scalars=s + 1, maximize=False,
                       obj_c=np.concatenate([np.zeros(s), [1.0]]))
    for con in problem.scalar_ineqs:
        a = np.zeros(s + 1)
        if con.a is not None:
            a[:s] = con.a
        a[s] = 1.0
        aug.scalar_ineqs.append(ScalarIneq(a=a, b=con.b))
    for lmi in problem.lmis:
        d = lmi.F0.shape[0]
        F = np.zeros((s + 1, d, d), dtype=complex)
        F[:s] = lmi.F
        F[s] = np.eye(d)
        aug.lmis.append(AffineLMI(F0=lmi.F0.copy(), F=F))

    # initial slack: one unit beyond the worst violation at x0
    worst = 0.0
    for con in problem.scalar_ineqs:
        val = float(con.b + (con.a @ x0 if con.a is not None else 0.0))
        worst = max(worst, -val)
    for lmi in problem.lmis:
        w = np.linalg.eigvalsh(lmi.value(x0))
        worst = max(worst, -float(w[0]))
    z = np.concatenate([x0, [worst + 1.0]])

    ws = _Workspace(aug)
    t = 1.0
    found = None

    def early(zz):
        nonlocal found
        if zz[-1] < -1e-6:
            found = zz[:s].copy()
            return True
        return False

    while 1.0 / t > 1e-7:
        z, _ = _center(ws, z, t, early_stop=early)
        if found is not None:
            return found
        t *= 10.0
    return None


# ---------------------------------------------------------------------------
# The max-min covariance step (P2.1)


def maxmin_q_step(R_list, p_max: float, tol: float = 1e-8):
    """maximize gamma s.t. gamma <= Re tr(R_k Q), tr(Q) <= p_max, Q >= 0.

    Returns (TransmitCovariance, gamma) with gamma recomputed from the
    returned Q so the pair is self-consistent.
    """
    R_list = [np.asarray(R, dtype=complex) for R in R_list]
    M = R_list[0].shape[0]
    prob = ConicProblem(mat_dim=M, num_scalars=1, maximize=True,
                        obj_c=np.array([1.0]))
    for R in R_list:
        if np.max(np.abs(R - R.conj().T)) > 1e-8:
            raise ValueError("R_k must be Hermitian")
        prob.scalar_ineqs.append(ScalarIneq(A=R, a=np.array([-1.0]), b=0.0))
    prob.scalar_ineqs.append(ScalarIneq(A=-np.eye(M), b=float(p_max)))

    Q0 = (p_max / (2.0 * M)) * np.eye(M)
    m0 = min(float(np.real(np.trace(R @ Q0))) for R in R_list)
    gamma0 = m0 - max(0.1 * abs(m0), 1e-3)
    sol = solve(prob, tol=tol, start=(Q0, np.array([gamma0])))
    if sol.status == "infeasible-detected":
        raise EngineError("maxmin_q_step infeasible (should not happen)")

    Q = 0.5 * (sol.Q + sol.Q.conj().T)
    gamma = min(float(np.real(np.trace(R @ Q))) for R in R_list)
    cov = TransmitCovariance(Q=Q, p_max=float(p_max))
    return cov, gamma
