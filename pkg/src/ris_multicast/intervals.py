"""Plain-float interval arithmetic and a Krawczyk root enclosure routine.

Intervals are (lo, hi) ndarray pairs. Rounding is not directed, so the
certification is verification-grade rather than formally rigorous; every
returned root is re-checked against the point residual by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def isin(lo, hi):
    """Elementwise range of sin over [lo, hi]."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    slo, shi = np.sin(lo), np.sin(hi)
    out_lo = np.minimum(slo, shi)
    out_hi = np.maximum(slo, shi)
    has_max = np.floor((hi - np.pi / 2) / TWO_PI) >= np.ceil((lo - np.pi / 2) / TWO_PI)
    has_min = np.floor((hi + np.pi / 2) / TWO_PI) >= np.ceil((lo + np.pi / 2) / TWO_PI)
    return np.where(has_min, -1.0, out_lo), np.where(has_max, 1.0, out_hi)


def icos(lo, hi):
    return isin(np.asarray(lo) + np.pi / 2, np.asarray(hi) + np.pi / 2)


def scale(w, lo, hi):
    """Interval times an elementwise real weight (any sign)."""
    a, b = w * lo, w * hi
    return np.minimum(a, b), np.maximum(a, b)


def rmat_imat(Y, Blo, Bhi):
    """Real matrix times interval matrix."""
    t1 = Y[:, :, None] * Blo[None, :, :]
    t2 = Y[:, :, None] * Bhi[None, :, :]
    return np.minimum(t1, t2).sum(axis=1), np.maximum(t1, t2).sum(axis=1)


def imat_ivec(Alo, Ahi, vlo, vhi):
    """Interval matrix times interval vector."""
    cands = [Alo * vlo[None, :], Alo * vhi[None, :],
             Ahi * vlo[None, :], Ahi * vhi[None, :]]
    lo = np.minimum.reduce(cands).sum(axis=1)
    hi = np.maximum.reduce(cands).sum(axis=1)
    return lo, hi


@dataclass
class KrawczykResult:
    roots: list = field(default_factory=list)
    budget_exhausted: bool = False
    degenerate: bool = False
    boxes_processed: int = 0


def krawczyk_roots(res, jac, ires, ijac, lo, hi, *, root_tol=1e-8,
                   rad_tol=1e-10, max_boxes=20000, drop_width=1e-5) -> KrawczykResult:
    """Enclose every nondegenerate root of res inside the box [lo, hi].

    res/jac take a point; ires/ijac take (lo, hi) and return interval values.
    Boxes are bisected until the Krawczyk operator K(X) either excludes a root
    (K disjoint from X) or certifies a unique one (K strictly inside X), which
    is then contracted and Newton-polished. Boxes thinner than drop_width that
    still cannot be certified (degenerate manifolds) are abandoned.
    """
    n = len(lo)
    queue = [(np.asarray(lo, float), np.asarray(hi, float))]
    out = KrawczykResult()

    while queue:
        if out.boxes_processed >= max_boxes:
            out.budget_exhausted = True
            break
        out.boxes_processed += 1
        blo, bhi = queue.pop()
        width = bhi - blo
        m = 0.5 * (blo + bhi)
        Jm = jac(m)
        try:
            Y = np.linalg.inv(Jm)
            if not np.all(np.isfinite(Y)) or np.linalg.norm(Y) > 1e14:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            if np.max(width) > drop_width:
                queue.extend(_bisect(blo, bhi))
            continue

        Klo, Khi = _krawczyk_box(res, ijac, blo, bhi, m, Y, n)
        if np.any(Klo > bhi) or np.any(Khi < blo):
            continue  # no root in this box
        inside = np.all(Klo > blo) and np.all(Khi < bhi)
        if inside:
            root = _contract(res, ijac, jac,
                             np.maximum(Klo, blo), np.minimum(Khi, bhi), rad_tol)
            if root is not None and np.max(np.abs(res(root))) <= root_tol:
                out.roots.append(root)
            continue
        # undecided: shrink by intersection if it helps, else bisect
        nlo, nhi = np.maximum(Klo, blo), np.minimum(Khi, bhi)
        if np.max(nhi - nlo) < 0.75 * np.max(width):
            queue.append((nlo, nhi))
        elif np.max(width) > drop_width:
            queue.extend(_bisect(blo, bhi))
        # else: abandoned (unverifiable sliver)
    return out


def _krawczyk_box(res, ijac, blo, bhi, m, Y, n):
    rm = np.asarray(res(m), float)
    Jlo, Jhi = ijac(blo, bhi)
    YJlo, YJhi = rmat_imat(Y, Jlo, Jhi)
    Clo, Chi = np.eye(n) - YJhi, np.eye(n) - YJlo
    dlo, dhi = blo - m, bhi - m
    plo, phi = imat_ivec(Clo, Chi, dlo, dhi)
    base = m - Y @ rm
    return base + plo, base + phi


def _contract(res, ijac, jac, blo, bhi, rad_tol, max_steps=60):
    for _ in range(max_steps):
        if np.max(bhi - blo) <= rad_tol:
            break
        m = 0.5 * (blo + bhi)
        try:
            Y = np.linalg.inv(jac(m))
        except np.linalg.LinAlgError:
            break
        Klo, Khi = _krawczyk_box(res, ijac, blo, bhi, m, Y, len(blo))
        nlo, nhi = np.maximum(Klo, blo), np.minimum(Khi, bhi)
        if np.any(nlo > nhi):
            return None
        if np.max(nhi - nlo) >= np.max(bhi - blo):
            break
        blo, bhi = nlo, nhi
    # final plain Newton polish from the box center
    x = 0.5 * (blo + bhi)
    for _ in range(8):
        r = np.asarray(res(x), float)
        try:
            x = x - np.linalg.solve(jac(x), r)
        except np.linalg.LinAlgError:
            break
    return x


def _bisect(blo, bhi):
    d = int(np.argmax(bhi - blo))
    mid = 0.5 * (blo[d] + bhi[d])
    left_hi = bhi.copy()
    left_hi[d] = mid
    right_lo = blo.copy()
    right_lo[d] = mid
    return [(blo, left_hi), (right_lo, bhi)]
