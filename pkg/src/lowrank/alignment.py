"""Orthogonal and GL(r) alignment of factors to a reference, and balanced factorizations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    AlignmentDiverged,
    DegenerateRank,
    FactorPoint,
    GroundTruth,
    RANK_TOL,
    as_matrix,
    norm_2inf,
)

STEP_TOL = 1e-12


@dataclass(frozen=True)
class AlignmentResult:
    transform: np.ndarray
    dist2: float
    dist_inf: float
    residual: float
    converged: bool
    aligned: FactorPoint


def procrustes_rotation(Z: np.ndarray, Z_ref: np.ndarray) -> np.ndarray:
    """Orthogonal ``R`` minimizing ``||Z R - Z_ref||_F`` (reflections allowed)."""
    A, _, Bt = np.linalg.svd(Z.T @ Z_ref)
    return A @ Bt


def procrustes_align(Z, Z_ref) -> AlignmentResult:
    """Solve the orthogonal Procrustes problem and report the aligned distances.

    ``residual`` is the Frobenius norm of the antisymmetric part of
    ``Z_ref^T Z R``, which vanishes at the optimum.
    """
    Z = np.asarray(Z, dtype=float)
    Z_ref = np.asarray(Z_ref, dtype=float)
    if Z.shape != Z_ref.shape:
        raise ValueError(f"shape mismatch: {Z.shape} vs {Z_ref.shape}")
    R = procrustes_rotation(Z, Z_ref)
    ZR = Z @ R
    E = ZR - Z_ref
    C = Z_ref.T @ ZR
    return AlignmentResult(
        transform=R,
        dist2=float(np.linalg.norm(E)),
        dist_inf=norm_2inf(E),
        residual=float(np.linalg.norm(C - C.T)),
        converged=True,
        aligned=FactorPoint(ZR),
    )


def m_star(pair: FactorPoint, ref: FactorPoint) -> np.ndarray:
    """Balance residual ``n^-1 (U - U*)^T U - q^-1 V^T (V - V*)``."""
    return _m_star(pair.U, pair.V, ref.U, ref.V)


def _m_star(U, V, Us, Vs):
    n, q = U.shape[0], V.shape[0]
    return (U - Us).T @ U / n - V.T @ (V - Vs) / q


def _sym_apply(A: np.ndarray, f) -> np.ndarray:
    w, Q = np.linalg.eigh((A + A.T) / 2)
    return (Q * f(w)) @ Q.T


def balancing_transform(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Symmetric ``G`` such that ``(U G, V G^-T)`` is balanced."""
    n, q = U.shape[0], V.shape[0]
    A = U.T @ U / n
    B = V.T @ V / q
    A_half = _sym_apply(A, np.sqrt)
    A_ihalf = _sym_apply(A, lambda w: 1 / np.sqrt(w))
    P = A_ihalf @ _sym_apply(A_half @ B @ A_half, np.sqrt) @ A_ihalf
    return _sym_apply(P, np.sqrt)


def _gl_warm_start(U, V, Us, Vs):
    n, q = U.shape[0], V.shape[0]
    try:
        Gb = balancing_transform(U, V)
        if not np.all(np.isfinite(Gb)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        Gb = np.eye(U.shape[1])
    Gb_it = np.linalg.inv(Gb).T
    stacked = np.vstack([U @ Gb / np.sqrt(n), V @ Gb_it / np.sqrt(q)])
    stacked_ref = np.vstack([Us / np.sqrt(n), Vs / np.sqrt(q)])
    return Gb @ procrustes_rotation(stacked, stacked_ref)


def _m_jacobian(Ut, Vt, Us, Vs) -> np.ndarray:
    """Matrix of ``D -> d/dt M*(Ut (I + tD), Vt (I + tD)^-T)`` at ``t = 0``."""
    n, q = Ut.shape[0], Vt.shape[0]
    r = Ut.shape[1]
    Cu = (Ut - Us).T @ Ut / n
    Gu = Ut.T @ Ut / n
    Gv = Vt.T @ Vt / q
    Cv = Vt.T @ (Vt - Vs) / q
    J = np.empty((r * r, r * r))
    for k in range(r * r):
        D = np.zeros(r * r)
        D[k] = 1.0
        D = D.reshape(r, r)
        J[:, k] = (Cu @ D + D.T @ Gu + Gv @ D.T + D @ Cv).ravel()
    return J


def gl_align(
    pair: FactorPoint,
    ref: FactorPoint,
    tol: Optional[float] = None,
    max_iter: int = 100,
    init: Optional[np.ndarray] = None,
) -> AlignmentResult:
    """Invertible alignment ``G`` of ``(U, V)`` to ``(U*, V*)``.

    Minimizes ``n^-1 ||U G - U*||_F^2 + q^-1 ||V G^-T - V*||_F^2`` locally by a
    damped Newton iteration on the stationarity condition ``M*(UG, VG^-T) = 0``,
    started from ``init`` or from a balanced Procrustes rotation.

    Parameters
    ----------
    tol : float, optional
        Bound on ``||M*||_F`` at return. Defaults to ``1e-9 * tau_star**2``.

    Raises
    ------
    AlignmentDiverged
        If the iteration stops without meeting the stationarity tolerance.
    """
    if pair.is_symmetric or ref.is_symmetric:
        raise ValueError("gl_align needs asymmetric factor pairs")
    U, V, Us, Vs = pair.U, pair.V, ref.U, ref.V
    if U.shape != Us.shape or V.shape != Vs.shape:
        raise ValueError("pair and reference shapes differ")
    n, q = U.shape[0], V.shape[0]
    r = U.shape[1]
    if tol is None:
        tau2 = (np.sum(Us**2) / n + np.sum(Vs**2) / q) / 2
        tol = 1e-9 * tau2
    G = _gl_warm_start(U, V, Us, Vs) if init is None else np.array(init, dtype=float)

    def state(G):
        Ut = U @ G
        Vt = V @ np.linalg.inv(G).T
        return Ut, Vt, _m_star(Ut, Vt, Us, Vs)

    converged = False
    try:
        Ut, Vt, M = state(G)
        res = np.linalg.norm(M)
        for _ in range(max_iter):
            J = _m_jacobian(Ut, Vt, Us, Vs)
            D = np.linalg.lstsq(J, -M.ravel(), rcond=None)[0].reshape(r, r)
            step = 1.0
            while True:
                G_new = G @ (np.eye(r) + step * D)
                Ut_new, Vt_new, M_new = state(G_new)
                res_new = np.linalg.norm(M_new)
                if np.isfinite(res_new) and (res_new < res or res_new <= tol):
                    break
                step /= 2
                if step < 1e-8:
                    break
            step_norm = step * np.linalg.norm(D)
            if step < 1e-8:
                # no progress possible; accept the current point if it already certifies
                converged = res <= tol
                break
            G, Ut, Vt, M, res = G_new, Ut_new, Vt_new, M_new, res_new
            if res <= tol and step_norm <= STEP_TOL:
                converged = True
                break
    except np.linalg.LinAlgError as exc:
        raise AlignmentDiverged(f"alignment became singular: {exc}") from exc
    if not converged:
        raise AlignmentDiverged(f"GL(r) alignment stopped with ||M*||_F = {res:.3e} > tol {tol:.3e}")
    Eu, Ev = Ut - Us, Vt - Vs
    return AlignmentResult(
        transform=G,
        dist2=float(np.sqrt(np.sum(Eu**2) / n + np.sum(Ev**2) / q)),
        dist_inf=max(norm_2inf(Eu), norm_2inf(Ev)),
        residual=float(res),
        converged=True,
        aligned=FactorPoint(Ut, Vt),
    )


def align(point: FactorPoint, truth: GroundTruth, **kwargs) -> AlignmentResult:
    """Procrustes alignment for symmetric points, GL(r) alignment otherwise."""
    if point.is_symmetric:
        return procrustes_align(point.Z, truth.point.Z)
    return gl_align(point, truth.point, **kwargs)


def balanced_factorization(X, r: int) -> FactorPoint:
    """Balanced rank-``r`` factors ``U = sqrt(n) L Lam^1/2``, ``V = sqrt(q) R Lam^1/2``.

    ``Lam`` holds the top ``r`` singular values divided by ``sqrt(n q)``, so
    ``U V^T`` is the best rank-``r`` approximation and ``U^T U / n == V^T V / q``.
    """
    X = as_matrix(X, "X")
    n, q = X.shape
    if not 1 <= r <= min(n, q):
        raise ValueError(f"rank r={r} must lie in [1, {min(n, q)}]")
    L, s, Rt = np.linalg.svd(X, full_matrices=False)
    if s[0] == 0.0 or s[r - 1] < RANK_TOL * s[0]:
        raise DegenerateRank(f"sigma_{r} = {s[r - 1]:.3e} is numerically zero")
    root = np.sqrt(s[:r] / np.sqrt(n * q))
    return FactorPoint(np.sqrt(n) * L[:, :r] * root, np.sqrt(q) * Rt[:r].T * root)
