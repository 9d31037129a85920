"""Numeric certificates: curvature sampling, augmented Hessians, noise functionals, rate fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import linregress

from .core import (
    DimensionTooLarge,
    FactorPoint,
    GroundTruth,
    InsufficientDecay,
    norm_2inf,
    norm_inf1,
    op_norm,
)
from .descent import Trajectory
from .losses import LossModel, SensingData, noise_gradient
from .regularizer import PenaltyConfig, augmented_value_grad, loss_factor_grad

MAX_HESSIAN_DIM = 4000


def _rng(seed, *keys):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *keys]))


@dataclass(frozen=True)
class CurvatureEstimate:
    alpha_hat: float
    beta_hat: float
    n_samples: int
    region_radius: float
    rowwise_beta_hat: Optional[float] = None


@dataclass(frozen=True)
class NoiseSummary:
    delta2: float
    delta_inf: float
    delta_inf_bar: float
    n_region_samples: int


@dataclass(frozen=True)
class RateFit:
    rho_hat: float
    floor: float
    fit_window: tuple[int, int]
    r_squared: float


def _tangent(point: FactorPoint, rng) -> np.ndarray:
    if point.is_symmetric:
        Z = point.Z
        W = rng.standard_normal(Z.shape)
        return Z @ W.T + W @ Z.T
    R = rng.standard_normal(point.V.shape)
    L = rng.standard_normal(point.U.shape)
    return point.U @ R.T + L @ point.V.T


def _perturbed(point: FactorPoint, eps: float, rng) -> FactorPoint:
    if eps == 0:
        return point
    blocks = []
    for b in point.blocks():
        D = rng.standard_normal(b.shape)
        blocks.append(b + eps * np.linalg.norm(b) / np.linalg.norm(D) * D)
    return FactorPoint(*blocks)


def _rowwise_ratio(loss, point, X, rng):
    """One sampled ratio for the row-wise cross-curvature inequality."""
    if point.is_symmetric:
        Z = point.Z
        n, r = Z.shape
        i = int(rng.integers(n))
        h = rng.standard_normal(r)
        W = rng.standard_normal(Z.shape)
        W[i] = 0.0
        Wi = np.zeros_like(Z)
        Wi[i] = h
        P1 = Z @ Wi.T + Wi @ Z.T
        P2 = Z @ W.T + W @ Z.T
        denom = np.linalg.norm(Z[i]) * np.linalg.norm(h) * op_norm(Z) * np.linalg.norm(W)
    else:
        U, V = point.U, point.V
        (n, r), q = U.shape, V.shape[0]
        h = rng.standard_normal(r)
        R = rng.standard_normal(V.shape)
        L = rng.standard_normal(U.shape)
        if rng.random() < 0.5:
            i = int(rng.integers(n))
            L[i] = 0.0
            P1 = np.zeros((n, q))
            P1[i] = V @ h
            P2 = U @ R.T + L @ V.T
            denom = np.linalg.norm(V @ h) * np.linalg.norm(U[i] @ R.T)
        else:
            j = int(rng.integers(q))
            R[j] = 0.0
            P1 = np.zeros((n, q))
            P1[:, j] = U @ h
            P2 = U @ R.T + L @ V.T
            denom = np.linalg.norm(U @ h) * np.linalg.norm(L @ V[j])
    if denom == 0:
        return 0.0
    return abs(loss.hessian_bilinear(X, P1, P2)) / denom


def estimate_curvature(
    loss: LossModel,
    anchor: FactorPoint,
    n_samples: int = 100,
    rowwise: bool = False,
    seed: int = 0,
    region_radius: float = 0.0,
) -> CurvatureEstimate:
    """Sample Rayleigh quotients of the loss Hessian on tangent directions.

    Each sample draws a Gaussian direction ``W`` (or ``(L, R)``), forms the
    tangent matrix ``Z W^T + W Z^T`` (or ``U R^T + L V^T``) at the anchor, and
    records ``hessian_bilinear(P, P) / ||P||_F^2``. With ``region_radius > 0``
    each sample uses its own anchor perturbed by that relative Frobenius size.
    ``rowwise`` adds 100 draws of the row-wise cross-curvature ratio; the
    reported constant is a sampled maximum, not a certified supremum.
    """
    if n_samples < 10:
        raise ValueError("n_samples must be at least 10")
    if loss.shape != anchor.shape:
        raise ValueError("anchor does not match the loss shape")
    rng = _rng(seed, 11)
    ratios = np.empty(n_samples)
    for k in range(n_samples):
        pt = _perturbed(anchor, region_radius, rng)
        P = _tangent(pt, rng)
        ratios[k] = loss.hessian_bilinear(pt.product(), P, P) / float(np.sum(P**2))
    row_beta = None
    if rowwise:
        rrng = _rng(seed, 12)
        vals = []
        for _ in range(100):
            pt = _perturbed(anchor, region_radius, rrng)
            vals.append(_rowwise_ratio(loss, pt, pt.product(), rrng))
        row_beta = float(max(vals))
    return CurvatureEstimate(float(ratios.min()), float(ratios.max()), n_samples, region_radius, row_beta)


def assemble_augmented_hessian(
    loss: LossModel,
    point: FactorPoint,
    cfg: Optional[PenaltyConfig],
    subtract_score: bool = False,
    rel_step: float = 1e-5,
) -> np.ndarray:
    """Dense Hessian of the augmented objective in the row-major factor coordinates.

    Built column by column from central differences of the analytic gradient
    and symmetrized. ``cfg=None`` gives the Hessian of the bare loss
    ``L(Z Z^T)`` / ``L(U V^T)``. For asymmetric points the result is
    ``S H S`` with ``S = diag(q^-1/2 I, n^-1/2 I)``; ``subtract_score`` removes
    the block score term ``[[0, G (x) I], [G^T (x) I, 0]]`` before scaling.

    Raises
    ------
    DimensionTooLarge
        When the parameter dimension exceeds 4000.
    """
    z = point.flat()
    d = z.size
    if d > MAX_HESSIAN_DIM:
        raise DimensionTooLarge(f"Hessian dimension {d} exceeds {MAX_HESSIAN_DIM}")

    if cfg is None:

        def grad(v):
            return loss_factor_grad(loss, point.with_flat(v)).flat()
    else:

        def grad(v):
            return augmented_value_grad(loss, point.with_flat(v), cfg)[1].flat()

    h = rel_step * max(1.0, float(np.max(np.abs(z))))
    H = np.empty((d, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        H[:, k] = (grad(z + e) - grad(z - e)) / (2 * h)
    scale = max(float(np.linalg.norm(H)), 1e-300)
    defect = float(np.linalg.norm(H - H.T)) / scale
    if defect > 1e-5:
        warnings.warn(f"finite-difference Hessian asymmetry {defect:.2e} exceeds 1e-5", RuntimeWarning)
    H = (H + H.T) / 2
    if point.is_symmetric:
        return H
    n, q = point.shape
    r = point.rank
    if subtract_score:
        G = loss.gradient(point.product())
        K = np.kron(G, np.eye(r))
        H = H.copy()
        H[: n * r, n * r :] -= K
        H[n * r :, : n * r] -= K.T
    s = np.concatenate([np.full(n * r, q**-0.5), np.full(q * r, n**-0.5)])
    return s[:, None] * H * s[None, :]


def noise_summary(
    loss: LossModel,
    truth: GroundTruth,
    n_region_samples: int = 1,
    region_eps: float = 0.0,
    seed: int = 0,
) -> NoiseSummary:
    """Operator-norm and row-wise sizes of the noise gradient.

    The point-independent functionals are maximized over the truth and
    ``n_region_samples - 1`` perturbed copies at relative radius
    ``region_eps``. For the three bundled losses the noise gradient does not
    depend on the point, so a single sample is exact.
    """
    pt = truth.point
    n, q = pt.shape
    rng = _rng(seed, 13)
    points = [pt] + [_perturbed(pt, region_eps, rng) for _ in range(max(n_region_samples, 1) - 1)]
    G0 = noise_gradient(loss, truth.X)
    if pt.is_symmetric:
        Z = pt.Z
        d_inf = norm_2inf(G0 @ Z) / (np.sqrt(n) * op_norm(Z))
    else:
        U, V = pt.U, pt.V
        d_inf = max(norm_2inf(G0 @ V) / (np.sqrt(q) * op_norm(V)), norm_2inf(G0.T @ U) / (np.sqrt(n) * op_norm(U)))
    d2 = 0.0
    d_bar = 0.0
    for p in points:
        G = G0 if p is pt else noise_gradient(loss, p.product())
        if pt.is_symmetric:
            d2 = max(d2, op_norm(G) / n)
            d_bar = max(d_bar, norm_inf1(G) / n)
        else:
            d2 = max(d2, op_norm(G) / np.sqrt(n * q))
            d_bar = max(d_bar, norm_inf1(G) / q, norm_inf1(G.T) / n)
    return NoiseSummary(float(d2), float(d_inf), float(d_bar), len(points))


def fit_contraction(traj: Union[Trajectory, Sequence[float]], column: str = "dist2") -> RateFit:
    """Fit the geometric decay rate and plateau of an error sequence.

    The floor is the median of the last 10% of finite values. The fit window
    is the leading run of values above three times the floor, and ``rho_hat``
    is the exponential of the least-squares slope of the log error over it.

    Raises
    ------
    InsufficientDecay
        If the window holds fewer than 5 points.
    """
    if isinstance(traj, Trajectory):
        seq = traj.column(column)
    else:
        seq = np.asarray(traj, dtype=float)
    iters = np.flatnonzero(np.isfinite(seq))
    vals = seq[iters]
    if vals.size < 10:
        raise InsufficientDecay(f"need at least 10 finite records, got {vals.size}")
    tail = max(1, int(math.ceil(0.1 * vals.size)))
    floor = float(np.median(vals[-tail:]))
    above = vals > 3 * floor
    end = int(np.argmin(above)) if not above.all() else vals.size
    if end < 5:
        raise InsufficientDecay(f"only {end} records lie above 3x the floor {floor:.3e}")
    x = iters[:end].astype(float)
    y = np.log(vals[:end])
    fit = linregress(x, y)
    return RateFit(float(np.exp(fit.slope)), floor, (int(iters[0]), int(iters[end - 1])), float(fit.rvalue**2))


def gradient_fd_check(loss: LossModel, X, n_probes: int = 20, seed: int = 0) -> float:
    """Worst relative gap between ``<gradient, D>`` and a central difference along unit ``D``.

    Gaps are measured relative to ``max(|<gradient, D>|, ||gradient||_F)``.
    """
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    X = np.asarray(X, dtype=float)
    rng = _rng(seed, 14)
    G = loss.gradient(X)
    gnorm = float(np.linalg.norm(G))
    h = 1e-5 * max(1.0, float(np.linalg.norm(X)))
    worst = 0.0
    for _ in range(n_probes):
        D = rng.standard_normal(X.shape)
        D /= np.linalg.norm(D)
        fd = (loss.value(X + h * D) - loss.value(X - h * D)) / (2 * h)
        an = float(np.sum(G * D))
        worst = max(worst, abs(fd - an) / max(abs(an), gnorm, 1e-300))
    return worst


def hessian_fd_check(loss: LossModel, X, n_probes: int = 20, seed: int = 0) -> tuple[float, float]:
    """Check ``hessian_bilinear`` against differences of the gradient.

    Returns the worst relative consistency gap and the worst relative
    asymmetry ``|H[a, b] - H[b, a]|`` over random Gaussian direction pairs.
    """
    X = np.asarray(X, dtype=float)
    rng = _rng(seed, 15)
    h = 1e-5 * max(1.0, float(np.linalg.norm(X)))
    worst_fd = worst_sym = 0.0
    for _ in range(n_probes):
        A = rng.standard_normal(X.shape)
        B = rng.standard_normal(X.shape)
        A /= np.linalg.norm(A)
        B /= np.linalg.norm(B)
        hab = loss.hessian_bilinear(X, A, B)
        hba = loss.hessian_bilinear(X, B, A)
        ref = max(abs(loss.hessian_bilinear(X, A, A)), abs(loss.hessian_bilinear(X, B, B)), 1e-300)
        fd = float(np.sum((loss.gradient(X + h * B) - loss.gradient(X - h * B)) * A)) / (2 * h)
        worst_fd = max(worst_fd, abs(fd - hab) / ref)
        worst_sym = max(worst_sym, abs(hab - hba) / ref)
    return worst_fd, worst_sym


def estimate_rip(data: SensingData, rank: int, n_probes: int = 100, seed: int = 0) -> float:
    """Monte-Carlo restricted isometry constant over random rank-``rank`` matrices."""
    n, q = data.shape
    rng = _rng(seed, 16)
    worst = 0.0
    for _ in range(n_probes):
        H = rng.standard_normal((n, rank)) @ rng.standard_normal((rank, q))
        ratio = float(np.sum(data.measure(H) ** 2)) / data.m / float(np.sum(H**2))
        worst = max(worst, abs(ratio - 1))
    return worst


def curvature_lower_bound(truth: GroundTruth, alpha: float, eps: float, L2: float = 1.0) -> float:
    """Lower bound ``alpha sigma_r(Z*/sqrt(n))^2 - 4 (eps + 2 L2) eps ||Z*||_F^2 / n`` on the augmented curvature."""
    Z = truth.point.Z
    n, r = Z.shape
    s = np.linalg.svd(Z / np.sqrt(n), compute_uv=False)[r - 1]
    return alpha * s**2 - 4 * (eps + 2 * L2) * eps * float(np.sum(Z**2)) / n
