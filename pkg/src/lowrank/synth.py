"""Seeded generators for truths, noise, sensing ensembles, Bernoulli data and initializers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit

from .alignment import balanced_factorization, gl_align
from .core import AlignmentDiverged, FactorPoint, GroundTruth, norm_2inf
from .losses import BernoulliData, SensingData

FRAMES = ("haar", "incoherent")


@dataclass(frozen=True)
class TruthSpec:
    """Size and spectrum of a synthetic truth.

    ``frame`` selects how the singular subspaces are drawn: ``"haar"`` for a
    uniformly random orthonormal frame, ``"incoherent"`` for randomly signed
    and permuted Fourier columns whose entries satisfy ``|sqrt(n) L_ik| <= sqrt(2)``.
    """

    n: int
    r: int
    sigma_min: float
    kappa: float = 1.0
    seed: int = 0
    q: Optional[int] = None
    frame: str = "haar"

    def __post_init__(self):
        q = self.n if self.q is None else self.q
        if self.n < 1 or q < 1 or not 1 <= self.r <= min(self.n, q):
            raise ValueError(f"need 1 <= r <= min(n, q); got n={self.n}, q={q}, r={self.r}")
        if not self.sigma_min > 0:
            raise ValueError("sigma_min must be positive")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.r == 1 and self.kappa != 1:
            raise ValueError("a rank-1 truth has kappa = 1")
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}")


def _rng(seed, *keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *keys]))


def _haar_frame(rng, n, r):
    Q, R = np.linalg.qr(rng.standard_normal((n, r)))
    return Q * np.sign(np.diag(R))


def _incoherent_frame(rng, n, r):
    # cos/sin columns at distinct nonzero frequencies below n/2 are orthogonal with norm sqrt(n/2)
    n_freq = (n - 1) // 2
    if 2 * n_freq < r:
        return _haar_frame(rng, n, r)
    picks = rng.choice(2 * n_freq, size=r, replace=False)
    t = 2 * np.pi * np.arange(n) / n
    cols = []
    for p in picks:
        k = 1 + p // 2
        cols.append(np.cos(k * t) if p % 2 == 0 else np.sin(k * t))
    L = np.sqrt(2.0 / n) * np.column_stack(cols)
    signs = rng.choice([-1.0, 1.0], size=n)
    return (signs[:, None] * L)[rng.permutation(n)]


def _frame(rng, n, r, kind):
    return _haar_frame(rng, n, r) if kind == "haar" else _incoherent_frame(rng, n, r)


def gen_truth(spec: TruthSpec, mode: str = "symmetric") -> GroundTruth:
    """Ground truth with a linear singular-value ramp from ``kappa sigma_min`` down to ``sigma_min``."""
    lam = np.linspace(spec.kappa * spec.sigma_min, spec.sigma_min, spec.r)
    root = np.sqrt(lam)
    rng = _rng(spec.seed, 1)
    n = spec.n
    if mode == "symmetric":
        L = _frame(rng, n, spec.r, spec.frame)
        return GroundTruth(FactorPoint(np.sqrt(n) * L * root))
    if mode != "asymmetric":
        raise ValueError(f"unknown mode {mode!r}")
    q = n if spec.q is None else spec.q
    L = _frame(rng, n, spec.r, spec.frame)
    R = _frame(rng, q, spec.r, spec.frame)
    return GroundTruth(FactorPoint(np.sqrt(n) * L * root, np.sqrt(q) * R * root))


def gen_gaussian_noise(n: int, q: int, sigma: float, seed: int, symmetric: bool = False) -> np.ndarray:
    """iid ``N(0, sigma^2)`` entries; with ``symmetric`` the upper triangle is mirrored."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    E = sigma * _rng(seed, 2).standard_normal((n, q))
    if symmetric:
        if n != q:
            raise ValueError("symmetric noise needs a square shape")
        E = np.triu(E) + np.triu(E, 1).T
    return E


def gen_sensing(truth: GroundTruth, m: int, sigma_xi: float, seed: int) -> SensingData:
    """Gaussian sensing ensemble with ``y_i = <A_i, X*> + xi_i``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = _rng(seed, 3)
    n, q = truth.point.shape
    A = rng.standard_normal((m, n, q))
    xi = sigma_xi * rng.standard_normal(m)
    y = A.reshape(m, -1) @ truth.X.ravel() + xi
    return SensingData(A, y)


def bernoulli_bounds(X_star: np.ndarray, alpha0: float) -> tuple[float, float]:
    """Entry bounds ``(M1, M2)`` rounded up by 10%.

    ``M1`` is raised to at least ``M2 + 2 alpha0`` so that the declared
    curvature ``e^-(M1 + M2) / 4`` lower-bounds ``nu* sigma'(alpha0 + x)`` on
    the whole range ``[-M1, M2]``.
    """
    M1 = 1.1 * max(0.0, -float(np.min(X_star)))
    M2 = 1.1 * max(0.0, float(np.max(X_star)))
    if alpha0 + M2 > 0:
        M1 = max(M1, M2 + 2 * alpha0)
    return M1, M2


def gen_bernoulli(truth: GroundTruth, alpha0: float, seed: int) -> BernoulliData:
    if truth.is_symmetric:
        raise ValueError("the Bernoulli model needs an asymmetric truth")
    X = truth.X
    P = expit(alpha0 + X)
    Y = (_rng(seed, 4).random(X.shape) < P).astype(float)
    M1, M2 = bernoulli_bounds(X, alpha0)
    return BernoulliData(Y, alpha0, M1, M2, P)


def _uniform_rows(D):
    norms = np.linalg.norm(D, axis=1, keepdims=True)
    return D / np.where(norms > 0, norms, 1.0)


def oracle_init(truth: GroundTruth, phi: float, psi: float = math.inf, seed: int = 0) -> FactorPoint:
    """Random perturbation of the truth at aligned distance ``phi * truth.scale``.

    The perturbation is projected so that the identity is already the optimal
    alignment (to first order in the asymmetric case), which makes the
    requested distance exact. A finite ``psi`` draws rows of equal norm and
    caps the perturbation so that ``dist_inf <= psi * omega_star``; when the
    cap binds, ``dist2`` falls short of ``phi * scale``.
    """
    if phi < 0 or psi <= 0:
        raise ValueError("need phi >= 0 and psi > 0")
    if phi == 0:
        return truth.point
    rng = _rng(seed, 5)
    pt = truth.point
    row_cap = psi * truth.omega_star

    if pt.is_symmetric:
        Zs = pt.Z
        D = rng.standard_normal(Zs.shape)
        if math.isfinite(psi):
            D = _uniform_rows(D)
        C = Zs.T @ D
        D = D - Zs @ np.linalg.solve(Zs.T @ Zs, (C - C.T) / 2)
        t = phi * truth.scale / np.linalg.norm(D)
        if math.isfinite(psi):
            t = min(t, row_cap / norm_2inf(D))
        return FactorPoint(Zs + t * D)

    Us, Vs = pt.U, pt.V
    n, q = pt.shape
    DU = rng.standard_normal(Us.shape)
    DV = rng.standard_normal(Vs.shape)
    if math.isfinite(psi):
        DU, DV = _uniform_rows(DU), _uniform_rows(DV)
    # first-order balance n^-1 DU^T U* = q^-1 V*^T DV keeps the optimal G close to I
    S = DU.T @ Us / n
    DV = DV + Vs @ np.linalg.solve(Vs.T @ Vs, q * S - Vs.T @ DV)
    size = np.sqrt(np.sum(DU**2) / n + np.sum(DV**2) / q)
    target = phi * truth.tau_star
    t0 = target / size

    def make(t):
        return FactorPoint(Us + t * DU, Vs + t * DV)

    if math.isfinite(psi):
        cap = row_cap / max(norm_2inf(DU), norm_2inf(DV))
        if cap < t0:
            return make(cap)

    def gap(t):
        return gl_align(make(t), pt).dist2 - target

    try:
        hi = t0
        while gap(hi) < 0 and hi < 8 * t0:
            hi *= 1.5
        t = brentq(gap, 0.0, hi, xtol=1e-14 * t0, rtol=1e-15)
    except (ValueError, AlignmentDiverged):
        # target outside the alignment basin; fall back to the first-order scale
        t = t0
    return make(t)


def spectral_init(data: Union[SensingData, BernoulliData], r: int) -> FactorPoint:
    """Balanced spectral estimate from sensing or Bernoulli data."""
    if isinstance(data, SensingData):
        X_hat = data.adjoint(data.observations) / data.m
        return balanced_factorization(X_hat, r)
    if isinstance(data, BernoulliData):
        Y = data.Y
        L, s, Rt = np.linalg.svd(Y, full_matrices=False)
        P_hat = (L[:, :r] * s[:r]) @ Rt[:r]
        mean = float(Y.mean())
        tau = 0.5 * min(mean, 1 - mean)
        if tau <= 0:
            raise ValueError("Y is constant; the spectral estimate is undefined")
        X_hat = logit(np.clip(P_hat, tau, 1 - tau)) - data.alpha0
        return balanced_factorization(X_hat, r)
    raise TypeError(f"unsupported data type {type(data).__name__}")


def read_binary_csv(path) -> np.ndarray:
    """Read a 0/1 matrix stored as a ``rows,cols`` header line followed by row-major values."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    try:
        n, q = (int(c) for c in rows[0])
    except ValueError as exc:
        raise ValueError(f"{path}: header must be 'rows,cols'") from exc
    values = [float(c) for row in rows[1:] for c in row if c.strip()]
    if len(values) != n * q:
        raise ValueError(f"{path}: expected {n * q} values, found {len(values)}")
    Y = np.array(values).reshape(n, q)
    if not np.all((Y == 0) | (Y == 1)):
        raise ValueError(f"{path}: entries must be 0 or 1")
    return Y
