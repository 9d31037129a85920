"""Shared numeric types, error classes and spectral helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

Mode = Literal["symmetric", "asymmetric"]

RANK_TOL = 1e-12


class LowRankError(Exception):
    """Base class for every error raised by this package."""


class DegenerateRank(LowRankError):
    pass


class AlignmentDiverged(LowRankError):
    pass


class PopulationUnavailable(LowRankError):
    pass


class NonFiniteUpdate(LowRankError):
    def __init__(self, message: str, iteration: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration


class InvalidCurvature(LowRankError):
    pass


class DimensionTooLarge(LowRankError):
    pass


class InsufficientDecay(LowRankError):
    pass


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Return ``x`` as a finite 2-D float array (a read-only copy)."""
    a = np.array(x, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    a.flags.writeable = False
    return a


def norm_2inf(M: np.ndarray) -> float:
    """Two-to-infinity norm: the largest row Euclidean norm."""
    return float(np.max(np.linalg.norm(M, axis=1)))


def norm_inf1(M: np.ndarray) -> float:
    """Largest absolute row sum."""
    return float(np.max(np.sum(np.abs(M), axis=1)))


def op_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2))


@dataclass(frozen=True)
class FactorPoint:
    """Optimization variable: a symmetric factor ``Z`` or a pair ``(U, V)``.

    A symmetric point stores its factor in ``U`` and leaves ``V`` as None;
    ``Z`` is an alias for it.
    """

    U: np.ndarray
    V: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "U", as_matrix(self.U, "U"))
        if self.V is not None:
            object.__setattr__(self, "V", as_matrix(self.V, "V"))
            if self.V.shape[1] != self.U.shape[1]:
                raise ValueError("U and V must have the same number of columns")
        if self.rank > min(self.shape):
            raise ValueError(f"rank {self.rank} exceeds matrix dimensions {self.shape}")

    @classmethod
    def symmetric(cls, Z) -> "FactorPoint":
        return cls(Z)

    @classmethod
    def asymmetric(cls, U, V) -> "FactorPoint":
        return cls(U, V)

    @property
    def is_symmetric(self) -> bool:
        return self.V is None

    @property
    def Z(self) -> np.ndarray:
        if not self.is_symmetric:
            raise AttributeError("asymmetric point has no Z factor")
        return self.U

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        """Shape of the product matrix."""
        n = self.U.shape[0]
        return (n, n) if self.V is None else (n, self.V.shape[0])

    @property
    def mode(self) -> Mode:
        return "symmetric" if self.is_symmetric else "asymmetric"

    def product(self) -> np.ndarray:
        other = self.U if self.V is None else self.V
        return self.U @ other.T

    def blocks(self) -> tuple[np.ndarray, ...]:
        return (self.U,) if self.V is None else (self.U, self.V)

    def flat(self) -> np.ndarray:
        """Row-major stacking, i.e. ``vec(U^T)`` followed by ``vec(V^T)``."""
        return np.concatenate([b.ravel() for b in self.blocks()])

    def with_flat(self, z: np.ndarray) -> "FactorPoint":
        n, r = self.U.shape
        if self.V is None:
            return FactorPoint(z[: n * r].reshape(n, r))
        q = self.V.shape[0]
        return FactorPoint(z[: n * r].reshape(n, r), z[n * r : (n + q) * r].reshape(q, r))

    def frobenius(self) -> float:
        return float(np.sqrt(sum(np.sum(b**2) for b in self.blocks())))


@dataclass(frozen=True)
class SpectralStats:
    singular_values: np.ndarray
    sigma_min_scaled: float
    kappa: float


def spectral_stats(X, r: int, mode: Mode = "symmetric") -> SpectralStats:
    """Singular values of ``X`` with the scaled ``sigma_min`` and condition number.

    ``sigma_min_scaled`` is ``sigma_r / n`` in symmetric mode and
    ``sigma_r / sqrt(n q)`` in asymmetric mode.
    """
    X = as_matrix(X, "X")
    n, q = X.shape
    if not 1 <= r <= min(n, q):
        raise ValueError(f"rank r={r} must lie in [1, {min(n, q)}]")
    s = np.linalg.svd(X, compute_uv=False)
    if s[r - 1] < RANK_TOL * s[0] or s[0] == 0.0:
        raise DegenerateRank(f"sigma_{r} = {s[r - 1]:.3e} is numerically zero (sigma_1 = {s[0]:.3e})")
    scale = n if mode == "symmetric" else np.sqrt(n * q)
    return SpectralStats(s, float(s[r - 1] / scale), float(s[0] / s[r - 1]))


@dataclass(frozen=True)
class GroundTruth:
    """True factors together with the scale constants the theory uses.

    For a symmetric truth, ``tau_star`` is ``||Z*||_F / sqrt(n)`` (the
    asymmetric definition with ``U* = V* = Z*``) and ``omega_star`` is
    ``||Z*||_{2->inf}``.
    """

    point: FactorPoint
    sigma_min: float = field(init=False)
    kappa: float = field(init=False)
    tau_star: float = field(init=False)
    omega_star: float = field(init=False)
    balance_tol: float = 1e-10

    def __post_init__(self):
        p = self.point
        stats = spectral_stats(p.product(), p.rank, p.mode)
        n, q = p.shape
        if p.is_symmetric:
            tau = np.linalg.norm(p.U) / np.sqrt(n)
            omega = norm_2inf(p.U)
        else:
            tau = np.sqrt((np.sum(p.U**2) / n + np.sum(p.V**2) / q) / 2)
            omega = max(norm_2inf(p.U), norm_2inf(p.V))
            gap = op_norm(p.U.T @ p.U / n - p.V.T @ p.V / q)
            if gap > self.balance_tol * stats.sigma_min_scaled:
                raise ValueError(f"asymmetric truth is not balanced (gap {gap:.3e})")
        object.__setattr__(self, "sigma_min", stats.sigma_min_scaled)
        object.__setattr__(self, "kappa", stats.kappa)
        object.__setattr__(self, "tau_star", float(tau))
        object.__setattr__(self, "omega_star", float(omega))

    @property
    def is_symmetric(self) -> bool:
        return self.point.is_symmetric

    @property
    def X(self) -> np.ndarray:
        return self.point.product()

    @property
    def scale(self) -> float:
        """Reference size for dist2: ``||Z*||_F`` (symmetric) or ``tau_star``."""
        return float(np.linalg.norm(self.point.U)) if self.is_symmetric else self.tau_star
