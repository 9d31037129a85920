"""Benign penalties for the symmetric and asymmetric models and the augmented objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alignment import _m_star
from .core import FactorPoint, GroundTruth
from .losses import LossModel


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty weight ``alpha`` and the reference factors the penalty is centered on."""

    alpha: float
    reference: GroundTruth

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


def _sym_m(Z, Zs):
    n = Z.shape[0]
    return (Zs.T @ Z - Z.T @ Zs) / n


def penalty_sym(Z, cfg: PenaltyConfig) -> float:
    """``(alpha n^2 / 4) ||M||_F^2`` with ``M = n^-1 (Z*^T Z - Z^T Z*)``."""
    Z = np.asarray(Z, dtype=float)
    Zs = cfg.reference.point.Z
    n = Z.shape[0]
    M = _sym_m(Z, Zs)
    return cfg.alpha * n * n / 4 * float(np.sum(M**2))


def penalty_sym_grad(Z, cfg: PenaltyConfig) -> np.ndarray:
    """Closed form ``alpha n Z* M``; ``M`` is antisymmetric, so the two chain-rule terms coincide."""
    Z = np.asarray(Z, dtype=float)
    Zs = cfg.reference.point.Z
    return cfg.alpha * Z.shape[0] * Zs @ _sym_m(Z, Zs)


def penalty_asym(pair: FactorPoint, cfg: PenaltyConfig) -> float:
    """``(alpha n q / 4) ||M*(U, V)||_F^2``."""
    ref = cfg.reference.point
    n, q = pair.shape
    M = _m_star(pair.U, pair.V, ref.U, ref.V)
    return cfg.alpha * n * q / 4 * float(np.sum(M**2))


def penalty_asym_grad(pair: FactorPoint, cfg: PenaltyConfig) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`penalty_asym` with respect to ``U`` and ``V``.

    Returns
    -------
    gU : ndarray, shape (n, r)
        ``(alpha q / 2) {U M^T + (U - U*) M}``
    gV : ndarray, shape (q, r)
        ``-(alpha n / 2) {(V - V*) M^T + V M}``
    """
    ref = cfg.reference.point
    U, V = pair.U, pair.V
    n, q = pair.shape
    M = _m_star(U, V, ref.U, ref.V)
    gU = cfg.alpha * q / 2 * (U @ M.T + (U - ref.U) @ M)
    gV = -cfg.alpha * n / 2 * ((V - ref.V) @ M.T + V @ M)
    return gU, gV


def loss_factor_grad(loss: LossModel, point: FactorPoint) -> FactorPoint:
    """Gradient of ``L(U V^T)`` (or ``L(Z Z^T)``) with respect to the factors."""
    G = loss.gradient(point.product())
    if point.is_symmetric:
        return FactorPoint((G + G.T) @ point.Z)
    return FactorPoint(G @ point.V, G.T @ point.U)


def penalty_grad(point: FactorPoint, cfg: PenaltyConfig) -> FactorPoint:
    if point.is_symmetric:
        return FactorPoint(penalty_sym_grad(point.Z, cfg))
    return FactorPoint(*penalty_asym_grad(point, cfg))


def penalty_value(point: FactorPoint, cfg: PenaltyConfig) -> float:
    if point.is_symmetric:
        return penalty_sym(point.Z, cfg)
    return penalty_asym(point, cfg)


def augmented_value_grad(loss: LossModel, point: FactorPoint, cfg: PenaltyConfig) -> tuple[float, FactorPoint]:
    """Value and factor gradient of ``L(product) + penalty``."""
    if loss.shape != point.shape:
        raise ValueError(f"loss shape {loss.shape} does not match point product shape {point.shape}")
    value = loss.value(point.product()) + penalty_value(point, cfg)
    g_loss = loss_factor_grad(loss, point)
    g_pen = penalty_grad(point, cfg)
    blocks = [a + b for a, b in zip(g_loss.blocks(), g_pen.blocks())]
    return value, FactorPoint(*blocks)
