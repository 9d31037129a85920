"""Factored gradient descent with per-step alignment instrumentation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .alignment import gl_align, procrustes_align
from .core import (
    AlignmentDiverged,
    FactorPoint,
    GroundTruth,
    InvalidCurvature,
    NonFiniteUpdate,
    op_norm,
)
from .losses import LossModel
from .regularizer import PenaltyConfig, penalty_grad


def default_step(alpha: float, beta: float, kappa: float, sigma_min: float) -> tuple[float, float]:
    """Theoretical constant step and contraction factor.

    ``eta = 1 / (10 (alpha + beta) kappa sigma_min)`` and
    ``rho = 1 - eta alpha sigma_min / 4``.
    """
    if not (alpha > 0 and beta > 0 and sigma_min > 0):
        raise ValueError("alpha, beta and sigma_min must be positive")
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    if beta < alpha:
        raise InvalidCurvature(f"beta = {beta} is smaller than alpha = {alpha}")
    eta = 1.0 / (10 * (alpha + beta) * kappa * sigma_min)
    rho = 1.0 - eta * alpha * sigma_min / 4
    return eta, rho


@dataclass(frozen=True)
class DescentConfig:
    eta: float
    max_iter: int
    seed: int = 0
    record_alignment: bool = True
    align_tol: Optional[float] = None
    stop_grad_norm: Optional[float] = None
    # weight of the benign penalty used only for the benignity diagnostic
    penalty_alpha: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")


@dataclass(frozen=True)
class Record:
    """One row of a trajectory. Absent quantities are NaN."""

    iter: int
    loss: float
    dist2: float = math.nan
    dist_inf: float = math.nan
    balance: float = math.nan
    penalty_grad_norm: float = math.nan
    grad_norm: float = math.nan


RECORD_FIELDS = tuple(f.name for f in fields(Record))


@dataclass
class Trajectory:
    records: list[Record] = field(default_factory=list)
    final_point: Optional[FactorPoint] = None

    def column(self, name: str) -> np.ndarray:
        if name not in RECORD_FIELDS:
            raise KeyError(name)
        return np.array([getattr(rec, name) for rec in self.records], dtype=float)

    def __len__(self):
        return len(self.records)


def _check_finite(blocks, t):
    for b in blocks:
        if not np.all(np.isfinite(b)):
            raise NonFiniteUpdate(f"non-finite iterate after step {t}; the step size is likely too large", t)


def _step_sym_from_grad(Z, G, eta):
    n = Z.shape[0]
    # (G + G^T) Z is the exact gradient of L(Z Z^T); it equals 2 G Z for symmetric G
    return Z - (eta / n) * (G + G.T) @ Z


def _step_asym_from_grad(U, V, G, eta):
    n, q = U.shape[0], V.shape[0]
    return U - (eta / q) * G @ V, V - (eta / n) * G.T @ U


def step_sym(loss: LossModel, Z, eta: float) -> np.ndarray:
    """One step ``Z - (eta / n) (G + G^T) Z`` with ``G`` the loss gradient at ``Z Z^T``."""
    Z = np.asarray(Z, dtype=float)
    Z_new = _step_sym_from_grad(Z, loss.gradient(Z @ Z.T), eta)
    _check_finite([Z_new], 0)
    return Z_new


def step_asym(loss: LossModel, pair: FactorPoint, eta: float) -> FactorPoint:
    """Simultaneous update ``U - (eta/q) G V``, ``V - (eta/n) G^T U``."""
    U_new, V_new = _step_asym_from_grad(pair.U, pair.V, loss.gradient(pair.product()), eta)
    _check_finite([U_new, V_new], 0)
    return FactorPoint(U_new, V_new)


def balance_residual(point: FactorPoint) -> float:
    """``||U^T U / n - V^T V / q||`` (spectral norm); NaN for symmetric points."""
    if point.is_symmetric:
        return math.nan
    n, q = point.shape
    return op_norm(point.U.T @ point.U / n - point.V.T @ point.V / q)


def run(
    loss: LossModel,
    init: FactorPoint,
    truth: Optional[GroundTruth],
    cfg: DescentConfig,
) -> Trajectory:
    """Run ``cfg.max_iter`` constant-step descent iterations from ``init``.

    Records are written for iterations ``0 .. max_iter``. When ``truth`` is
    given and ``cfg.record_alignment`` is set, each record carries the aligned
    distances and the relative norm of the benign-penalty gradient at the
    aligned iterate. Asymmetric alignment is warm-started from the previous
    transform; a failed alignment leaves that record's distances as NaN.

    Raises
    ------
    NonFiniteUpdate
        With the index of the offending iteration.
    """
    if init.shape != loss.shape:
        raise ValueError(f"init product shape {init.shape} does not match loss shape {loss.shape}")
    symmetric = init.is_symmetric
    if truth is not None and truth.is_symmetric != symmetric:
        raise ValueError("truth and init must both be symmetric or both asymmetric")
    track = truth is not None and cfg.record_alignment
    pen_cfg = PenaltyConfig(cfg.penalty_alpha, truth) if track else None

    traj = Trajectory()
    blocks = [np.array(b) for b in init.blocks()]
    G_prev = None
    # overflow is reported through NonFiniteUpdate, not numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(cfg.max_iter + 1):
            point = FactorPoint(*blocks)
            X = point.product()
            G = loss.gradient(X) if np.all(np.isfinite(X)) else X
            if not np.all(np.isfinite(G)):
                raise NonFiniteUpdate(f"non-finite gradient at iteration {t}; the step size is likely too large", t)
            if symmetric:
                gnorm = float(np.linalg.norm((G + G.T) @ blocks[0]))
            else:
                gnorm = float(np.sqrt(np.sum((G @ blocks[1]) ** 2) + np.sum((G.T @ blocks[0]) ** 2)))
            rec = dict(iter=t, loss=loss.value(X), balance=balance_residual(point), grad_norm=gnorm)
            if track:
                try:
                    if symmetric:
                        res = procrustes_align(point.Z, truth.point.Z)
                    else:
                        res = gl_align(point, truth.point, tol=cfg.align_tol, init=G_prev)
                        G_prev = res.transform
                    pg = penalty_grad(res.aligned, pen_cfg)
                    rec.update(
                        dist2=res.dist2,
                        dist_inf=res.dist_inf,
                        penalty_grad_norm=pg.frobenius() / res.aligned.frobenius(),
                    )
                except AlignmentDiverged:
                    G_prev = None
            traj.records.append(Record(**rec))
            if t == cfg.max_iter:
                break
            if cfg.stop_grad_norm is not None and gnorm <= cfg.stop_grad_norm:
                break
            if symmetric:
                blocks = [_step_sym_from_grad(blocks[0], G, cfg.eta)]
            else:
                blocks = list(_step_asym_from_grad(blocks[0], blocks[1], G, cfg.eta))
            _check_finite(blocks, t + 1)
    traj.final_point = FactorPoint(*blocks)
    return traj
