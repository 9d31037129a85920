"""Loss contract and the three bundled losses: quadratic, matrix sensing, Bernoulli."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .core import PopulationUnavailable, as_matrix


class LossModel(ABC):
    """Loss ``L(X)`` on ``n x q`` matrices with its first and second derivatives.

    Attributes
    ----------
    shape : tuple of int
        Shape of the matrix argument.
    alpha, beta : float or None
        Declared restricted curvature bounds, when known.
    L2, Linf : float or None
        Declared gradient Lipschitz constants, when known.
    """

    shape: tuple[int, int]
    alpha: Optional[float] = None
    beta: Optional[float] = None
    L2: Optional[float] = None
    Linf: Optional[float] = None

    @abstractmethod
    def value(self, X: np.ndarray) -> float: ...

    @abstractmethod
    def gradient(self, X: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hessian_bilinear(self, X: np.ndarray, H1: np.ndarray, H2: np.ndarray) -> float: ...

    @property
    def has_population(self) -> bool:
        return False

    def population_gradient(self, X: np.ndarray) -> np.ndarray:
        raise PopulationUnavailable(f"{type(self).__name__} was built without a registered truth")

    def _check(self, X):
        if X.shape != self.shape:
            raise ValueError(f"expected a {self.shape} matrix, got {X.shape}")


class QuadraticLoss(LossModel):
    """``L(X) = ||X - X* + E||_F^2 / 2``."""

    def __init__(self, X_star, E):
        self.X_star = as_matrix(X_star, "X_star")
        self.E = as_matrix(E, "E")
        if self.X_star.shape != self.E.shape:
            raise ValueError("X_star and E must have equal shapes")
        self.shape = self.X_star.shape
        self.alpha = self.beta = 1.0
        self.L2 = self.Linf = 1.0

    def value(self, X):
        self._check(X)
        return 0.5 * float(np.sum((X - self.X_star + self.E) ** 2))

    def gradient(self, X):
        self._check(X)
        return X - self.X_star + self.E

    @property
    def has_population(self):
        return True

    def population_gradient(self, X):
        self._check(X)
        return X - self.X_star

    def hessian_bilinear(self, X, H1, H2):
        return float(np.sum(H1 * H2))


def quadratic_loss(X_star, E) -> QuadraticLoss:
    return QuadraticLoss(X_star, E)


@dataclass(frozen=True)
class SensingData:
    """Linear measurements ``y_i = <A_i, X*> + xi_i``; ``operators`` has shape ``(m, n, q)``."""

    operators: np.ndarray
    observations: np.ndarray

    def __post_init__(self):
        A = np.array(self.operators, dtype=float)
        y = np.array(self.observations, dtype=float).ravel()
        if A.ndim != 3 or A.shape[0] < 1:
            raise ValueError("operators must be an (m, n, q) array with m >= 1")
        if A.shape[0] != y.shape[0]:
            raise ValueError("need one observation per sensing matrix")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
            raise ValueError("sensing data must be finite")
        A.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "operators", A)
        object.__setattr__(self, "observations", y)

    @property
    def m(self) -> int:
        return self.operators.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.operators.shape[1:]

    def measure(self, X: np.ndarray) -> np.ndarray:
        """The vector ``(<A_1, X>, ..., <A_m, X>)``."""
        return self.operators.reshape(self.m, -1) @ X.ravel()

    def adjoint(self, w: np.ndarray) -> np.ndarray:
        """``sum_i w_i A_i``."""
        return (w @ self.operators.reshape(self.m, -1)).reshape(self.shape)


class SensingLoss(LossModel):
    """``L(X) = (2m)^-1 sum_i (<A_i, X> - y_i)^2``.

    ``delta0``, when given, declares the restricted isometry constant and sets
    ``alpha = 1 - delta0``, ``beta = 1 + delta0``.
    """

    def __init__(self, data: SensingData, X_star=None, delta0: Optional[float] = None):
        self.data = data
        self.shape = data.shape
        self.X_star = None if X_star is None else as_matrix(X_star, "X_star")
        if delta0 is not None:
            if not 0 <= delta0 < 1:
                raise ValueError("delta0 must lie in [0, 1)")
            self.alpha, self.beta = 1 - delta0, 1 + delta0
            self.L2 = 1 + delta0

    def value(self, X):
        self._check(X)
        res = self.data.measure(X) - self.data.observations
        return float(res @ res) / (2 * self.data.m)

    def gradient(self, X):
        self._check(X)
        res = self.data.measure(X) - self.data.observations
        return self.data.adjoint(res) / self.data.m

    @property
    def has_population(self):
        return self.X_star is not None

    def population_gradient(self, X):
        if self.X_star is None:
            return super().population_gradient(X)
        self._check(X)
        return self.data.adjoint(self.data.measure(X - self.X_star)) / self.data.m

    def hessian_bilinear(self, X, H1, H2):
        return float(self.data.measure(H1) @ self.data.measure(H2)) / self.data.m


def sensing_loss(data: SensingData, X_star=None, delta0: Optional[float] = None) -> SensingLoss:
    return SensingLoss(data, X_star, delta0)


@dataclass(frozen=True)
class BernoulliData:
    """Binary responses with known intercept and entry bounds ``-M1 <= X*_ij <= M2``."""

    Y: np.ndarray
    alpha0: float
    M1: float
    M2: float
    Pstar: Optional[np.ndarray] = None

    def __post_init__(self):
        Y = as_matrix(self.Y, "Y")
        if not np.all((Y == 0) | (Y == 1)):
            raise ValueError("Y must be a 0/1 matrix")
        object.__setattr__(self, "Y", Y)
        if self.Pstar is not None:
            P = as_matrix(self.Pstar, "Pstar")
            if P.shape != Y.shape or not np.all((P > 0) & (P < 1)):
                raise ValueError("Pstar must match Y and lie strictly inside (0, 1)")
            object.__setattr__(self, "Pstar", P)
        if self.M1 < 0 or self.M2 < 0:
            raise ValueError("entry bounds M1, M2 must be nonnegative")

    @property
    def nu_star(self) -> float:
        return float(np.exp(-(self.alpha0 + self.M2)))


def _softplus(t):
    # log(1 + e^t) without overflow; several times faster than np.logaddexp
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


class BernoulliLoss(LossModel):
    """Scaled logistic loss ``nu* sum_ij {log(1 + e^(a0 + X_ij)) - Y_ij (a0 + X_ij)}``.

    The response matrix is allowed to be real-valued here (only
    :class:`BernoulliData` insists on 0/1 entries); tests use this to build
    stationary instances.
    """

    def __init__(self, data: BernoulliData, Y=None):
        self.data = data
        self.Y = data.Y if Y is None else as_matrix(Y, "Y")
        self.shape = self.Y.shape
        self.alpha0 = float(data.alpha0)
        self.nu = data.nu_star
        self.alpha = 0.25 * float(np.exp(-(data.M1 + data.M2)))
        self.beta = 1.0

    def _eta(self, X):
        self._check(X)
        return self.alpha0 + X

    def value(self, X):
        t = self._eta(X)
        return self.nu * float(np.sum(_softplus(t) - self.Y * t))

    def gradient(self, X):
        return self.nu * (expit(self._eta(X)) - self.Y)

    @property
    def has_population(self):
        return self.data.Pstar is not None

    def population_gradient(self, X):
        if self.data.Pstar is None:
            return super().population_gradient(X)
        return self.nu * (expit(self._eta(X)) - self.data.Pstar)

    def weights(self, X) -> np.ndarray:
        """Diagonal Hessian weights ``nu* s (1 - s)`` at ``s = sigmoid(a0 + X)``."""
        s = expit(self._eta(X))
        return self.nu * s * (1 - s)

    def hessian_bilinear(self, X, H1, H2):
        return float(np.sum(self.weights(X) * H1 * H2))


def bernoulli_loss(data: BernoulliData) -> BernoulliLoss:
    return BernoulliLoss(data)


def noise_gradient(loss: LossModel, X: np.ndarray) -> np.ndarray:
    """Stochastic part of the gradient, ``gradient(X) - population_gradient(X)``."""
    if not loss.has_population:
        raise PopulationUnavailable(f"{type(loss).__name__} has no population gradient")
    return loss.gradient(X) - loss.population_gradient(X)
