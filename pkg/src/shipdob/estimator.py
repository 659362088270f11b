"""Unscented Kalman filter with additive process and measurement noise.

The prediction gates one set of sigma points, drawn around the current
belief, through both the discrete plant ``f`` and the measurement map ``g``.
The corrected mean is therefore the one-step-ahead state given the
measurement taken at the current step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConfigError, FactorizationError, SingularInnovationError

COV_UPDATES = ("standard", "paper")
MAX_JITTER_TRIES = 5


@dataclass(frozen=True)
class UkfParams:
    alpha: float = 1e-3
    beta: float = 2.0
    kappa: float = 0.0
    n: int = 3

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not self.n + self.lam > 0:
            raise ConfigError(f"n + lambda must be positive, got {self.n + self.lam}")

    @property
    def lam(self) -> float:
        return self.alpha**2 * (self.n + self.kappa) - self.n


@dataclass(frozen=True, eq=False)
class Belief:
    mean: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    Q: np.ndarray
    R: np.ndarray


@dataclass(frozen=True, eq=False)
class Prediction:
    x: np.ndarray
    y: np.ndarray
    Px: np.ndarray
    Py: np.ndarray
    Pxy: np.ndarray


@lru_cache(maxsize=32)
def _cached_weights(p: UkfParams) -> tuple[np.ndarray, np.ndarray]:
    Wm, Wc = weights(p)
    Wm.flags.writeable = False
    Wc.flags.writeable = False
    return Wm, Wc


def weights(p: UkfParams) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance weights for the 2n+1 sigma points."""
    s = p.n + p.lam
    if s == 0:
        raise ConfigError("n + lambda must be nonzero")
    Wm = np.full(2 * p.n + 1, 1.0 / (2.0 * s))
    Wc = Wm.copy()
    Wm[0] = p.lam / s
    Wc[0] = p.lam / s + (1.0 - p.alpha**2 + p.beta)
    return Wm, Wc


def jittered_cholesky(A: np.ndarray) -> np.ndarray:
    """Lower factor S with S S^T = A + eps I.

    eps is zero when A is positive definite; otherwise it starts at
    1e-9 * trace(A) / n and grows tenfold per retry.
    """
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    if n == 3:
        S = _cholesky3(A.tolist())
        if S is not None:
            return S
    else:
        try:
            return np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            pass
    eps = 1e-9 * abs(np.trace(A)) / n
    if eps == 0.0 or not np.isfinite(eps):
        eps = 1e-12
    for _ in range(MAX_JITTER_TRIES):
        try:
            return np.linalg.cholesky(A + eps * np.eye(n))
        except np.linalg.LinAlgError:
            eps *= 10.0
    raise FactorizationError(
        f"covariance not factorizable after {MAX_JITTER_TRIES} jitter attempts "
        f"(eigenvalues {np.linalg.eigvalsh(A)})"
    )


def _cholesky3(a):
    # unrolled lower Cholesky for 3x3; None when not positive definite
    a00, a01, a02 = a[0]
    a11, a12 = a[1][1], a[1][2]
    a22 = a[2][2]
    if not a00 > 0:
        return None
    l00 = math.sqrt(a00)
    l10 = a01 / l00
    l20 = a02 / l00
    d1 = a11 - l10 * l10
    if not d1 > 0:
        return None
    l11 = math.sqrt(d1)
    l21 = (a12 - l20 * l10) / l11
    d2 = a22 - l20 * l20 - l21 * l21
    if not d2 > 0:
        return None
    return np.array([[l00, 0.0, 0.0], [l10, l11, 0.0], [l20, l21, math.sqrt(d2)]])


def sigma_points(b: Belief, p: UkfParams) -> np.ndarray:
    """Sigma points as rows: the mean, then mean + S[:, i], then mean - S[:, i]."""
    S = jittered_cholesky((p.n + p.lam) * b.P)
    return np.vstack([b.mean, b.mean + S.T, b.mean - S.T])


def predict(
    b: Belief,
    f: Callable[[np.ndarray], np.ndarray],
    g: Callable[[np.ndarray], np.ndarray],
    noise: NoiseModel,
    p: UkfParams,
) -> Prediction:
    """Unscented moments of f(x) and g(x) under the belief.

    ``f`` and ``g`` receive all sigma points at once as an ``(2n+1, n)`` array
    and must return arrays of the same leading length.
    """
    X = sigma_points(b, p)
    Wm, Wc = _cached_weights(p)
    FX = np.asarray(f(X), dtype=float)
    GX = np.asarray(g(X), dtype=float)
    n = FX.shape[1]
    x = Wm @ FX
    y = Wm @ GX
    dev = np.hstack((FX - x, GX - y))
    # one weighted Gram matrix holds Px, Pxy and Py as blocks
    gram = (dev.T * Wc) @ dev
    Px = gram[:n, :n] + noise.Q
    Py = gram[n:, n:] + noise.R
    Pxy = gram[:n, n:].copy()
    # outer-product sums are symmetric up to rounding
    Px = 0.5 * (Px + Px.T)
    Py = 0.5 * (Py + Py.T)
    return Prediction(x, y, Px, Py, Pxy)


def correct(pred: Prediction, y, cov_update: str = "standard") -> Belief:
    """Kalman correction of a prediction with measurement ``y``.

    ``cov_update="paper"`` uses P = Px - K Py Px instead of the symmetric
    P = Px - K Py K^T.
    """
    if cov_update not in COV_UPDATES:
        raise ConfigError(f"cov_update must be one of {COV_UPDATES}, got {cov_update!r}")
    Py = pred.Py
    if Py.shape == (3, 3):
        pd = _cholesky3(Py.tolist()) is not None
    else:
        pd = bool(np.all(np.linalg.eigvalsh(Py) > 0))
    if not pd:
        raise SingularInnovationError("innovation covariance Py is not positive definite")
    K = np.linalg.solve(Py, pred.Pxy.T).T
    mean = pred.x + K @ (np.asarray(y, dtype=float) - pred.y)
    if cov_update == "standard":
        P = pred.Px - K @ pred.Py @ K.T
        P = 0.5 * (P + P.T)
    else:
        P = pred.Px - K @ pred.Py @ pred.Px
    return Belief(mean, P)
