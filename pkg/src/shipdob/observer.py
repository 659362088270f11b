"""Nonlinear disturbance observer with diagonal error dynamics.

The estimate is ``tau_hat = zeta + T nu`` where ``T`` is chosen so that
``T M^-1 = diag(Gamma) * sigma``. With a slowly varying disturbance the
observer error ``z = tau_d - tau_hat`` then obeys ``z' = -diag(Gamma) sigma z``,
one decoupled first-order system per channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import vessel as _vessel
from .errors import CaseViolationError, ConfigError, StabilityConditionError
from .vessel import InverseMass, VesselParams


@dataclass(frozen=True)
class ObserverGains:
    g1: float = 50.0
    g2: float = 50.0
    g3: float = 50.0

    @classmethod
    def uniform(cls, g: float) -> "ObserverGains":
        return cls(g, g, g)

    @property
    def as_array(self) -> np.ndarray:
        return np.array([self.g1, self.g2, self.g3])

    @property
    def min(self) -> float:
        return min(self.g1, self.g2, self.g3)

    @property
    def max(self) -> float:
        return max(self.g1, self.g2, self.g3)


@dataclass(frozen=True, eq=False)
class ObserverState:
    zeta: np.ndarray
    T: np.ndarray
    sigma: float


@dataclass(frozen=True)
class ConditionReport:
    """Values of the four design conditions on T together with the surge
    condition and the continuous-time ball condition."""

    surge: float
    c1: float
    c2: float
    c3: float
    c4: float
    c1_scale: float
    c3_scale: float
    case: int
    sigma: float
    lyapunov_margin: float  # lambda_min(Gamma) * sigma - 1/2

    @property
    def c1_ok(self) -> bool:
        return abs(self.c1) <= 1e-12 * self.c1_scale

    @property
    def c3_ok(self) -> bool:
        return abs(self.c3) <= 1e-12 * self.c3_scale

    @property
    def c2_ok(self) -> bool:
        return self.c2 > 0

    @property
    def c4_ok(self) -> bool:
        return self.c4 > 0

    @property
    def surge_ok(self) -> bool:
        return self.surge > 0

    @property
    def conditions_ok(self) -> bool:
        return self.surge_ok and self.c1_ok and self.c2_ok and self.c3_ok and self.c4_ok

    @property
    def lyapunov_ok(self) -> bool:
        return self.lyapunov_margin > 0

    def lines(self) -> list[str]:
        def mark(ok):
            return "ok" if ok else "FAIL"

        return [
            f"case        {self.case}",
            f"sigma       {self.sigma!r}",
            f"surge       {self.surge:+.6e}  > 0   {mark(self.surge_ok)}",
            f"C1          {self.c1:+.6e}  = 0   {mark(self.c1_ok)}",
            f"C2          {self.c2:+.6e}  > 0   {mark(self.c2_ok)}",
            f"C3          {self.c3:+.6e}  = 0   {mark(self.c3_ok)}",
            f"C4          {self.c4:+.6e}  > 0   {mark(self.c4_ok)}",
            f"lmin*sigma  {self.lyapunov_margin + 0.5:.6g}  > 0.5 {mark(self.lyapunov_ok)}",
        ]


def coupling_case(k: InverseMass) -> int:
    prod, diag = k.k23 * k.k32, k.k22 * k.k33
    if prod < diag:
        return 1
    if prod > diag:
        return 2
    return 3


def build_T(gains: ObserverGains, k: InverseMass) -> tuple[np.ndarray, float]:
    """Observer matrix T = d(mu)/d(nu) and the coupling scalar sigma."""
    case = coupling_case(k)
    if case != 1:
        raise CaseViolationError(
            f"kappa23*kappa32 >= kappa22*kappa33 (case {case}); only case 1 is supported"
        )
    kk = k.k22 * k.k33
    sigma = 1.0 - (k.k23 * k.k32) / kk
    T = np.array(
        [
            [gains.g1 * sigma / k.k11, 0.0, 0.0],
            [0.0, gains.g2 / k.k22, -gains.g2 * k.k23 / kk],
            [0.0, -gains.g3 * k.k32 / kk, gains.g3 / k.k33],
        ]
    )
    return T, sigma


def check_conditions(T: np.ndarray, k: InverseMass, gains: ObserverGains) -> ConditionReport:
    c1_terms = (T[1, 1] * k.k23, T[1, 2] * k.k33)
    c3_terms = (T[2, 1] * k.k22, T[2, 2] * k.k32)
    sigma = k.sigma
    return ConditionReport(
        surge=T[0, 0] * k.k11,
        c1=c1_terms[0] + c1_terms[1],
        c2=T[1, 1] * k.k22 + T[1, 2] * k.k32,
        c3=c3_terms[0] + c3_terms[1],
        c4=T[2, 1] * k.k23 + T[2, 2] * k.k33,
        c1_scale=abs(c1_terms[0]) + abs(c1_terms[1]),
        c3_scale=abs(c3_terms[0]) + abs(c3_terms[1]),
        case=coupling_case(k),
        sigma=sigma,
        lyapunov_margin=gains.min * sigma - 0.5,
    )


def init_state(gains: ObserverGains, k: InverseMass, zeta=None) -> ObserverState:
    T, sigma = build_T(gains, k)
    zeta = np.zeros(3) if zeta is None else np.asarray(zeta, dtype=float)
    return ObserverState(zeta=zeta, T=T, sigma=sigma)


def estimate(state: ObserverState, nu_hat) -> np.ndarray:
    """Disturbance estimate zeta + T nu_hat."""
    return state.zeta + state.T @ np.asarray(nu_hat, dtype=float)


def update(
    state: ObserverState,
    nu_hat,
    tau,
    params: VesselParams,
    dt: float,
    damping_form: str = "paper",
) -> ObserverState:
    """Advance zeta by one Euler step of zeta' = -T nu'(tau_d = tau_hat).

    The model acceleration is evaluated at the filtered velocity with the
    current disturbance estimate in place of the true disturbance.
    """
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    tau_hat = estimate(state, nu_hat)
    nu_dot = _vessel.acceleration(nu_hat, tau, tau_hat, params, damping_form)
    return replace(state, zeta=state.zeta - dt * (state.T @ nu_dot))


def ball_radius(gains: ObserverGains, sigma: float, theta: float) -> float:
    """Ultimate bound theta / sqrt(2 lambda_min(Gamma) sigma - 1) on ||z||."""
    margin = 2.0 * gains.min * sigma - 1.0
    if not margin > 0:
        raise StabilityConditionError(
            f"lambda_min(Gamma)*sigma = {gains.min * sigma:.6g} must exceed 1/2"
        )
    return theta / math.sqrt(margin)


@dataclass(frozen=True)
class DiscreteStability:
    """Per-channel Euler factor Gamma_i * sigma * dt of the error recursion."""

    factors: tuple
    status: str  # "ok", "warn" (>= 1, oscillatory) or "unstable" (>= 2)

    @property
    def worst(self) -> float:
        return max(self.factors)


def discrete_stability(gains: ObserverGains, sigma: float, dt: float) -> DiscreteStability:
    factors = tuple(float(g * sigma * dt) for g in gains.as_array)
    worst = max(factors)
    status = "unstable" if worst >= 2.0 else "warn" if worst >= 1.0 else "ok"
    return DiscreteStability(factors, status)
