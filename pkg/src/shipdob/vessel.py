"""Three-degree-of-freedom surface vessel model.

State conventions: ``nu = (u, v, r)`` are body-frame surge, sway and yaw rate,
``eta = (x, y, psi)`` is the global pose. All functions accept a single
3-vector or a stack of them with shape ``(..., 3)``; the stacked form is what
the sigma-point filter uses.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache

import numpy as np

from .errors import CaseViolationError, ConfigError, SingularMassError

DAMPING_FORMS = ("paper", "absolute-value")


@dataclass(frozen=True)
class VesselParams:
    """Mass-matrix entries and hydrodynamic coefficients.

    Coefficient names follow the usual maneuvering notation with the
    absolute-value bars dropped, e.g. ``Xuu`` is X_{|u|u} and ``Yrv`` is
    Y_{|r|v}. Units: kg (kg m^2 for ``m33``) and kg/s.
    """

    m11: float
    m22: float
    m23: float
    m32: float
    m33: float
    Xu: float
    Xuu: float
    Xuuu: float
    Yv: float
    Yvv: float
    Yrv: float
    Yvvv: float
    Yr: float
    Yvr: float
    Yrr: float
    Nv: float
    Nvv: float
    Nrv: float
    Nr: float
    Nvr: float
    Nrr: float
    Nrrr: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ConfigError(f"vessel parameter {f.name} is not finite: {value!r}")
        if self.m11 <= 0:
            raise ConfigError(f"m11 must be positive, got {self.m11}")

    @property
    def sigma(self) -> float:
        """Coupling scalar 1 - m23*m32/(m22*m33); equals the inverse-mass form."""
        return 1.0 - (self.m23 * self.m32) / (self.m22 * self.m33)

    def check(self) -> None:
        """Raise unless M is invertible and the coupling is in the supported regime."""
        invert_mass(self)
        if not self.sigma > 0:
            raise CaseViolationError(
                f"m23*m32 >= m22*m33 (sigma = {self.sigma:.6g}); only sigma > 0 is supported"
            )

    @property
    def mass_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.m11, 0.0, 0.0],
                [0.0, self.m22, self.m23],
                [0.0, self.m32, self.m33],
            ]
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "VesselParams":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown vessel parameters: {sorted(unknown)}")
        missing = names - set(data)
        if missing:
            raise ConfigError(f"missing vessel parameters: {sorted(missing)}")
        return cls(**{k: float(v) for k, v in data.items()})


# milliAmpere passenger ferry, identified coefficients.
MILLIAMPERE = VesselParams(
    m11=2389.657,
    m22=2533.911,
    m23=62.386,
    m32=28.141,
    m33=5068.910,
    Xu=-27.632,
    Xuu=-110.064,
    Xuuu=-13.965,
    Yv=-52.947,
    Yvv=-116.486,
    Yrv=-1540.383,
    Yvvv=-24.313,
    Yr=24.732,
    Yvr=572.141,
    Yrr=-115.457,
    Nv=3.5241,
    Nvv=-0.832,
    Nrv=336.827,
    Nr=-122.860,
    Nvr=-121.957,
    Nrr=-874.428,
    Nrrr=0.0,
)


@dataclass(frozen=True)
class InverseMass:
    """Nonzero entries of M^-1 (same sparsity as M)."""

    k11: float
    k22: float
    k23: float
    k32: float
    k33: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.k11, 0.0, 0.0],
                [0.0, self.k22, self.k23],
                [0.0, self.k32, self.k33],
            ]
        )

    @property
    def sigma(self) -> float:
        return 1.0 - (self.k23 * self.k32) / (self.k22 * self.k33)


def rotation_matrix(psi: float) -> np.ndarray:
    """Body-to-global rotation about the vertical axis."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def invert_mass(params: VesselParams) -> InverseMass:
    det = params.m22 * params.m33 - params.m23 * params.m32
    if abs(det) < 1e-12 * abs(params.m22 * params.m33) or det == 0.0:
        raise SingularMassError(f"sway/yaw mass block is singular (det = {det:.6g})")
    return InverseMass(
        k11=1.0 / params.m11,
        k22=params.m33 / det,
        k23=-params.m23 / det,
        k32=-params.m32 / det,
        k33=params.m22 / det,
    )


@lru_cache(maxsize=64)
def _inverse_mass_matrix(params: VesselParams) -> np.ndarray:
    out = invert_mass(params).matrix
    out.flags.writeable = False
    return out


@lru_cache(maxsize=64)
def _inverse_mass(params: VesselParams) -> InverseMass:
    return invert_mass(params)


def _check_form(damping_form: str) -> None:
    if damping_form not in DAMPING_FORMS:
        raise ConfigError(f"damping_form must be one of {DAMPING_FORMS}, got {damping_form!r}")


def damping(nu, params: VesselParams, damping_form: str = "paper") -> np.ndarray:
    """Nonlinear damping matrix D(nu).

    ``damping_form="paper"`` evaluates d11 and d22 exactly as they are usually
    printed for this model, with X_{|u|u} and Y_{|v|v} entering as constants.
    ``"absolute-value"`` multiplies them by |u| and |v| respectively.
    """
    _check_form(damping_form)
    nu = np.asarray(nu, dtype=float)
    u, v, r = nu[..., 0], nu[..., 1], nu[..., 2]
    au, av, ar = np.abs(u), np.abs(v), np.abs(r)
    p = params
    if damping_form == "paper":
        quad_u, quad_v = 1.0, 1.0
    else:
        quad_u, quad_v = au, av
    D = np.zeros(nu.shape[:-1] + (3, 3))
    D[..., 0, 0] = -p.Xu - p.Xuu * quad_u - p.Xuuu * u * u
    D[..., 1, 1] = -p.Yv - p.Yvv * quad_v - p.Yrv * ar - p.Yvvv * v * v
    D[..., 1, 2] = -p.Yr - p.Yvr * av - p.Yrr * ar
    D[..., 2, 1] = -p.Nv - p.Nvv * av - p.Nrv * ar
    D[..., 2, 2] = -p.Nr - p.Nvr * av - p.Nrr * ar - p.Nrrr * r * r
    return D


def coriolis(nu, params: VesselParams) -> np.ndarray:
    """Skew-symmetric Coriolis/centripetal matrix C(nu)."""
    nu = np.asarray(nu, dtype=float)
    u, v, r = nu[..., 0], nu[..., 1], nu[..., 2]
    c13 = -params.m22 * v - params.m23 * r
    c23 = params.m11 * u
    C = np.zeros(nu.shape[:-1] + (3, 3))
    C[..., 0, 2] = c13
    C[..., 1, 2] = c23
    C[..., 2, 0] = -c13
    C[..., 2, 1] = -c23
    return C


def acceleration(nu, tau, tau_d, params: VesselParams, damping_form: str = "paper") -> np.ndarray:
    """Body-frame acceleration M^-1 (tau + tau_d - D(nu) nu - C(nu) nu).

    D(nu) nu and C(nu) nu are expanded component-wise, which is algebraically
    identical to multiplying the matrices from :func:`damping` and
    :func:`coriolis`. ``tau`` and ``tau_d`` broadcast against ``nu``.
    """
    _check_form(damping_form)
    nu = np.asarray(nu, dtype=float)
    force = np.add(tau, tau_d)
    if nu.ndim == 1 and force.ndim == 1:
        return np.array(_accel_row(*nu.tolist(), *force.tolist(), params, damping_form))
    force = np.broadcast_to(force, nu.shape)
    # per-row float arithmetic beats numpy's per-call overhead on the small
    # stacks used here (one state, or seven sigma points)
    rows = [
        _accel_row(*n, *f, params, damping_form)
        for n, f in zip(nu.reshape(-1, 3).tolist(), force.reshape(-1, 3).tolist())
    ]
    return np.array(rows, dtype=float).reshape(nu.shape)


def _accel_row(u, v, r, f1, f2, f3, p: VesselParams, damping_form: str):
    au, av, ar = abs(u), abs(v), abs(r)
    if damping_form == "paper":
        d11 = -p.Xu - p.Xuu - p.Xuuu * u * u
        d22 = -p.Yv - p.Yvv - p.Yrv * ar - p.Yvvv * v * v
    else:
        d11 = -p.Xu - p.Xuu * au - p.Xuuu * u * u
        d22 = -p.Yv - p.Yvv * av - p.Yrv * ar - p.Yvvv * v * v
    d23 = -p.Yr - p.Yvr * av - p.Yrr * ar
    d32 = -p.Nv - p.Nvv * av - p.Nrv * ar
    d33 = -p.Nr - p.Nvr * av - p.Nrr * ar - p.Nrrr * r * r
    c13 = -p.m22 * v - p.m23 * r
    c23 = p.m11 * u
    g1 = f1 - (d11 * u + c13 * r)
    g2 = f2 - (d22 * v + d23 * r + c23 * r)
    g3 = f3 - (d32 * v + d33 * r - c13 * u - c23 * v)
    k = _inverse_mass(p)
    return (k.k11 * g1, k.k22 * g2 + k.k23 * g3, k.k32 * g2 + k.k33 * g3)


def step_velocity(nu, tau, tau_d, dt: float, params: VesselParams, damping_form: str = "paper"):
    """Noise-free explicit Euler velocity update (vectorized over leading axes)."""
    nu = np.asarray(nu, dtype=float)
    return nu + dt * acceleration(nu, tau, tau_d, params, damping_form)


def step(nu, eta, tau, tau_d, dt: float, w, params: VesselParams, damping_form: str = "paper"):
    """One explicit Euler step of the discrete plant.

    The process-noise sample ``w`` is added to the velocity after the Euler
    increment. The pose advances with the velocity and heading of step k.

    Returns
    -------
    (nu_next, eta_next)
    """
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    nu = np.asarray(nu, dtype=float)
    eta = np.asarray(eta, dtype=float)
    nu_next = step_velocity(nu, tau, tau_d, dt, params, damping_form) + np.asarray(w, dtype=float)
    eta_next = eta + dt * (rotation_matrix(eta[2]) @ nu)
    return nu_next, eta_next
