"""Environmental loads acting on the hull.

The default ``kind="table3"`` source is the sum of a pulsating wind load, an
oscillating wave load and a slowly ramping current load, each projected into
the body frame through the relative angle ``gamma - psi``. The other kinds are
synthetic signals used by the observer studies:

* ``"constant"``  tau_d = amplitude
* ``"sinusoid"``  tau_d = amplitude * sin(omega t)
* ``"decay"``     tau_d = amplitude * exp(-t / T_s)

Any kind can be overlaid with zero-mean Gaussian noise of covariance ``H``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

KINDS = ("table3", "constant", "sinusoid", "decay")


def _as_matrix(value, name: str) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.ndim == 0:
        m = float(m) * np.eye(3)
    if m.shape != (3, 3):
        raise ConfigError(f"{name} must be a scalar or a 3x3 matrix, got shape {m.shape}")
    return m


def check_psd(m: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(m)):
        raise ConfigError(f"{name} has non-finite entries")
    if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise ConfigError(f"{name} is not symmetric")
    w = np.linalg.eigvalsh(m)
    if w.min() < -1e-10 * max(1.0, np.abs(w).max()):
        raise ConfigError(f"{name} is not positive semidefinite (min eigenvalue {w.min():.3g})")


def noise_factor(cov: np.ndarray) -> np.ndarray:
    """Matrix F with F F^T = cov, valid for singular PSD covariances."""
    w, V = np.linalg.eigh(cov)
    return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True, eq=False)
class EnvConfig:
    """Disturbance source parameters. Angles in radians, forces in N (N m for yaw)."""

    F_wind: float = 10000.0
    F_wave: float = 8000.0
    F_current: float = 18000.0
    gamma_wind: float = math.radians(135.0)
    gamma_wave: float = math.radians(155.0)
    gamma_current: float = math.radians(300.0)
    L_ship: float = 5.0
    T_s: float = 15.0
    H: np.ndarray = field(default_factory=lambda: 1000.0 * np.eye(3))
    noise_enabled: bool = False
    # extra wave component: ratio * sin(freq * t) added to the (1 + sin t) factor
    wave_harmonic_ratio: float = 0.0
    wave_harmonic_freq: float = 4.0
    kind: str = "table3"
    amplitude: tuple = (0.0, 0.0, 0.0)
    omega: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "H", _as_matrix(self.H, "H"))
        object.__setattr__(self, "amplitude", tuple(float(a) for a in self.amplitude))
        if self.kind not in KINDS:
            raise ConfigError(f"disturbance kind must be one of {KINDS}, got {self.kind!r}")
        if len(self.amplitude) != 3:
            raise ConfigError("amplitude must have three entries")
        for name in ("F_wind", "F_wave", "F_current"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        if not self.T_s > 0:
            raise ConfigError(f"T_s must be positive, got {self.T_s}")
        check_psd(self.H, "H")


def wind(t: float, psi: float, cfg: EnvConfig) -> np.ndarray:
    a = cfg.gamma_wind - psi
    pulse = cfg.F_wind * (1.0 + math.sin(5.0 * t) / 10.0)
    return np.array(
        [
            pulse * math.cos(a),
            -pulse * math.sin(a),
            pulse * math.sin(2.0 * a) * cfg.L_ship / 4.0,
        ]
    )


def wave(t: float, psi: float, cfg: EnvConfig) -> np.ndarray:
    a = cfg.gamma_wave - psi
    swell = 1.0 + math.sin(t)
    if cfg.wave_harmonic_ratio:
        swell += cfg.wave_harmonic_ratio * math.sin(cfg.wave_harmonic_freq * t)
    f = cfg.F_wave * swell
    return np.array([f * math.cos(a), -f * math.sin(a), 0.0])


def current(t: float, psi: float, cfg: EnvConfig) -> np.ndarray:
    a = cfg.gamma_current - psi
    f = cfg.F_current * (1.0 - math.exp(-t / cfg.T_s))
    return np.array([f * math.cos(a), -f * math.sin(a), 0.0])


def deterministic_disturbance(t: float, psi: float, cfg: EnvConfig) -> np.ndarray:
    """Noise-free disturbance of the configured kind."""
    if cfg.kind == "table3":
        return wind(t, psi, cfg) + wave(t, psi, cfg) + current(t, psi, cfg)
    amp = np.array(cfg.amplitude)
    if cfg.kind == "constant":
        return amp.copy()
    if cfg.kind == "sinusoid":
        return amp * math.sin(cfg.omega * t)
    return amp * math.exp(-t / cfg.T_s)


def total_disturbance(t: float, psi: float, cfg: EnvConfig, rng: np.random.Generator) -> np.ndarray:
    """Deterministic disturbance plus, if enabled, one N(0, H) draw."""
    tau_d = deterministic_disturbance(t, psi, cfg)
    if cfg.noise_enabled:
        tau_d = tau_d + noise_factor(cfg.H) @ rng.standard_normal(3)
    return tau_d


def estimate_theta(tau_d, dt: float) -> float:
    """Largest finite-difference rate ||tau_d[k+1] - tau_d[k]|| / dt of a sampled signal."""
    tau_d = np.asarray(tau_d, dtype=float)
    if len(tau_d) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(tau_d, axis=0), axis=1).max() / dt)
