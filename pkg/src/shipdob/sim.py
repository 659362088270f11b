"""Closed-loop scenario runner: plant, noisy sensing, filter and observer.

Per step ``k`` (one sampling instant):

1. evaluate the environmental disturbance at ``(t_k, psi_k)``;
2. sample the velocity measurement ``nu_m = nu_k + n_k``;
3. form the disturbance estimate from the current filtered velocity and
   record the step;
4. advance the true plant with process noise;
5. advance the observer variable, then run the filter prediction and
   correction to obtain the next filtered velocity.

The filter propagates its sigma points through the same discrete plant as
the truth. ``filter_disturbance`` selects the load that model sees:

* ``"plant"``     the deterministic environmental load at step k (default;
  the noise-free part of the load driving the true plant)
* ``"estimate"``  the observer's current estimate, closing a filter/observer loop
* ``"zero"``      no load at all
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import environment as env_mod
from . import estimator as ukf
from . import observer as obs_mod
from . import vessel as vessel_mod
from .environment import EnvConfig, check_psd, noise_factor
from .errors import ConfigError, DivergenceError, SeedMismatchError, UndefinedChannelError
from .estimator import UkfParams
from .observer import ObserverGains
from .vessel import MILLIAMPERE, VesselParams

NOISE_SCALINGS = ("paper", "sqrt-dt", "force")
FILTER_DISTURBANCES = ("plant", "estimate", "zero")
ESTIMATORS = ("ukf", "none")
DIVERGENCE_LIMIT = 1e12


def _matrix(value, name):
    m = np.asarray(value, dtype=float)
    if m.ndim == 0:
        m = float(m) * np.eye(3)
    if m.shape != (3, 3):
        raise ConfigError(f"{name} must be a scalar or a 3x3 matrix")
    return m


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Complete parameterization of one run. Angles in radians.

    ``noise_scaling`` selects how the covariance ``Q`` maps to the velocity
    perturbation added after each Euler step:

    * ``"paper"``    w ~ N(0, Q) added directly to the velocity
    * ``"sqrt-dt"``  w ~ N(0, Q dt)
    * ``"force"``    Q is a generalized-force covariance; w ~ N(0, dt^2 M^-1 Q M^-T)

    The filter always uses the same velocity-space covariance as the plant.
    ``estimator="none"`` feeds the raw measurements straight to the observer.
    """

    vessel: VesselParams = MILLIAMPERE
    env: EnvConfig = field(default_factory=EnvConfig)
    Q: np.ndarray = field(default_factory=lambda: 30000.0 * np.eye(3))
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    noise_scaling: str = "force"
    ukf: UkfParams = field(default_factory=UkfParams)
    P_init: float = 0.1
    cov_update: str = "standard"
    gains: ObserverGains = field(default_factory=ObserverGains)
    dt: float = 0.01
    duration: float = 200.0
    eta0: tuple = (0.0, 0.0, math.radians(30.0))
    nu0: tuple = (0.0, 0.0, 0.0)
    tau: tuple = (0.0, 0.0, 0.0)
    seeds: tuple = (1, 2, 3)  # plant, measurement, disturbance
    damping_form: str = "paper"
    estimator: str = "ukf"
    measurement_decimation: int = 1
    transient: float = 20.0
    filter_disturbance: str = "plant"

    def __post_init__(self):
        object.__setattr__(self, "Q", _matrix(self.Q, "Q"))
        object.__setattr__(self, "R", _matrix(self.R, "R"))
        for name in ("eta0", "nu0", "tau"):
            value = tuple(float(x) for x in getattr(self, name))
            if len(value) != 3 or not all(math.isfinite(x) for x in value):
                raise ConfigError(f"{name} must be three finite numbers")
            object.__setattr__(self, name, value)
        seeds = tuple(int(s) for s in self.seeds)
        if len(seeds) != 3:
            raise ConfigError("seeds must hold (plant, measurement, disturbance)")
        object.__setattr__(self, "seeds", seeds)

    @property
    def n_steps(self) -> int:
        # tolerance guards against duration/dt landing just below an integer
        return int(math.floor(self.duration / self.dt + 1e-9))

    @property
    def obs_dt(self) -> float:
        return self.dt * self.measurement_decimation

    def validate(self) -> None:
        """Raise ConfigError on any violated invariant."""
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.duration >= self.dt:
            raise ConfigError(f"duration must be >= dt, got {self.duration}")
        if self.noise_scaling not in NOISE_SCALINGS:
            raise ConfigError(f"noise_scaling must be one of {NOISE_SCALINGS}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}")
        if self.filter_disturbance not in FILTER_DISTURBANCES:
            raise ConfigError(f"filter_disturbance must be one of {FILTER_DISTURBANCES}")
        if self.cov_update not in ukf.COV_UPDATES:
            raise ConfigError(f"cov_update must be one of {ukf.COV_UPDATES}")
        if self.damping_form not in vessel_mod.DAMPING_FORMS:
            raise ConfigError(f"damping_form must be one of {vessel_mod.DAMPING_FORMS}")
        if int(self.measurement_decimation) != self.measurement_decimation or self.measurement_decimation < 1:
            raise ConfigError("measurement_decimation must be a positive integer")
        if not self.P_init > 0:
            raise ConfigError("P_init must be positive")
        if self.ukf.n != 3:
            raise ConfigError("the filter state dimension is 3")
        if self.transient < 0:
            raise ConfigError("transient must be >= 0")
        check_psd(self.Q, "Q")
        check_psd(self.R, "R")
        if self.estimator == "ukf" and not np.linalg.eigvalsh(self.R).min() > 0:
            raise ConfigError(
                "the filter needs a positive definite R; use estimator='none' for exact measurements"
            )
        self.vessel.check()
        for g in self.gains.as_array:
            if not g > 0:
                raise ConfigError(f"observer gains must be positive, got {self.gains}")

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def velocity_process_cov(cfg: ScenarioConfig, dt: float) -> np.ndarray:
    """Velocity-space covariance of the per-step process noise for step ``dt``."""
    if cfg.noise_scaling == "paper":
        return cfg.Q.copy()
    if cfg.noise_scaling == "sqrt-dt":
        return cfg.Q * dt
    Minv = vessel_mod.invert_mass(cfg.vessel).matrix
    return dt * dt * Minv @ cfg.Q @ Minv.T


@dataclass(frozen=True)
class TraceRecord:
    t: float
    nu: np.ndarray
    nu_meas: np.ndarray
    nu_hat: np.ndarray
    eta: np.ndarray
    tau_d: np.ndarray
    tau_hat: np.ndarray
    z: np.ndarray
    p_diag: np.ndarray


@dataclass(eq=False)
class Trace:
    """Column store of per-step records; every array has one row per step."""

    t: np.ndarray
    nu: np.ndarray
    nu_meas: np.ndarray
    nu_hat: np.ndarray
    eta: np.ndarray
    tau_d: np.ndarray
    tau_hat: np.ndarray
    z: np.ndarray
    p_diag: np.ndarray

    VECTOR_FIELDS = ("nu", "nu_meas", "nu_hat", "eta", "tau_d", "tau_hat", "z", "p_diag")

    @classmethod
    def empty(cls, n: int = 0) -> "Trace":
        return cls(np.zeros(n), *(np.zeros((n, 3)) for _ in cls.VECTOR_FIELDS))

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> TraceRecord:
        return TraceRecord(self.t[k], *(getattr(self, f)[k] for f in self.VECTOR_FIELDS))

    def truncate(self, n: int) -> "Trace":
        return Trace(self.t[:n], *(getattr(self, f)[:n] for f in self.VECTOR_FIELDS))

    def equals(self, other: "Trace") -> bool:
        names = ("t",) + self.VECTOR_FIELDS
        return all(
            np.array_equal(getattr(self, f), getattr(other, f), equal_nan=True) for f in names
        )


@dataclass(eq=False)
class RunMetrics:
    zr: np.ndarray
    undefined_channels: list
    rmse_measured: np.ndarray
    rmse_filtered: np.ndarray
    max_z_post: float
    mean_abs_zr_post: np.ndarray
    theta: float
    r_b: Optional[float]
    sigma: float
    lyapunov_ok: bool
    discrete_factor: float
    n_records: int
    runtime_s: float = 0.0

    def summary(self) -> dict:
        def vec(a):
            return [None if not math.isfinite(x) else float(x) for x in a]

        def num(x):
            return None if x is None or not math.isfinite(x) else float(x)

        return {
            "n_records": self.n_records,
            "undefined_channels": list(self.undefined_channels),
            "rmse_measured": vec(self.rmse_measured),
            "rmse_filtered": vec(self.rmse_filtered),
            "max_z_post_transient": num(self.max_z_post),
            "mean_abs_zr_post_transient": vec(self.mean_abs_zr_post),
            "theta": num(self.theta),
            "r_b": num(self.r_b),
            "sigma": self.sigma,
            "lyapunov_condition_ok": self.lyapunov_ok,
            "max_gamma_sigma_dt": self.discrete_factor,
            "runtime_s": self.runtime_s,
            "zr_series": "trace.csv columns zr1..zr3",
        }


def relative_error(trace: Trace, strict: bool = False) -> np.ndarray:
    """Observer error scaled by each channel's largest absolute disturbance.

    A channel whose disturbance is identically zero has no scale; its column
    is NaN, or UndefinedChannelError is raised when ``strict``.
    """
    out = np.full((len(trace), 3), np.nan)
    if len(trace) == 0:
        if strict:
            raise UndefinedChannelError("empty trace")
        return out
    peak = np.abs(trace.tau_d).max(axis=0)
    for i in range(3):
        if peak[i] == 0.0:
            if strict:
                raise UndefinedChannelError(f"disturbance channel {i + 1} is identically zero")
            continue
        out[:, i] = (trace.tau_d[:, i] - trace.tau_hat[:, i]) / peak[i]
    return out


def _rmse(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) == 0:
        return np.full(3, np.nan)
    return np.sqrt(np.mean((a - b) ** 2, axis=0))


def compute_metrics(cfg: ScenarioConfig, trace: Trace, theta: float, runtime: float = 0.0) -> RunMetrics:
    zr = relative_error(trace)
    undefined = [i + 1 for i in range(3) if np.all(np.isnan(zr[:, i]))]
    post = trace.t >= cfg.transient
    if post.any():
        max_z = float(np.linalg.norm(trace.z[post], axis=1).max())
        with np.errstate(all="ignore"):
            mean_zr = np.abs(zr[post]).mean(axis=0)
    else:
        max_z, mean_zr = float("nan"), np.full(3, np.nan)
    sigma = cfg.vessel.sigma
    lyap_ok = cfg.gains.min * sigma > 0.5
    r_b = obs_mod.ball_radius(cfg.gains, sigma, theta) if lyap_ok else None
    return RunMetrics(
        zr=zr,
        undefined_channels=undefined,
        rmse_measured=_rmse(trace.nu_meas, trace.nu),
        rmse_filtered=_rmse(trace.nu_hat, trace.nu),
        max_z_post=max_z,
        mean_abs_zr_post=mean_zr,
        theta=theta,
        r_b=r_b,
        sigma=sigma,
        lyapunov_ok=lyap_ok,
        discrete_factor=obs_mod.discrete_stability(cfg.gains, sigma, cfg.obs_dt).worst,
        n_records=len(trace),
        runtime_s=runtime,
    )


def _diverged(*arrays) -> bool:
    peak = np.abs(np.concatenate([np.ravel(a) for a in arrays])).max()
    # NaN fails the comparison as well
    return not peak <= DIVERGENCE_LIMIT


def run(cfg: ScenarioConfig, precheck: bool = True) -> tuple[Trace, RunMetrics]:
    """Simulate one scenario.

    Raises DivergenceError if any state exceeds 1e12 in magnitude, or, with
    ``precheck``, before stepping when some Gamma_i * sigma * dt_obs >= 2.
    """
    cfg.validate()
    started = time.perf_counter()
    params, form = cfg.vessel, cfg.damping_form
    kinv = vessel_mod.invert_mass(params)
    obs = obs_mod.init_state(cfg.gains, kinv)
    stab = obs_mod.discrete_stability(cfg.gains, obs.sigma, cfg.obs_dt)
    if precheck and stab.status == "unstable":
        raise DivergenceError(
            f"discretized observer is unstable: Gamma*sigma*dt = {stab.worst:.4g} >= 2 "
            f"(dt_obs = {cfg.obs_dt} s); lower the gains or sample faster"
        )

    plant_rng, meas_rng, dist_rng = (np.random.default_rng(s) for s in cfg.seeds)
    q_fac = noise_factor(velocity_process_cov(cfg, cfg.dt))
    r_fac = noise_factor(cfg.R)
    h_fac = noise_factor(cfg.env.H) if cfg.env.noise_enabled else None
    noise = ukf.NoiseModel(velocity_process_cov(cfg, cfg.obs_dt), cfg.R)
    tau = np.array(cfg.tau)
    dt, obs_dt, every = cfg.dt, cfg.obs_dt, cfg.measurement_decimation

    def identity(X):
        return X

    n = cfg.n_steps + 1
    tr = Trace.empty(n)
    tau_det = np.zeros((n, 3))
    nu = np.array(cfg.nu0)
    eta = np.array(cfg.eta0)
    belief = ukf.Belief(nu.copy(), cfg.P_init * np.eye(3))
    nu_hat = belief.mean
    p_diag = np.diag(belief.P)
    y = nu.copy()

    for k in range(n):
        t = k * dt
        sample = k % every == 0
        tau_det[k] = env_mod.deterministic_disturbance(t, eta[2], cfg.env)
        tau_d = tau_det[k] if h_fac is None else tau_det[k] + h_fac @ dist_rng.standard_normal(3)
        if sample:
            y = nu + r_fac @ meas_rng.standard_normal(3)
            # the filter output for this instant takes effect here and is
            # held until the next sample
            if cfg.estimator == "none":
                nu_hat = y
            else:
                nu_hat = belief.mean
                p_diag = np.diag(belief.P)
        tau_hat = obs.zeta + obs.T @ nu_hat

        tr.t[k] = t
        tr.nu[k] = nu
        tr.nu_meas[k] = y
        tr.nu_hat[k] = nu_hat
        tr.eta[k] = eta
        tr.tau_d[k] = tau_d
        tr.tau_hat[k] = tau_hat
        tr.z[k] = tau_d - tau_hat
        tr.p_diag[k] = p_diag

        if _diverged(nu, nu_hat, obs.zeta, tau_hat, belief.P):
            raise DivergenceError(
                f"state magnitude exceeded {DIVERGENCE_LIMIT:g} at t = {t:.4g} s (step {k}); "
                f"max Gamma*sigma*dt = {stab.worst:.4g}",
                step=k,
                time=t,
            )
        if k == n - 1:
            break

        w = q_fac @ plant_rng.standard_normal(3)
        nu_next, eta = vessel_mod.step(nu, eta, tau, tau_d, dt, w, params, form)
        if sample:
            obs = obs_mod.update(obs, nu_hat, tau, params, obs_dt, form)
            if cfg.estimator == "ukf":
                if cfg.filter_disturbance == "plant":
                    load = tau_det[k]
                elif cfg.filter_disturbance == "estimate":
                    load = tau_hat
                else:
                    load = np.zeros(3)

                def plant(X, load=load):
                    return vessel_mod.step_velocity(X, tau, load, obs_dt, params, form)

                pred = ukf.predict(belief, plant, identity, noise, cfg.ukf)
                belief = ukf.correct(pred, y, cfg.cov_update)
        nu = nu_next

    theta = env_mod.estimate_theta(tau_det, dt)
    metrics = compute_metrics(cfg, tr, theta, time.perf_counter() - started)
    return tr, metrics


@dataclass
class SweepResult:
    value: float
    config: ScenarioConfig
    trace: Trace
    metrics: RunMetrics


def q_sweep(cfg: ScenarioConfig, scalings: Sequence[float]) -> list[SweepResult]:
    """One run per ``Q = s * I``, all other settings and seeds shared."""
    out = []
    for s in scalings:
        c = cfg.with_(Q=float(s) * np.eye(3))
        trace, metrics = run(c)
        out.append(SweepResult(float(s), c, trace, metrics))
    return out


@dataclass
class GammaResult(SweepResult):
    half_time: np.ndarray = None  # per channel, NaN if never reached
    lyapunov_ok: bool = True


def time_to_half_error(trace: Trace) -> np.ndarray:
    """First time each |z_i| drops to half its initial magnitude."""
    out = np.full(3, np.nan)
    if len(trace) == 0:
        return out
    z0 = np.abs(trace.z[0])
    for i in range(3):
        if z0[i] == 0:
            continue
        hit = np.nonzero(np.abs(trace.z[:, i]) <= 0.5 * z0[i])[0]
        if len(hit):
            out[i] = trace.t[hit[0]]
    return out


def gamma_comparison(
    cfg: ScenarioConfig, gammas: Sequence[float], amplitude: float = 10000.0
) -> list[GammaResult]:
    """Equal-gain runs under an identical decaying disturbance on all channels.

    Every channel sees ``amplitude * exp(-t / T_s)``; gains below the
    continuous-time bound (lambda_min * sigma <= 1/2) still run and are
    flagged through ``lyapunov_ok``.
    """
    env = replace(cfg.env, kind="decay", amplitude=(amplitude,) * 3)
    out = []
    for g in gammas:
        c = cfg.with_(env=env, gains=ObserverGains.uniform(float(g)))
        trace, metrics = run(c)
        out.append(
            GammaResult(
                float(g), c, trace, metrics,
                half_time=time_to_half_error(trace),
                lyapunov_ok=metrics.lyapunov_ok,
            )
        )
    return out


@dataclass
class TrajectoryComparison:
    uncertain: Trace
    nominal: Trace

    @property
    def separation(self) -> np.ndarray:
        return np.linalg.norm(self.uncertain.eta[:, :2] - self.nominal.eta[:, :2], axis=1)

    @property
    def terminal_separation(self) -> float:
        return float(self.separation[-1])


def trajectory_comparison(cfg: ScenarioConfig, baseline: Optional[ScenarioConfig] = None) -> TrajectoryComparison:
    """Run with the configured Q and with Q = 0 under common seeds."""
    if baseline is None:
        baseline = cfg.with_(Q=np.zeros((3, 3)))
    elif baseline.seeds != cfg.seeds:
        raise SeedMismatchError(f"seeds differ: {cfg.seeds} vs {baseline.seeds}")
    uncertain, _ = run(cfg)
    nominal, _ = run(baseline)
    return TrajectoryComparison(uncertain, nominal)

