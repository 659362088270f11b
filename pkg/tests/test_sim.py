import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shipdob import observer as O
from shipdob import sim
from shipdob import vessel as V
from shipdob.environment import EnvConfig
from shipdob.errors import ConfigError, DivergenceError, SeedMismatchError, UndefinedChannelError
from shipdob.sim import ScenarioConfig, Trace

QUIET = dict(Q=0.0, R=0.0, estimator="none")


def short(**kw):
    return ScenarioConfig(duration=kw.pop("duration", 5.0), **kw)


def test_noiseless_undisturbed_rest_stays_at_rest():
    cfg = short(env=EnvConfig(kind="constant"), **QUIET)
    trace, _ = sim.run(cfg)
    for name in ("nu", "nu_meas", "nu_hat", "tau_d", "tau_hat", "z"):
        assert not np.any(getattr(trace, name)), name
    np.testing.assert_array_equal(trace.eta, np.tile(cfg.eta0, (len(trace), 1)))


@given(
    dt=st.sampled_from([0.01, 0.02, 0.05, 0.1, 0.003]),
    steps=st.integers(1, 300),
    extra=st.floats(0.0, 0.999),
)
@settings(max_examples=25, deadline=None)
def test_record_count_and_time_grid(dt, steps, extra):
    cfg = ScenarioConfig(dt=dt, duration=(steps + extra) * dt, gains=O.ObserverGains.uniform(1.0), **QUIET)
    trace, metrics = sim.run(cfg)
    assert len(trace) == metrics.n_records == math.floor(cfg.duration / dt + 1e-9) + 1
    np.testing.assert_allclose(np.diff(trace.t), dt, rtol=1e-9)
    assert np.all(np.diff(trace.t) > 0)


def test_identical_seeds_identical_traces():
    a, _ = sim.run(short())
    b, _ = sim.run(short())
    assert a.equals(b)
    c, _ = sim.run(short(seeds=(1, 2, 4), env=EnvConfig(noise_enabled=True)))
    d, _ = sim.run(short(seeds=(1, 2, 5), env=EnvConfig(noise_enabled=True)))
    assert not c.equals(d)


def test_free_decay_speed_never_increases():
    cfg = ScenarioConfig(env=EnvConfig(kind="constant"), nu0=(1.0, 0.5, 0.1), duration=60.0, **QUIET)
    trace, _ = sim.run(cfg)
    D = V.damping(trace.nu, cfg.vessel)
    sym = 0.5 * (D + np.swapaxes(D, 1, 2))
    assert np.linalg.eigvalsh(sym).min() > 0
    speed = np.linalg.norm(trace.nu, axis=1)
    assert np.all(np.diff(speed) <= 0)
    assert speed[-1] < 0.05 * speed[0]


def test_recorded_error_matches_observer_replay():
    """Rebuild zeta from the recorded filtered velocities and recompute z."""
    cfg = short(duration=3.0)
    trace, _ = sim.run(cfg)
    state = O.init_state(cfg.gains, V.invert_mass(cfg.vessel))
    for k in range(len(trace)):
        tau_hat = O.estimate(state, trace.nu_hat[k])
        z = trace.tau_d[k] - state.zeta - state.T @ trace.nu_hat[k]
        scale = 1e-12 * max(1.0, np.abs(trace.tau_d[k]).max(), np.abs(tau_hat).max())
        np.testing.assert_allclose(trace.z[k], z, rtol=0, atol=scale)
        state = O.update(state, trace.nu_hat[k], np.array(cfg.tau), cfg.vessel, cfg.dt)


def test_decimation_holds_measurement():
    cfg = short(measurement_decimation=5, duration=1.0, gains=O.ObserverGains.uniform(20.0))
    trace, metrics = sim.run(cfg)
    for k in range(len(trace)):
        base = k - k % 5
        np.testing.assert_array_equal(trace.nu_meas[k], trace.nu_meas[base])
        np.testing.assert_array_equal(trace.nu_hat[k], trace.nu_hat[base])
    assert metrics.discrete_factor == pytest.approx(20 * cfg.vessel.sigma * 0.05)


def test_decimation_enters_stability_precheck():
    sim.run(short(duration=0.5))
    with pytest.raises(DivergenceError):
        sim.run(short(duration=0.5, measurement_decimation=5))


@pytest.mark.parametrize("mode", sim.FILTER_DISTURBANCES)
def test_filter_disturbance_modes_run(mode):
    trace, metrics = sim.run(short(filter_disturbance=mode, duration=2.0))
    assert np.all(np.isfinite(trace.nu_hat))


@pytest.mark.parametrize(
    "kw",
    [
        {"dt": 0.0},
        {"dt": -0.01},
        {"duration": 0.001},
        {"noise_scaling": "linear"},
        {"estimator": "ekf"},
        {"cov_update": "joseph"},
        {"damping_form": "cubic"},
        {"measurement_decimation": 0},
        {"P_init": 0.0},
        {"Q": -np.eye(3)},
        {"R": np.ones((2, 2))},
        {"gains": O.ObserverGains(50, -1, 50)},
        {"filter_disturbance": "true"},
        {"R": 0.0},
        {"seeds": (1, 2)},
        {"eta0": (0.0, math.nan, 0.0)},
    ],
)
def test_invalid_scenarios(kw):
    with pytest.raises(ConfigError):
        sim.run(ScenarioConfig(**{"duration": 1.0, **kw}))


def test_divergence_is_detected_without_precheck():
    cfg = ScenarioConfig(gains=O.ObserverGains.uniform(250.0), dt=0.1, duration=200.0)
    with pytest.raises(DivergenceError) as info:
        sim.run(cfg, precheck=False)
    assert info.value.step is not None and info.value.time < 200.0


@pytest.mark.parametrize("scaling", ["force", "sqrt-dt", "paper"])
def test_velocity_process_covariance(scaling):
    cfg = ScenarioConfig(noise_scaling=scaling)
    cov = sim.velocity_process_cov(cfg, 0.01)
    Minv = V.invert_mass(cfg.vessel).matrix
    expected = {
        "paper": cfg.Q,
        "sqrt-dt": 0.01 * cfg.Q,
        "force": 1e-4 * Minv @ cfg.Q @ Minv.T,
    }[scaling]
    np.testing.assert_allclose(cov, expected, rtol=1e-14)


def _trace_with(tau_d, tau_hat):
    n = len(tau_d)
    tr = Trace.empty(n)
    tr.t[:] = np.arange(n) * 0.01
    tr.tau_d[:] = tau_d
    tr.tau_hat[:] = tau_hat
    tr.z[:] = tr.tau_d - tr.tau_hat
    return tr


def test_relative_error_definition():
    tau_d = np.array([[1.0, -2.0, 0.0], [2.0, 4.0, 0.0], [-1.0, 1.0, 0.0]])
    exact = sim.relative_error(_trace_with(tau_d, tau_d))
    assert not np.any(exact[:, :2])
    half = sim.relative_error(_trace_with(tau_d, tau_d - np.array([1.0, 2.0, 0.0])))
    np.testing.assert_allclose(half[:, 0], 0.5)
    np.testing.assert_allclose(half[:, 1], 0.5)
    assert np.all(np.isnan(half[:, 2]))
    with pytest.raises(UndefinedChannelError):
        sim.relative_error(_trace_with(tau_d, tau_d), strict=True)


def test_empty_trace_metrics_flag_every_channel():
    cfg = ScenarioConfig()
    metrics = sim.compute_metrics(cfg, Trace.empty(), theta=0.0)
    assert metrics.undefined_channels == [1, 2, 3]
    assert metrics.n_records == 0
    assert metrics.summary()["rmse_measured"] == [None, None, None]


def test_single_q_sweep_equals_run():
    cfg = short(duration=2.0)
    [res] = sim.q_sweep(cfg, [3e4])
    trace, _ = sim.run(cfg)
    assert res.trace.equals(trace)


def test_zero_q_entry_is_noiseless_plant():
    cfg = short(duration=2.0)
    [res] = sim.q_sweep(cfg, [0.0])
    nominal, _ = sim.run(cfg.with_(Q=np.zeros((3, 3))))
    assert res.trace.equals(nominal)


def test_filtered_error_grows_with_q():
    """Monte-Carlo direction check over 10 seeds: more model noise, worse filtered estimate."""
    scalings = [1e3, 1e4, 3e4, 1e5]
    totals = np.zeros(len(scalings))
    for seed in range(10):
        cfg = ScenarioConfig(duration=20.0, seeds=(seed, seed + 100, seed + 200))
        for i, res in enumerate(sim.q_sweep(cfg, scalings)):
            totals[i] += res.metrics.rmse_filtered.sum()
    assert np.all(np.diff(totals) > 0)


def test_weak_gain_is_flagged_but_converges():
    cfg = ScenarioConfig(duration=40.0, **QUIET)
    [res] = sim.gamma_comparison(cfg, [0.4])
    assert not res.lyapunov_ok and res.metrics.r_b is None
    z = np.abs(res.trace.z)
    assert np.all(z[-1] < 0.1 * z[0])


def test_trajectory_comparison_contracts():
    same = sim.trajectory_comparison(short(Q=0.0, duration=3.0))
    assert same.terminal_separation == 0.0
    cmp = sim.trajectory_comparison(ScenarioConfig(duration=60.0))
    assert cmp.terminal_separation > 0.0
    with pytest.raises(SeedMismatchError):
        sim.trajectory_comparison(short(), short(seeds=(9, 9, 9)))
