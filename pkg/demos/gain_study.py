"""
How the observer gain sets the adaptation speed
===============================================

Every channel sees the same decaying load, so with equal gains the three
normalized errors move together. Raising the gain shortens the time the
error needs to halve, until gain times step size approaches 2 and the
discrete recursion loses stability.
"""

import numpy as np

from shipdob import observer, sim
from shipdob.sim import ScenarioConfig

cfg = ScenarioConfig(duration=60.0, Q=0.0, R=0.0, estimator="none")
results = sim.gamma_comparison(cfg, [0.01, 0.1, 0.4, 1.0, 10.0, 30.0])

print(" gain   half-time [s]   channel spread   bound exists")
for res in results:
    spread = np.abs(res.metrics.zr - res.metrics.zr[:, :1]).max()
    print(f"{res.value:6g}   {res.half_time[0]:10.3f}   {spread:12.1e}   {res.lyapunov_ok}")

# Where the Euler recursion stops converging for a given sampling period.
for dt in (0.01, 0.05, 0.1):
    limit = 2.0 / (cfg.vessel.sigma * dt)
    stab = observer.discrete_stability(observer.ObserverGains(), cfg.vessel.sigma, dt)
    print(f"dt = {dt:4}: gains above {limit:6.1f} diverge; default gain is '{stab.status}'")
