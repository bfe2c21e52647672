"""Volterra geometric Brownian motion: closed-form VIX moments against the
piecewise deterministic Feynman-Kac representation."""
import numpy as np

from polymoments import ExponentialCurve, ExponentialKernel, VixQuery, volterra_vix_moment_closed
from polymoments.mcsim import SimConfig, estimate, pdmp_paths

b, gamma, omega = 0.04, 2.0, 0.5
kernel = ExponentialKernel(omega, gamma)
curve = ExponentialCurve(b, gamma)

for t in (0.25, 0.5):
    for k in (1, 2, 3):
        w, payoff = pdmp_paths(kernel, curve, t, 30 / 365, k, SimConfig(100_000, seed=7))
        est = estimate(w * payoff)
        exact = volterra_vix_moment_closed(b, gamma, omega, VixQuery(t, k=k))
        print(
            f"t={t} k={k}: closed {exact:.6e}  mc {est.mean:.6e} +- {est.std_error:.1e}"
            f"  z {est.z_score(exact):+.2f}  weights in [{w.min():.3f}, {w.max():.3f}]"
        )

# with a single point there are no pairs, so nothing jumps and every weight is 1
w, _ = pdmp_paths(kernel, curve, 0.5, 30 / 365, 1, SimConfig(1000, seed=7))
print("k=1 weights all one:", bool(np.all(w == 1.0)))
