"""Moments of the Jacobi diffusion dY = sqrt(2Y(1-Y)) dW by a matrix exponential,
checked against Euler-Maruyama paths."""
import math

import numpy as np

from polymoments import build_dual_matrix, conditional_moment, jacobi_spec, moment_vector
from polymoments.mcsim import SimConfig, mc_moment, simulate_diffusion
from polymoments.polybasis import Polynomial

spec = jacobi_spec()
G = build_dual_matrix(spec, 4)
print("basis:", G.basis)
print(G.entries)

# eigenvalues sit on the diagonal: -j(j-1)
print("eigenvalues:", np.sort(np.linalg.eigvals(G.entries).real))

y = Polynomial.variable(0, 1)
print("E[Y_1^2 | Y_0 = 0.5] =", conditional_moment(spec, 2, y * y, [0.5], 1.0))
print("closed form          =", 0.5 - 0.25 * math.exp(-2))
print("moment vector        =", moment_vector(spec, 4, [0.5], 1.0))

# all three estimates reuse the same paths, so their errors move together
paths = simulate_diffusion(spec, [0.5], 1.0, SimConfig(100_000, dt=1 / 400, seed=1, clamp=(0.0, 1.0)))
for p, name in [(y, "y"), (y * y, "y^2"), (y**3, "y^3")]:
    est = mc_moment(paths, p)
    exact = conditional_moment(spec, int(p.degree), p, [0.5], 1.0)
    print(f"{name:4s} exact {exact:.6f}  mc {est.mean:.6f} +- {est.std_error:.6f}  z {est.z_score(exact):+.2f}")
