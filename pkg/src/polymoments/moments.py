"""Dual and bidual moment formulas for finite-dimensional polynomial processes.

With G_k the dual matrix and H the vector of basis monomials,

    E[p_a(X_T) | X_0 = y] = H(y)^T expm(T G_k) a        (dual)
    E[H(X_T) | X_0 = y]   = expm(T G_k^T) H(y)          (bidual)
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve

from .generator import DualMatrix, GeneratorSpec, build_dual_matrix
from .polybasis import Polynomial, evaluate_basis

# Pade coefficients b_0..b_m and the 1-norm thresholds theta_m below which
# the degree-m approximant meets double precision backward error.
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_uv(A: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE[m]
    n = A.shape[0]
    ident = np.eye(n)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
        return U, V
    powers = [ident, A2]
    for _ in range(2, (m + 1) // 2):
        powers.append(powers[-1] @ A2)
    U = sum(b[j] * powers[j // 2] for j in range(m, 0, -2))
    V = sum(b[j] * powers[j // 2] for j in range(m - 1, -1, -2))
    return A @ U, V


def expm(A, t: float = 1.0) -> np.ndarray:
    """Matrix exponential exp(tA) by scaling and squaring with Pade approximants.

    Uses the smallest Pade degree m in {3, 5, 7, 9, 13} whose threshold covers
    ||tA||_1, otherwise scales by 2^-s so that degree 13 applies and squares
    the result s times.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has NaN or infinite entries")
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"time must be finite and >= 0, got {t}")
    tA = t * A
    n = tA.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    norm = np.linalg.norm(tA, 1)
    if norm == 0.0:
        return np.eye(n)
    for m in (3, 5, 7, 9):
        if norm <= _THETA[m]:
            U, V = _pade_uv(tA, m)
            return solve(V - U, V + U)
    s = max(0, int(np.ceil(np.log2(norm / _THETA[13]))))
    U, V = _pade_uv(tA / 2.0**s, 13)
    F = solve(V - U, V + U)
    for _ in range(s):
        F = F @ F
    return F


def _dual(spec, k: int) -> DualMatrix:
    if isinstance(spec, DualMatrix):
        if spec.k != k:
            raise ValueError(f"dual matrix has degree {spec.k}, requested {k}")
        return spec
    if not isinstance(spec, GeneratorSpec):
        raise TypeError("expected a GeneratorSpec or DualMatrix")
    return build_dual_matrix(spec, k)


def conditional_moment(spec, k: int, a, y, T: float) -> float:
    """E[p_a(X_T) | X_0 = y] for the polynomial with coefficient vector `a`.

    `spec` may be a GeneratorSpec or an already built DualMatrix of degree k.
    `a` may also be given as a Polynomial of degree <= k.
    """
    G = _dual(spec, k)
    if isinstance(a, Polynomial):
        a = a.coefficients(G.basis)
    a = np.asarray(a, dtype=float)
    if a.shape != (G.size,):
        raise ValueError(f"coefficient vector must have length {G.size}, got {a.shape}")
    H = evaluate_basis(G.basis, np.atleast_1d(np.asarray(y, dtype=float)))
    return float(H @ (expm(G.entries, T) @ a))


def moment_vector(spec, k: int, y0, T: float) -> np.ndarray:
    """E[H(X_T) | X_0 = y0], entries ordered like the graded basis."""
    G = _dual(spec, k)
    H = evaluate_basis(G.basis, np.atleast_1d(np.asarray(y0, dtype=float)))
    return expm(G.entries.T, T) @ H
