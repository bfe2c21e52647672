"""VIX moments in forward variance curve models.

The forward variance curve x -> lambda_t(x) is driven either by

* Bergomi-type dynamics d lambda_t(x) = A lambda_t(x) dt + sum_l K_l(x) lambda_t(x) dB^l_t,
  for which

      E[(VIX_t^2)^k] = Delta^-k int_[0,Delta]^k prod_i lambda_0(x_i + t)
                       exp( int_0^t V_k(x + tau 1) dtau ) dx,
      V_k(x) = sum_l sum_{i<j} K_l(x_i) K_l(x_j);

* or a Volterra geometric Brownian motion V_t = lambda_0(t) + int K(t-s) V_s dB_s,
  whose VIX moments have a closed form when K and lambda_0 are exponential.

All pairings with the VIX functional reduce to the flat average over
[0, Delta]^k, computed here with tensor-product Gauss-Legendre rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

DEFAULT_DELTA = 30.0 / 365.0
MAX_K = 5
MAX_NODES = 48


class QuadratureBudgetError(ValueError):
    """Requested tensor grid exceeds the configured node budget."""


@lru_cache(maxsize=64)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


# ---------------------------------------------------------------------------
# forward curves


class ForwardCurve:
    """Initial forward variance curve x -> lambda_0(x)."""

    def __call__(self, x):
        raise NotImplementedError

    def integral(self, lo: float, hi: float) -> float:
        """Exact integral of the curve over [lo, hi]."""
        raise NotImplementedError

    def average(self, t: float, delta: float) -> float:
        """Forward VIX^2 seen from today: (1/Delta) int_0^Delta lambda_0(x + t) dx."""
        return self.integral(t, t + delta) / delta

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class FlatCurve(ForwardCurve):
    c: float

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("forward variance must be non-negative")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, self.c) if x.ndim else self.c

    def integral(self, lo, hi):
        return self.c * (hi - lo)

    def to_json(self):
        return {"form": "flat", "c": self.c}


@dataclass(frozen=True)
class ExponentialCurve(ForwardCurve):
    """lambda_0(x) = c + (b - c) exp(-gamma x)."""

    b: float
    gamma: float
    c: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.b < 0 or self.c < 0:
            raise ValueError("forward variance must be non-negative")

    def __call__(self, x):
        return self.c + (self.b - self.c) * np.exp(-self.gamma * np.asarray(x, dtype=float))

    def integral(self, lo, hi):
        g = self.gamma
        if g == 0:
            return self.b * (hi - lo)
        return self.c * (hi - lo) + (self.b - self.c) * (math.exp(-g * lo) - math.exp(-g * hi)) / g

    def to_json(self):
        return {"form": "exponential", "b": self.b, "gamma": self.gamma, "c": self.c}


class TabulatedCurve(ForwardCurve):
    """Piecewise linear interpolation, flat beyond the first and last points."""

    def __init__(self, points, values):
        self.points = np.asarray(points, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.points.ndim != 1 or self.points.shape != self.values.shape or self.points.size < 1:
            raise ValueError("points and values must be 1-d arrays of equal, nonzero length")
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("tabulated abscissae must be strictly increasing")
        if np.any(self.values < 0):
            raise ValueError("forward variance must be non-negative")

    def __call__(self, x):
        out = np.interp(np.asarray(x, dtype=float), self.points, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, lo, hi):
        if hi < lo:
            return -self.integral(hi, lo)
        inner = self.points[(self.points > lo) & (self.points < hi)]
        xs = np.concatenate([[lo], inner, [hi]])
        return float(np.trapezoid(self(xs), xs))

    def __eq__(self, other):
        return (
            isinstance(other, TabulatedCurve)
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        return f"TabulatedCurve(points={self.points.tolist()}, values={self.values.tolist()})"

    def to_json(self):
        return {"form": "tabulated", "points": self.points.tolist(), "values": self.values.tolist()}


def curve_from_json(doc: dict) -> ForwardCurve:
    try:
        form = doc["form"]
        if form == "flat":
            return FlatCurve(float(doc["c"]))
        if form == "exponential":
            return ExponentialCurve(float(doc["b"]), float(doc["gamma"]), float(doc.get("c", 0.0)))
        if form == "tabulated":
            return TabulatedCurve(doc["points"], doc["values"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed curve document: {exc}") from None
    raise ValueError(f"unknown curve form {form!r}")


# ---------------------------------------------------------------------------
# kernels


class Kernel:
    """Volatility kernel K on (0, inf).

    ``pair_integral(s, xi, xj)`` returns int_0^s K(xi + u) K(xj + u) du,
    broadcasting over array arguments.
    """

    bounded = True
    decreasing = True

    def __call__(self, x):
        raise NotImplementedError

    def pair_integral(self, s, xi, xj):
        return self.pair_integral_quadrature(s, xi, xj)

    def pair_integral_quadrature(self, s, xi, xj, n_nodes: int = 64):
        """Plain Gauss-Legendre in u; accurate only for kernels smooth on [min(x), s + max(x)]."""
        s, xi, xj = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, xi, xj)))
        x, w = _legendre(n_nodes)
        u = 0.5 * s[..., None] * (x + 1.0)
        vals = self(xi[..., None] + u) * self(xj[..., None] + u)
        out = 0.5 * s * np.sum(w * vals, axis=-1)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ExponentialKernel(Kernel):
    """K(x) = omega exp(-gamma x)."""

    omega: float
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("exponential kernel needs gamma > 0")

    def __call__(self, x):
        return self.omega * np.exp(-self.gamma * np.asarray(x, dtype=float))

    def pair_integral(self, s, xi, xj):
        g = self.gamma
        s, xi, xj = (np.asarray(v, dtype=float) for v in (s, xi, xj))
        out = self.omega**2 * np.exp(-g * (xi + xj)) * (-np.expm1(-2.0 * g * s)) / (2.0 * g)
        return float(out) if np.ndim(out) == 0 else out

    def to_json(self):
        return {"form": "exponential", "omega": self.omega, "gamma": self.gamma}


@dataclass(frozen=True)
class RoughKernel(Kernel):
    """K(x) = c x^(H - 1/2) with 0 < H < 1/2."""

    H: float
    c: float = 1.0
    n_nodes: int = 64
    bounded = False

    def __post_init__(self):
        if not 0.0 < self.H < 0.5:
            raise ValueError(f"rough kernel needs 0 < H < 1/2, got {self.H}")

    def __call__(self, x):
        return self.c * np.asarray(x, dtype=float) ** (self.H - 0.5)

    def pair_integral(self, s, xi, xj):
        s, xi, xj = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, xi, xj)))
        out = np.empty(s.shape)
        for idx in np.ndindex(s.shape):
            out[idx] = rough_pair_exponent(self.H, self.c, s[idx], xi[idx], xj[idx], self.n_nodes)
        return float(out) if out.ndim == 0 else out

    def to_json(self):
        return {"form": "rough", "H": self.H, "c": self.c}


def kernel_from_json(doc: dict) -> Kernel:
    try:
        form = doc["form"]
        if form == "exponential":
            return ExponentialKernel(float(doc["omega"]), float(doc["gamma"]))
        if form == "rough":
            return RoughKernel(float(doc["H"]), float(doc.get("c", 1.0)))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed kernel document: {exc}") from None
    raise ValueError(f"unknown kernel form {form!r}")


@dataclass(frozen=True)
class VixQuery:
    """Option maturity t, VIX window delta and moment order k."""

    t: float
    delta: float = DEFAULT_DELTA
    k: int = 1

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("maturity t must be >= 0")
        if not self.delta > 0:
            raise ValueError("window delta must be > 0")
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("moment order k must be a non-negative integer")


# ---------------------------------------------------------------------------
# pair exponents


def classical_bergomi_pair_factor(omega, gamma, t, xi, xj):
    """(omega^2 / 2 gamma)(1 - exp(-2 gamma t)) exp(-gamma (xi + xj)).

    One kernel's contribution to the exponent of a pair (i, j).
    """
    if not np.all(np.asarray(gamma) > 0):
        raise ValueError("gamma must be > 0")
    omega, gamma, t, xi, xj = (np.asarray(v, dtype=float) for v in (omega, gamma, t, xi, xj))
    out = omega**2 / (2.0 * gamma) * (-np.expm1(-2.0 * gamma * t)) * np.exp(-gamma * (xi + xj))
    return float(out) if out.ndim == 0 else out


def _graded_panels(a: float, t: float) -> list[tuple[float, float]]:
    # Panel width equals the distance from its left end to the singularity at -a.
    panels = []
    lo = 0.0
    while lo < t:
        hi = min(2.0 * lo + a, t)
        panels.append((lo, hi))
        lo = hi
    return panels


def rough_pair_exponent(H: float, c: float, t: float, xi: float, xj: float, n_nodes: int = 64) -> float:
    """c^2 int_0^t ((xi + u)(xj + u))^(H - 1/2) du.

    Composite Gauss-Legendre on panels graded geometrically towards the
    nearest singularity at u = -min(xi, xj). When min(xi, xj) = 0 the first
    panel uses Gauss-Jacobi with weight u^(H - 1/2). Equal arguments use the
    closed form ((t + x)^2H - x^2H) / 2H.
    """
    if not 0.0 < H < 0.5:
        raise ValueError(f"H must lie in (0, 1/2), got {H}")
    if xi < 0 or xj < 0:
        raise ValueError("kernel arguments must be >= 0")
    if t <= 0:
        return 0.0
    beta = H - 0.5
    a, b = min(xi, xj), max(xi, xj)
    c2 = c * c
    if a == b:
        return c2 * ((t + a) ** (2 * H) - a ** (2 * H)) / (2 * H)
    total = 0.0
    if a == 0.0:
        # int_0^L u^beta (u + b)^beta du via Gauss-Jacobi on [0, L]
        L = min(b, t)
        z, w = roots_jacobi(n_nodes, 0.0, beta)
        u = 0.5 * L * (z + 1.0)
        total += (0.5 * L) ** (beta + 1.0) * float(np.sum(w * (u + b) ** beta))
        panels = []
        lo = L
        while lo < t:
            hi = min(2.0 * lo, t)
            panels.append((lo, hi))
            lo = hi
    else:
        panels = _graded_panels(a, t)
    x, w = _legendre(n_nodes)
    for lo, hi in panels:
        half = 0.5 * (hi - lo)
        u = lo + half * (x + 1.0)
        total += half * float(np.sum(w * ((u + a) * (u + b)) ** beta))
    return c2 * total


# ---------------------------------------------------------------------------
# VIX averaging functional


@dataclass(frozen=True)
class VixPairing:
    """The k-fold flat average (1/Delta^k) int_[0,Delta]^k f(x) dx."""

    delta: float
    k: int

    def nodes(self, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
        """One-axis Gauss-Legendre nodes on [0, Delta]; weights sum to one."""
        x, w = gauss_legendre(n_nodes, 0.0, self.delta)
        return x, w / self.delta

    def integrate(self, f, n_nodes: int = 16) -> float:
        """Average of a vectorised f taking arrays of shape (..., k)."""
        if self.k == 0:
            return float(f(np.zeros((0,))))
        x, w = self.nodes(n_nodes)
        grids = np.meshgrid(*([x] * self.k), indexing="ij")
        pts = np.stack(grids, axis=-1)
        weight = np.ones([n_nodes] * self.k)
        for i in range(self.k):
            shape = [1] * self.k
            shape[i] = n_nodes
            weight = weight * w.reshape(shape)
        return float(np.sum(weight * f(pts)))


def vix_pairing_weight(delta: float, k: int) -> VixPairing:
    if not delta > 0:
        raise ValueError("window delta must be > 0")
    if k < 0:
        raise ValueError("k must be >= 0")
    return VixPairing(delta, k)


def _symmetric_tensor_average(f_nodes, w, pair_exp, k):
    """sum over multi-indices of prod_i w f (a_i) * exp(sum_{i<j} E[a_i, a_j])."""
    n = len(w)
    if k == 0:
        return 1.0
    v = w * f_nodes
    if k == 1:
        return float(np.sum(v))
    total = 0.0
    # Outer loop over the first axis keeps memory at n^(k-1).
    for a in range(n):
        expo = np.zeros([n] * (k - 1))
        for i in range(1, k):
            shape = [1] * (k - 1)
            shape[i - 1] = n
            expo = expo + pair_exp[a].reshape(shape)
        for i in range(1, k):
            for j in range(i + 1, k):
                shape = [1] * (k - 1)
                shape[i - 1] = n
                shape[j - 1] = n
                expo = expo + pair_exp.reshape(shape)
        weight = np.ones([n] * (k - 1))
        for i in range(1, k):
            shape = [1] * (k - 1)
            shape[i - 1] = n
            weight = weight * v.reshape(shape)
        total += float(v[a]) * float(np.sum(weight * np.exp(expo)))
    return total


def _check_budget(k, n_nodes, max_k, max_nodes):
    if k > max_k:
        raise QuadratureBudgetError(f"moment order {k} exceeds the budget k <= {max_k}")
    if n_nodes > max_nodes:
        raise QuadratureBudgetError(f"{n_nodes} nodes per axis exceed the budget {max_nodes}")
    if n_nodes < 1:
        raise ValueError("need at least one node per axis")


def forward_vix2_quadrature(curve: ForwardCurve, t: float, delta: float, n_nodes: int) -> float:
    """Forward VIX^2 with the same Gauss-Legendre rule as the moment formulas."""
    x, w = VixPairing(delta, 1).nodes(n_nodes)
    return float(np.sum(w * curve(x + t)))


def bergomi_vix_moment(
    kernels,
    curve: ForwardCurve,
    q: VixQuery,
    n_nodes: int = 40,
    pair_rule: str = "auto",
    max_k: int = MAX_K,
    max_nodes: int = MAX_NODES,
) -> float:
    """E[(VIX_t^2)^k | lambda_0] in a (rough) Bergomi model.

    Parameters
    ----------
    kernels : sequence of Kernel
        One kernel per driving Brownian motion.
    curve : ForwardCurve
    q : VixQuery
    n_nodes : int
        Gauss-Legendre nodes per axis of [0, Delta]^k.
    pair_rule : {"auto", "quadrature"}
        How int_0^t K(x_i + tau) K(x_j + tau) dtau is evaluated. "auto" uses
        each kernel's own rule (closed form for exponential kernels, graded
        Gauss-Legendre for rough ones); "quadrature" forces plain 64-point
        Gauss-Legendre in tau, which is only meaningful for smooth kernels.
    """
    k = int(q.k)
    _check_budget(k, n_nodes, max_k, max_nodes)
    x, w = VixPairing(q.delta, k).nodes(n_nodes)
    f = np.asarray(curve(x + q.t), dtype=float)
    pair_exp = np.zeros((n_nodes, n_nodes))
    if k >= 2:
        xi, xj = np.meshgrid(x, x, indexing="ij")
        iu = np.triu_indices(n_nodes)
        for kern in kernels:
            if pair_rule == "auto":
                vals = kern.pair_integral(q.t, xi[iu], xj[iu])
            elif pair_rule == "quadrature":
                vals = kern.pair_integral_quadrature(q.t, xi[iu], xj[iu])
            else:
                raise ValueError(f"unknown pair rule {pair_rule!r}")
            block = np.zeros((n_nodes, n_nodes))
            block[iu] = vals
            pair_exp += block + np.triu(block, 1).T
    return _symmetric_tensor_average(f, w, pair_exp, k)


def classical_bergomi_vix_moment(
    omegas, gammas, curve: ForwardCurve, q: VixQuery, n_nodes: int = 40,
    max_k: int = MAX_K, max_nodes: int = MAX_NODES,
) -> float:
    """Classical (exponential-kernel) Bergomi VIX moment built from the
    closed-form pair factors."""
    k = int(q.k)
    _check_budget(k, n_nodes, max_k, max_nodes)
    x, w = VixPairing(q.delta, k).nodes(n_nodes)
    f = np.asarray(curve(x + q.t), dtype=float)
    xi, xj = np.meshgrid(x, x, indexing="ij")
    pair_exp = np.zeros((n_nodes, n_nodes))
    for om, ga in zip(omegas, gammas, strict=True):
        pair_exp += classical_bergomi_pair_factor(om, ga, q.t, xi, xj)
    return _symmetric_tensor_average(f, w, pair_exp, k)


# ---------------------------------------------------------------------------
# rough Bergomi bounds and heuristics


def rough_lognormal_bounds(H: float, curve: ForwardCurve, q: VixQuery, c: float = 1.0) -> tuple[float, float]:
    """k-th moments of the lower and upper log-normal bounds for VIX_t^2.

    Both log-normals have mean VIX^2_{0,t}; their log-variances are
    c^2 ((t + Delta)^2H - Delta^2H) / 2H (lower) and c^2 t^2H / 2H (upper).
    """
    if not 0.0 < H < 0.5:
        raise ValueError(f"H must lie in (0, 1/2), got {H}")
    v0 = curve.average(q.t, q.delta)
    k = q.k
    var_hi = c * c * q.t ** (2 * H) / (2 * H)
    var_lo = c * c * ((q.t + q.delta) ** (2 * H) - q.delta ** (2 * H)) / (2 * H)
    lower = v0**k * math.exp(0.5 * k * (k - 1) * var_lo)
    upper = v0**k * math.exp(0.5 * k * (k - 1) * var_hi)
    return lower, upper


def rough_spot_moment(H: float, curve: ForwardCurve, t: float, k: int, c: float = 1.0) -> float:
    """Heuristic spot variance moment lambda_0(t)^k exp(c^2 k(k-1) t^2H / 4H).

    This is not a proven identity for singular kernels; it is the log-normal
    moment of a variable with log-variance c^2 t^2H / 2H.
    """
    if not 0.0 < H < 0.5:
        raise ValueError(f"H must lie in (0, 1/2), got {H}")
    return float(curve(t)) ** k * math.exp(c * c * k * (k - 1) * t ** (2 * H) / (4 * H))


# ---------------------------------------------------------------------------
# Volterra geometric Brownian motion


def volterra_vix_moment_closed(b: float, gamma: float, omega: float, q: VixQuery) -> float:
    """E[VIX_t^2k] for K = omega exp(-gamma x), lambda_0 = b exp(-gamma x)."""
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    k = q.k
    avg = b * (-math.expm1(-gamma * q.delta)) / (gamma * q.delta)
    return avg**k * math.exp(-(k * gamma - 0.5 * k * (k - 1) * omega**2) * q.t)
