"""Monte Carlo oracles.

* Euler-Maruyama for finite-dimensional polynomial diffusions,
* exact log-normal sampling of the (rough) Bergomi forward variance curve,
* piecewise deterministic Markov process with Feynman-Kac weights for the
  Volterra geometric Brownian motion,
* piecewise linear Brownian paths for signature averages.

Paths are processed in fixed blocks of ``BLOCK_SIZE``. Block b draws from its
own Philox stream keyed by ``SeedSequence(seed, spawn_key=(stream, b))``, and
blocks are reassembled in index order, so results do not depend on the number
of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .forwardvariance import ForwardCurve, Kernel, RoughKernel, gauss_legendre
from .generator import GeneratorSpec
from .polybasis import Polynomial, poly_mul
from .signature import mul_exp_batched

BLOCK_SIZE = 8192
RNG_ALGORITHM = "numpy Philox4x64-10, key from SeedSequence(seed, spawn_key=(stream, block))"

_STREAM_DIFFUSION = 1
_STREAM_BERGOMI = 2
_STREAM_PDMP = 3
_STREAM_SIGNATURE = 4
_STREAM_GAUSSIAN = 5


class CovarianceError(np.linalg.LinAlgError):
    """Gaussian covariance is not positive definite even after jitter."""

    def __init__(self, min_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(f"covariance not positive definite; smallest eigenvalue {min_eigenvalue:.3e}")


class ThinningBoundError(RuntimeError):
    """The thinning intensity bound was exceeded along a drift segment."""


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo budget and seeding.

    clamp is either None or a (lower, upper) box applied to the state after
    every Euler step.
    """

    n_paths: int
    dt: float = 1e-2
    seed: int = 0
    clamp: tuple[float, float] | None = None

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int

    def z_score(self, target: float) -> float:
        diff = self.mean - target
        if self.std_error == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.std_error

    def to_json(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "n_paths": self.n_paths}


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(stream, block))
    return np.random.Generator(np.random.Philox(ss))


def _run_blocks(fn, n_paths: int, threads: int = 1) -> list:
    sizes = [min(BLOCK_SIZE, n_paths - start) for start in range(0, n_paths, BLOCK_SIZE)]
    jobs = list(enumerate(sizes))
    if threads <= 1 or len(jobs) == 1:
        return [fn(b, m) for b, m in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def estimate(values) -> McEstimate:
    """Sample mean and standard error (ddof=1)."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise ValueError("no samples")
    n = values.size
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(float(np.mean(values)), se, n)


def mc_moment(samples, p: Polynomial) -> McEstimate:
    """Estimate E[p(X)] from samples of shape (n,) or (n, d)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("no samples")
    if samples.ndim == 1:
        samples = samples[:, None]
    return estimate(p(samples))


# ---------------------------------------------------------------------------
# Euler-Maruyama


def _sigma_function(spec: GeneratorSpec, sigma, y0):
    d = spec.dim
    if sigma is None:
        # Principal square root of a(y), negative eigenvalues truncated to 0.
        def sig(y):
            a = np.empty(y.shape[:-1] + (d, d))
            for i in range(d):
                for j in range(d):
                    a[..., i, j] = spec.diffusion[i][j](y)
            if d == 1:
                return np.sqrt(np.maximum(a, 0.0))
            lam, vec = np.linalg.eigh(a)
            return (vec * np.sqrt(np.maximum(lam, 0.0))[..., None, :]) @ np.swapaxes(vec, -1, -2)

        return sig
    if callable(sigma):
        probe = np.asarray(sigma(np.asarray(y0, dtype=float)[None, :]))[0]
        a0 = np.array([[spec.diffusion[i][j](np.asarray(y0, dtype=float)) for j in range(d)] for i in range(d)])
        if not np.allclose(probe @ probe.T, a0, rtol=1e-10, atol=1e-12):
            raise ValueError("sigma sigma^T does not reproduce the diffusion matrix at y0")
        return sigma
    rows = [list(r) for r in sigma]
    if len(rows) != d or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("sigma must be a d x m array of polynomials")
    m = len(rows[0])
    for i in range(d):
        for j in range(d):
            aa = Polynomial.zero(d)
            for c in range(m):
                aa = aa + poly_mul(rows[i][c], rows[j][c])
            if aa != spec.diffusion[i][j]:
                raise ValueError(f"sigma sigma^T differs from diffusion[{i}][{j}]")

    def sig(y):
        out = np.empty(y.shape[:-1] + (d, m))
        for i in range(d):
            for c in range(m):
                out[..., i, c] = rows[i][c](y)
        return out

    return sig


def simulate_diffusion(
    spec: GeneratorSpec, y0, T: float, cfg: SimConfig, sigma=None, threads: int = 1
) -> np.ndarray:
    """Terminal values of the Euler-Maruyama scheme, shape (n_paths, d).

    Parameters
    ----------
    spec : GeneratorSpec
        Pure-diffusion spec; the drift b is read from it.
    sigma : None, callable or d x m array of Polynomial
        Diffusion factor with sigma sigma^T = a. Polynomial factors are
        checked symbolically. None uses the principal square root of a(y)
        with negative parts truncated to zero.
    """
    if spec.has_jumps():
        raise ValueError("Euler-Maruyama oracle does not support jump moments")
    d = spec.dim
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if y0.shape != (d,):
        raise ValueError(f"initial point must have dimension {d}")
    if T < 0:
        raise ValueError("horizon must be >= 0")
    sig = _sigma_function(spec, sigma, y0)
    n_steps = int(round(T / cfg.dt))
    if n_steps and not math.isclose(n_steps * cfg.dt, T, rel_tol=1e-9):
        raise ValueError("horizon must be an integer multiple of dt")
    h = T / n_steps if n_steps else 0.0
    sqrt_h = math.sqrt(h)
    lo, hi = cfg.clamp if cfg.clamp is not None else (None, None)

    def block(b, m):
        rng = block_rng(cfg.seed, _STREAM_DIFFUSION, b)
        y = np.tile(y0, (m, 1))
        for _ in range(n_steps):
            drift = np.stack([bi(y) for bi in spec.drift], axis=-1)
            s = sig(y)
            z = rng.standard_normal((m, s.shape[-1]))
            y = y + drift * h + sqrt_h * np.einsum("pij,pj->pi", s, z)
            if cfg.clamp is not None:
                y = np.clip(y, lo, hi)
        return y

    return np.concatenate(_run_blocks(block, cfg.n_paths, threads), axis=0)


# ---------------------------------------------------------------------------
# Bergomi forward variance


def _pair_covariance_oracle(kern: Kernel, t: float, xa: float, xb: float) -> float:
    if isinstance(kern, RoughKernel):
        beta = kern.H - 0.5
        lo, hi = min(xa, xb), max(xa, xb)
        c2 = kern.c**2
        if hi == 0.0:
            return c2 * t ** (2 * kern.H) / (2 * kern.H)
        if lo == 0.0:
            val, _ = integrate.quad(
                lambda u: (u + hi) ** beta, 0.0, t, weight="alg", wvar=(beta, 0.0), epsabs=0, epsrel=1e-12, limit=200
            )
            return c2 * val
        pts = [p for p in (lo, 10 * lo, 100 * lo) if p < t]
        val, _ = integrate.quad(
            lambda u: ((u + lo) * (u + hi)) ** beta, 0.0, t, epsabs=0, epsrel=1e-12, limit=400, points=pts or None
        )
        return c2 * val
    u, w = gauss_legendre(64, 0.0, t)
    return float(np.sum(w * kern(u + xa) * kern(u + xb)))


def bergomi_covariance(kernels, t: float, x: np.ndarray) -> np.ndarray:
    """Cov(G_a, G_b) = sum_l int_0^t K_l(u + x_a) K_l(u + x_b) du on the grid `x`.

    Smooth kernels use 64-point Gauss-Legendre in u; rough kernels use
    adaptive QUADPACK with the algebraic endpoint weight.
    """
    n = len(x)
    C = np.zeros((n, n))
    if t == 0:
        return C
    for kern in kernels:
        for a in range(n):
            for b in range(a, n):
                v = _pair_covariance_oracle(kern, t, float(x[a]), float(x[b]))
                C[a, b] += v
                if a != b:
                    C[b, a] += v
    return C


def _cholesky_with_jitter(C: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        pass
    jittered = C + 1e-12 * np.trace(C) * np.eye(C.shape[0])
    try:
        return np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError:
        raise CovarianceError(float(np.linalg.eigvalsh(C)[0])) from None


def simulate_bergomi_curves(
    kernels, curve: ForwardCurve, t: float, delta: float, n_x: int, cfg: SimConfig, threads: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Exact-in-law samples of lambda_t on an n_x-point grid over [0, Delta].

    lambda_t(x) = lambda_0(t + x) exp(G_x - Var(G_x) / 2) with G Gaussian.

    Returns
    -------
    x : grid, shape (n_x,)
    curves : shape (n_paths, n_x)
    """
    if n_x < 2:
        raise ValueError("need n_x >= 2")
    x = np.linspace(0.0, delta, n_x)
    C = bergomi_covariance(list(kernels), t, x)
    base = np.asarray(curve(x + t), dtype=float)
    if not np.any(C):
        return x, np.tile(base, (cfg.n_paths, 1))
    L = _cholesky_with_jitter(C)
    half_var = 0.5 * np.diag(C)

    def block(b, m):
        rng = block_rng(cfg.seed, _STREAM_BERGOMI, b)
        g = rng.standard_normal((m, n_x)) @ L.T
        return base * np.exp(g - half_var)

    return x, np.concatenate(_run_blocks(block, cfg.n_paths, threads), axis=0)


def simulate_bergomi_vix(
    kernels, curve: ForwardCurve, t: float, delta: float, n_x: int, cfg: SimConfig, threads: int = 1
) -> np.ndarray:
    """Samples of VIX_t^2 = (1/Delta) int_0^Delta lambda_t(x) dx by the trapezoid rule."""
    x, curves = simulate_bergomi_curves(kernels, curve, t, delta, n_x, cfg, threads)
    return np.trapezoid(curves, x, axis=1) / delta


# ---------------------------------------------------------------------------
# Volterra PDMP


def _pair_sum(values: np.ndarray) -> np.ndarray:
    """sum_{i<j} v_i v_j along the last axis."""
    s = values.sum(axis=-1)
    return 0.5 * (s * s - (values * values).sum(axis=-1))


def pdmp_paths(
    kernel: Kernel, curve: ForwardCurve, t: float, delta: float, k: int, cfg: SimConfig, threads: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Feynman-Kac weights and terminal payoffs of the PDMP representation.

    X_0 is uniform on [0, Delta]^k, every coordinate drifts at unit speed and
    at rate V_k(X) = sum_{i<j} K(X_i) K(X_j) a pair (i, j), chosen with
    probability proportional to K(X_i) K(X_j), jumps to zero. Jump times are
    drawn by thinning with the intensity at the start of each drift segment
    as bound (valid for non-increasing K).

    Returns
    -------
    weights : exp(int_0^t V_k(X_s) ds), shape (n_paths,)
    payoffs : prod_i lambda_0(X_t,i), shape (n_paths,)
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not kernel.bounded:
        raise ValueError("the PDMP representation needs a bounded kernel")
    if t < 0 or not delta > 0:
        raise ValueError("need t >= 0 and delta > 0")
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]

    def pair_integral(x, s):
        if not pairs:
            return np.zeros(x.shape[0])
        out = np.zeros(x.shape[0])
        for i, j in pairs:
            out += kernel.pair_integral(s, x[:, i], x[:, j])
        return out

    def intensity(x):
        if not pairs:
            return np.zeros(x.shape[0])
        return _pair_sum(kernel(x))

    def block(b, m):
        rng = block_rng(cfg.seed, _STREAM_PDMP, b)
        x = rng.uniform(0.0, delta, size=(m, k))
        elapsed = np.zeros(m)
        logw = np.zeros(m)
        active = np.arange(m)
        while active.size:
            xa = x[active]
            bound = intensity(xa)
            e = rng.standard_exponential(active.size)
            with np.errstate(divide="ignore"):
                step = np.where(bound > 0, e / np.where(bound > 0, bound, 1.0), np.inf)
            remaining = t - elapsed[active]
            finish = step >= remaining
            # paths whose next proposal lies beyond t drift to the horizon
            fin = active[finish]
            if fin.size:
                rem = remaining[finish]
                logw[fin] += pair_integral(x[fin], rem)
                x[fin] += rem[:, None]
                elapsed[fin] = t
            go = active[~finish]
            if go.size:
                s = step[~finish]
                logw[go] += pair_integral(x[go], s)
                x[go] += s[:, None]
                elapsed[go] += s
                v_new = intensity(x[go])
                b_go = bound[~finish]
                if np.any(v_new > b_go * (1.0 + 1e-12)):
                    raise ThinningBoundError(
                        "intensity increased along a drift segment; kernel is not non-increasing"
                    )
                u = rng.uniform(size=go.size)
                accept = u * b_go < v_new
                jumpers = go[accept]
                if jumpers.size:
                    xj = x[jumpers]
                    kv = kernel(xj)
                    weights = np.stack([kv[:, i] * kv[:, j] for i, j in pairs], axis=1)
                    cum = np.cumsum(weights, axis=1)
                    r = rng.uniform(size=jumpers.size) * cum[:, -1]
                    choice = np.minimum((cum <= r[:, None]).sum(axis=1), len(pairs) - 1)
                    pi = np.array([p[0] for p in pairs])[choice]
                    pj = np.array([p[1] for p in pairs])[choice]
                    rows = np.arange(jumpers.size)
                    xj[rows, pi] = 0.0
                    xj[rows, pj] = 0.0
                    x[jumpers] = xj
            active = active[~finish]
        weights = np.exp(logw)
        payoff = np.prod(np.asarray(curve(x), dtype=float).reshape(m, k), axis=1)
        return weights, payoff

    results = _run_blocks(block, cfg.n_paths, threads)
    return np.concatenate([r[0] for r in results]), np.concatenate([r[1] for r in results])


def simulate_volterra_pdmp(
    kernel: Kernel, curve: ForwardCurve, t: float, delta: float, k: int, cfg: SimConfig, threads: int = 1
) -> McEstimate:
    """Monte Carlo estimate of E[(VIX_t^2)^k] in the Volterra GBM model."""
    w, payoff = pdmp_paths(kernel, curve, t, delta, k, cfg, threads)
    return estimate(w * payoff)


# ---------------------------------------------------------------------------
# signatures and scalar log-normals


def simulate_bm_signature(
    d: int, N: int, t: float, n_steps: int, n_paths: int, seed: int, threads: int = 1
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Mean and standard error, level by level, of signatures of piecewise
    linear Brownian paths on a uniform grid with `n_steps` segments."""
    h = t / n_steps
    sqrt_h = math.sqrt(h)

    def block(b, m):
        rng = block_rng(seed, _STREAM_SIGNATURE, b)
        levels = [np.ones((m, 1))] + [np.zeros((m, d**n)) for n in range(1, N + 1)]
        for _ in range(n_steps):
            levels = mul_exp_batched(levels, sqrt_h * rng.standard_normal((m, d)), N)
        return [(lev.sum(axis=0), (lev * lev).sum(axis=0)) for lev in levels]

    parts = _run_blocks(block, n_paths, threads)
    means, ses = [], []
    for n in range(N + 1):
        s1 = sum(p[n][0] for p in parts)
        s2 = sum(p[n][1] for p in parts)
        mean = s1 / n_paths
        var = np.maximum(s2 / n_paths - mean**2, 0.0) * n_paths / max(n_paths - 1, 1)
        means.append(mean)
        ses.append(np.sqrt(var / n_paths))
    return means, ses


def lognormal_moment_mc(
    level: float, variance: float, k: int, n_draws: int, seed: int, threads: int = 1
) -> McEstimate:
    """E[(level exp(Z - v/2))^k], Z ~ N(0, v), by direct sampling."""
    sd = math.sqrt(variance)

    def block(b, m):
        rng = block_rng(seed, _STREAM_GAUSSIAN, b)
        z = sd * rng.standard_normal(m)
        return (level * np.exp(z - 0.5 * variance)) ** k

    return estimate(np.concatenate(_run_blocks(block, n_draws, threads)))


__all__ = [
    "BLOCK_SIZE",
    "CovarianceError",
    "McEstimate",
    "RNG_ALGORITHM",
    "SimConfig",
    "ThinningBoundError",
    "bergomi_covariance",
    "block_rng",
    "estimate",
    "lognormal_moment_mc",
    "mc_moment",
    "pdmp_paths",
    "simulate_bergomi_curves",
    "simulate_bergomi_vix",
    "simulate_bm_signature",
    "simulate_diffusion",
    "simulate_volterra_pdmp",
]
