"""Batch front end.

    polymoments run     --config cfg.json [--out out.json] [--format json|csv] [--threads N]
    polymoments compare --config cfg.json [--out out.json] [--format json|csv] [--dump samples.csv] [--threads N]

The config names a command (moments, vix-bergomi, vix-volterra, signature,
simulate), a mandatory seed and a command-specific payload. ``run`` emits
analytic values (or the Monte Carlo estimate for ``simulate``); ``compare``
adds the Monte Carlo oracle next to each analytic value.

Exit codes: 0 ok, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .forwardvariance import (
    DEFAULT_DELTA,
    ExponentialCurve,
    ExponentialKernel,
    QuadratureBudgetError,
    RoughKernel,
    VixQuery,
    bergomi_vix_moment,
    curve_from_json,
    forward_vix2_quadrature,
    kernel_from_json,
    rough_lognormal_bounds,
    volterra_vix_moment_closed,
)
from .generator import DegreeIncrease, GeneratorSpec, build_dual_matrix, validate_generator
from .mcsim import (
    RNG_ALGORITHM,
    CovarianceError,
    McEstimate,
    SimConfig,
    ThinningBoundError,
    estimate,
    mc_moment,
    pdmp_paths,
    simulate_bergomi_vix,
    simulate_bm_signature,
    simulate_diffusion,
)
from .moments import conditional_moment, moment_vector
from .polybasis import Polynomial
from .signature import (
    TruncatedTensor,
    expected_signature_bm,
    expm_L1,
    index_word,
    word_key,
)

COMMANDS = ("moments", "vix-bergomi", "vix-volterra", "signature", "simulate")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
Z_FLAG = 3.0


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class RunConfig:
    command: str
    seed: int
    payload: dict
    raw: dict = field(repr=False)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


# ---------------------------------------------------------------------------
# field access with path-qualified errors


def _get(doc, key, path, kind=None, default=...):
    if not isinstance(doc, dict):
        raise ConfigError(path, "must be an object")
    if key not in doc:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "missing required field")
        return default
    val = doc[key]
    p = f"{path}.{key}"
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(p, f"must be an integer, got {val!r}")
    elif kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ConfigError(p, f"must be a finite number, got {val!r}")
        val = float(val)
    elif kind is not None and not isinstance(val, kind):
        raise ConfigError(p, f"must be of type {kind.__name__}")
    return val


def _positive_int(doc, key, path, default=...):
    val = _get(doc, key, path, int, default)
    if val < 1:
        raise ConfigError(f"{path}.{key}", "must be >= 1")
    return val


def _wrap(path, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(path, str(exc)) from None


def load_config(text: str) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "must be a JSON object")
    command = _get(doc, "command", "config", str)
    if command not in COMMANDS:
        raise ConfigError("config.command", f"unknown command {command!r}; expected one of {COMMANDS}")
    seed = _get(doc, "seed", "config", int)
    if not 0 <= seed < 2**64:
        raise ConfigError("config.seed", "must be a 64-bit unsigned integer")
    return RunConfig(command, seed, doc, doc)


# ---------------------------------------------------------------------------
# command payload parsing


def _generator(doc, path="config.model") -> GeneratorSpec:
    spec = _wrap(path, GeneratorSpec.from_json, _get(doc, "model", "config", dict))
    violation = validate_generator(spec)
    # degree increases are reported as numerical failures when the dual matrix is built
    if violation is not None and violation.found is None:
        raise ConfigError(f"{path}.{violation.field}", violation.message)
    return spec


def _state(doc, key, path, dim):
    val = _get(doc, key, path)
    arr = np.atleast_1d(np.asarray(val, dtype=float)) if isinstance(val, (list, int, float)) else None
    if arr is None or arr.shape != (dim,):
        raise ConfigError(f"{path}.{key}", f"must be a list of {dim} numbers")
    return arr


def _sim_config(mc, path, seed, needs_dt=True) -> SimConfig:
    n_paths = _positive_int(mc, "n_paths", path)
    dt = _get(mc, "dt", path, float, 1e-2)
    clamp = _get(mc, "clamp", path, None, None)
    if clamp is not None:
        if not (isinstance(clamp, list) and len(clamp) == 2):
            raise ConfigError(f"{path}.clamp", "must be [lower, upper] or null")
        clamp = (float(clamp[0]), float(clamp[1]))
    return _wrap(path, SimConfig, n_paths, dt, seed, clamp)


def _orders(doc, path):
    k = _get(doc, "k", path)
    ks = k if isinstance(k, list) else [k]
    if not ks or any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in ks):
        raise ConfigError(f"{path}.k", "must be a positive integer or a list of them")
    return ks


def _query(doc, k):
    t = _get(doc, "t", "config", float)
    delta = _get(doc, "delta", "config", float, DEFAULT_DELTA)
    return _wrap("config", VixQuery, t, delta, k)


def _mono_label(alpha) -> str:
    parts = [f"y{i}" if e == 1 else f"y{i}^{e}" for i, e in enumerate(alpha) if e]
    return "*".join(parts) or "1"


def _row(quantity, analytic, est, exact_rtol=1e-12):
    if est.std_error == 0.0:
        scale = max(abs(analytic), abs(est.mean), 1e-300)
        z = 0.0 if abs(est.mean - analytic) <= exact_rtol * scale else math.copysign(math.inf, est.mean - analytic)
    else:
        z = (est.mean - analytic) / est.std_error
    return {
        "quantity": quantity,
        "analytic": analytic,
        "mc_mean": est.mean,
        "mc_se": est.std_error,
        "n_paths": est.n_paths,
        "z": z,
        "flag": bool(abs(z) > Z_FLAG),
    }


# ---------------------------------------------------------------------------
# commands


def _cmd_moments(cfg: RunConfig, compare: bool, threads: int):
    doc = cfg.payload
    spec = _generator(doc)
    k = _get(doc, "k", "config", int)
    if k < 0:
        raise ConfigError("config.k", "must be >= 0")
    y0 = _state(doc, "y0", "config", spec.dim)
    T = _get(doc, "T", "config", float)
    if T < 0:
        raise ConfigError("config.T", "must be >= 0")
    poly = None
    if "polynomial" in doc:
        poly = _wrap("config.polynomial", Polynomial.from_json, doc["polynomial"], spec.dim)
        if poly.degree > k:
            raise ConfigError("config.polynomial", f"degree exceeds k={k}")
    G = build_dual_matrix(spec, k)
    m = moment_vector(G, k, y0, T)
    result = {"basis": [list(a) for a in G.basis], "moments": m.tolist()}
    table = [{"index": i, "monomial": _mono_label(a), "value": float(v)} for i, (a, v) in enumerate(zip(G.basis, m))]
    if poly is not None:
        result["conditional_moment"] = conditional_moment(G, k, poly, y0, T)
    samples = None
    if compare:
        mc = _get(doc, "mc", "config", dict)
        sim = _sim_config(mc, "config.mc", cfg.seed)
        sigma = _sigma_from_json(mc, spec)
        Y = _numeric(simulate_diffusion, spec, y0, T, sim, sigma, threads)
        if poly is not None:
            targets = [("p", result["conditional_moment"], poly)]
        else:
            targets = [
                (_mono_label(a), float(v), Polynomial.monomial(a))
                for a, v in zip(G.basis, m)
                if sum(a) > 0
            ]
        table = [_row(name, val, mc_moment(Y, p)) for name, val, p in targets]
        result["comparison"] = table
        samples = Y if poly is None else poly(Y)
    return result, table, samples


def _sigma_from_json(mc, spec):
    doc = mc.get("sigma")
    if doc is None:
        return None
    try:
        return [[Polynomial.from_json(p, spec.dim) for p in row] for row in doc]
    except (ValueError, TypeError) as exc:
        raise ConfigError("config.mc.sigma", str(exc)) from None


def _cmd_simulate(cfg: RunConfig, compare: bool, threads: int):
    doc = cfg.payload
    spec = _generator(doc)
    y0 = _state(doc, "y0", "config", spec.dim)
    T = _get(doc, "T", "config", float)
    poly = _wrap("config.polynomial", Polynomial.from_json, _get(doc, "polynomial", "config", list), spec.dim)
    mc = _get(doc, "mc", "config", dict)
    sim = _sim_config(mc, "config.mc", cfg.seed)
    Y = _numeric(simulate_diffusion, spec, y0, T, sim, _sigma_from_json(mc, spec), threads)
    values = poly(Y)
    est = estimate(values)
    out = dict(est.to_json(), seed=cfg.seed)
    result = {"estimate": out}
    if compare:
        k = _get(doc, "k", "config", int, max(int(poly.degree), 0))
        analytic = conditional_moment(build_dual_matrix(spec, k), k, poly, y0, T)
        result["comparison"] = [_row("p", analytic, est)]
        return result, result["comparison"], values
    return result, [out], values


def _cmd_vix_bergomi(cfg: RunConfig, compare: bool, threads: int):
    doc = cfg.payload
    curve = _wrap("config.curve", curve_from_json, _get(doc, "curve", "config", dict))
    kdocs = _get(doc, "kernels", "config", list)
    kernels = [_wrap(f"config.kernels[{i}]", kernel_from_json, kd) for i, kd in enumerate(kdocs)]
    ks = _orders(doc, "config")
    n_nodes = _positive_int(doc, "n_nodes", "config", 40)
    values = []
    for k in ks:
        q = _query(doc, k)
        try:
            values.append(bergomi_vix_moment(kernels, curve, q, n_nodes=n_nodes))
        except QuadratureBudgetError as exc:
            raise ConfigError("config.k" if "order" in str(exc) else "config.n_nodes", str(exc)) from None
    q1 = _query(doc, 1)
    result = {
        "forward_vix2": forward_vix2_quadrature(curve, q1.t, q1.delta, n_nodes),
        "moments": [{"k": k, "value": v} for k, v in zip(ks, values)],
    }
    if len(kernels) == 1 and isinstance(kernels[0], RoughKernel):
        kern = kernels[0]
        result["lognormal_bounds"] = [
            dict(zip(("k", "lower", "upper"), (k, *rough_lognormal_bounds(kern.H, curve, _query(doc, k), c=kern.c))))
            for k in ks
        ]
    table = [{"k": k, "value": v} for k, v in zip(ks, values)]
    samples = None
    if compare:
        mc = _get(doc, "mc", "config", dict)
        n_paths = _positive_int(mc, "n_paths", "config.mc")
        n_x = _get(mc, "n_x", "config.mc", int, 64)
        if n_x < 2:
            raise ConfigError("config.mc.n_x", "must be >= 2")
        sim = SimConfig(n_paths, seed=cfg.seed)
        samples = _numeric(simulate_bergomi_vix, kernels, curve, q1.t, q1.delta, n_x, sim, threads)
        table = [_row(f"E[VIX^2k], k={k}", v, estimate(samples**k)) for k, v in zip(ks, values)]
        result["comparison"] = table
    return result, table, samples


def _volterra_closed_params(kernel, curve):
    if not isinstance(kernel, ExponentialKernel):
        raise ConfigError("config.kernel", "closed form needs an exponential kernel")
    if not (isinstance(curve, ExponentialCurve) and curve.c == 0.0 and curve.gamma == kernel.gamma):
        raise ConfigError("config.curve", "closed form needs curve b*exp(-gamma x) with the kernel's gamma and c = 0")
    return curve.b, kernel.gamma, kernel.omega


def _cmd_vix_volterra(cfg: RunConfig, compare: bool, threads: int):
    doc = cfg.payload
    kernel = _wrap("config.kernel", kernel_from_json, _get(doc, "kernel", "config", dict))
    curve = _wrap("config.curve", curve_from_json, _get(doc, "curve", "config", dict))
    ks = _orders(doc, "config")
    b, gamma, omega = _volterra_closed_params(kernel, curve)
    values = [volterra_vix_moment_closed(b, gamma, omega, _query(doc, k)) for k in ks]
    result = {"moments": [{"k": k, "value": v} for k, v in zip(ks, values)]}
    table = [{"k": k, "value": v} for k, v in zip(ks, values)]
    samples = None
    if compare:
        mc = _get(doc, "mc", "config", dict)
        n_paths = _positive_int(mc, "n_paths", "config.mc")
        exact = _get(mc, "exact", "config.mc", bool, False)
        sim = SimConfig(n_paths, seed=cfg.seed)
        table = []
        for k, v in zip(ks, values):
            q = _query(doc, k)
            if exact and k == 1:
                # no jumps and unit weights: the uniform start is averaged exactly
                est = McEstimate(curve.average(q.t, q.delta), 0.0, n_paths)
            else:
                w, payoff = _numeric(pdmp_paths, kernel, curve, q.t, q.delta, k, sim, threads)
                est = estimate(w * payoff)
                if samples is None:
                    samples = w * payoff
            table.append(_row(f"E[VIX^2k], k={k}", v, est))
        result["comparison"] = table
    return result, table, samples


def _cmd_signature(cfg: RunConfig, compare: bool, threads: int):
    doc = cfg.payload
    d = _positive_int(doc, "d", "config")
    N = _get(doc, "N", "config", int)
    if N < 0:
        raise ConfigError("config.N", "must be >= 0")
    t = _get(doc, "t", "config", float)
    if t < 0:
        raise ConfigError("config.t", "must be >= 0")
    if d**N > 1_000_000:
        raise ConfigError("config.N", "tensor level too large")
    sig = expected_signature_bm(d, N, t)
    dual = TruncatedTensor(d, N)
    for n in range(N + 1):
        for idx in range(d**n):
            a = TruncatedTensor(d, N)
            a.levels[n][idx] = 1.0
            dual.levels[n][idx] = expm_L1(a, t).levels[0][0]
    result = {"signature": sig.to_dict(), "dual_route_max_abs_diff": sig.max_abs_diff(dual)}
    table = [{"word": w, "value": v} for w, v in result["signature"].items()]
    if compare:
        mc = _get(doc, "mc", "config", dict)
        n_paths = _positive_int(mc, "n_paths", "config.mc")
        n_steps = _positive_int(mc, "n_steps", "config.mc")
        means, ses = simulate_bm_signature(d, N, t, n_steps, n_paths, cfg.seed, threads)
        table = []
        for n in range(1, N + 1):
            for idx in range(d**n):
                est = McEstimate(float(means[n][idx]), float(ses[n][idx]), n_paths)
                table.append(_row(word_key(index_word(idx, n, d), d), float(sig.levels[n][idx]), est))
        result["comparison"] = table
    return result, table, None


_DISPATCH = {
    "moments": _cmd_moments,
    "simulate": _cmd_simulate,
    "vix-bergomi": _cmd_vix_bergomi,
    "vix-volterra": _cmd_vix_volterra,
    "signature": _cmd_signature,
}


class NumericalFailure(RuntimeError):
    pass


def _numeric(fn, *args):
    try:
        return fn(*args)
    except (CovarianceError, ThinningBoundError, DegreeIncrease, FloatingPointError) as exc:
        raise NumericalFailure(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError("config", str(exc)) from None


# ---------------------------------------------------------------------------
# output


def _metadata(cfg: RunConfig, mode: str) -> dict:
    return {
        "command": cfg.command,
        "mode": mode,
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "version": __version__,
        "rng": RNG_ALGORITHM,
    }


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _sanitize(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_sanitize(v) for v in obj]
    return obj


def render(meta: dict, result: dict, table: list, fmt: str) -> str:
    if fmt == "json":
        doc = _sanitize({**meta, "result": result})
        return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}={meta[key]}\n")
    if table:
        fields = list(table[0].keys())
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in table:
            writer.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def render_dump(samples) -> str:
    samples = np.asarray(samples, dtype=float)
    buf = io.StringIO()
    if samples.ndim == 1:
        buf.write("path_index,value\n")
        for i, v in enumerate(samples):
            buf.write(f"{i},{float(v)!r}\n")
    else:
        cols = ",".join(f"value_{j}" for j in range(samples.shape[1]))
        buf.write(f"path_index,{cols}\n")
        for i, row in enumerate(samples):
            buf.write(f"{i}," + ",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def run(config_text: str, mode: str = "run", fmt: str = "json", threads: int = 1, dump: bool = False):
    """Execute a config; returns (output text, dump text or None).

    Raises ConfigError or NumericalFailure.
    """
    if fmt not in ("json", "csv"):
        raise ConfigError("--format", "must be json or csv")
    cfg = load_config(config_text)
    try:
        result, table, samples = _DISPATCH[cfg.command](cfg, mode == "compare", threads)
    except (DegreeIncrease, CovarianceError, ThinningBoundError) as exc:
        raise NumericalFailure(str(exc)) from exc
    if dump and samples is None:
        raise ConfigError("--dump", f"no sample-level output for {cfg.command} in {mode} mode")
    text = render(_metadata(cfg, mode), result, table, fmt)
    return text, (render_dump(samples) if dump else None)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="polymoments", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    for name in ("run", "compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", default="json", choices=("json", "csv"))
        p.add_argument("--dump", help="write sample-level CSV (path_index, value) here")
        p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    args = parser.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out, dump = run(text, args.mode, args.format, max(1, args.threads), dump=bool(args.dump))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    if args.dump:
        with open(args.dump, "w", encoding="utf-8") as fh:
            fh.write(dump)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
