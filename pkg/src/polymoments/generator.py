"""Polynomial generators on R^d and their dual matrices.

A generator acts on a polynomial p by

    Lp = sum_i b_i d_i p + 1/2 sum_ij a_ij d_i d_j p + jump part,

where the jump part is expressed through the jump moment polynomials
mu_beta(y) = int (z - y)^beta N(y, dz), |beta| >= 2. For a monomial y^alpha
the jump part expands to sum_{beta <= alpha, |beta| >= 2} C(alpha, beta)
y^(alpha - beta) mu_beta(y).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .polybasis import (
    MultiIndex,
    Polynomial,
    basis_index,
    enumerate_basis,
    multinomial_binom,
    poly_mul,
    poly_partial,
)


class DegreeIncrease(ArithmeticError):
    """Raised when L maps a polynomial to one of strictly higher degree."""

    def __init__(self, p_degree, lp_degree, monomial=None):
        self.p_degree = p_degree
        self.lp_degree = lp_degree
        self.monomial = monomial
        where = f" on monomial {monomial}" if monomial is not None else ""
        super().__init__(
            f"generator raises degree from {p_degree} to {lp_degree}{where}; "
            "it is not a polynomial operator"
        )


@dataclass(frozen=True)
class Violation:
    """First offending field found by :func:`validate_generator`."""

    field: str
    found: float | None = None
    allowed: int | None = None
    message: str = ""

    def __str__(self):
        if self.found is not None:
            return f"{self.field}: degree {self.found} exceeds {self.allowed}"
        return f"{self.field}: {self.message}"


@dataclass(frozen=True)
class GeneratorSpec:
    """Drift, diffusion and jump-moment data of a polynomial generator.

    Parameters
    ----------
    dim : int
    drift : tuple of Polynomial
        One polynomial b_i per coordinate.
    diffusion : tuple of tuple of Polynomial
        The quadratic form a = sigma sigma^T as a d x d array of polynomials.
    jump_moments : mapping, optional
        beta -> mu_beta with |beta| >= 2.

    Only shapes and dimensions are checked at construction; degree and
    symmetry conditions are reported by :func:`validate_generator`.
    """

    dim: int
    drift: tuple
    diffusion: tuple
    jump_moments: Mapping[MultiIndex, Polynomial] = field(default_factory=dict)

    def __post_init__(self):
        d = self.dim
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        object.__setattr__(self, "drift", tuple(self.drift))
        object.__setattr__(self, "diffusion", tuple(tuple(row) for row in self.diffusion))
        object.__setattr__(
            self, "jump_moments", {tuple(b): mu for b, mu in dict(self.jump_moments).items()}
        )
        if len(self.drift) != d:
            raise ValueError(f"drift needs {d} entries, got {len(self.drift)}")
        if len(self.diffusion) != d or any(len(row) != d for row in self.diffusion):
            raise ValueError(f"diffusion must be a {d}x{d} array")
        polys = list(self.drift) + [a for row in self.diffusion for a in row]
        polys += list(self.jump_moments.values())
        for p in polys:
            if not isinstance(p, Polynomial) or p.dim != d:
                raise ValueError("all coefficients must be Polynomials of matching dimension")
        for beta in self.jump_moments:
            if len(beta) != d or any(b < 0 for b in beta):
                raise ValueError(f"invalid jump multi-index {beta}")
            if sum(beta) < 2:
                raise ValueError(f"jump moments need |beta| >= 2, got {beta}")

    @classmethod
    def zero(cls, dim: int) -> GeneratorSpec:
        z = Polynomial.zero(dim)
        return cls(dim, [z] * dim, [[z] * dim for _ in range(dim)])

    def has_jumps(self) -> bool:
        return any(not mu.is_zero() for mu in self.jump_moments.values())

    # JSON

    @classmethod
    def from_json(cls, doc) -> GeneratorSpec:
        """Load ``{"dim", "drift", "diffusion", "jumps"}``; polynomials are
        lists of ``{"alpha": [...], "c": float}``."""
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        if not isinstance(doc, dict):
            raise ValueError("generator document must be a JSON object")
        try:
            d = int(doc["dim"])
            drift = [Polynomial.from_json(p, d) for p in doc["drift"]]
            diffusion = [[Polynomial.from_json(p, d) for p in row] for row in doc["diffusion"]]
        except KeyError as exc:
            raise ValueError(f"generator document is missing field {exc.args[0]!r}") from None
        jumps = {}
        for entry in doc.get("jumps", []) or []:
            beta = tuple(int(b) for b in entry["beta"])
            jumps[beta] = Polynomial.from_json(entry["mu"], d)
        return cls(d, drift, diffusion, jumps)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "drift": [p.to_json() for p in self.drift],
            "diffusion": [[p.to_json() for p in row] for row in self.diffusion],
            "jumps": [
                {"beta": list(b), "mu": mu.to_json()} for b, mu in sorted(self.jump_moments.items())
            ],
        }


def jacobi_spec() -> GeneratorSpec:
    """One-dimensional Jacobi diffusion with vanishing drift, Lp = y(1-y)p''."""
    y = Polynomial.variable(0, 1)
    return GeneratorSpec(1, [Polynomial.zero(1)], [[2.0 * y * (1.0 - y)]])


def brownian_spec(dim: int) -> GeneratorSpec:
    """Standard Brownian motion in R^dim, Lp = (1/2) Laplacian p."""
    one = Polynomial.constant(1.0, dim)
    zero = Polynomial.zero(dim)
    diffusion = [[one if i == j else zero for j in range(dim)] for i in range(dim)]
    return GeneratorSpec(dim, [zero] * dim, diffusion)


def validate_generator(spec: GeneratorSpec) -> Violation | None:
    """Check degree and symmetry conditions. Returns None when the spec is valid."""
    for i, b in enumerate(spec.drift):
        if b.degree > 1:
            return Violation(f"drift[{i}]", b.degree, 1)
    for i, row in enumerate(spec.diffusion):
        for j, a in enumerate(row):
            if a.degree > 2:
                return Violation(f"diffusion[{i}][{j}]", a.degree, 2)
    for i in range(spec.dim):
        for j in range(i + 1, spec.dim):
            if spec.diffusion[i][j] != spec.diffusion[j][i]:
                return Violation(
                    f"diffusion[{i}][{j}]", message=f"not equal to diffusion[{j}][{i}] (asymmetric)"
                )
    for beta, mu in sorted(spec.jump_moments.items()):
        if mu.degree > sum(beta):
            return Violation(f"jumps[{list(beta)}]", mu.degree, sum(beta))
    return None


def _apply_monomial(spec: GeneratorSpec, alpha: MultiIndex) -> Polynomial:
    d = spec.dim
    p = Polynomial.monomial(alpha)
    out = Polynomial.zero(d)
    grads = [poly_partial(p, i) for i in range(d)]
    for i in range(d):
        if not spec.drift[i].is_zero() and not grads[i].is_zero():
            out = out + poly_mul(spec.drift[i], grads[i])
    for i in range(d):
        if grads[i].is_zero():
            continue
        for j in range(d):
            a = spec.diffusion[i][j]
            if a.is_zero():
                continue
            hess = poly_partial(grads[i], j)
            if not hess.is_zero():
                out = out + poly_mul(a, hess).scale(0.5)
    for beta, mu in spec.jump_moments.items():
        if sum(beta) > sum(alpha) or any(b > a for a, b in zip(alpha, beta)) or mu.is_zero():
            continue
        rest = tuple(a - b for a, b in zip(alpha, beta))
        out = out + poly_mul(Polynomial.monomial(rest), mu).scale(multinomial_binom(alpha, beta))
    return out


def apply_generator(spec: GeneratorSpec, p: Polynomial) -> Polynomial:
    """Return Lp.

    Raises
    ------
    DegreeIncrease
        If deg(Lp) > deg(p). The test is an exact zero test on the computed
        coefficients.
    """
    if p.dim != spec.dim:
        raise ValueError(f"polynomial has dimension {p.dim}, generator has {spec.dim}")
    out = Polynomial.zero(spec.dim)
    for alpha, c in p.items():
        out = out + _apply_monomial(spec, alpha).scale(c)
    if out.degree > p.degree:
        raise DegreeIncrease(p.degree, out.degree)
    return out


@dataclass(frozen=True)
class DualMatrix:
    """Matrix G_k of L on coefficient vectors w.r.t. the graded monomial basis.

    Column j holds the coefficients of L(h_j), so for p = H^T a we have
    Lp = H^T (G a).
    """

    k: int
    basis: list
    entries: np.ndarray

    @property
    def size(self) -> int:
        return len(self.basis)

    def degrees(self) -> np.ndarray:
        return np.array([sum(a) for a in self.basis])

    def block(self, j: int) -> np.ndarray:
        """Leading sub-matrix acting on polynomials of degree <= j."""
        n = sum(1 for a in self.basis if sum(a) <= j)
        return self.entries[:n, :n]


def build_dual_matrix(spec: GeneratorSpec, k: int) -> DualMatrix:
    if k < 0:
        raise ValueError(f"truncation degree must be >= 0, got {k}")
    basis = enumerate_basis(spec.dim, k)
    index = basis_index(basis)
    G = np.zeros((len(basis), len(basis)))
    for j, alpha in enumerate(basis):
        lp = _apply_monomial(spec, alpha)
        if lp.degree > sum(alpha):
            raise DegreeIncrease(sum(alpha), lp.degree, monomial=alpha)
        for beta, c in lp.items():
            G[index[beta], j] = c
    G.setflags(write=False)
    return DualMatrix(k, basis, G)
