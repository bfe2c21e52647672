"""Multi-indices and sparse real polynomials in d variables.

Polynomials are immutable maps from exponent tuples to float coefficients.
Zero coefficients are never stored, so two polynomials are equal exactly
when their term maps are equal.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Mapping

import numpy as np

MultiIndex = tuple[int, ...]

NEG_INF = float("-inf")


def enumerate_basis(d: int, k: int) -> list[MultiIndex]:
    """Return all exponent vectors of length `d` with total degree <= `k`.

    Ordering is graded-lexicographic: lower total degree first, and within a
    degree the exponent tuples are sorted in decreasing lexicographic order so
    that ``(1, 0)`` (i.e. ``y_0``) precedes ``(0, 1)``.

    >>> enumerate_basis(2, 2)
    [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if k < 0:
        raise ValueError(f"degree must be >= 0, got {k}")
    basis: list[MultiIndex] = []
    for deg in range(k + 1):
        basis.extend(_compositions(deg, d))
    return basis


def _compositions(total: int, d: int) -> list[MultiIndex]:
    if d == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, d - 1):
            out.append((first,) + rest)
    return out


def basis_index(basis: Iterable[MultiIndex]) -> dict[MultiIndex, int]:
    return {alpha: i for i, alpha in enumerate(basis)}


def evaluate_basis(basis: list[MultiIndex], y) -> np.ndarray:
    """Evaluate every basis monomial at `y`; this is the vector H(y)."""
    y = np.asarray(y, dtype=float)
    exps = np.asarray(basis, dtype=int)
    if y.shape[-1] != exps.shape[1]:
        raise ValueError(f"point has dimension {y.shape[-1]}, basis has {exps.shape[1]}")
    return np.prod(y[..., None, :] ** exps, axis=-1)


class Polynomial:
    """Real polynomial in `dim` variables with a sparse term map.

    Parameters
    ----------
    terms : mapping
        Exponent tuple -> coefficient. Entries that are exactly zero are
        dropped.
    dim : int
        Number of variables.
    """

    __slots__ = ("_terms", "_dim", "_hash")

    def __init__(self, terms: Mapping[MultiIndex, float], dim: int):
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        clean: dict[MultiIndex, float] = {}
        for alpha, c in terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim:
                raise ValueError(f"exponent {alpha} does not have length {dim}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        self._terms = {a: c for a, c in clean.items() if c != 0.0}
        self._dim = dim
        self._hash = None

    # construction helpers

    @classmethod
    def zero(cls, dim: int) -> Polynomial:
        return cls({}, dim)

    @classmethod
    def constant(cls, c: float, dim: int) -> Polynomial:
        return cls({(0,) * dim: c}, dim)

    @classmethod
    def monomial(cls, alpha: MultiIndex, c: float = 1.0) -> Polynomial:
        return cls({tuple(alpha): c}, len(alpha))

    @classmethod
    def variable(cls, i: int, dim: int) -> Polynomial:
        alpha = [0] * dim
        alpha[i] = 1
        return cls({tuple(alpha): 1.0}, dim)

    @classmethod
    def from_coefficients(cls, basis: list[MultiIndex], coeffs) -> Polynomial:
        coeffs = np.asarray(coeffs, dtype=float)
        if len(basis) != coeffs.shape[0]:
            raise ValueError("coefficient vector does not match basis length")
        return cls(dict(zip(basis, coeffs.tolist())), len(basis[0]))

    # accessors

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def terms(self) -> dict[MultiIndex, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    @property
    def degree(self) -> float:
        """Total degree; ``-inf`` for the zero polynomial."""
        if not self._terms:
            return NEG_INF
        return max(sum(a) for a in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, alpha: MultiIndex) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    def coefficients(self, basis: list[MultiIndex]) -> np.ndarray:
        """Coefficient vector aligned with `basis`.

        Raises if a stored term is not part of the basis.
        """
        index = basis_index(basis)
        out = np.zeros(len(basis))
        for alpha, c in self._terms.items():
            try:
                out[index[alpha]] = c
            except KeyError:
                raise ValueError(f"term {alpha} is outside the basis") from None
        return out

    # arithmetic

    def _check(self, other: Polynomial) -> None:
        if not isinstance(other, Polynomial):
            raise TypeError(f"expected Polynomial, got {type(other).__name__}")
        if other._dim != self._dim:
            raise ValueError(f"dimension mismatch: {self._dim} vs {other._dim}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other, self._dim)
        self._check(other)
        out = dict(self._terms)
        for a, c in other._terms.items():
            out[a] = out.get(a, 0.0) + c
        return Polynomial(out, self._dim)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({a: -c for a, c in self._terms.items()}, self._dim)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(other, self._dim)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(other)
        return poly_mul(self, other)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not polynomials")
        out = Polynomial.constant(1.0, self._dim)
        for _ in range(n):
            out = poly_mul(out, self)
        return out

    def scale(self, c: float) -> Polynomial:
        return Polynomial({a: c * v for a, v in self._terms.items()}, self._dim)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._dim == other._dim and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._dim, frozenset(self._terms.items())))
        return self._hash

    def __call__(self, y):
        return poly_eval(self, y)

    def __repr__(self):
        if not self._terms:
            return f"Polynomial(0, dim={self._dim})"
        parts = []
        for alpha in sorted(self._terms, key=lambda a: (sum(a), tuple(-x for x in a))):
            mono = "*".join(
                f"y{i}" if e == 1 else f"y{i}^{e}" for i, e in enumerate(alpha) if e
            )
            c = self._terms[alpha]
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return f"Polynomial({' + '.join(parts)}, dim={self._dim})"

    # JSON form: list of {"alpha": [...], "c": float}

    def to_json(self) -> list[dict]:
        return [{"alpha": list(a), "c": c} for a, c in sorted(self._terms.items())]

    @classmethod
    def from_json(cls, doc, dim: int) -> Polynomial:
        if not isinstance(doc, list):
            raise ValueError("polynomial must be a list of {alpha, c} terms")
        terms: dict[MultiIndex, float] = {}
        for term in doc:
            if not isinstance(term, dict) or "alpha" not in term or "c" not in term:
                raise ValueError(f"malformed polynomial term {term!r}")
            alpha = tuple(int(a) for a in term["alpha"])
            terms[alpha] = terms.get(alpha, 0.0) + float(term["c"])
        return cls(terms, dim)


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    """Exact coefficient convolution of two polynomials."""
    p._check(q)
    out: dict[MultiIndex, float] = {}
    for a, ca in p._terms.items():
        for b, cb in q._terms.items():
            ab = tuple(x + y for x, y in zip(a, b))
            out[ab] = out.get(ab, 0.0) + ca * cb
    return Polynomial(out, p._dim)


def poly_partial(p: Polynomial, i: int) -> Polynomial:
    """Partial derivative with respect to variable `i`."""
    if not 0 <= i < p.dim:
        raise IndexError(f"variable index {i} out of range for dim {p.dim}")
    out: dict[MultiIndex, float] = {}
    for alpha, c in p._terms.items():
        e = alpha[i]
        if e == 0:
            continue
        beta = alpha[:i] + (e - 1,) + alpha[i + 1 :]
        out[beta] = out.get(beta, 0.0) + e * c
    return Polynomial(out, p.dim)


def poly_eval(p: Polynomial, y):
    """Evaluate `p` at a point, or at a stack of points with shape (..., d)."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        y = y.reshape(1)
    if y.shape[-1] != p.dim:
        raise ValueError(f"point has dimension {y.shape[-1]}, polynomial has {p.dim}")
    out = np.zeros(y.shape[:-1])
    for alpha, c in p._terms.items():
        term = np.full(y.shape[:-1], c)
        for j, e in enumerate(alpha):
            if e:
                term = term * y[..., j] ** e
        out = out + term
    return float(out) if out.ndim == 0 else out


def multinomial_binom(alpha: MultiIndex, beta: MultiIndex) -> int:
    """Product of binomial coefficients C(alpha_i, beta_i)."""
    return math.prod(math.comb(a, b) for a, b in zip(alpha, beta))


def sub_indices(alpha: MultiIndex) -> Iterable[MultiIndex]:
    """All beta with 0 <= beta <= alpha componentwise."""
    return itertools.product(*(range(a + 1) for a in alpha))
