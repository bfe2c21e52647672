"""Truncated tensor algebra T^N(R^d) and signatures of Brownian motion.

Level n of a tensor is stored as a flat array of length d^n in row-major
word order: the word (i_1, ..., i_n) with letters in {1, ..., d} sits at
index sum_j (i_j - 1) d^(n - j).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


class TruncatedTensor:
    """Element of T^N(R^d) with dense per-level storage."""

    __slots__ = ("d", "N", "levels")

    def __init__(self, d: int, N: int, levels: Sequence | None = None):
        if d < 1 or N < 0:
            raise ValueError(f"need d >= 1 and N >= 0, got d={d}, N={N}")
        self.d = d
        self.N = N
        if levels is None:
            levels = [np.zeros(d**n) for n in range(N + 1)]
        if len(levels) != N + 1:
            raise ValueError(f"expected {N + 1} levels, got {len(levels)}")
        out = []
        for n, lev in enumerate(levels):
            arr = np.asarray(lev, dtype=float).reshape(-1)
            if arr.size != d**n:
                raise ValueError(f"level {n} must have {d**n} entries, got {arr.size}")
            out.append(arr)
        self.levels = out

    @classmethod
    def unit(cls, d: int, N: int) -> TruncatedTensor:
        t = cls(d, N)
        t.levels[0][0] = 1.0
        return t

    @classmethod
    def word(cls, word: Sequence[int], d: int, N: int | None = None) -> TruncatedTensor:
        """Basis tensor e_{i_1} x ... x e_{i_n}."""
        N = len(word) if N is None else N
        if len(word) > N:
            raise ValueError(f"word of length {len(word)} exceeds truncation level {N}")
        t = cls(d, N)
        t.levels[len(word)][word_index(word, d)] = 1.0
        return t

    def _check(self, other: TruncatedTensor) -> None:
        if not isinstance(other, TruncatedTensor):
            raise TypeError(f"expected TruncatedTensor, got {type(other).__name__}")
        if (self.d, self.N) != (other.d, other.N):
            raise ValueError(f"shape mismatch: (d={self.d}, N={self.N}) vs (d={other.d}, N={other.N})")

    def __add__(self, other):
        self._check(other)
        return TruncatedTensor(self.d, self.N, [a + b for a, b in zip(self.levels, other.levels)])

    def __sub__(self, other):
        self._check(other)
        return TruncatedTensor(self.d, self.N, [a - b for a, b in zip(self.levels, other.levels)])

    def __neg__(self):
        return TruncatedTensor(self.d, self.N, [-a for a in self.levels])

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return TruncatedTensor(self.d, self.N, [other * a for a in self.levels])
        return tensor_product(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return self * other
        return NotImplemented

    def coefficient(self, word: Sequence[int]) -> float:
        if len(word) > self.N:
            raise ValueError(f"word of length {len(word)} exceeds truncation level {self.N}")
        return float(self.levels[len(word)][word_index(word, self.d)])

    def max_abs_diff(self, other: TruncatedTensor) -> float:
        self._check(other)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.levels, other.levels))

    def copy(self) -> TruncatedTensor:
        return TruncatedTensor(self.d, self.N, [a.copy() for a in self.levels])

    def to_dict(self) -> dict[str, float]:
        """Coefficients keyed by word strings such as ``"1122"``; the empty
        word is ``""``. Letters are comma separated when d > 9."""
        out = {}
        for n, lev in enumerate(self.levels):
            for idx, val in enumerate(lev):
                out[word_key(index_word(idx, n, self.d), self.d)] = float(val)
        return out

    def __repr__(self):
        return f"TruncatedTensor(d={self.d}, N={self.N})"


def word_index(word: Sequence[int], d: int) -> int:
    idx = 0
    for letter in word:
        if not 1 <= letter <= d:
            raise ValueError(f"letter {letter} outside alphabet 1..{d}")
        idx = idx * d + (letter - 1)
    return idx


def index_word(idx: int, n: int, d: int) -> tuple[int, ...]:
    letters = []
    for _ in range(n):
        idx, r = divmod(idx, d)
        letters.append(r + 1)
    return tuple(reversed(letters))


def word_key(word: Sequence[int], d: int) -> str:
    sep = "" if d <= 9 else ","
    return sep.join(str(i) for i in word)


def tensor_product(u: TruncatedTensor, v: TruncatedTensor) -> TruncatedTensor:
    """Concatenation product, levels above N discarded."""
    u._check(v)
    levels = []
    for n in range(u.N + 1):
        acc = np.zeros(u.d**n)
        for a in range(n + 1):
            ua, vb = u.levels[a], v.levels[n - a]
            if ua.any() and vb.any():
                acc += np.outer(ua, vb).reshape(-1)
        levels.append(acc)
    return TruncatedTensor(u.d, u.N, levels)


def tensor_exp(v, d: int, N: int) -> TruncatedTensor:
    """exp(v) = sum_n v^{(x)n} / n! for a level-one vector v."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != d:
        raise ValueError(f"vector has length {v.size}, alphabet size is {d}")
    levels = [np.ones(1)]
    for n in range(1, N + 1):
        levels.append(np.outer(levels[-1], v).reshape(-1) / n)
    return TruncatedTensor(d, N, levels)


def mul_exp_batched(levels: list[np.ndarray], v: np.ndarray, N: int) -> list[np.ndarray]:
    """Right-multiply a batch of tensors by exp(v), one increment per row.

    Level n of S exp(v) is S_n + (S_{n-1} + (... (S_0 v/n) ...) v/2) v, so each
    level needs n outer products.
    """
    batch = v.shape[0]
    out = [levels[0]]
    for n in range(1, N + 1):
        acc = levels[0]
        for j in range(1, n + 1):
            prod = (acc[:, :, None] * v[:, None, :]).reshape(batch, -1) / (n - j + 1)
            acc = levels[j] + prod
        out.append(acc)
    return out


def batched_signatures(increments: np.ndarray, N: int) -> list[np.ndarray]:
    """Signatures of a batch of piecewise linear paths.

    Parameters
    ----------
    increments : array of shape (batch, n_segments, d)

    Returns
    -------
    list of arrays, level n of shape (batch, d^n)
    """
    increments = np.asarray(increments, dtype=float)
    batch, steps, d = increments.shape
    levels = [np.ones((batch, 1))] + [np.zeros((batch, d**n)) for n in range(1, N + 1)]
    for s in range(steps):
        levels = mul_exp_batched(levels, increments[:, s, :], N)
    return levels


def chen_signature(path, N: int) -> TruncatedTensor:
    """Signature of the piecewise linear path through `path` (shape (m, d)).

    Folds tensor exponentials of the increments with Chen's identity.
    """
    path = np.asarray(path, dtype=float)
    if path.ndim != 2:
        raise ValueError("path must be a 2-d array of points, shape (m, d)")
    if path.shape[0] < 2:
        raise ValueError("path needs at least two points")
    d = path.shape[1]
    levels = batched_signatures(np.diff(path, axis=0)[None], N)
    return TruncatedTensor(d, N, [lev[0] for lev in levels])


def expected_signature_bm(d: int, N: int, t: float) -> TruncatedTensor:
    """E[S(B)^N_{0,t}] = sum_k (t/2)^k / k! (sum_i e_i x e_i)^{(x)k}."""
    if t < 0:
        raise ValueError("t must be >= 0")
    eye = np.eye(d).reshape(-1)
    levels = [np.zeros(d**n) for n in range(N + 1)]
    power = np.ones(1)
    for k in range(N // 2 + 1):
        levels[2 * k] = (t / 2.0) ** k / math.factorial(k) * power
        power = np.kron(power, eye)
    return TruncatedTensor(d, N, levels)


def dual_L1_apply(a: TruncatedTensor) -> TruncatedTensor:
    """L1(e_{i_1} .. e_{i_n}) = 1/2 1{i_{n-1} = i_n} e_{i_1} .. e_{i_{n-2}}."""
    d = a.d
    levels = [np.zeros(d**n) for n in range(a.N + 1)]
    for n in range(2, a.N + 1):
        block = a.levels[n].reshape(d ** (n - 2), d, d)
        levels[n - 2] = 0.5 * np.trace(block, axis1=1, axis2=2)
    return TruncatedTensor(d, a.N, levels)


def expm_L1(a: TruncatedTensor, t: float) -> TruncatedTensor:
    """exp(t L1) a as the finite sum over l <= N/2 of t^l / l! L1^l a."""
    out = a.copy()
    term = a
    for ell in range(1, a.N // 2 + 1):
        term = dual_L1_apply(term)
        out = out + term * (t**ell / math.factorial(ell))
    return out


def expected_word_coefficient(word: Sequence[int], t: float, d: int | None = None, N: int | None = None) -> float:
    """E[<e_word, S(B)_{0,t}>] by the dual moment formula.

    The signature at time 0 is the unit tensor, so the expectation is the
    empty-word coefficient of exp(t L1) e_word.
    """
    word = tuple(word)
    if N is not None and len(word) > N:
        raise ValueError(f"word of length {len(word)} exceeds truncation level {N}")
    d = max(word, default=1) if d is None else d
    a = TruncatedTensor.word(word, d, len(word) if N is None else N)
    return float(expm_L1(a, t).levels[0][0])
