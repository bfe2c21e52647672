import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from polymoments.signature import (
    TruncatedTensor,
    batched_signatures,
    chen_signature,
    dual_L1_apply,
    expected_signature_bm,
    expected_word_coefficient,
    expm_L1,
    index_word,
    tensor_exp,
    tensor_product,
    word_index,
    word_key,
)

paths = st.integers(2, 4).flatmap(
    lambda d: st.integers(2, 7).flatmap(
        lambda m: arrays(np.float64, (m, d), elements=st.floats(-2, 2, allow_nan=False, width=64))
    )
)


def _levels_2_3(path):
    """Iterated integrals of a piecewise linear path by explicit segment sums."""
    v = np.diff(path, axis=0)
    m, d = v.shape
    S2 = np.zeros((d, d))
    S3 = np.zeros((d, d, d))
    for r in range(m):
        before = v[:r].sum(axis=0)
        S2 += np.outer(before, v[r]) + np.outer(v[r], v[r]) / 2
    for r in range(m):
        before = v[:r].sum(axis=0)
        own = np.einsum("i,j,k->ijk", v[r], v[r], v[r]) / 6
        # S2 of the path up to segment r
        S2r = np.zeros((d, d))
        for s in range(r):
            S2r += np.outer(v[:s].sum(axis=0), v[s]) + np.outer(v[s], v[s]) / 2
        S3 += np.einsum("ij,k->ijk", S2r, v[r]) + np.einsum("i,j,k->ijk", before, v[r], v[r]) / 2 + own
    return S2, S3


def test_word_indexing():
    assert word_index((2, 1), 2) == 2
    assert index_word(2, 2, 2) == (2, 1)
    assert word_key((1, 1, 2, 2), 2) == "1122"
    assert word_key((10, 1), 12) == "10,1"
    with pytest.raises(ValueError):
        word_index((3,), 2)


def test_tensor_shape_validation():
    with pytest.raises(ValueError):
        TruncatedTensor(2, 2, [np.ones(1), np.ones(2)])
    with pytest.raises(ValueError):
        TruncatedTensor(2, 1, [np.ones(1), np.ones(3)])
    with pytest.raises(ValueError):
        TruncatedTensor.unit(2, 2) * TruncatedTensor.unit(3, 2)


def test_single_segment_is_tensor_exponential():
    v = np.array([0.3, -1.1])
    sig = chen_signature(np.array([[0.0, 0.0], v]), 4)
    assert sig.max_abs_diff(tensor_exp(v, 2, 4)) <= 1e-15
    assert sig.coefficient((1, 1, 1)) == pytest.approx(0.3**3 / 6, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(paths)
def test_low_levels_match_segment_sums(path):
    S2, S3 = _levels_2_3(path)
    sig = chen_signature(path, 3)
    np.testing.assert_allclose(sig.levels[1], path[-1] - path[0], atol=1e-12)
    np.testing.assert_allclose(sig.levels[2], S2.reshape(-1), atol=1e-11)
    np.testing.assert_allclose(sig.levels[3], S3.reshape(-1), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(paths, st.data())
def test_chen_identity(path, data):
    cut = data.draw(st.integers(1, path.shape[0] - 2)) if path.shape[0] > 2 else None
    if cut is None:
        mid = 0.5 * (path[0] + path[1])
        path = np.vstack([path[0], mid, path[1]])
        cut = 1
    whole = chen_signature(path, 4)
    split = chen_signature(path[: cut + 1], 4) * chen_signature(path[cut:], 4)
    scale = max(1.0, max(float(np.max(np.abs(lev))) for lev in whole.levels))
    assert whole.max_abs_diff(split) <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(-3, 3, allow_nan=False)))
def test_group_inverse(v):
    prod = tensor_exp(v, 3, 5) * tensor_exp(-v, 3, 5)
    assert prod.max_abs_diff(TruncatedTensor.unit(3, 5)) <= 1e-12 * max(1.0, float(np.abs(v).max()) ** 5)


@settings(max_examples=30, deadline=None)
@given(paths)
def test_reversed_path_gives_inverse(path):
    prod = chen_signature(path, 3) * chen_signature(path[::-1], 3)
    assert prod.max_abs_diff(TruncatedTensor.unit(path.shape[1], 3)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(paths)
def test_shuffle_identity_level_two(path):
    sig = chen_signature(path, 4)
    d = path.shape[1]
    for i, j in itertools.product(range(1, d + 1), repeat=2):
        lhs = sig.coefficient((i,)) * sig.coefficient((j,))
        assert lhs == pytest.approx(sig.coefficient((i, j)) + sig.coefficient((j, i)), abs=1e-11)
    # (12) shuffle (3 or 1): 12a + 1a2 + a12
    a = min(3, d)
    lhs = sig.coefficient((1, 2)) * sig.coefficient((a,))
    rhs = sig.coefficient((1, 2, a)) + sig.coefficient((1, a, 2)) + sig.coefficient((a, 1, 2))
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_batched_matches_single():
    rng = np.random.default_rng(0)
    inc = rng.normal(size=(5, 6, 2))
    levels = batched_signatures(inc, 3)
    for b in range(5):
        path = np.vstack([np.zeros(2), np.cumsum(inc[b], axis=0)])
        single = chen_signature(path, 3)
        for n in range(4):
            np.testing.assert_allclose(levels[n][b], single.levels[n], atol=1e-13)


def test_tensor_product_unit_and_scalars():
    rng = np.random.default_rng(1)
    u = TruncatedTensor(2, 3, [rng.normal(size=2**n) for n in range(4)])
    assert (u * TruncatedTensor.unit(2, 3)).max_abs_diff(u) == 0.0
    assert (2.0 * u - u - u).max_abs_diff(TruncatedTensor(2, 3)) == 0.0
    w = TruncatedTensor(2, 3, [rng.normal(size=2**n) for n in range(4)])
    z = TruncatedTensor(2, 3, [rng.normal(size=2**n) for n in range(4)])
    assert tensor_product(tensor_product(u, w), z).max_abs_diff(tensor_product(u, tensor_product(w, z))) <= 1e-12


def test_expected_signature_values():
    es = expected_signature_bm(2, 4, 1.0).to_dict()
    assert es[""] == 1.0
    assert es["11"] == 0.5 and es["22"] == 0.5 and es["12"] == 0.0
    assert es["1122"] == 0.125 and es["1111"] == 0.125 and es["1212"] == 0.0
    assert all(v == 0.0 for w, v in es.items() if len(w) % 2)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_dual_route_matches_formula(t):
    d, N = 2, 6
    es = expected_signature_bm(d, N, t)
    for n in range(N + 1):
        for idx in range(d**n):
            word = index_word(idx, n, d)
            assert abs(expected_word_coefficient(word, t, d=d, N=N) - es.levels[n][idx]) <= 1e-14


def test_l1_on_short_words():
    a = TruncatedTensor.word((1, 2, 2), 2, 3)
    out = dual_L1_apply(a)
    assert out.coefficient((1,)) == 0.5
    assert dual_L1_apply(TruncatedTensor.word((1,), 2, 3)).max_abs_diff(TruncatedTensor(2, 3)) == 0.0
    assert expm_L1(TruncatedTensor.word((1, 1), 2, 2), 3.0).levels[0][0] == 1.5


def test_expected_word_requires_room():
    with pytest.raises(ValueError):
        expected_word_coefficient((1, 1, 1), 1.0, d=2, N=2)
    assert expected_word_coefficient((), 1.0) == 1.0
    assert expected_word_coefficient((2, 2, 1, 1, 3, 3), 2.0) == pytest.approx(1.0 / 6.0)


def test_expected_signature_rejects_negative_time():
    with pytest.raises(ValueError):
        expected_signature_bm(2, 2, -1.0)
    assert math.isclose(expected_signature_bm(3, 2, 0.0).levels[2].sum(), 0.0)
