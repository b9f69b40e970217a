import math

import numpy as np
import pytest

from fusionette import (
    DiffAttnParams,
    Tensor,
    cross_attn,
    diff_attn,
    reshape_tokens,
    self_attn,
    sum_all,
)
from fusionette.errors import DimensionError

from gradcheck import check_grads


def rand(shape, seed=0, requires_grad=True):
    return Tensor(np.random.default_rng(seed).standard_normal(shape), requires_grad=requires_grad)


def make_diff_params(d_model, d, seed=0, lam=0.8):
    rng = np.random.default_rng(seed)
    t = lambda shape: Tensor(rng.standard_normal(shape) * 0.3, requires_grad=True)
    return DiffAttnParams(
        w_q=t((d_model, 2 * d)),
        w_k=t((d_model, 2 * d)),
        w_v=t((d_model, 2 * d)),
        lam=Tensor(lam, requires_grad=True),
        d=d,
        d_model=d_model,
    )


# --- independent slow-path oracles ---------------------------------------


def naive_softmax(m):
    out = np.empty_like(m, dtype=np.float64)
    for i in range(m.shape[0]):
        row = m[i]
        shift = [v - max(row) for v in row]
        e = [math.exp(v) for v in shift]
        total = sum(e)
        out[i] = [v / total for v in e]
    return out


def naive_cross_attn(a, b):
    n, d = a.shape
    m = b.shape[0]
    scores = np.array([[sum(a[i, k] * b[j, k] for k in range(d)) / math.sqrt(d) for j in range(m)] for i in range(n)])
    return naive_softmax(scores) @ b


def naive_diff_mixing(x, p):
    q = x @ p.w_q.data
    k = x @ p.w_k.data
    d = p.d
    a1 = naive_softmax(q[:, :d] @ k[:, :d].T / math.sqrt(d))
    a2 = naive_softmax(q[:, d:] @ k[:, d:].T / math.sqrt(d))
    return a1 - p.lam.item() * a2


# --- tokenization ---------------------------------------------------------


def test_reshape_tokens_shapes():
    v = rand((8,), seed=1)
    view = reshape_tokens(v, 4)
    assert view.tokens.shape == (4, 2)
    assert reshape_tokens(v, 1).tokens.shape == (1, 8)


def test_reshape_tokens_roundtrip_bitwise():
    v = rand((12,), seed=2)
    assert np.array_equal(reshape_tokens(v, 3).flatten().data, v.data)


def test_reshape_tokens_rejects_non_divisor():
    with pytest.raises(DimensionError, match="divide"):
        reshape_tokens(rand((10,)), 3)


# --- self attention --------------------------------------------------------


def test_self_attn_single_token_is_identity_bitwise():
    v = rand((1, 7), seed=3)
    assert np.array_equal(self_attn(v).data, v.data)


def test_self_attn_identical_rows_give_identical_outputs():
    row = np.random.default_rng(4).standard_normal(5)
    out = self_attn(Tensor(np.stack([row, row]))).data
    np.testing.assert_array_equal(out[0], out[1])


def test_self_attn_matches_naive_oracle():
    v = rand((3, 4), seed=5)
    expected = naive_cross_attn(v.data, v.data)
    np.testing.assert_allclose(self_attn(v).data, expected, atol=1e-12)


def test_self_attn_rows_stay_in_convex_envelope():
    v = rand((6, 4), seed=6)
    out = self_attn(v).data
    lo, hi = v.data.min(axis=0), v.data.max(axis=0)
    assert (out >= lo - 1e-12).all() and (out <= hi + 1e-12).all()


def test_self_attn_permutation_equivariance():
    v = rand((5, 3), seed=7)
    perm = np.array([3, 0, 4, 1, 2])
    out = self_attn(v).data
    out_perm = self_attn(Tensor(v.data[perm])).data
    np.testing.assert_allclose(out_perm, out[perm], atol=1e-12)


def test_self_attn_gradcheck():
    v = rand((3, 4), seed=8)
    check_grads(lambda: sum_all(self_attn(v)), [v])


# --- cross attention --------------------------------------------------------


def test_cross_attn_on_itself_equals_self_attn():
    a = rand((4, 3), seed=9)
    np.testing.assert_array_equal(cross_attn(a, a).data, self_attn(a).data)


def test_cross_attn_single_key_returns_that_row():
    a = rand((5, 3), seed=10)
    b = rand((1, 3), seed=11)
    out = cross_attn(a, b).data
    for i in range(5):
        np.testing.assert_allclose(out[i], b.data[0], atol=1e-12)


def test_cross_attn_matches_naive_oracle():
    a = rand((2, 3), seed=12)
    b = rand((4, 3), seed=13)
    np.testing.assert_allclose(cross_attn(a, b).data, naive_cross_attn(a.data, b.data), atol=1e-12)


def test_cross_attn_dim_mismatch():
    with pytest.raises(DimensionError, match="feature dims"):
        cross_attn(rand((2, 3)), rand((2, 4)))


def test_cross_attn_gradcheck():
    a = rand((2, 3), seed=14)
    b = rand((4, 3), seed=15)
    check_grads(lambda: sum_all(cross_attn(a, b)), [a, b])


# --- differential attention --------------------------------------------------


def test_diff_attn_single_token_reduces_to_scaled_value():
    p = make_diff_params(d_model=4, d=2, seed=16, lam=0.37)
    x = rand((1, 4), seed=17)
    expected = (1.0 - 0.37) * (x.data @ p.w_v.data)
    np.testing.assert_allclose(diff_attn(x, p).data, expected, atol=1e-12)


def test_diff_attn_lambda_zero_is_branch_one_attention():
    p = make_diff_params(d_model=4, d=2, seed=18, lam=0.0)
    x = rand((3, 4), seed=19)
    q = x.data @ p.w_q.data
    k = x.data @ p.w_k.data
    a1 = naive_softmax(q[:, :2] @ k[:, :2].T / math.sqrt(2))
    expected = a1 @ (x.data @ p.w_v.data)
    np.testing.assert_allclose(diff_attn(x, p).data, expected, atol=1e-12)


def test_diff_attn_matches_naive_oracle():
    p = make_diff_params(d_model=4, d=2, seed=20, lam=0.8)
    x = rand((3, 4), seed=21)
    mixing = naive_diff_mixing(x.data, p)
    np.testing.assert_allclose(diff_attn(x, p).data, mixing @ (x.data @ p.w_v.data), atol=1e-12)


def test_diff_attn_mixing_rows_sum_to_one_minus_lambda():
    p = make_diff_params(d_model=6, d=3, seed=22, lam=0.8)
    x = rand((4, 6), seed=23)
    mixing = naive_diff_mixing(x.data, p)
    np.testing.assert_allclose(mixing.sum(axis=1), np.full(4, 1.0 - 0.8), atol=1e-12)


def test_diff_attn_width_mismatch():
    p = make_diff_params(d_model=4, d=2)
    with pytest.raises(DimensionError, match="d_model"):
        diff_attn(rand((3, 5)), p)


def test_diff_attn_gradcheck_including_lambda():
    p = make_diff_params(d_model=4, d=2, seed=24)
    x = rand((3, 4), seed=25)
    wrt = [x, p.w_q, p.w_k, p.w_v, p.lam]
    check_grads(lambda: sum_all(diff_attn(x, p)), wrt)


def test_diff_attn_batched_matches_per_sample():
    p = make_diff_params(d_model=4, d=2, seed=26)
    x = rand((5, 3, 4), seed=27)
    batched = diff_attn(x, p).data
    for i in range(5):
        single = diff_attn(Tensor(x.data[i]), p).data
        np.testing.assert_array_equal(batched[i], single)
