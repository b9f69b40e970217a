"""Attention operators: parameter-free self/cross attention and the
two-branch differential attention with a learnable mixing scalar.

All three accept an n_tok x d matrix or a batch x n_tok x d stack; the
math runs over the last two axes either way. Pooled encoder embeddings
are one vector per input, under which sequence attention degenerates to
the identity, so callers tokenize a D-vector into n_tok rows first (see
``reshape_tokens``) and flatten afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .autodiff import (
    Tensor,
    matmul,
    mul,
    narrow_last,
    reshape,
    scale,
    softmax_rows,
    sub,
    transpose,
)
from .errors import DimensionError


@dataclass
class DiffAttnParams:
    """Learnable weights of differential attention.

    w_q, w_k, w_v are d_model x 2d; the query/key halves split into two
    branches (first d columns = branch 1). lam is the learnable scalar
    weighting the subtracted branch, a raw unconstrained parameter.
    """

    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    lam: Tensor
    d: int
    d_model: int

    def __post_init__(self):
        expected = (self.d_model, 2 * self.d)
        for name, w in (("w_q", self.w_q), ("w_k", self.w_k), ("w_v", self.w_v)):
            if w.shape != expected:
                raise DimensionError(f"DiffAttnParams.{name}: shape {w.shape} != {expected}")
        if self.lam.shape != ():
            raise DimensionError(f"DiffAttnParams.lam must be a scalar, got {self.lam.shape}")


@dataclass
class TokenView:
    """A pooled D-vector viewed as n_tok rows of width D / n_tok."""

    tokens: Tensor
    origin_dim: int

    def flatten(self) -> Tensor:
        """Row-major flatten back to the original vector, bit-exact."""
        return reshape(self.tokens, (self.origin_dim,))


def reshape_tokens(v: Tensor, n_tok: int) -> TokenView:
    """Row-major reshape of a D-vector into n_tok x (D / n_tok) tokens."""
    if v.ndim != 1:
        raise DimensionError(f"reshape_tokens expects a vector, got shape {v.shape}")
    d = v.shape[0]
    if n_tok <= 0 or d % n_tok != 0:
        raise DimensionError(f"reshape_tokens: n_tok={n_tok} does not divide dim {d}")
    return TokenView(reshape(v, (n_tok, d // n_tok)), d)


def self_attn(v: Tensor) -> Tensor:
    """softmax(V V^T / sqrt(d)) V with no learned projections.

    Each output row is a convex combination of the input rows; a single
    token passes through unchanged.
    """
    if v.ndim < 2:
        raise DimensionError(f"self_attn expects tokens x dim, got shape {v.shape}")
    d = v.shape[-1]
    scores = scale(matmul(v, transpose(v)), 1.0 / math.sqrt(d))
    return matmul(softmax_rows(scores), v)


def cross_attn(a: Tensor, b: Tensor) -> Tensor:
    """softmax(A B^T / sqrt(d)) B: rows of A attend over rows of B."""
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"cross_attn expects matrices, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"cross_attn: feature dims differ, {a.shape} vs {b.shape}")
    d = a.shape[-1]
    scores = scale(matmul(a, transpose(b)), 1.0 / math.sqrt(d))
    return matmul(softmax_rows(scores), b)


def diff_attn(x: Tensor, p: DiffAttnParams) -> Tensor:
    """Difference of two softmax attention maps, scaled by lam, applied to V.

    Splits X W^Q and X W^K into per-branch halves along the last axis,
    subtracts lam times the branch-2 map from the branch-1 map, and mixes
    V = X W^V. Output width is 2d.
    """
    if x.ndim < 2 or x.shape[-1] != p.d_model:
        raise DimensionError(f"diff_attn: input {x.shape} does not match d_model={p.d_model}")
    q = matmul(x, p.w_q)
    k = matmul(x, p.w_k)
    v = matmul(x, p.w_v)
    q1, q2 = narrow_last(q, 0, p.d), narrow_last(q, p.d, p.d)
    k1, k2 = narrow_last(k, 0, p.d), narrow_last(k, p.d, p.d)
    inv = 1.0 / math.sqrt(p.d)
    a1 = softmax_rows(scale(matmul(q1, transpose(k1)), inv))
    a2 = softmax_rows(scale(matmul(q2, transpose(k2)), inv))
    return matmul(sub(a1, mul(p.lam, a2)), v)
