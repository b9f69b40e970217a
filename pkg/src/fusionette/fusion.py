"""Gated cross-modal fusion and the registry of fusion variants.

The guided pipeline projects each modality to a hidden width h and
computes a sigmoid gate per modality; the text gate multiplicatively
scales the image projection and vice versa (the gates cross), and the
two gated halves are concatenated. Variants bolt self-attention and/or
differential attention around that core; every variant ends in the same
fully-connected classifier head.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import TYPE_CHECKING

from .attention import diff_attn, cross_attn, self_attn
from .autodiff import (
    Tensor,
    add,
    concat_last,
    matmul,
    mul,
    relu,
    reshape,
    sigmoid,
)
from .errors import DimensionError

if TYPE_CHECKING:
    from .model import Model

VARIANT_NAMES = (
    "image_only",
    "text_only",
    "cross_attention",
    "guided_ca",
    "guided_ca_self_attn",
    "cross_diff_attn",
    "guided_ca_diff_attn",
)

_GUIDED = {"guided_ca", "guided_ca_self_attn", "guided_ca_diff_attn"}
_DIFF = {"cross_diff_attn", "guided_ca_diff_attn"}
_CROSS = {"cross_attention", "cross_diff_attn"}
# variants that tokenize the raw embeddings for modality-level attention
_TOKENIZED = {"cross_attention", "cross_diff_attn", "guided_ca_self_attn", "guided_ca_diff_attn"}


@dataclass(frozen=True)
class VariantSpec:
    """Which fusion pipeline to assemble, plus every dimension it needs."""

    name: str
    d_i: int = 512
    d_t: int = 512
    n_tok: int = 8
    n_tok_fused: int = 4
    h: int = 256
    num_classes: int = 2

    def __post_init__(self):
        if self.name not in VARIANT_NAMES:
            raise ValueError(f"unknown variant {self.name!r}; expected one of {VARIANT_NAMES}")
        for field in ("d_i", "d_t", "n_tok", "n_tok_fused", "h", "num_classes"):
            if getattr(self, field) <= 0:
                raise ValueError(f"VariantSpec.{field} must be positive")
        if self.num_classes < 2:
            raise ValueError("VariantSpec.num_classes must be at least 2")
        if self.name in _TOKENIZED:
            if self.d_i % self.n_tok or self.d_t % self.n_tok:
                raise DimensionError(
                    f"n_tok={self.n_tok} must divide both embedding dims "
                    f"({self.d_i}, {self.d_t})"
                )
        if self.name in _CROSS and self.d_i // self.n_tok != self.d_t // self.n_tok:
            raise DimensionError(
                "cross attention needs equal token widths: "
                f"{self.d_i}/{self.n_tok} != {self.d_t}/{self.n_tok}"
            )
        if self.uses_diff:
            if self.fused_width % self.n_tok_fused:
                raise DimensionError(
                    f"n_tok_fused={self.n_tok_fused} must divide the fused width "
                    f"{self.fused_width}"
                )
            if self.diff_d_model % 2:
                raise DimensionError(
                    f"fused token width {self.diff_d_model} must be even to split "
                    "into two attention branches"
                )

    @property
    def uses_guided(self) -> bool:
        return self.name in _GUIDED

    @property
    def uses_diff(self) -> bool:
        return self.name in _DIFF

    @property
    def with_self_attn(self) -> bool:
        return self.name in ("guided_ca_self_attn", "guided_ca_diff_attn")

    @property
    def fused_width(self) -> int:
        """Width of the representation entering the classifier head.

        Differential attention is width-preserving here (2d == d_model),
        so this is also the width entering it.
        """
        if self.name == "image_only":
            return self.d_i
        if self.name == "text_only":
            return self.d_t
        if self.name in _CROSS:
            return self.d_i + self.d_t
        return 2 * self.h

    @property
    def diff_d_model(self) -> int:
        return self.fused_width // self.n_tok_fused

    @property
    def diff_d(self) -> int:
        return self.diff_d_model // 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VariantSpec":
        return cls(**d)


@dataclass
class GuidedCAParams:
    """Learnable weights of the guided gating core.

    Each modality gets its own projection and its own gate, each with its
    own bias; gates pass through a sigmoid so every component lies in
    (0, 1).
    """

    w_i: Tensor
    b_i: Tensor
    w_i_gate: Tensor
    b_i_gate: Tensor
    w_t: Tensor
    b_t: Tensor
    w_t_gate: Tensor
    b_t_gate: Tensor
    h: int

    def __post_init__(self):
        for name in ("w_i", "b_i", "w_i_gate", "b_i_gate", "w_t", "b_t", "w_t_gate", "b_t_gate"):
            t = getattr(self, name)
            if t.shape[-1] != self.h:
                raise DimensionError(f"GuidedCAParams.{name}: last dim {t.shape[-1]} != h={self.h}")
        if self.w_i.shape != self.w_i_gate.shape or self.w_t.shape != self.w_t_gate.shape:
            raise DimensionError("GuidedCAParams: projection and gate weights must share shapes")


@dataclass
class FusionActivations:
    """Intermediate tensors captured from one guided forward pass."""

    z_i: Tensor
    z_t: Tensor
    alpha_i: Tensor
    alpha_t: Tensor
    z: Tensor
    z_prime: Tensor | None = None


def _as_batch(f: Tensor) -> tuple[Tensor, bool]:
    if f.ndim == 1:
        return reshape(f, (1, f.shape[0])), True
    if f.ndim == 2:
        return f, False
    raise DimensionError(f"expected a vector or batch of vectors, got shape {f.shape}")


def _tokenize_batch(x: Tensor, n_tok: int) -> Tensor:
    b, d = x.shape
    if d % n_tok:
        raise DimensionError(f"n_tok={n_tok} does not divide embedding dim {d}")
    return reshape(x, (b, n_tok, d // n_tok))


def _flatten_batch(x: Tensor) -> Tensor:
    b, n, d = x.shape
    return reshape(x, (b, n * d))


def guided_gate(f: Tensor, proj_w: Tensor, proj_b: Tensor, gate_w: Tensor, gate_b: Tensor):
    """One modality's projection z = ReLU(W f + b) and gate alpha = sigma(W' f + b')."""
    f2, single = _as_batch(f)
    z = relu(add(matmul(f2, proj_w), proj_b))
    alpha = sigmoid(add(matmul(f2, gate_w), gate_b))
    if single:
        h = z.shape[-1]
        return reshape(z, (h,)), reshape(alpha, (h,))
    return z, alpha


def guided_ca_fuse(
    f_i: Tensor,
    f_t: Tensor,
    p: GuidedCAParams,
    with_self_attn: bool,
    n_tok: int,
    capture: FusionActivations | None = None,
) -> Tensor:
    """Cross-gated concatenation concat(alpha_t * z_i, alpha_i * z_t).

    Optionally refines each modality first by tokenized self-attention.
    The gates cross: the text gate scales the image projection and the
    image gate scales the text projection.
    """
    fi, single = _as_batch(f_i)
    ft, _ = _as_batch(f_t)
    if with_self_attn:
        fi = _flatten_batch(self_attn(_tokenize_batch(fi, n_tok)))
        ft = _flatten_batch(self_attn(_tokenize_batch(ft, n_tok)))
    z_i, alpha_i = guided_gate(fi, p.w_i, p.b_i, p.w_i_gate, p.b_i_gate)
    z_t, alpha_t = guided_gate(ft, p.w_t, p.b_t, p.w_t_gate, p.b_t_gate)
    fused = concat_last(mul(alpha_t, z_i), mul(alpha_i, z_t))
    if capture is not None:
        capture.z_i, capture.z_t = z_i, z_t
        capture.alpha_i, capture.alpha_t = alpha_i, alpha_t
        capture.z = fused
    if single:
        return reshape(fused, (fused.shape[-1],))
    return fused


def _cross_fuse(fi: Tensor, ft: Tensor, spec: VariantSpec) -> Tensor:
    """Bidirectional parameter-free cross attention, flattened and concatenated."""
    i_tok = _tokenize_batch(fi, spec.n_tok)
    t_tok = _tokenize_batch(ft, spec.n_tok)
    u = _flatten_batch(cross_attn(i_tok, t_tok))
    v = _flatten_batch(cross_attn(t_tok, i_tok))
    return concat_last(u, v)


def forward_batch(
    model: "Model",
    f_i: Tensor,
    f_t: Tensor,
    capture: FusionActivations | None = None,
) -> Tensor:
    """Run one fusion variant over a batch: (B, d_i), (B, d_t) -> (B, num_classes)."""
    spec = model.spec
    if f_i.ndim != 2 or f_i.shape[1] != spec.d_i:
        raise DimensionError(f"image embeddings {f_i.shape} do not match d_i={spec.d_i}")
    if f_t.ndim != 2 or f_t.shape[1] != spec.d_t:
        raise DimensionError(f"text embeddings {f_t.shape} do not match d_t={spec.d_t}")
    if f_i.shape[0] != f_t.shape[0]:
        raise DimensionError(f"batch sizes differ: {f_i.shape[0]} vs {f_t.shape[0]}")

    name = spec.name
    if name == "image_only":
        feats = f_i
    elif name == "text_only":
        feats = f_t
    elif name in _CROSS:
        feats = _cross_fuse(f_i, f_t, spec)
    else:
        feats = guided_ca_fuse(
            f_i, f_t, model.guided, spec.with_self_attn, spec.n_tok, capture=capture
        )

    if spec.uses_diff:
        b = feats.shape[0]
        x = reshape(feats, (b, spec.n_tok_fused, spec.diff_d_model))
        refined = diff_attn(x, model.diff)
        feats = reshape(refined, (b, spec.fused_width))
        if capture is not None:
            capture.z_prime = feats

    return add(matmul(feats, model.fc.w_fc), model.fc.b_fc)


def model_forward(model: "Model", rec) -> Tensor:
    """Forward one embedding record to a logits vector of length num_classes."""
    spec = model.spec
    f_i = Tensor(rec.f_i)
    f_t = Tensor(rec.f_t)
    if f_i.shape != (spec.d_i,):
        raise DimensionError(f"record image embedding {f_i.shape} != ({spec.d_i},)")
    if f_t.shape != (spec.d_t,):
        raise DimensionError(f"record text embedding {f_t.shape} != ({spec.d_t},)")
    logits = forward_batch(model, reshape(f_i, (1, spec.d_i)), reshape(f_t, (1, spec.d_t)))
    return reshape(logits, (spec.num_classes,))


def forward_with_activations(model: "Model", f_i: Tensor, f_t: Tensor):
    """forward_batch plus the captured guided-gating intermediates."""
    if not model.spec.uses_guided:
        raise ValueError(f"variant {model.spec.name!r} has no guided activations to capture")
    acts = FusionActivations(None, None, None, None, None)  # type: ignore[arg-type]
    logits = forward_batch(model, f_i, f_t, capture=acts)
    return logits, acts
