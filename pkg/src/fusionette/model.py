"""Model assembly: parameter initialization, prediction, and model files.

A model is a variant spec plus the parameter groups that variant uses.
Initialization is fully determined by (spec, seed): weights and biases
are drawn uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per affine map in a
fixed order, and the differential-attention scalar starts at 0.8.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .attention import DiffAttnParams
from .autodiff import Tensor
from .binio import open_container, pack_string, pack_u8, pack_u16, pack_u32, seal, verify_crc
from .errors import DimensionError, FormatError
from .fusion import GuidedCAParams, VariantSpec, model_forward

MODEL_MAGIC = b"FUSN"
MODEL_VERSION = 1
LAMBDA_INIT = 0.8

_GUIDED_FIELDS = ("w_i", "b_i", "w_i_gate", "b_i_gate", "w_t", "b_t", "w_t_gate", "b_t_gate")
_DIFF_FIELDS = ("w_q", "w_k", "w_v", "lam")
_FC_FIELDS = ("w_fc", "b_fc")


@dataclass
class ClassifierParams:
    """The fully-connected head mapping the fused representation to logits."""

    w_fc: Tensor
    b_fc: Tensor

    def __post_init__(self):
        if self.w_fc.ndim != 2 or self.b_fc.shape != (self.w_fc.shape[1],):
            raise DimensionError(
                f"classifier shapes inconsistent: w {self.w_fc.shape}, b {self.b_fc.shape}"
            )


@dataclass
class Model:
    """A variant spec plus exactly the parameter groups that variant uses."""

    spec: VariantSpec
    guided: GuidedCAParams | None
    diff: DiffAttnParams | None
    fc: ClassifierParams
    rng_seed: int

    def __post_init__(self):
        if self.spec.uses_guided != (self.guided is not None):
            raise ValueError(f"variant {self.spec.name!r}: guided params presence mismatch")
        if self.spec.uses_diff != (self.diff is not None):
            raise ValueError(f"variant {self.spec.name!r}: diff-attention params presence mismatch")

    @property
    def params(self) -> dict[str, Tensor]:
        """Named map of every learnable tensor, in canonical order."""
        out: dict[str, Tensor] = {}
        if self.guided is not None:
            for f in _GUIDED_FIELDS:
                out[f"guided.{f}"] = getattr(self.guided, f)
        if self.diff is not None:
            for f in _DIFF_FIELDS:
                out[f"diff.{f}"] = getattr(self.diff, f)
        for f in _FC_FIELDS:
            out[f"fc.{f}"] = getattr(self.fc, f)
        return out

    def param_list(self) -> list[Tensor]:
        return list(self.params.values())

    def num_params(self) -> int:
        return sum(t.size for t in self.param_list())


def _affine(rng: np.random.Generator, fan_in: int, fan_out: int) -> tuple[Tensor, Tensor]:
    bound = 1.0 / math.sqrt(fan_in)
    w = Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)
    b = Tensor(rng.uniform(-bound, bound, size=fan_out), requires_grad=True)
    return w, b


def init_model(spec: VariantSpec, seed: int) -> Model:
    """Deterministically initialize a model: same (spec, seed), same bits."""
    rng = np.random.default_rng(seed)
    guided = None
    if spec.uses_guided:
        w_i, b_i = _affine(rng, spec.d_i, spec.h)
        w_i_gate, b_i_gate = _affine(rng, spec.d_i, spec.h)
        w_t, b_t = _affine(rng, spec.d_t, spec.h)
        w_t_gate, b_t_gate = _affine(rng, spec.d_t, spec.h)
        guided = GuidedCAParams(w_i, b_i, w_i_gate, b_i_gate, w_t, b_t, w_t_gate, b_t_gate, spec.h)
    diff = None
    if spec.uses_diff:
        dm = spec.diff_d_model
        bound = 1.0 / math.sqrt(dm)
        w_q = Tensor(rng.uniform(-bound, bound, size=(dm, dm)), requires_grad=True)
        w_k = Tensor(rng.uniform(-bound, bound, size=(dm, dm)), requires_grad=True)
        w_v = Tensor(rng.uniform(-bound, bound, size=(dm, dm)), requires_grad=True)
        lam = Tensor(LAMBDA_INIT, requires_grad=True)
        diff = DiffAttnParams(w_q, w_k, w_v, lam, d=spec.diff_d, d_model=dm)
    w_fc, b_fc = _affine(rng, spec.fused_width, spec.num_classes)
    return Model(spec, guided, diff, ClassifierParams(w_fc, b_fc), seed)


def build_variant(spec: VariantSpec, seed: int) -> Model:
    """Assemble an initialized model for one registry variant (alias of init_model)."""
    return init_model(spec, seed)


def predict(model: Model, rec) -> tuple[int, np.ndarray]:
    """Class index (lowest index wins ties) and softmax probabilities."""
    logits = model_forward(model, rec).data
    shifted = logits - logits.max()
    e = np.exp(shifted)
    probs = e / e.sum()
    return int(np.argmax(probs)), probs


def save_model(model: Model, path: str | os.PathLike) -> None:
    """Write the FUSN container: spec JSON, named f64 params, CRC32 trailer."""
    body = bytearray()
    body += MODEL_MAGIC
    body += pack_u16(MODEL_VERSION)
    spec_json = json.dumps(model.spec.to_dict(), sort_keys=True, separators=(",", ":"))
    body += pack_string(spec_json, len_bytes=4)
    for name, tensor in model.params.items():
        body += pack_string(name, len_bytes=2)
        body += pack_u8(tensor.ndim)
        for extent in tensor.shape:
            body += pack_u32(extent)
        body += tensor.data.astype("<f8", copy=False).tobytes(order="C")
    blob = seal(body)
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def load_model(path: str | os.PathLike) -> Model:
    """Read a FUSN container back into a Model, bit-exact."""
    with open(path, "rb") as fh:
        raw = fh.read()
    reader = open_container(raw, MODEL_MAGIC)
    version = reader.u16()
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")
    try:
        spec = VariantSpec.from_dict(json.loads(reader.string(len_bytes=4)))
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid spec payload: {exc}") from exc
    arrays: dict[str, np.ndarray] = {}
    while reader.remaining:
        name = reader.string(len_bytes=2)
        rank = reader.u8()
        shape = tuple(reader.u32() for _ in range(rank))
        count = math.prod(shape)
        arrays[name] = reader.f64_array(count).reshape(shape)
    verify_crc(raw)
    return _assemble(spec, arrays)


def _assemble(spec: VariantSpec, arrays: dict[str, np.ndarray]) -> Model:
    def tensor(name: str) -> Tensor:
        if name not in arrays:
            raise FormatError(f"model file is missing parameter {name!r}")
        return Tensor(arrays.pop(name), requires_grad=True)

    guided = None
    if spec.uses_guided:
        guided = GuidedCAParams(*(tensor(f"guided.{f}") for f in _GUIDED_FIELDS), h=spec.h)
    diff = None
    if spec.uses_diff:
        w_q, w_k, w_v, lam = (tensor(f"diff.{f}") for f in _DIFF_FIELDS)
        diff = DiffAttnParams(w_q, w_k, w_v, lam, d=spec.diff_d, d_model=spec.diff_d_model)
    fc = ClassifierParams(tensor("fc.w_fc"), tensor("fc.b_fc"))
    if arrays:
        raise FormatError(f"model file has unexpected parameters: {sorted(arrays)}")
    return Model(spec, guided, diff, fc, rng_seed=-1)
