"""Multi-head scaled-dot-product attention and two-layer MLP blocks.

These are the only neural building blocks in the tracker: the decoders,
the memory-attention layer, and every prediction head are composed from
``mha`` and ``mlp2``. No dropout, no normalization; everything is a pure
function of its parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .linalg import ShapeError, Tensor2


@dataclass
class AttentionParams:
    """Projections for multi-head attention, concatenated-head convention.

    All four matrices are d x d; head h uses the column slice
    [h*d/heads, (h+1)*d/heads) of the projected Q/K/V.
    """

    wq: Tensor2
    wk: Tensor2
    wv: Tensor2
    wo: Tensor2
    heads: int = 4

    def __post_init__(self):
        d = self.wq.rows
        for name in ("wq", "wk", "wv", "wo"):
            m = getattr(self, name)
            if m.shape != (d, d):
                raise ShapeError(f"{name} must be {d}x{d}, got {m.shape}")
        if self.heads < 1 or d % self.heads != 0:
            raise ShapeError(f"width {d} not divisible by heads {self.heads}")

    @property
    def width(self) -> int:
        return self.wq.rows


@dataclass
class MlpParams:
    """Two affine layers: x @ w1 + b1 -> activation -> @ w2 + b2."""

    w1: Tensor2
    b1: Tensor2
    w2: Tensor2
    b2: Tensor2

    def __post_init__(self):
        if self.b1.shape != (1, self.w1.cols):
            raise ShapeError(f"b1 {self.b1.shape} vs w1 {self.w1.shape}")
        if self.w2.rows != self.w1.cols:
            raise ShapeError(f"w2 {self.w2.shape} vs hidden {self.w1.cols}")
        if self.b2.shape != (1, self.w2.cols):
            raise ShapeError(f"b2 {self.b2.shape} vs w2 {self.w2.shape}")

    @property
    def in_width(self) -> int:
        return self.w1.rows

    @property
    def out_width(self) -> int:
        return self.w2.cols


def mha(q: Tensor2, k: Tensor2, v: Tensor2, p: AttentionParams) -> Tensor2:
    """Multi-head attention; output rows align with q rows.

    Logits are scaled by 1/sqrt(d/heads). An empty key/value set returns
    zero rows of q's shape so that frames without targets never abort.
    """
    d = p.width
    if q.cols != d or k.cols != d or v.cols != d:
        raise ShapeError(f"widths {q.cols},{k.cols},{v.cols} vs params {d}")
    if k.rows != v.rows:
        raise ShapeError(f"key rows {k.rows} != value rows {v.rows}")
    if k.rows == 0:
        return Tensor2(np.zeros((q.rows, d)))

    dh = d // p.heads
    qp = la.matmul(q, p.wq)
    kp = la.matmul(k, p.wk)
    vp = la.matmul(v, p.wv)

    head_outs = []
    inv_scale = 1.0 / math.sqrt(dh)
    for h in range(p.heads):
        lo, hi = h * dh, (h + 1) * dh
        qh = la.slice_cols(qp, lo, hi)
        kh = la.slice_cols(kp, lo, hi)
        vh = la.slice_cols(vp, lo, hi)
        logits = la.scale(la.matmul(qh, la.transpose(kh)), inv_scale)
        weights = la.softmax_rows(logits)
        head_outs.append(la.matmul(weights, vh))

    out = head_outs[0]
    for ho in head_outs[1:]:
        out = la.concat_cols(out, ho)
    return la.matmul(out, p.wo)


def mlp2(x: Tensor2, p: MlpParams, activation: str = "relu") -> Tensor2:
    """layer2(act(layer1(x))); activation is 'relu' or 'none'."""
    if x.cols != p.in_width:
        raise ShapeError(f"mlp input width {x.cols} vs {p.in_width}")
    h = la.add(la.matmul(x, p.w1), p.b1)
    if activation == "relu":
        h = la.relu(h)
    elif activation != "none":
        raise ValueError(f"unknown activation {activation!r}")
    return la.add(la.matmul(h, p.w2), p.b2)


def identity_attention(d: int, heads: int = 1) -> AttentionParams:
    """Identity projections; with a single k/v row the output equals v."""
    eye = Tensor2(np.eye(d))
    return AttentionParams(wq=eye, wk=eye, wv=eye, wo=eye, heads=heads)


def random_attention(rng: np.random.Generator, d: int, heads: int = 4,
                     scale: float = 0.5) -> AttentionParams:
    def m():
        return Tensor2(rng.normal(scale=scale / math.sqrt(d), size=(d, d)))

    return AttentionParams(wq=m(), wk=m(), wv=m(), wo=m(), heads=heads)


def random_mlp(rng: np.random.Generator, d_in: int, d_hidden: int,
               d_out: int, scale: float = 0.5) -> MlpParams:
    return MlpParams(
        w1=Tensor2(rng.normal(scale=scale / math.sqrt(d_in), size=(d_in, d_hidden))),
        b1=Tensor2(rng.normal(scale=0.1, size=(1, d_hidden))),
        w2=Tensor2(rng.normal(scale=scale / math.sqrt(d_hidden), size=(d_hidden, d_out))),
        b2=Tensor2(rng.normal(scale=0.1, size=(1, d_out))),
    )


def zero_mlp(d_in: int, d_hidden: int, d_out: int) -> MlpParams:
    return MlpParams(
        w1=Tensor2(np.zeros((d_in, d_hidden))),
        b1=Tensor2(np.zeros((1, d_hidden))),
        w2=Tensor2(np.zeros((d_hidden, d_out))),
        b2=Tensor2(np.zeros((1, d_out))),
    )


def linear_mlp(matrix: np.ndarray, bias: np.ndarray | None = None) -> MlpParams:
    """Encode a plain affine map y = x @ matrix + bias as a two-layer MLP
    with an identity first layer; use with activation='none'."""
    d_in, d_out = matrix.shape
    return MlpParams(
        w1=Tensor2(np.eye(d_in)),
        b1=Tensor2(np.zeros((1, d_in))),
        w2=Tensor2(matrix),
        b2=Tensor2(np.zeros((1, d_out)) if bias is None else bias.reshape(1, d_out)),
    )
