"""Temporal interaction module.

Per frame, each track carries three d-vectors: the current decoder output,
the previous frame's output, and the long-term memory. This module fuses
the two adjacent outputs with a learned channel-wise weight, lets tracks
interact through a memory-keyed attention layer, and predicts the next
track embedding and memory. The results are candidates: the lifecycle
commits them per track only when the frame confidence clears the gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import attention as att
from . import linalg as la
from .attention import AttentionParams, MlpParams
from .layout import ChannelLayout
from .linalg import ShapeError, Tensor2
from .memory import MemoryConfig

VARIANTS = ("full", "memory-off", "attn-off", "naive")


@dataclass
class TimParams:
    weight_mlp: MlpParams        # d -> d, sigmoid applied in adaptive_weight
    fuse_mlp: MlpParams          # 2d -> d, fuses weighted current + previous
    attn: AttentionParams        # memory-attention layer across tracks
    ffn: MlpParams               # d -> d, predicts the next track embedding
    activation: str = "relu"     # hidden activation of all three MLPs
    ffn_residual: bool = False   # optional skip connection around the FFN

    def __post_init__(self):
        d = self.attn.width
        if self.weight_mlp.in_width != d or self.weight_mlp.out_width != d:
            raise ShapeError("weight_mlp must map d -> d")
        if self.fuse_mlp.in_width != 2 * d or self.fuse_mlp.out_width != d:
            raise ShapeError("fuse_mlp must map 2d -> d")
        if self.ffn.in_width != d or self.ffn.out_width != d:
            raise ShapeError("ffn must map d -> d")

    @property
    def width(self) -> int:
        return self.attn.width


@dataclass
class TrackBatch:
    """Aligned per-track rows; row i of each matrix is the same track."""

    outputs: Tensor2        # current frame outputs
    prev_outputs: Tensor2   # previous frame outputs
    memories: Tensor2       # long-term memories
    ids: tuple = field(default_factory=tuple)

    def __post_init__(self):
        n, d = self.outputs.shape
        if self.prev_outputs.shape != (n, d) or self.memories.shape != (n, d):
            raise ShapeError(
                f"batch rows disagree: {self.outputs.shape}, "
                f"{self.prev_outputs.shape}, {self.memories.shape}")
        if self.ids and len(self.ids) != n:
            raise ShapeError(f"{len(self.ids)} ids for {n} rows")

    @property
    def size(self) -> int:
        return self.outputs.rows


def adaptive_weight(o_t: Tensor2, p: TimParams) -> Tensor2:
    """Channel-wise gate in (0,1) for the current output of each track."""
    if o_t.cols != p.width:
        raise ShapeError(f"output width {o_t.cols} vs params {p.width}")
    return la.sigmoid(att.mlp2(o_t, p.weight_mlp, p.activation))


def aggregate(o_t: Tensor2, o_prev: Tensor2, p: TimParams) -> Tensor2:
    """Fuse gated current outputs with the (ungated) previous outputs.

    The previous output already passed the tracking confidence threshold,
    so it enters the fusion whole; only the current output is reweighted.
    """
    if o_t.shape != o_prev.shape:
        raise ShapeError(f"adjacent outputs {o_t.shape} vs {o_prev.shape}")
    w = adaptive_weight(o_t, p)
    fused_in = la.concat_cols(la.mul(w, o_t), o_prev)
    return att.mlp2(fused_in, p.fuse_mlp, p.activation)


def tim_forward(batch: TrackBatch, p: TimParams, mem_cfg: MemoryConfig,
                variant: str = "full") -> Tuple[Tensor2, Tensor2]:
    """Candidate next embeddings and memories for every track in the batch.

    full:       A = mha(Q=aggregation, K=memory, V=output);
                E' = ffn(memory + A); M' = ema(memory, output)
    memory-off: attention keyed on the outputs themselves, no memory term
    attn-off:   E' = ffn(memory + aggregation), no cross-track interaction
    naive:      E' = ffn(output) only
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    o_t, o_prev, m = batch.outputs, batch.prev_outputs, batch.memories
    if o_t.cols != p.width:
        raise ShapeError(f"batch width {o_t.cols} vs params {p.width}")
    if batch.size == 0:
        empty = Tensor2(np.zeros((0, p.width)))
        return empty, empty

    if variant == "naive":
        next_e = att.mlp2(o_t, p.ffn, p.activation)
        return next_e, m

    agg = aggregate(o_t, o_prev, p)
    if variant == "full":
        attended = att.mha(agg, m, o_t, p.attn)
        pre = la.add(m, attended)
        next_m = la.add(la.scale(m, 1.0 - mem_cfg.rate),
                        la.scale(o_t, mem_cfg.rate))
    elif variant == "memory-off":
        attended = att.mha(agg, o_t, o_t, p.attn)
        pre = la.add(o_t, attended)
        next_m = m
    else:  # attn-off
        pre = la.add(m, agg)
        next_m = la.add(la.scale(m, 1.0 - mem_cfg.rate),
                        la.scale(o_t, mem_cfg.rate))

    next_e = att.mlp2(pre, p.ffn, p.activation)
    if p.ffn_residual:
        next_e = la.add(pre, next_e)
    return next_e, next_m


def random_tim_params(rng: np.random.Generator, d: int, heads: int = 4,
                      activation: str = "relu") -> TimParams:
    """Seeded random parameters (hidden widths 2d for fusion, 4d for FFN)."""
    return TimParams(
        weight_mlp=att.random_mlp(rng, d, 2 * d, d),
        fuse_mlp=att.random_mlp(rng, 2 * d, 2 * d, d),
        attn=att.random_attention(rng, d, heads=heads),
        ffn=att.random_mlp(rng, d, 4 * d, d),
        activation=activation,
    )


def structured_tim_params(layout: ChannelLayout, mem_scale: float,
                          track_gate: float, blend_current: float = 0.5,
                          keep_sig: float = 0.87, keep_pos: float = 0.3,
                          pos_boost: float = 2.0, sig_damp: float = 0.15,
                          mem_pos_scale: float = 15.0,
                          variant: str = "full") -> TimParams:
    """Hand-set weights that make the module work without training.

    The fusion blends current and previous outputs. The memory-attention
    keys on the signature block so each track attends to its own memory;
    its value projection amplifies the position block (fresh localization
    evidence should outweigh the laggy memory code) and damps the
    signature block (the track's identity should stay dominated by the
    slow memory, so one bad frame cannot overwrite who the track is). The
    FFN rescales per block and writes the track's null-attention gate.

    Ablation variants feed the FFN different mixtures, so the FFN gains
    are set per variant to land on a comparable logit budget; this is the
    training-free analog of each variant converging on its own weights.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    d = layout.d

    # the adaptive weight reads the objectness channel: a clean token
    # (obj 1) gives sigmoid(0) = 0.5, a degraded one gates toward 0, so
    # blurred frames barely enter the fused representation
    gate_gain = 6.0
    w1 = np.zeros((d, d))
    w1[layout.obj, :] = gate_gain
    weight_mlp = MlpParams(
        w1=Tensor2(w1), b1=Tensor2(np.full((1, d), -gate_gain)),
        w2=Tensor2(np.eye(d)), b2=Tensor2(np.zeros((1, d))))

    # clean frames keep W at 0.5, so the fusion matrix doubles the
    # current-half contribution to recover blend_current
    fuse = np.zeros((2 * d, d))
    fuse[:d, :] = 2.0 * blend_current * np.eye(d)
    fuse[d:, :] = (1.0 - blend_current) * np.eye(d)

    # keys combine identity (signature) with coarse whereabouts (position):
    # the memory's position code is too laggy to localize with but still
    # says which region a track lives in, which keeps the attention routing
    # diagonal when signatures alone are too similar to separate
    qk_diag = np.zeros(d)
    qk_diag[layout.sig] = math.sqrt(mem_scale * math.sqrt(d))
    qk_diag[layout.pos] = math.sqrt(mem_pos_scale * math.sqrt(d))
    qk = np.diag(qk_diag)

    value_gain = np.ones(d)
    value_gain[layout.pos] = pos_boost
    value_gain[layout.sig] = sig_damp

    # effective fresh-position strength is matched across variants; no
    # ablated variant gets a stronger localization channel than full
    # signature gains put every variant's query at the same mean magnitude
    # (1 + sig_damp times a unit signature); what differs by construction
    # is the variance each mechanism lets through
    if variant in ("full", "memory-off"):
        gains = np.full(d, keep_sig)
        gains[layout.pos] = keep_pos
    elif variant == "attn-off":
        gains = np.full(d, keep_sig * (1.0 + sig_damp) / 2.0)
        gains[layout.pos] = 0.55
    else:  # naive
        gains = np.full(d, keep_sig * (1.0 + sig_damp))
        gains[layout.pos] = 0.6
    ffn_mat = np.diag(gains)
    ffn_mat[layout.gate, layout.gate] = 0.0
    ffn_bias = np.zeros(d)
    ffn_bias[layout.gate] = track_gate

    eye = Tensor2(np.eye(d))
    return TimParams(
        weight_mlp=weight_mlp,
        fuse_mlp=att.linear_mlp(fuse),
        attn=AttentionParams(wq=Tensor2(qk), wk=Tensor2(qk),
                             wv=Tensor2(np.diag(value_gain)), wo=eye,
                             heads=1),
        ffn=att.linear_mlp(ffn_mat, ffn_bias),
        activation="none",
    )
