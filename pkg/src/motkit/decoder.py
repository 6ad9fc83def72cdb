"""Split decoder pipeline.

A light detection decoder turns learnable anchor queries into detect
embeddings with enough content to roughly locate targets; the joint
decoder then refines the concatenation of detect and track embeddings
against the frame tokens. Prediction heads squash box and confidence
logits through sigmoids, and newborn merging deduplicates fresh
detections against tracked outputs with an explicit IoU test.

Every cross-attention sees an extra null key/value pair: the query's gate
channel sets the logit of attending to it, and its value carries negative
objectness. That is what lets a query conclude "nothing of mine is here"
and what drives lost-track confidences down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import attention as att
from . import linalg as la
from .attention import AttentionParams, MlpParams
from .boxes import BoundingBox
from .layout import ChannelLayout, null_key, null_value, query_encoding
from .linalg import ShapeError, Tensor2


@dataclass
class DetectQuery:
    """One learnable detection slot: content embedding plus its 2-D anchor."""

    embedding: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        self.embedding = np.asarray(self.embedding, dtype=np.float64).reshape(-1)
        self.anchor = np.asarray(self.anchor, dtype=np.float64).reshape(2)
        if not (0.0 <= self.anchor[0] <= 1.0 and 0.0 <= self.anchor[1] <= 1.0):
            raise ValueError(f"anchor {self.anchor} outside unit square")


@dataclass
class FrameFeatures:
    """Per-frame token set standing in for an encoded image."""

    tokens: np.ndarray     # (n, d)
    positions: np.ndarray  # (n, 2) normalized
    index: int = 0

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float64)
        if self.tokens.ndim != 2:
            raise ShapeError(f"tokens must be 2-D, got {self.tokens.shape}")
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        if self.tokens.shape[0] != self.positions.shape[0]:
            raise ShapeError(
                f"{self.tokens.shape[0]} tokens vs {self.positions.shape[0]} positions")
        if self.positions.size and not (
                (self.positions >= 0.0).all() and (self.positions <= 1.0).all()):
            raise ValueError("token positions outside unit square")

    @property
    def count(self) -> int:
        return self.tokens.shape[0]

    @property
    def width(self) -> int:
        return self.tokens.shape[1]


@dataclass
class DecoderLayerParams:
    self_attn: AttentionParams
    cross_attn: AttentionParams
    ffn: MlpParams
    activation: str = "relu"


@dataclass
class DecoderParams:
    det_layers: List[DecoderLayerParams]
    joint_layers: List[DecoderLayerParams]
    box_head: MlpParams
    conf_head: MlpParams
    null_key: np.ndarray
    null_value: np.ndarray
    head_activation: str = "relu"

    def __post_init__(self):
        if len(self.joint_layers) < 1:
            raise ValueError("joint decoder needs at least one layer")
        self.null_key = np.asarray(self.null_key, dtype=np.float64).reshape(1, -1)
        self.null_value = np.asarray(self.null_value, dtype=np.float64).reshape(1, -1)

    @property
    def l_det(self) -> int:
        return len(self.det_layers)

    @property
    def l_joint(self) -> int:
        return len(self.joint_layers)

    @property
    def width(self) -> int:
        return self.box_head.in_width


@dataclass
class Detection:
    box: BoundingBox
    confidence: float
    source: str              # "newborn" or "tracked"
    embedding: np.ndarray


def decoder_layer(x: Tensor2, feats: FrameFeatures, p: DecoderParams,
                  lp: DecoderLayerParams) -> Tensor2:
    """Self-attention (residual), cross-attention into the frame tokens
    (content-replacing), FFN (residual).

    With no tokens at all the cross-attention step is skipped and the
    queries pass through self-attention and FFN only.
    """
    x = la.add(x, att.mha(x, x, x, lp.self_attn))
    if feats.count > 0:
        keys = Tensor2(np.vstack([feats.tokens, p.null_key]))
        values = Tensor2(np.vstack([feats.tokens, p.null_value]))
        x = att.mha(x, keys, values, lp.cross_attn)
    return la.add(x, att.mlp2(x, lp.ffn, lp.activation))


def detection_decode(queries: Sequence[DetectQuery], feats: FrameFeatures,
                     p: DecoderParams) -> Tensor2:
    """Run the detect queries through the detection decoder layers."""
    if len(queries) == 0:
        raise ValueError("detection_decode requires at least one query")
    x = Tensor2(np.vstack([q.embedding for q in queries]))
    if x.cols != p.width:
        raise ShapeError(f"query width {x.cols} vs decoder width {p.width}")
    for lp in p.det_layers:
        x = decoder_layer(x, feats, p, lp)
    return x


def joint_decode(e_det: Tensor2, e_tck: Tensor2, feats: FrameFeatures,
                 p: DecoderParams):
    """Refine concatenated detect+track embeddings; split outputs back."""
    if e_det.cols != p.width or (e_tck.rows and e_tck.cols != p.width):
        raise ShapeError(f"widths {e_det.cols}/{e_tck.cols} vs {p.width}")
    n_det = e_det.rows
    x = la.concat_rows(e_det, e_tck)
    for lp in p.joint_layers:
        x = decoder_layer(x, feats, p, lp)
    return la.slice_rows(x, 0, n_det), la.slice_rows(x, n_det, x.rows)


def heads(outputs: Tensor2, p: DecoderParams,
          source: str = "newborn") -> List[Detection]:
    """Box and confidence predictions for each output row.

    Boxes are sigmoid-squashed so they always land in the unit square;
    confidences are sigmoids of a scalar logit.
    """
    if outputs.rows == 0:
        return []
    if outputs.cols != p.width:
        raise ShapeError(f"output width {outputs.cols} vs heads {p.width}")
    box = la.sigmoid(att.mlp2(outputs, p.box_head, p.head_activation)).data
    conf = la.sigmoid(att.mlp2(outputs, p.conf_head, p.head_activation)).data
    if box.shape[1] != 4 or conf.shape[1] != 1:
        raise ShapeError(f"head widths {box.shape[1]}/{conf.shape[1]}")
    dets = []
    for i in range(outputs.rows):
        b = BoundingBox(*box[i]).clamped()
        dets.append(Detection(box=b, confidence=float(conf[i, 0]),
                              source=source, embedding=outputs.data[i].copy()))
    return dets


def merge_newborns(dets: List[Detection], tracked: List[Detection],
                   tau_det: float, iou_suppress: float = 0.7) -> List[Detection]:
    """Keep detect outputs that clear the confidence bar and do not overlap
    a tracked output (or an already accepted newborn) too strongly.

    Candidates are vetted in confidence order but returned in detection
    order, so track ids assigned downstream follow query order.
    """
    from .boxes import box_iou

    candidates = [(i, d) for i, d in enumerate(dets) if d.confidence > tau_det]
    kept_idx: List[int] = []
    kept_boxes = [t.box for t in tracked]
    for i, det in sorted(candidates, key=lambda p: -p[1].confidence):
        if any(box_iou(det.box, b) > iou_suppress for b in kept_boxes):
            continue
        kept_idx.append(i)
        kept_boxes.append(det.box)
    newborns = [dets[i] for i in sorted(kept_idx)]
    for nb in newborns:
        nb.source = "newborn"
    return list(tracked) + newborns


def grid_queries(layout: ChannelLayout, side: int,
                 detect_gate: float) -> List[DetectQuery]:
    """side x side anchor grid at cell centers with encoded content."""
    centers = (np.arange(side) + 0.5) / side
    anchors = np.array([(x, y) for y in centers for x in centers])
    enc = query_encoding(layout, anchors, detect_gate)
    return [DetectQuery(embedding=enc[i], anchor=anchors[i])
            for i in range(anchors.shape[0])]


@dataclass(frozen=True)
class StructuredScales:
    """Hand-tuned logit budget of the structured (training-free) tracker."""

    sig_scale: float = 30.0      # weight of signature similarity in logits
    pos_scale: float = 20.0      # weight of position-kernel similarity
    detect_gate: float = 8.5     # null logit for detect queries
    track_gate: float = 32.0     # null logit for track queries
    mem_scale: float = 70.0      # signature weight in the memory-attention
    mem_pos_scale: float = 8.0   # position weight in the memory-attention
    conf_scale: float = 6.0      # objectness -> confidence logit gain
    conf_margin: float = 0.0     # objectness level that maps to confidence 0.5
    keep_sig: float = 1.0        # TIM ffn gain on the signature block
    keep_pos: float = 0.1        # TIM ffn gain on the position block
    pos_boost: float = 5.5       # TIM value-projection gain on positions
    sig_damp: float = 0.05       # TIM value-projection damp on signatures


def structured_decoder_params(layout: ChannelLayout, scales: StructuredScales,
                              l_det: int = 1, l_joint: int = 5) -> DecoderParams:
    """Hand-set decoder weights that work without any training.

    Cross-attention logits read the signature and position blocks plus the
    gate channel; values and outputs pass through unchanged, so a decoded
    row converges onto the best-matching token (or the null pair).
    """
    d = layout.d
    root = math.sqrt(math.sqrt(d))  # compensates the 1/sqrt(d_h) logit scale

    diag = np.zeros(d)
    diag[layout.sig] = math.sqrt(scales.sig_scale) * root
    diag[layout.pos] = math.sqrt(scales.pos_scale) * root
    diag[layout.gate] = root
    sel = Tensor2(np.diag(diag))
    eye = Tensor2(np.eye(d))
    zero = Tensor2(np.zeros((d, d)))

    def layer() -> DecoderLayerParams:
        return DecoderLayerParams(
            self_attn=AttentionParams(wq=eye, wk=eye, wv=eye, wo=zero, heads=1),
            cross_attn=AttentionParams(wq=sel, wk=sel, wv=eye, wo=eye, heads=1),
            ffn=att.zero_mlp(d, d, d),
            activation="none",
        )

    box_sel = np.zeros((d, 4))
    for j in range(4):
        box_sel[layout.box.start + j, j] = 1.0
    conf_sel = np.zeros((d, 1))
    conf_sel[layout.obj, 0] = scales.conf_scale
    conf_bias = np.array([-scales.conf_scale * scales.conf_margin])

    return DecoderParams(
        det_layers=[layer() for _ in range(l_det)],
        joint_layers=[layer() for _ in range(max(l_joint, 1))],
        box_head=att.linear_mlp(box_sel),
        conf_head=att.linear_mlp(conf_sel, conf_bias),
        null_key=null_key(layout),
        null_value=null_value(layout, scales.detect_gate),
        head_activation="none",
    )


def random_decoder_params(rng: np.random.Generator, d: int, l_det: int = 1,
                          l_joint: int = 2, heads: int = 4) -> DecoderParams:
    """Seeded random decoder (for composition and equivariance tests)."""
    def layer():
        return DecoderLayerParams(
            self_attn=att.random_attention(rng, d, heads=heads),
            cross_attn=att.random_attention(rng, d, heads=heads),
            ffn=att.random_mlp(rng, d, 2 * d, d),
        )

    return DecoderParams(
        det_layers=[layer() for _ in range(l_det)],
        joint_layers=[layer() for _ in range(l_joint)],
        box_head=att.random_mlp(rng, d, d, 4),
        conf_head=att.random_mlp(rng, d, d, 1),
        null_key=rng.normal(size=d),
        null_value=rng.normal(size=d),
    )
