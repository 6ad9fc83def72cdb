"""Shared channel layout of the token/embedding space.

Tokens emitted by the scenario generator, decoder queries, and track
embeddings all live in the same d-dimensional space, organized as:

    [0, d/2)            identity signature (unit norm, drifts over time)
    [d/2, d/2+4F)       2-D sinusoidal position code, F frequencies per axis
    ... next 4          box code: logit-space (cx, cy, w, h)
    ... next 1          objectness: +1 real target, -1 distractor/null
    ... next 1          gate: query-side null-attention threshold (logit);
                        tokens carry 0 here, the null key carries 1
    remainder           spare zeros

The gate channel is what lets a query "see nothing": the decoder appends a
null key/value pair to every cross-attention, and the query's gate value
becomes the logit of attending to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelLayout:
    d: int
    n_freq: int
    sig: slice
    pos: slice
    box: slice
    obj: int
    gate: int
    wavelengths: tuple

    @property
    def sig_width(self) -> int:
        return self.sig.stop - self.sig.start

    @property
    def pos_width(self) -> int:
        return self.pos.stop - self.pos.start


def layout_for(d: int) -> ChannelLayout:
    """Channel layout for model width d (requires d >= 32, even)."""
    if d < 32 or d % 2:
        raise ValueError(f"structured layout needs even d >= 32, got {d}")
    half = d // 2
    n_freq = (half - 6) // 4
    pos_w = 4 * n_freq
    sig = slice(0, half)
    pos = slice(half, half + pos_w)
    box = slice(half + pos_w, half + pos_w + 4)
    obj = half + pos_w + 4
    gate = half + pos_w + 5
    wl = tuple(np.geomspace(0.4, 2.2, n_freq)) if n_freq > 1 else (0.5,)
    return ChannelLayout(d=d, n_freq=n_freq, sig=sig, pos=pos, box=box,
                         obj=obj, gate=gate, wavelengths=wl)


def position_code(points: np.ndarray, layout: ChannelLayout) -> np.ndarray:
    """Unit-norm sinusoidal code of (n, 2) normalized coordinates.

    The dot product of two codes is a similarity kernel peaked at zero
    offset (value 1) and decaying with distance per axis.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    wl = np.array(layout.wavelengths)
    blocks = []
    for axis in range(2):
        phase = 2.0 * np.pi * pts[:, axis:axis + 1] / wl[np.newaxis, :]
        blocks.append(np.cos(phase))
        blocks.append(np.sin(phase))
    code = np.concatenate(blocks, axis=1)
    # each axis-frequency pair contributes cos^2+sin^2 = 1
    code /= np.sqrt(2.0 * layout.n_freq)
    assert code.shape == (n, layout.pos_width)
    return code


def position_similarity(layout: ChannelLayout, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel value between coordinate sets a (n,2) and b (m,2)."""
    return position_code(a, layout) @ position_code(b, layout).T


_BOX_EPS = 1e-6


def box_to_logits(boxes: np.ndarray) -> np.ndarray:
    """Map (n, 4) boxes in (0,1) to logit space, clamping to the open cube."""
    b = np.clip(np.asarray(boxes, dtype=np.float64), _BOX_EPS, 1.0 - _BOX_EPS)
    return np.log(b / (1.0 - b))


def logits_to_box(logits: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.asarray(logits, dtype=np.float64)))


def token_embedding(layout: ChannelLayout, signature: np.ndarray,
                    position: np.ndarray, box: np.ndarray,
                    objectness: float) -> np.ndarray:
    """Assemble one frame token (1-D length-d vector)."""
    t = np.zeros(layout.d)
    t[layout.sig] = signature
    t[layout.pos] = position_code(position.reshape(1, 2), layout)[0]
    t[layout.box] = box_to_logits(box.reshape(1, 4))[0]
    t[layout.obj] = objectness
    return t


def query_encoding(layout: ChannelLayout, anchors: np.ndarray,
                   gate_logit: float) -> np.ndarray:
    """Detect-query content: anchor position code plus the gate threshold."""
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 2)
    q = np.zeros((anchors.shape[0], layout.d))
    q[:, layout.pos] = position_code(anchors, layout)
    q[:, layout.gate] = gate_logit
    return q


def null_key(layout: ChannelLayout) -> np.ndarray:
    k = np.zeros(layout.d)
    k[layout.gate] = 1.0
    return k


def null_value(layout: ChannelLayout, gate_logit: float) -> np.ndarray:
    """Value returned by attending to nothing: negative objectness and a
    sticky gate so collapsed queries stay collapsed across layers."""
    v = np.zeros(layout.d)
    v[layout.obj] = -1.0
    v[layout.gate] = gate_logit
    return v
