"""Online inference loop and track state machine.

Each frame: decode detect queries jointly with all living track
embeddings, update active/inactive states from tracking confidence,
remove tracks that stayed lost too long, spawn newborns from confident
unsuppressed detections, then let the temporal interaction module predict
next embeddings/memories and commit them per track through the confidence
gate. Ids are assigned at birth and never reused within a run.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import decoder as dec
from . import tim as tim_mod
from .boxes import BoundingBox, box_iou
from .decoder import (DecoderParams, DetectQuery, Detection, FrameFeatures,
                      StructuredScales, grid_queries,
                      structured_decoder_params)
from .layout import layout_for
from .linalg import Tensor2
from .memory import LongTermMemory, MemoryConfig, commit_gate, init_memory
from .tim import TimParams, TrackBatch, structured_tim_params, tim_forward

ACTIVE = "active"
INACTIVE = "inactive"
REMOVED = "removed"


@dataclass
class InferenceConfig:
    tau_det: float = 0.5
    tau_tck: float = 0.5
    tau_next: float = 0.5
    t_miss: int = 30
    iou_suppress: float = 0.7
    dedup_iou: float = 0.9    # active tracks overlapping this hard get deduped
    jump_gate: float = 0.12   # max plausible per-frame center motion
    newborn_grace: int = 8    # frames a just-lost track still suppresses births
    blackout_iou: float = 0.5  # overlapping pairs go dark until they resolve
    # optional check of a candidate embedding against its track before the
    # commit; returning False skips the update for this frame
    commit_guard: Optional[object] = None
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    decoder: Optional[DecoderParams] = None
    tim: Optional[TimParams] = None
    queries: Sequence[DetectQuery] = ()
    variant: str = "full"
    update_prev_on_no_commit: bool = False

    def __post_init__(self):
        for name in ("tau_det", "tau_tck", "tau_next"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.t_miss < 1:
            raise ValueError("t_miss must be >= 1")
        if self.variant not in tim_mod.VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def width(self) -> int:
        return self.decoder.width


def structured_config(d: int = 64, grid: int = 5,
                      scales: StructuredScales | None = None,
                      l_det: int = 1, l_joint: int = 5,
                      **overrides) -> InferenceConfig:
    """Inference config with the hand-set (training-free) weights."""
    scales = scales or StructuredScales()
    layout = layout_for(d)
    variant = overrides.get("variant", "full")

    def pos_alignment_guard(track, candidate):
        # a sane candidate keeps localizing near the track's current box;
        # a cross-track attention flip points it somewhere far away
        if track.last_box is None:
            return True
        from .layout import position_code
        code = position_code(
            np.array([[track.last_box.cx, track.last_box.cy]]), layout)[0]
        return float(candidate[layout.pos] @ code) > 0.42

    overrides.setdefault("commit_guard", pos_alignment_guard)
    return InferenceConfig(
        decoder=structured_decoder_params(layout, scales, l_det, l_joint),
        tim=structured_tim_params(layout, scales.mem_scale, scales.track_gate,
                                  keep_sig=scales.keep_sig,
                                  keep_pos=scales.keep_pos,
                                  pos_boost=scales.pos_boost,
                                  sig_damp=scales.sig_damp,
                                  mem_pos_scale=scales.mem_pos_scale,
                                  variant=variant),
        queries=grid_queries(layout, grid, scales.detect_gate),
        **overrides,
    )


@dataclass
class Track:
    track_id: int
    embedding: np.ndarray
    memory: LongTermMemory
    prev_output: np.ndarray
    state: str = ACTIVE
    missed: int = 0
    dup_streak: int = 0   # consecutive frames spent as someone's duplicate
    last_box: Optional[BoundingBox] = None
    last_confidence: float = 0.0


@dataclass(frozen=True)
class TrackOutput:
    track_id: int
    box: BoundingBox
    confidence: float


@dataclass(frozen=True)
class FrameResult:
    index: int
    outputs: Tuple[TrackOutput, ...]


@dataclass(frozen=True)
class TraceEntry:
    """Instrumentation snapshot after a frame's commit step."""

    frame: int
    track_id: int
    confidence: float
    committed: bool
    state_hash: str


def state_hash(embedding: np.ndarray, memory: LongTermMemory) -> str:
    h = hashlib.sha1()
    h.update(np.ascontiguousarray(embedding).tobytes())
    h.update(np.ascontiguousarray(memory.value).tobytes())
    return h.hexdigest()


class Tracker:
    """Single-sequence tracker; one instance per sequence, stepped in order."""

    def __init__(self, cfg: InferenceConfig, record_trace: bool = False,
                 record_embeddings: bool = False):
        if cfg.decoder is None or cfg.tim is None or not cfg.queries:
            raise ValueError("config must carry decoder, tim and queries")
        self.cfg = cfg
        self.tracks: List[Track] = []
        self.next_id = 1
        self.trace: List[TraceEntry] = [] if record_trace else None
        self.embedding_log: List[Tuple[int, int, np.ndarray]] = (
            [] if record_embeddings else None)
        self._last_index: Optional[int] = None

    def _alive(self) -> List[Track]:
        return [t for t in self.tracks if t.state != REMOVED]

    def step(self, feats: FrameFeatures) -> FrameResult:
        cfg = self.cfg
        alive = self._alive()

        if feats.count == 0:
            # nothing visible: everyone misses, nothing is born
            for t in alive:
                t.state = INACTIVE
                t.missed += 1
                t.last_confidence = 0.0
                if t.missed > cfg.t_miss:
                    t.state = REMOVED
                self._trace(feats.index, t, 0.0, False)
            return FrameResult(index=feats.index, outputs=())

        e_det = dec.detection_decode(cfg.queries, feats, cfg.decoder)
        if alive:
            e_tck = Tensor2(np.vstack([t.embedding for t in alive]))
        else:
            e_tck = Tensor2(np.zeros((0, cfg.width)))
        o_det, o_tck = dec.joint_decode(e_det, e_tck, feats, cfg.decoder)

        det_dets = dec.heads(o_det, cfg.decoder, source="newborn")
        trk_dets = dec.heads(o_tck, cfg.decoder, source="tracked")

        # state transitions from tracking confidence; a confident box that
        # teleported is treated as a miss instead (targets move smoothly,
        # so an implausible jump is a mislock, not a relocalization). The
        # plausible radius grows with time spent lost, so genuine re-finds
        # after long occlusions still get through.
        prev_boxes = {t.track_id: t.last_box for t in alive}
        for t, d in zip(alive, trk_dets):
            jumped = (t.last_box is not None and
                      math.hypot(d.box.cx - t.last_box.cx,
                                 d.box.cy - t.last_box.cy)
                      > cfg.jump_gate * (1 + t.missed))
            if d.confidence > cfg.tau_tck and not jumped:
                t.state = ACTIVE
                t.missed = 0
                t.last_box = d.box
                t.last_confidence = d.confidence
            else:
                t.state = INACTIVE
                t.missed += 1
                t.last_confidence = min(d.confidence, cfg.tau_tck)
                if t.missed > cfg.t_miss:
                    t.state = REMOVED

        survivors = [(t, d) for t, d in zip(alive, trk_dets)
                     if t.state != REMOVED]

        # while two tracks' boxes overlap hard the frame is ambiguous:
        # both go dark (no output, no state update) and the pair sorts
        # itself out by signature once the targets separate
        actives = [(t, d) for t, d in survivors if t.state == ACTIVE]
        dark = set()
        for i, (t, d) in enumerate(actives):
            for (t2, d2) in actives[:i]:
                if cfg.dedup_iou > box_iou(d.box, d2.box) > cfg.blackout_iou:
                    dark.add(id(t))
                    dark.add(id(t2))
        for t, d in actives:
            if id(t) in dark:
                t.state = INACTIVE
                t.missed += 1
                t.last_confidence = min(d.confidence, cfg.tau_next)
                t.last_box = prev_boxes.get(t.track_id, t.last_box)

        # duplicate tracks latched onto one target: keep the incumbent
        # (the one that was already there last frame), not the one that
        # wandered in. Replaces the self-attention inhibition a trained
        # joint decoder would provide; real crossings rarely overlap this
        # hard. The evicted track's box reverts to where it really was.
        actives = [(t, d) for t, d in survivors if t.state == ACTIVE]

        def continuity(trk, box):
            prev = prev_boxes.get(trk.track_id)
            return box_iou(prev, box) if prev is not None else 0.0

        for i, (t, d) in enumerate(actives):
            for (t2, d2) in actives[:i]:
                if t2.state != ACTIVE or box_iou(d.box, d2.box) <= cfg.dedup_iou:
                    continue
                loser, keeper = t, t2
                if continuity(t, d.box) > continuity(t2, d2.box):
                    loser, keeper = t2, t
                loser.state = INACTIVE
                loser.missed += 1
                loser.dup_streak += 1
                loser.last_box = prev_boxes.get(loser.track_id, loser.last_box)
                if loser.dup_streak > cfg.t_miss:
                    loser.state = REMOVED
                if loser is t:
                    break
            else:
                t.dup_streak = 0

        survivors = [(t, d) for t, d in survivors if t.state != REMOVED]
        active_dets = [d for t, d in survivors if t.state == ACTIVE]
        merged = dec.merge_newborns(det_dets, active_dets,
                                    cfg.tau_det, cfg.iou_suppress)
        newborn_dets = merged[len(active_dets):]

        # a track lost just now still owns its neighborhood: a detection a
        # recently lost track could plausibly have reached is that track's
        # business, not a fresh identity
        shadows = [(t.last_box, cfg.jump_gate * (1 + t.missed))
                   for t, _ in survivors
                   if t.state == INACTIVE and t.last_box is not None
                   and 0 < t.missed <= cfg.newborn_grace]
        if shadows:
            newborn_dets = [
                d for d in newborn_dets
                if not any(math.hypot(d.box.cx - b.cx, d.box.cy - b.cy) <= r
                           for b, r in shadows)]

        newborns: List[Track] = []
        for d in newborn_dets:
            t = Track(track_id=self.next_id, embedding=d.embedding.copy(),
                      memory=init_memory(d.embedding),
                      prev_output=d.embedding.copy(), state=ACTIVE,
                      last_box=d.box, last_confidence=d.confidence)
            self.next_id += 1
            self.tracks.append(t)
            newborns.append(t)

        # temporal interaction over tracks that can actually commit this
        # frame (plus newborns). Low-confidence tracks keep frozen state
        # through the gate regardless, and deduplicated twins are parked,
        # so leaving their stale rows out keeps the attention pool clean.
        eligible = [(t, d) for t, d in survivors
                    if d.confidence > cfg.tau_next and t.state == ACTIVE]
        batch_tracks = [t for t, _ in eligible] + newborns
        outputs = [d.embedding for _, d in eligible] + \
                  [t.prev_output for t in newborns]
        confidences = [d.confidence for _, d in eligible] + \
                      [t.last_confidence for t in newborns]
        for t, d in survivors:
            if d.confidence <= cfg.tau_next:
                self._trace(feats.index, t, d.confidence, False)
        if batch_tracks:
            batch = TrackBatch(
                outputs=Tensor2(np.vstack(outputs)),
                prev_outputs=Tensor2(np.vstack([t.prev_output for t in batch_tracks])),
                memories=Tensor2(np.vstack([t.memory.value for t in batch_tracks])),
                ids=tuple(t.track_id for t in batch_tracks))
            cand_e, cand_m = tim_forward(batch, cfg.tim, cfg.memory, cfg.variant)
            for i, (t, conf) in enumerate(zip(batch_tracks, confidences)):
                if cfg.commit_guard is not None and conf > cfg.tau_next and \
                        not cfg.commit_guard(t, cand_e.data[i]):
                    conf = min(conf, cfg.tau_next)
                new_e, new_m = commit_gate(
                    t.embedding, t.memory, cand_e.data[i],
                    LongTermMemory(value=cand_m.data[i].copy()),
                    conf, cfg.tau_next)
                committed = conf > cfg.tau_next
                t.embedding = np.asarray(new_e)
                t.memory = new_m
                if committed or cfg.update_prev_on_no_commit:
                    t.prev_output = np.asarray(outputs[i]).copy()
                self._trace(feats.index, t, conf, committed)
                if self.embedding_log is not None and t.state == ACTIVE:
                    self.embedding_log.append(
                        (feats.index, t.track_id, t.embedding.copy()))

        actives = sorted((t for t in self.tracks if t.state == ACTIVE),
                         key=lambda t: t.track_id)
        return FrameResult(
            index=feats.index,
            outputs=tuple(TrackOutput(t.track_id, t.last_box, t.last_confidence)
                          for t in actives))

    def _trace(self, frame: int, t: Track, conf: float, committed: bool):
        if self.trace is not None:
            self.trace.append(TraceEntry(
                frame=frame, track_id=t.track_id, confidence=conf,
                committed=committed,
                state_hash=state_hash(t.embedding, t.memory)))


def run_sequence(stream: Iterable[FrameFeatures], cfg: InferenceConfig,
                 record_trace: bool = False,
                 record_embeddings: bool = False):
    """Fold the tracker over an ordered frame stream.

    Returns (results, tracker); deterministic for fixed inputs and config.
    """
    tracker = Tracker(cfg, record_trace=record_trace,
                      record_embeddings=record_embeddings)
    results: List[FrameResult] = []
    last = None
    for feats in stream:
        if last is not None and feats.index <= last:
            raise ValueError(f"frames out of order: {feats.index} after {last}")
        last = feats.index
        results.append(tracker.step(feats))
    return results, tracker
