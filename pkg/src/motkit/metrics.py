"""From-scratch multi-object tracking evaluation.

Sequences are frame-indexed dicts mapping to lists of (id, BoundingBox).
The engine provides IoU, an exact minimum-cost bipartite solver, the
CLEAR-MOT accounting with match carry-over, identity-F1 from a global
trajectory matching, and the higher-order detection/association metrics
averaged over a localization-threshold sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .boxes import BoundingBox, box_iou
from .linalg import NumericError

# frame -> [(track id, box), ...]
TrackSequence = Dict[int, List[Tuple[int, BoundingBox]]]

ALPHAS: Tuple[float, ...] = tuple(k / 20.0 for k in range(1, 20))

_GATED = 1e9  # cost placeholder for pairs below the IoU threshold


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes (0 when the union is empty)."""
    return box_iou(a, b)


@dataclass(frozen=True)
class Assignment:
    """One-to-one matching as (row, col) pairs plus its total cost."""

    pairs: Tuple[Tuple[int, int], ...]
    cost: float


def hungarian(cost) -> Assignment:
    """Minimum-total-cost one-to-one assignment of the smaller dimension.

    Shortest-augmenting-path implementation with potentials; rectangular
    matrices are handled by matching every row of the smaller side.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"cost must be 2-D, got shape {c.shape}")
    if c.size == 0:
        return Assignment(pairs=(), cost=0.0)
    if not np.all(np.isfinite(c)):
        raise NumericError("non-finite cost entry")

    original = c
    transposed = False
    if c.shape[0] > c.shape[1]:
        c = c.T
        transposed = True
    n, m = c.shape

    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    match = np.zeros(m + 1, dtype=np.int64)   # column -> row (1-based, 0 free)
    way = np.zeros(m + 1, dtype=np.int64)

    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(m + 1, INF)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            cur = c[i0 - 1, :] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (cur < minv[1:])
            if better.any():
                minv[1:][better] = cur[better]
                way[1:][better] = j0
            free_idx = np.flatnonzero(free) + 1
            j1 = free_idx[np.argmin(minv[free_idx])]
            delta = minv[j1]
            u[match[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1

    pairs = sorted((int(match[j] - 1), j - 1)
                   for j in range(1, m + 1) if match[j] != 0)
    if transposed:
        pairs = sorted((cidx, ridx) for ridx, cidx in pairs)
    total = 0.0
    for r, cidx in pairs:
        total += float(original[r, cidx])
    return Assignment(pairs=tuple(pairs), cost=total)


def _frames_of(*seqs: TrackSequence) -> List[int]:
    keys = set()
    for s in seqs:
        keys.update(s.keys())
    return sorted(keys)


def clear_mot(gt: TrackSequence, pred: TrackSequence,
              iou_threshold: float = 0.5):
    """CLEAR-MOT accounting: (MOTA, IDSW, FP, FN).

    Matches from the previous frame are kept while they still overlap;
    the remainder is matched optimally per frame. An identity switch is
    counted whenever a ground-truth object is matched to a different
    prediction id than the last one it was ever matched to.
    """
    fp = fn = idsw = n_gt = 0
    prev_pairs: Dict[int, int] = {}
    last_match: Dict[int, int] = {}

    for f in _frames_of(gt, pred):
        g = gt.get(f, [])
        p = pred.get(f, [])
        n_gt += len(g)
        pred_by_id = {pid: box for pid, box in p}

        matches: Dict[int, int] = {}
        used_pred = set()
        for gid, gbox in g:
            pid = prev_pairs.get(gid)
            if pid is not None and pid in pred_by_id and pid not in used_pred:
                if box_iou(gbox, pred_by_id[pid]) >= iou_threshold:
                    matches[gid] = pid
                    used_pred.add(pid)

        rest_g = [(gid, box) for gid, box in g if gid not in matches]
        rest_p = [(pid, box) for pid, box in p if pid not in used_pred]
        if rest_g and rest_p:
            cost = np.full((len(rest_g), len(rest_p)), _GATED)
            for i, (_, gbox) in enumerate(rest_g):
                for j, (_, pbox) in enumerate(rest_p):
                    ov = box_iou(gbox, pbox)
                    if ov >= iou_threshold:
                        cost[i, j] = 1.0 - ov
            for i, j in hungarian(cost).pairs:
                if cost[i, j] < _GATED:
                    matches[rest_g[i][0]] = rest_p[j][0]

        fn += len(g) - len(matches)
        fp += len(p) - len(matches)
        for gid, pid in matches.items():
            if gid in last_match and last_match[gid] != pid:
                idsw += 1
            last_match[gid] = pid
        prev_pairs = matches

    mota = 1.0 - (fn + fp + idsw) / max(n_gt, 1)
    return mota, idsw, fp, fn


def idf1(gt: TrackSequence, pred: TrackSequence,
         iou_threshold: float = 0.5):
    """Identity F1: (IDF1, IDTP) from one global trajectory matching.

    IDTP is the largest total number of per-frame overlaps achievable by a
    one-to-one pairing of ground-truth and predicted trajectories;
    IDF1 = 2*IDTP / (gt detections + predicted detections).
    """
    overlap: Dict[Tuple[int, int], int] = {}
    gt_total = pred_total = 0
    gt_ids: List[int] = []
    pred_ids: List[int] = []
    for f in _frames_of(gt, pred):
        g = gt.get(f, [])
        p = pred.get(f, [])
        gt_total += len(g)
        pred_total += len(p)
        for gid, gbox in g:
            if gid not in gt_ids:
                gt_ids.append(gid)
            for pid, pbox in p:
                if box_iou(gbox, pbox) >= iou_threshold:
                    key = (gid, pid)
                    overlap[key] = overlap.get(key, 0) + 1
        for pid, _ in p:
            if pid not in pred_ids:
                pred_ids.append(pid)

    if not gt_ids or not pred_ids:
        idtp = 0
    else:
        cost = np.zeros((len(gt_ids), len(pred_ids)))
        for (gid, pid), n in overlap.items():
            cost[gt_ids.index(gid), pred_ids.index(pid)] = -float(n)
        asn = hungarian(cost)
        idtp = int(round(-asn.cost))

    denom = gt_total + pred_total
    score = (2.0 * idtp / denom) if denom else 1.0
    return score, idtp


@dataclass
class HotaResult:
    alphas: Tuple[float, ...]
    hota_curve: Tuple[float, ...]
    deta_curve: Tuple[float, ...]
    assa_curve: Tuple[float, ...]

    @property
    def hota(self) -> float:
        return float(np.mean(self.hota_curve))

    @property
    def deta(self) -> float:
        return float(np.mean(self.deta_curve))

    @property
    def assa(self) -> float:
        return float(np.mean(self.assa_curve))


def hota(gt: TrackSequence, pred: TrackSequence) -> HotaResult:
    """Higher-order metrics over the localization-threshold sweep.

    Per threshold: frames are matched optimally on the product of a global
    trajectory-alignment prior and the frame IoU, matches below the
    threshold are discarded, and the association score of each surviving
    pair is the Jaccard overlap of the two trajectories' matched frames.
    HOTA at each threshold is the geometric mean of the detection and
    association accuracies.
    """
    frames = _frames_of(gt, pred)
    gt_ids: Dict[int, int] = {}
    pred_ids: Dict[int, int] = {}
    for f in frames:
        for gid, _ in gt.get(f, []):
            gt_ids.setdefault(gid, len(gt_ids))
        for pid, _ in pred.get(f, []):
            pred_ids.setdefault(pid, len(pred_ids))
    n_g, n_p = len(gt_ids), len(pred_ids)

    gt_count = np.zeros(n_g)
    pred_count = np.zeros(n_p)
    potential = np.zeros((n_g, n_p))
    per_frame = []
    for f in frames:
        g = gt.get(f, [])
        p = pred.get(f, [])
        gi = np.array([gt_ids[gid] for gid, _ in g], dtype=int)
        pi = np.array([pred_ids[pid] for pid, _ in p], dtype=int)
        sim = np.zeros((len(g), len(p)))
        for a, (_, gbox) in enumerate(g):
            for b, (_, pbox) in enumerate(p):
                sim[a, b] = box_iou(gbox, pbox)
        per_frame.append((gi, pi, sim))
        gt_count[gi] += 1
        pred_count[pi] += 1
        if len(g) and len(p):
            denom = sim.sum(0)[None, :] + sim.sum(1)[:, None] - sim
            ratio = np.zeros_like(sim)
            mask = denom > 1e-12
            ratio[mask] = sim[mask] / denom[mask]
            potential[np.ix_(gi, pi)] += ratio

    galign = np.zeros((n_g, n_p))
    if n_g and n_p:
        denom = gt_count[:, None] + pred_count[None, :] - potential
        mask = denom > 1e-12
        galign[mask] = potential[mask] / denom[mask]

    hota_c, deta_c, assa_c = [], [], []
    for alpha in ALPHAS:
        tp = fn = fp = 0
        matches = np.zeros((n_g, n_p))
        for gi, pi, sim in per_frame:
            matched = 0
            if len(gi) and len(pi):
                score = galign[np.ix_(gi, pi)] * sim
                asn = hungarian(-score)
                for a, b in asn.pairs:
                    if sim[a, b] >= alpha:
                        matches[gi[a], pi[b]] += 1
                        matched += 1
            tp += matched
            fn += len(gi) - matched
            fp += len(pi) - matched

        if tp:
            denom = gt_count[:, None] + pred_count[None, :] - matches
            ass_scores = np.zeros_like(matches)
            mask = matches > 0
            ass_scores[mask] = matches[mask] / denom[mask]
            assa = float((matches * ass_scores).sum() / tp)
        else:
            assa = 0.0
        deta = tp / max(tp + fn + fp, 1)
        deta_c.append(float(deta))
        assa_c.append(assa)
        hota_c.append(float(np.sqrt(deta * assa)))

    return HotaResult(alphas=ALPHAS, hota_curve=tuple(hota_c),
                      deta_curve=tuple(deta_c), assa_curve=tuple(assa_c))


@dataclass
class SequenceMetrics:
    name: str
    hota: float
    deta: float
    assa: float
    mota: float
    idf1: float
    idsw: int
    fp: int
    fn: int
    idtp: int
    num_gt: int
    num_pred: int
    alphas: Tuple[float, ...] = ALPHAS
    hota_curve: Tuple[float, ...] = ()
    deta_curve: Tuple[float, ...] = ()
    assa_curve: Tuple[float, ...] = ()


@dataclass
class MetricsReport:
    sequences: List[SequenceMetrics] = field(default_factory=list)

    @property
    def aggregate(self) -> SequenceMetrics:
        """Rates averaged over sequences, counts summed."""
        seqs = self.sequences
        if not seqs:
            raise ValueError("empty report")
        mean = lambda attr: float(np.mean([getattr(s, attr) for s in seqs]))
        total = lambda attr: int(sum(getattr(s, attr) for s in seqs))
        curves = {}
        for attr in ("hota_curve", "deta_curve", "assa_curve"):
            stacked = [getattr(s, attr) for s in seqs if getattr(s, attr)]
            curves[attr] = tuple(np.mean(stacked, axis=0)) if stacked else ()
        return SequenceMetrics(
            name="aggregate", hota=mean("hota"), deta=mean("deta"),
            assa=mean("assa"), mota=mean("mota"), idf1=mean("idf1"),
            idsw=total("idsw"), fp=total("fp"), fn=total("fn"),
            idtp=total("idtp"), num_gt=total("num_gt"),
            num_pred=total("num_pred"), **curves)


def evaluate_sequence(gt: TrackSequence, pred: TrackSequence,
                      name: str = "sequence",
                      iou_threshold: float = 0.5) -> SequenceMetrics:
    """All metrics of one sequence pair."""
    h = hota(gt, pred)
    mota, idsw, fp, fn = clear_mot(gt, pred, iou_threshold)
    idf1_score, idtp = idf1(gt, pred, iou_threshold)
    num_gt = sum(len(v) for v in gt.values())
    num_pred = sum(len(v) for v in pred.values())
    return SequenceMetrics(
        name=name, hota=h.hota, deta=h.deta, assa=h.assa, mota=mota,
        idf1=idf1_score, idsw=idsw, fp=fp, fn=fn, idtp=idtp,
        num_gt=num_gt, num_pred=num_pred, alphas=h.alphas,
        hota_curve=h.hota_curve, deta_curve=h.deta_curve,
        assa_curve=h.assa_curve)
