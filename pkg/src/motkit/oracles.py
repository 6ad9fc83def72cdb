"""Literal-definition brute-force oracles.

Everything here re-derives results from first principles with exhaustive
enumeration and plain dict bookkeeping, deliberately avoiding the
production code paths (no shared assignment solver, no shared
accumulators). The fast implementations are tested against these, and the
`selftest` command ships them so the acceptance harness travels with the
binary.
"""

from __future__ import annotations

import itertools
from typing import Dict, List, Tuple

import numpy as np

from .boxes import BoundingBox, box_iou
from .metrics import ALPHAS, TrackSequence

_GATED = 1e9


def enumerate_min_assignment(cost) -> Tuple[Tuple[Tuple[int, int], ...], float]:
    """Exhaustive minimum-cost one-to-one assignment of the smaller side."""
    c = np.asarray(cost, dtype=np.float64)
    if c.size == 0:
        return (), 0.0
    n, m = c.shape
    transposed = False
    if n > m:
        c = c.T
        n, m = m, n
        transposed = True
    best_cost = np.inf
    best_perm = None
    for perm in itertools.permutations(range(m), n):
        total = 0.0
        for i, j in enumerate(perm):
            total += c[i, j]
        if total < best_cost:
            best_cost = total
            best_perm = perm
    pairs = [(i, j) for i, j in enumerate(best_perm)]
    if transposed:
        pairs = sorted((j, i) for i, j in pairs)
    return tuple(pairs), float(best_cost)


def _frames(gt: TrackSequence, pred: TrackSequence) -> List[int]:
    return sorted(set(gt) | set(pred))


def brute_clear_mot(gt: TrackSequence, pred: TrackSequence,
                    iou_threshold: float = 0.5):
    """CLEAR procedure with the optimal step done by enumeration."""
    fp = fn = idsw = n_gt = 0
    prev: Dict[int, int] = {}
    last: Dict[int, int] = {}
    for f in _frames(gt, pred):
        g = gt.get(f, [])
        p = pred.get(f, [])
        n_gt += len(g)
        pboxes = {pid: box for pid, box in p}
        matches: Dict[int, int] = {}
        taken = set()
        for gid, gbox in g:
            pid = prev.get(gid)
            if pid is not None and pid in pboxes and pid not in taken and \
                    box_iou(gbox, pboxes[pid]) >= iou_threshold:
                matches[gid] = pid
                taken.add(pid)
        rest_g = [(gid, box) for gid, box in g if gid not in matches]
        rest_p = [(pid, box) for pid, box in p if pid not in taken]
        if rest_g and rest_p:
            cost = np.full((len(rest_g), len(rest_p)), _GATED)
            for i, (_, gb) in enumerate(rest_g):
                for j, (_, pb) in enumerate(rest_p):
                    ov = box_iou(gb, pb)
                    if ov >= iou_threshold:
                        cost[i, j] = 1.0 - ov
            pairs, _ = enumerate_min_assignment(cost)
            for i, j in pairs:
                if cost[i, j] < _GATED:
                    matches[rest_g[i][0]] = rest_p[j][0]
        fn += len(g) - len(matches)
        fp += len(p) - len(matches)
        for gid, pid in matches.items():
            if gid in last and last[gid] != pid:
                idsw += 1
            last[gid] = pid
        prev = matches
    mota = 1.0 - (fn + fp + idsw) / max(n_gt, 1)
    return mota, idsw, fp, fn


def brute_idf1(gt: TrackSequence, pred: TrackSequence,
               iou_threshold: float = 0.5):
    """IDTP by enumerating every one-to-one trajectory pairing."""
    overlaps: Dict[Tuple[int, int], int] = {}
    gt_total = pred_total = 0
    gids: List[int] = []
    pids: List[int] = []
    for f in _frames(gt, pred):
        g = gt.get(f, [])
        p = pred.get(f, [])
        gt_total += len(g)
        pred_total += len(p)
        for gid, gb in g:
            if gid not in gids:
                gids.append(gid)
            for pid, pb in p:
                if box_iou(gb, pb) >= iou_threshold:
                    overlaps[(gid, pid)] = overlaps.get((gid, pid), 0) + 1
        for pid, _ in p:
            if pid not in pids:
                pids.append(pid)

    best = 0
    if gids and pids:
        small, large, flip = (gids, pids, False) if len(gids) <= len(pids) \
            else (pids, gids, True)
        for perm in itertools.permutations(large, len(small)):
            total = 0
            for a, b in zip(small, perm):
                key = (b, a) if flip else (a, b)
                total += overlaps.get(key, 0)
            best = max(best, total)
    denom = gt_total + pred_total
    score = (2.0 * best / denom) if denom else 1.0
    return score, best


def brute_hota(gt: TrackSequence, pred: TrackSequence):
    """HOTA re-derivation with dict accumulators and per-frame enumeration.

    Returns (hota, deta, assa, per-alpha hota/deta/assa tuples).
    """
    frames = _frames(gt, pred)
    gt_count: Dict[int, int] = {}
    pred_count: Dict[int, int] = {}
    potential: Dict[Tuple[int, int], float] = {}

    sims = {}
    for f in frames:
        g = gt.get(f, [])
        p = pred.get(f, [])
        sim = {}
        for gid, gb in g:
            gt_count[gid] = gt_count.get(gid, 0) + 1
            for pid, pb in p:
                sim[(gid, pid)] = box_iou(gb, pb)
        for pid, _ in p:
            pred_count[pid] = pred_count.get(pid, 0) + 1
        sims[f] = sim
        for gid, _ in g:
            row_sum = sum(sim[(gid, pid)] for pid, _ in p)
            for pid, _ in p:
                col_sum = sum(sim[(g2, pid)] for g2, _ in g)
                s = sim[(gid, pid)]
                denom = row_sum + col_sum - s
                if denom > 1e-12:
                    key = (gid, pid)
                    potential[key] = potential.get(key, 0.0) + s / denom

    def galign(gid, pid):
        pot = potential.get((gid, pid), 0.0)
        denom = gt_count[gid] + pred_count[pid] - pot
        return pot / denom if denom > 1e-12 else 0.0

    hota_c, deta_c, assa_c = [], [], []
    for alpha in ALPHAS:
        tp = fn = fp = 0
        matches: Dict[Tuple[int, int], int] = {}
        for f in frames:
            g = gt.get(f, [])
            p = pred.get(f, [])
            sim = sims[f]
            matched_pairs: List[Tuple[int, int]] = []
            if g and p:
                gids = [gid for gid, _ in g]
                pids = [pid for pid, _ in p]
                small, large, flip = (gids, pids, False) \
                    if len(gids) <= len(pids) else (pids, gids, True)
                best_score = -np.inf
                best = None
                for perm in itertools.permutations(large, len(small)):
                    total = 0.0
                    for a, b in zip(small, perm):
                        gid, pid = (b, a) if flip else (a, b)
                        total += galign(gid, pid) * sim[(gid, pid)]
                    if total > best_score:
                        best_score = total
                        best = perm
                for a, b in zip(small, best):
                    gid, pid = (b, a) if flip else (a, b)
                    if sim[(gid, pid)] >= alpha:
                        matched_pairs.append((gid, pid))
            for gid, pid in matched_pairs:
                matches[(gid, pid)] = matches.get((gid, pid), 0) + 1
            tp += len(matched_pairs)
            fn += len(g) - len(matched_pairs)
            fp += len(p) - len(matched_pairs)

        if tp:
            total = 0.0
            for (gid, pid), m in matches.items():
                total += m * (m / (gt_count[gid] + pred_count[pid] - m))
            assa = total / tp
        else:
            assa = 0.0
        deta = tp / max(tp + fn + fp, 1)
        deta_c.append(deta)
        assa_c.append(assa)
        hota_c.append(float(np.sqrt(deta * assa)))

    return (float(np.mean(hota_c)), float(np.mean(deta_c)),
            float(np.mean(assa_c)), tuple(hota_c), tuple(deta_c),
            tuple(assa_c))


def random_track_sequence(rng: np.random.Generator, max_targets: int = 5,
                          max_frames: int = 20) -> TrackSequence:
    """Random frame-indexed sequence for oracle-equivalence sweeps."""
    n = int(rng.integers(1, max_targets + 1))
    frames = int(rng.integers(3, max_frames + 1))
    seq: TrackSequence = {}
    centers = rng.uniform(0.15, 0.85, size=(n, 2))
    sizes = rng.uniform(0.08, 0.2, size=(n, 2))
    for f in range(frames):
        entries = []
        for i in range(n):
            if rng.uniform() < 0.15:
                continue  # occasional dropout
            c = centers[i] + rng.normal(scale=0.03, size=2)
            entries.append((i + 1, BoundingBox(
                float(np.clip(c[0], 0.05, 0.95)),
                float(np.clip(c[1], 0.05, 0.95)),
                float(sizes[i, 0]), float(sizes[i, 1]))))
        if entries:
            seq[f + 1] = entries
    return seq


def perturbed_prediction(rng: np.random.Generator, gt: TrackSequence,
                         jitter: float = 0.05, swap_prob: float = 0.1,
                         drop_prob: float = 0.1,
                         spurious_prob: float = 0.1) -> TrackSequence:
    """Noisy copy of a sequence: jittered boxes, id swaps, drops, clutter."""
    pred: TrackSequence = {}
    ids = sorted({tid for fr in gt.values() for tid, _ in fr})
    mapping = {tid: tid for tid in ids}
    for f in sorted(gt):
        if len(ids) >= 2 and rng.uniform() < swap_prob:
            a, b = rng.choice(ids, size=2, replace=False)
            mapping[a], mapping[b] = mapping[b], mapping[a]
        entries = []
        for tid, box in gt[f]:
            if rng.uniform() < drop_prob:
                continue
            entries.append((int(mapping[tid]), BoundingBox(
                float(np.clip(box.cx + rng.normal(scale=jitter), 0.02, 0.98)),
                float(np.clip(box.cy + rng.normal(scale=jitter), 0.02, 0.98)),
                box.w, box.h)))
        if rng.uniform() < spurious_prob:
            entries.append((99, BoundingBox(
                float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.2, 0.8)),
                0.1, 0.1)))
        if entries:
            pred[f] = entries
    return pred
