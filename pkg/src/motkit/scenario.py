"""Deterministic synthetic world generator.

Produces ground-truth trajectories plus the frame token streams the
tracker consumes. The generator is what makes association hard on demand:
signatures can be made nearly identical, they drift and carry noise,
targets cross and get occluded, and distractor tokens are sprinkled in.
All randomness flows from the seed; token values are rounded to 32-bit
floats on emission so fixture files round-trip bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .boxes import BoundingBox
from .decoder import FrameFeatures
from .layout import layout_for, token_embedding

KINDS = ("linear", "dance", "crossing", "occlusion_stress")


@dataclass
class ScenarioConfig:
    kind: str = "dance"
    targets: int = 4
    frames: int = 100
    seed: int = 0
    sig_similarity: float = 0.0   # pairwise cosine of base signatures
    noise: float = 0.05           # per-frame signature noise (rms per vector)
    drift: float = 0.002          # per-frame signature rotation, radians
    occlusions: Tuple[Tuple[int, int, int], ...] = ()  # (target, start, stop)
    random_occlusions: int = 0    # extra random windows, seeded
    occlusion_min: int = 5        # min length of random windows
    occlusion_max: int = 20       # max length of random windows
    occlusion_mix: float = 0.0    # 0 drops occluded tokens; >0 blends and keeps
    blur_prob: float = 0.0        # chance a visible target's token is degraded
    blur_noise: float = 0.25      # signature noise of a degraded token
    blur_obj: float = 0.3         # objectness of a degraded token
    distractors: int = 2          # background tokens per frame
    width: int = 64
    speed: float = 0.012          # rms per-frame center motion

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.targets < 1 or self.frames < 1:
            raise ValueError("targets and frames must be >= 1")
        if not (0.0 <= self.sig_similarity <= 1.0):
            raise ValueError("sig_similarity outside [0, 1]")


@dataclass(frozen=True)
class GroundTruthEntry:
    track_id: int
    box: BoundingBox
    visible: bool


@dataclass
class GroundTruth:
    frames: List[List[GroundTruthEntry]] = field(default_factory=list)

    def visible_count(self) -> int:
        return sum(1 for fr in self.frames for e in fr if e.visible)


def base_signatures(rng: np.random.Generator, count: int, dim: int,
                    similarity: float) -> np.ndarray:
    """Unit vectors with pairwise cosine exactly `similarity`.

    Built as sqrt(s) * shared + sqrt(1-s) * private over an orthonormal
    frame, so raising s never lowers any pairwise cosine.
    """
    if count + 1 > dim:
        raise ValueError(f"{count} signatures need dim >= {count + 1}")
    gauss = rng.normal(size=(dim, count + 1))
    q, _ = np.linalg.qr(gauss)
    shared, privates = q[:, 0], q[:, 1:]
    sigs = (np.sqrt(similarity) * shared[:, None]
            + np.sqrt(1.0 - similarity) * privates)
    return sigs.T.copy()


def _rotate_toward_random(rng: np.random.Generator, vec: np.ndarray,
                          angle: float) -> np.ndarray:
    """Rotate a unit vector by `angle` in a random plane containing it."""
    if angle == 0.0:
        return vec
    r = rng.normal(size=vec.shape)
    r -= r.dot(vec) * vec
    norm = np.linalg.norm(r)
    if norm < 1e-12:
        return vec
    r /= norm
    out = np.cos(angle) * vec + np.sin(angle) * r
    return out / np.linalg.norm(out)


def _initial_positions(rng: np.random.Generator, count: int,
                       margin: float, min_sep: float = 0.16) -> np.ndarray:
    """Rejection-sample starting centers with a minimum separation."""
    pts: List[np.ndarray] = []
    attempts = 0
    sep = min_sep
    while len(pts) < count:
        cand = rng.uniform(margin, 1.0 - margin, size=2)
        if all(np.linalg.norm(cand - p) >= sep for p in pts):
            pts.append(cand)
        attempts += 1
        if attempts > 500 * count:
            sep *= 0.8  # crowded configuration, relax
            attempts = 0
    return np.array(pts)


def _occlusion_schedule(cfg: ScenarioConfig,
                        rng: np.random.Generator) -> List[List[bool]]:
    """occluded[target][frame] flags from explicit plus random windows."""
    occ = [[False] * cfg.frames for _ in range(cfg.targets)]
    for tgt, start, stop in cfg.occlusions:
        if not (0 <= tgt < cfg.targets):
            raise ValueError(f"occlusion target {tgt} out of range")
        for f in range(max(start, 0), min(stop, cfg.frames)):
            occ[tgt][f] = True
    for _ in range(cfg.random_occlusions):
        tgt = int(rng.integers(cfg.targets))
        length = int(rng.integers(cfg.occlusion_min, cfg.occlusion_max + 1))
        start = int(rng.integers(0, max(cfg.frames - length, 1)))
        for f in range(start, min(start + length, cfg.frames)):
            occ[tgt][f] = True
    return occ


def generate(cfg: ScenarioConfig) -> Tuple[GroundTruth, List[FrameFeatures]]:
    """Ground truth and token stream, fully determined by the config."""
    rng = np.random.default_rng(cfg.seed)
    layout = layout_for(cfg.width)
    n = cfg.targets

    sigs = base_signatures(rng, n, layout.sig_width, cfg.sig_similarity)
    box_sizes = rng.uniform(0.06, 0.10, size=(n, 2))
    margin = float(box_sizes.max()) / 2.0 + 0.02

    pos = _initial_positions(rng, n, margin)
    if cfg.kind == "crossing":
        # aim everyone through the center so paths cross mid-sequence
        vel = (0.5 - pos)
        vel *= cfg.speed / np.maximum(np.linalg.norm(vel, axis=1, keepdims=True), 1e-9)
    else:
        angles = rng.uniform(0, 2 * np.pi, size=n)
        vel = cfg.speed * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    theta = 0.08  # velocity mean-reversion of the dance process
    accel_scale = cfg.speed * np.sqrt(2.0 * theta)
    speed_factor = 0.25 if cfg.kind == "occlusion_stress" else 1.0

    occluded = _occlusion_schedule(cfg, rng)
    sig_now = sigs.copy()

    gt = GroundTruth()
    stream: List[FrameFeatures] = []
    for f in range(cfg.frames):
        entries = []
        toks: List[np.ndarray] = []
        positions: List[np.ndarray] = []
        for i in range(n):
            hidden = occluded[i][f]
            freeze = hidden and cfg.kind == "occlusion_stress"
            if not freeze:
                if cfg.kind == "dance":
                    vel[i] = (1 - theta) * vel[i] + accel_scale * rng.normal(size=2)
                elif cfg.kind == "occlusion_stress":
                    vel[i] = (1 - theta) * vel[i] + 0.25 * accel_scale * rng.normal(size=2)
                pos[i] = pos[i] + speed_factor * vel[i]
                # reflect so boxes stay inside the unit square
                for ax in range(2):
                    low, high = margin, 1.0 - margin
                    if pos[i, ax] < low:
                        pos[i, ax] = 2 * low - pos[i, ax]
                        vel[i, ax] = -vel[i, ax]
                    elif pos[i, ax] > high:
                        pos[i, ax] = 2 * high - pos[i, ax]
                        vel[i, ax] = -vel[i, ax]
            sig_now[i] = _rotate_toward_random(rng, sig_now[i], cfg.drift)

            box = BoundingBox(float(pos[i, 0]), float(pos[i, 1]),
                              float(box_sizes[i, 0]), float(box_sizes[i, 1]))
            entries.append(GroundTruthEntry(track_id=i + 1, box=box,
                                            visible=not hidden))

            blurred = (not hidden) and cfg.blur_prob > 0.0 and \
                rng.uniform() < cfg.blur_prob
            sig_noise = cfg.blur_noise if blurred else cfg.noise
            token_sig = sig_now[i] + sig_noise * rng.normal(size=layout.sig_width)
            if hidden:
                if cfg.occlusion_mix <= 0.0:
                    continue
                occluder = sig_now[(i + 1) % n]
                token_sig = ((1 - cfg.occlusion_mix) * token_sig
                             + cfg.occlusion_mix * occluder)
            toks.append(token_embedding(
                layout, token_sig, pos[i],
                np.array([box.cx, box.cy, box.w, box.h]),
                cfg.blur_obj if blurred else +1.0))
            positions.append(pos[i].copy())

        for _ in range(cfg.distractors):
            dpos = rng.uniform(0.05, 0.95, size=2)
            dsig = rng.normal(size=layout.sig_width)
            dsig /= np.linalg.norm(dsig)
            dbox = np.array([dpos[0], dpos[1], *rng.uniform(0.03, 0.08, size=2)])
            toks.append(token_embedding(layout, dsig, dpos, dbox, -1.0))
            positions.append(dpos)

        gt.frames.append(entries)
        if toks:
            tokens = np.array(toks, dtype=np.float32).astype(np.float64)
            positions_arr = np.array(positions, dtype=np.float32).astype(np.float64)
        else:
            tokens = np.zeros((0, layout.d))
            positions_arr = np.zeros((0, 2))
        stream.append(FrameFeatures(tokens=tokens, positions=positions_arr, index=f))

    return gt, stream


def export_gt(gt: GroundTruth, path, frame_size: float = 1000.0) -> None:
    """Write visible ground-truth entries as a MOT trajectory file."""
    from . import fileio

    rows = []
    for f, entries in enumerate(gt.frames):
        for e in entries:
            if not e.visible:
                continue
            rows.append(fileio.MotRow(
                frame=f + 1, track_id=e.track_id,
                left=(e.box.cx - e.box.w / 2) * frame_size,
                top=(e.box.cy - e.box.h / 2) * frame_size,
                width=e.box.w * frame_size, height=e.box.h * frame_size,
                conf=1.0))
    fileio.write_mot(rows, path)
