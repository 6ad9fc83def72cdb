"""Bit-exact file formats.

Three formats live here:

* MOT trajectory files: comma-separated rows
  ``frame,id,bb_left,bb_top,bb_width,bb_height,conf,-1,-1,-1`` with floats
  written at fixed 6 decimal places so goldens are byte-identical across
  platforms.
* Fixture streams: binary token streams with magic ``MEMOFIX1``, explicit
  little-endian 32-bit floats:
  ``magic | u32 width | u32 frames | u32 token-count per frame |
  per frame: tokens (n*width f32) then positions (n*2 f32)``.
* Run configuration: flat ``key=value`` text with an explicit version;
  every inference constant appears by name.

Readers reject malformed input instead of truncating silently.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields
from typing import Dict, List, Tuple

import numpy as np

from .boxes import BoundingBox
from .decoder import FrameFeatures

FIXTURE_MAGIC = b"MEMOFIX1"
CONFIG_VERSION = 1


class FormatError(ValueError):
    """Malformed file content; carries a line number when meaningful."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class MotRow:
    frame: int
    track_id: int
    left: float
    top: float
    width: float
    height: float
    conf: float

    def __post_init__(self):
        if self.frame < 1:
            raise FormatError(f"frame {self.frame} < 1")


def format_mot_row(row: MotRow) -> str:
    return (f"{row.frame},{row.track_id},{row.left:.6f},{row.top:.6f},"
            f"{row.width:.6f},{row.height:.6f},{row.conf:.6f},-1,-1,-1")


def write_mot(rows: List[MotRow], path) -> None:
    with open(path, "w", newline="\n") as f:
        for row in rows:
            f.write(format_mot_row(row) + "\n")


def read_mot(path) -> List[MotRow]:
    rows: List[MotRow] = []
    with open(path, "r") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 10:
                raise FormatError(f"expected 10 fields, got {len(parts)}", lineno)
            try:
                frame = int(parts[0])
                track_id = int(parts[1])
                numbers = [float(p) for p in parts[2:7]]
            except ValueError as exc:
                raise FormatError(str(exc), lineno) from None
            if frame < 1:
                raise FormatError(f"frame {frame} < 1", lineno)
            rows.append(MotRow(frame, track_id, *numbers))
    return rows


def rows_from_results(results, frame_size: float = 1000.0) -> List[MotRow]:
    """Convert tracker FrameResults (normalized boxes) to MOT rows."""
    rows = []
    for r in results:
        for o in r.outputs:
            b = o.box
            rows.append(MotRow(
                frame=r.index + 1, track_id=o.track_id,
                left=(b.cx - b.w / 2.0) * frame_size,
                top=(b.cy - b.h / 2.0) * frame_size,
                width=b.w * frame_size, height=b.h * frame_size,
                conf=o.confidence))
    return rows


def sequence_from_rows(rows: List[MotRow]) -> Dict[int, List[Tuple[int, BoundingBox]]]:
    """Frame-indexed (id, box) lists in file coordinates (IoU is
    scale-invariant, so no frame size is needed to evaluate)."""
    seq: Dict[int, List[Tuple[int, BoundingBox]]] = {}
    for r in rows:
        box = BoundingBox(r.left + r.width / 2.0, r.top + r.height / 2.0,
                          r.width, r.height)
        seq.setdefault(r.frame, []).append((r.track_id, box))
    return seq


def write_fixture(stream: List[FrameFeatures], path) -> None:
    width = stream[0].width if stream else 0
    with open(path, "wb") as f:
        f.write(FIXTURE_MAGIC)
        f.write(struct.pack("<II", width, len(stream)))
        for feats in stream:
            f.write(struct.pack("<I", feats.count))
        for feats in stream:
            f.write(feats.tokens.astype("<f4").tobytes())
            f.write(feats.positions.astype("<f4").tobytes())


def read_fixture(path) -> List[FrameFeatures]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != FIXTURE_MAGIC:
        raise FormatError(f"bad magic {blob[:8]!r}")
    if len(blob) < 16:
        raise FormatError("truncated header")
    width, n_frames = struct.unpack_from("<II", blob, 8)
    offset = 16
    counts = []
    for _ in range(n_frames):
        if offset + 4 > len(blob):
            raise FormatError("truncated frame table")
        counts.append(struct.unpack_from("<I", blob, offset)[0])
        offset += 4
    stream = []
    for idx, n in enumerate(counts):
        tok_bytes = n * width * 4
        pos_bytes = n * 2 * 4
        if offset + tok_bytes + pos_bytes > len(blob):
            raise FormatError(f"truncated payload at frame {idx}")
        tokens = np.frombuffer(blob, dtype="<f4", count=n * width,
                               offset=offset).reshape(n, width)
        offset += tok_bytes
        positions = np.frombuffer(blob, dtype="<f4", count=n * 2,
                                  offset=offset).reshape(n, 2)
        offset += pos_bytes
        stream.append(FrameFeatures(tokens=tokens.astype(np.float64),
                                    positions=positions.astype(np.float64),
                                    index=idx))
    if offset != len(blob):
        raise FormatError(f"{len(blob) - offset} trailing bytes")
    return stream


@dataclass
class RunConfig:
    """Flat inference configuration; serialized as key=value text."""

    format_version: int = CONFIG_VERSION
    width: int = 64
    grid: int = 5
    l_det: int = 1
    l_joint: int = 5
    memory_rate: float = 0.01       # the exponential update weight
    tau_det: float = 0.5
    tau_tck: float = 0.5
    tau_next: float = 0.5
    t_miss: int = 30
    iou_suppress: float = 0.7
    variant: str = "full"
    frame_size: float = 1000.0
    seed: int = 0
    precision: str = "double"

    def to_inference(self, **overrides):
        from .lifecycle import structured_config
        from .memory import MemoryConfig

        return structured_config(
            d=self.width, grid=self.grid, l_det=self.l_det,
            l_joint=self.l_joint,
            memory=MemoryConfig(rate=self.memory_rate),
            tau_det=self.tau_det, tau_tck=self.tau_tck,
            tau_next=self.tau_next, t_miss=self.t_miss,
            iou_suppress=self.iou_suppress, variant=self.variant,
            **overrides)


def write_config(cfg: RunConfig, path) -> None:
    with open(path, "w", newline="\n") as f:
        for field in fields(RunConfig):
            f.write(f"{field.name}={getattr(cfg, field.name)}\n")


def read_config(path) -> RunConfig:
    known = {f.name: f.type for f in fields(RunConfig)}
    casts = {"int": int, "float": float, "str": str}
    values = {}
    with open(path, "r") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"expected key=value, got {line!r}", lineno)
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in known:
                raise FormatError(f"unknown key {key!r}", lineno)
            try:
                values[key] = casts[known[key]](val.strip())
            except (KeyError, ValueError):
                raise FormatError(f"bad value for {key}: {val!r}", lineno) from None
    cfg = RunConfig(**values)
    if cfg.format_version != CONFIG_VERSION:
        raise FormatError(f"unsupported config version {cfg.format_version}")
    return cfg
