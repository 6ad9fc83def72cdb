"""Per-track long-term memory.

A track's memory is a running average of its output embeddings with
exponentially decaying weights: new = (1 - rate) * old + rate * output.
The memory and the track embedding are only ever replaced through the
confidence gate, so low-confidence frames leave both untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .linalg import NumericError, StateError


@dataclass(frozen=True)
class MemoryConfig:
    """rate is the memory update weight on the newest output, in [0, 1]."""

    rate: float = 0.01

    def __post_init__(self):
        if not (0.0 <= self.rate <= 1.0):
            raise ValueError(f"memory rate {self.rate} outside [0, 1]")


@dataclass(frozen=True)
class LongTermMemory:
    value: Optional[np.ndarray]
    initialized: bool = True


def _as_clean_vector(o) -> np.ndarray:
    v = np.array(o, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise NumericError("non-finite memory input")
    v.flags.writeable = False
    return v


def init_memory(o) -> LongTermMemory:
    """Start a newborn track's memory as an exact copy of its output."""
    return LongTermMemory(value=_as_clean_vector(o), initialized=True)


def ema_update(m: LongTermMemory, o, cfg: MemoryConfig) -> LongTermMemory:
    """Blend the newest output into the memory; the input is not mutated."""
    if not m.initialized or m.value is None:
        raise StateError("ema_update on uninitialized memory")
    o = np.asarray(o, dtype=np.float64).reshape(-1)
    if o.shape != m.value.shape:
        raise ValueError(f"output width {o.shape} vs memory {m.value.shape}")
    new = (1.0 - cfg.rate) * m.value + cfg.rate * o
    return LongTermMemory(value=_as_clean_vector(new), initialized=True)


def ema_update_rows(memories: np.ndarray, outputs: np.ndarray,
                    cfg: MemoryConfig) -> np.ndarray:
    """Row-wise memory update for a whole track batch."""
    if memories.shape != outputs.shape:
        raise ValueError(f"shape mismatch {memories.shape} vs {outputs.shape}")
    return (1.0 - cfg.rate) * memories + cfg.rate * outputs


def commit_gate(old_e: np.ndarray, old_m: LongTermMemory,
                new_e: np.ndarray, new_m: LongTermMemory,
                confidence: float, tau_next: float
                ) -> Tuple[np.ndarray, LongTermMemory]:
    """Adopt the candidate (embedding, memory) pair only on high confidence.

    Strictly greater than tau_next commits; equality keeps the old state.
    """
    if not (0.0 <= confidence <= 1.0):
        raise ValueError(f"confidence {confidence} outside [0, 1]")
    if confidence > tau_next:
        return new_e, new_m
    return old_e, old_m
