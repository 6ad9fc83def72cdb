"""Seeded ablation suites: variant comparison and memory-rate sweep.

The suite re-runs the same generated scenarios under each tracker variant
(or each memory update rate) and reports mean metrics plus embedding
dispersion statistics. Scenario difficulty follows the association-stress
recipe: many similar signatures, drifting identities, and occlusions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import lifecycle as lc
from . import metrics as mtr
from . import report as rpt
from . import scenario as scn
from .memory import MemoryConfig
from .tim import VARIANTS

DEFAULT_LAMBDAS = (0.005, 0.01, 0.02, 0.04, 1.0)


@dataclass
class SuiteConfig:
    scenarios: int = 20
    base_seed: int = 100
    targets: int = 8
    frames: int = 150
    sig_similarity: float = 0.9
    noise: float = 0.05
    drift: float = 0.002
    random_occlusions: int = 12
    occlusion_max: int = 20
    width: int = 64

    def scenario(self, index: int) -> scn.ScenarioConfig:
        return scn.ScenarioConfig(
            kind="dance", targets=self.targets, frames=self.frames,
            seed=self.base_seed + index, sig_similarity=self.sig_similarity,
            noise=self.noise, drift=self.drift,
            random_occlusions=self.random_occlusions,
            occlusion_max=self.occlusion_max, width=self.width)


@dataclass
class SuiteEntry:
    name: str
    metrics: mtr.SequenceMetrics        # aggregate over the suite
    per_sequence: List[mtr.SequenceMetrics] = field(default_factory=list)
    spread: float = 0.0                 # within-track embedding spread
    separation: float = 0.0             # between-track separation


def gt_sequence(gt: scn.GroundTruth) -> mtr.TrackSequence:
    seq: mtr.TrackSequence = {}
    for f, entries in enumerate(gt.frames):
        rows = [(e.track_id, e.box) for e in entries if e.visible]
        if rows:
            seq[f + 1] = rows
    return seq


def result_sequence(results) -> mtr.TrackSequence:
    seq: mtr.TrackSequence = {}
    for r in results:
        if r.outputs:
            seq[r.index + 1] = [(o.track_id, o.box) for o in r.outputs]
    return seq


def _generate_suite(suite: SuiteConfig):
    worlds = []
    for i in range(suite.scenarios):
        gt, stream = scn.generate(suite.scenario(i))
        worlds.append((gt_sequence(gt), stream))
    return worlds


def _run_one(worlds, make_cfg, name: str) -> SuiteEntry:
    per_seq = []
    spreads, seps = [], []
    for i, (gseq, stream) in enumerate(worlds):
        results, tracker = lc.run_sequence(stream, make_cfg(),
                                           record_embeddings=True)
        per_seq.append(mtr.evaluate_sequence(gseq, result_sequence(results),
                                             name=f"{name}/{i}"))
        sp, se = rpt.embedding_dispersion(tracker.embedding_log)
        spreads.append(sp)
        seps.append(se)
    agg = mtr.MetricsReport(sequences=per_seq).aggregate
    agg.name = name
    return SuiteEntry(name=name, metrics=agg, per_sequence=per_seq,
                      spread=float(np.mean(spreads)),
                      separation=float(np.mean(seps)))


def run_variants(suite: SuiteConfig, variants: Sequence[str] = VARIANTS,
                 rate: float = 0.01) -> List[SuiteEntry]:
    """Table 5-style comparison: one row per tracker variant."""
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}")
    worlds = _generate_suite(suite)
    entries = []
    for v in variants:
        entries.append(_run_one(
            worlds,
            lambda v=v: lc.structured_config(
                d=suite.width, variant=v, memory=MemoryConfig(rate=rate)),
            v))
    return entries


def run_lambda_sweep(suite: SuiteConfig,
                     rates: Sequence[float] = DEFAULT_LAMBDAS) -> List[SuiteEntry]:
    """Memory update-rate sweep on the full variant."""
    worlds = _generate_suite(suite)
    entries = []
    for rate in rates:
        entries.append(_run_one(
            worlds,
            lambda rate=rate: lc.structured_config(
                d=suite.width, variant="full", memory=MemoryConfig(rate=rate)),
            f"lambda={rate:g}"))
    return entries


def render_suite_table(entries: Sequence[SuiteEntry]) -> str:
    header = ("name\tHOTA\tDetA\tAssA\tMOTA\tIDF1\tIDSW\t"
              "emb_spread\temb_separation")
    lines = [header]
    for e in entries:
        m = e.metrics
        lines.append(
            f"{e.name}\t{m.hota:.4f}\t{m.deta:.4f}\t{m.assa:.4f}"
            f"\t{m.mota:.4f}\t{m.idf1:.4f}\t{m.idsw}"
            f"\t{e.spread:.4f}\t{e.separation:.4f}")
    return "\n".join(lines) + "\n"
