"""Evaluation reports: versioned structured text plus rendered figures.

Report files are deterministic byte-for-byte for identical inputs; the
figures are rendered next to them (same stem) and are informational.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import MetricsReport, SequenceMetrics

REPORT_VERSION = 1


def _summary_lines(m: SequenceMetrics) -> List[str]:
    return [
        f"HOTA {m.hota:.4f}",
        f"DetA {m.deta:.4f}",
        f"AssA {m.assa:.4f}",
        f"MOTA {m.mota:.4f}",
        f"IDF1 {m.idf1:.4f}",
        f"IDSW {m.idsw}",
        f"FP {m.fp}",
        f"FN {m.fn}",
        f"IDTP {m.idtp}",
        f"GT {m.num_gt}",
        f"PRED {m.num_pred}",
    ]


def render_report(report: MetricsReport) -> str:
    """Versioned text report; summary columns follow HOTA DetA AssA MOTA IDF1."""
    lines = [f"motkit-report v{REPORT_VERSION}"]
    for m in report.sequences:
        lines.append(f"sequence {m.name}")
        lines.extend("  " + l for l in _summary_lines(m))
        if m.hota_curve:
            lines.append("  alpha DetA AssA HOTA")
            for a, d, s, h in zip(m.alphas, m.deta_curve, m.assa_curve,
                                  m.hota_curve):
                lines.append(f"  {a:.2f} {d:.4f} {s:.4f} {h:.4f}")
    if len(report.sequences) > 1:
        agg = report.aggregate
        lines.append("aggregate")
        lines.extend("  " + l for l in _summary_lines(agg))
    return "\n".join(lines) + "\n"


def write_report(report: MetricsReport, path, figures: bool = True) -> List[Path]:
    """Write the text report; render alpha-sweep figures alongside it.

    Returns the list of files written (report first).
    """
    path = Path(path)
    path.write_text(render_report(report))
    written = [path]
    if figures:
        written.append(plot_alpha_curves(report, path.with_name(path.stem + "_curves.png")))
    return written


def plot_alpha_curves(report: MetricsReport, out_path) -> Path:
    """DetA/AssA/HOTA against the localization threshold sweep."""
    m = report.sequences[0] if len(report.sequences) == 1 else report.aggregate
    fig, ax = plt.subplots(figsize=(6, 4))
    alphas = list(m.alphas)
    ax.plot(alphas, m.deta_curve, marker="o", ms=3, label="DetA")
    ax.plot(alphas, m.assa_curve, marker="s", ms=3, label="AssA")
    ax.plot(alphas, m.hota_curve, marker="^", ms=3, label="HOTA")
    ax.set_xlabel("localization threshold")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_comparison_table(rows: Sequence[Tuple[str, SequenceMetrics]]) -> str:
    """Delimited table (variant or lambda value per row)."""
    header = "name\tHOTA\tDetA\tAssA\tMOTA\tIDF1\tIDSW\tFP\tFN"
    out = [header]
    for name, m in rows:
        out.append(f"{name}\t{m.hota:.4f}\t{m.deta:.4f}\t{m.assa:.4f}"
                   f"\t{m.mota:.4f}\t{m.idf1:.4f}\t{m.idsw}\t{m.fp}\t{m.fn}")
    return "\n".join(out) + "\n"


def plot_comparison(rows: Sequence[Tuple[str, SequenceMetrics]], out_path,
                    title: str = "") -> Path:
    """Grouped bars of HOTA/DetA/AssA/IDF1 per row."""
    names = [name for name, _ in rows]
    metrics = ["hota", "deta", "assa", "idf1"]
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.arange(len(names))
    w = 0.2
    for k, attr in enumerate(metrics):
        vals = [getattr(m, attr) for _, m in rows]
        ax.bar(x + (k - 1.5) * w, vals, width=w, label=attr.upper())
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=15)
    ax.set_ylim(0, 1.02)
    ax.grid(axis="y", alpha=0.3)
    ax.legend(ncol=4, fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def embedding_dispersion(embedding_log) -> Tuple[float, float]:
    """Numeric stand-in for embedding-cloud visualizations.

    Returns (within-track spread, between-track separation): the average
    per-track standard deviation of embeddings over time, and the average
    distance between distinct tracks' mean embeddings. A stable,
    distinguishable representation has low spread and high separation.
    """
    by_track = {}
    for _, track_id, emb in embedding_log:
        by_track.setdefault(track_id, []).append(emb)
    by_track = {k: np.array(v) for k, v in by_track.items() if len(v) >= 3}
    if len(by_track) < 2:
        return 0.0, 0.0
    spreads = [float(np.mean(np.std(v, axis=0))) for v in by_track.values()]
    means = np.array([v.mean(axis=0) for v in by_track.values()])
    seps = []
    for i in range(len(means)):
        for j in range(i + 1, len(means)):
            seps.append(float(np.linalg.norm(means[i] - means[j])))
    return float(np.mean(spreads)), float(np.mean(seps))
