"""Query-based multi-object tracking at desk scale.

The package bundles a small dense linear-algebra core with reverse-mode
differentiation, attention/MLP blocks, a temporal interaction module with
per-track long-term memory, a split detection/joint decoder, the online
track lifecycle, a deterministic scenario generator, and a from-scratch
tracking metrics engine (Hungarian assignment, HOTA, CLEAR-MOT, IDF1).
"""

__version__ = "0.1.0"
