"""Deterministic named random substreams.

Every stochastic component draws from a substream derived from the global
seed plus a tuple of labels (strings or non-negative integers). Streams are
independent of call order and scheduling, which is what makes whole runs
bit-reproducible regardless of worker count.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _label_to_int(label) -> int:
    if isinstance(label, (bool,)):
        raise TypeError("boolean substream labels are ambiguous; use int or str")
    if isinstance(label, (int, np.integer)):
        value = int(label)
        if value < 0:
            raise ValueError(f"substream labels must be non-negative, got {value}")
        return value
    if isinstance(label, str):
        digest = hashlib.sha256(label.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"unsupported substream label type: {type(label).__name__}")


def substream(seed: int, *labels) -> np.random.Generator:
    """Generator for the (seed, labels...) stream.

    Stable across processes and platforms: string labels are folded to
    integers with SHA-256, then mixed into a SeedSequence spawn key.
    """
    key = tuple(_label_to_int(label) for label in labels)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
