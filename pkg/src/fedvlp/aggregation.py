"""Server-side model aggregation.

This module is the privacy boundary of the system: the only things that cross
it are weight vectors and dataset sizes. It must not import any module that
carries raw fingerprints (sensing, optics, environment); an architecture test
enforces that.
"""
from __future__ import annotations

import numpy as np

from .nn.weights import ModelWeights


def aggregate(local_updates) -> ModelWeights:
    """Dataset-size-weighted average of client weights.

    ``local_updates`` is a sequence of (ModelWeights, dataset_size) pairs,
    already in ascending client order; the reduction order is fixed so the
    result is bit-reproducible regardless of scheduling.
    """
    updates = list(local_updates)
    if not updates:
        raise ValueError("cannot aggregate zero client updates")
    layout = updates[0][0].layout
    total = 0
    for k, (weights, size) in enumerate(updates):
        if weights.layout != layout:
            raise ValueError(f"client {k} weight layout differs from client 0")
        if size < 0:
            raise ValueError("dataset sizes must be non-negative")
        total += size
    if total <= 0:
        raise ValueError("total dataset size must be positive")
    out = np.zeros_like(updates[0][0].values)
    for weights, size in updates:
        out += (size / total) * weights.values
    return ModelWeights(out, layout)
