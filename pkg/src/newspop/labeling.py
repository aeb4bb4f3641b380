"""Binary high/low target from a training-set quantile threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

K_GRID = (0.5, 0.65, 0.8)


@dataclass(frozen=True)
class LabelPolicy:
    k: float
    delta: int


def fit_threshold(training_popularities: Sequence[int], k: float) -> LabelPolicy:
    """Nearest-rank quantile: smallest training value ``v`` with ``#(x <= v) / n >= k``."""
    if not 0.0 < k < 1.0:
        raise ValueError(f"k must lie in (0, 1), got {k}")
    values = np.sort(np.asarray(training_popularities, dtype=np.int64))
    n = values.size
    if n == 0:
        raise ValueError("cannot fit a threshold on an empty training set")
    # rank r satisfies r / n >= k; round before ceil so k*n = 50.000000000000007 stays 50
    rank = max(1, math.ceil(round(k * n, 9)))
    return LabelPolicy(k=float(k), delta=int(values[rank - 1]))


def label(popularity: int, policy: LabelPolicy) -> int:
    return 1 if popularity > policy.delta else 0


def label_many(popularities: Sequence[int], policy: LabelPolicy) -> np.ndarray:
    return (np.asarray(popularities, dtype=np.int64) > policy.delta).astype(np.int64)
