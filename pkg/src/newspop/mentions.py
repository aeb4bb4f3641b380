"""Hourly mention series and the popularity target over a prediction window."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

TP_GRID = (0, 4, 8, 12, 16, 20)

UTC = dt.timezone.utc


@dataclass(frozen=True)
class MentionSeries:
    """Hourly mention counts of one entity; absent ``(day, hour)`` keys are 0."""

    entity_id: str
    counts: Mapping[tuple[dt.date, int], int] = field(default_factory=dict)

    def __post_init__(self):
        for (day, hour), c in self.counts.items():
            if not 0 <= hour <= 23:
                raise ValueError(f"hour out of range: {hour}")
            if c < 0:
                raise ValueError(f"negative count at {day} {hour}: {c}")
        object.__setattr__(self, "counts", MappingProxyType(dict(self.counts)))

    def hourly(self, day: dt.date) -> np.ndarray:
        return np.array([self.counts.get((day, h), 0) for h in range(24)], dtype=np.int64)


@dataclass(frozen=True)
class PredictionWindow:
    """Hours ``t_p..23`` of ``day``; the horizon is always 23:59:59."""

    day: dt.date
    t_p: int

    def __post_init__(self):
        if self.t_p not in TP_GRID:
            raise ValueError(f"t_p must be one of {TP_GRID}, got {self.t_p}")


def window_popularity(series: MentionSeries, window: PredictionWindow) -> int:
    # t_p = 0 naturally spans the whole day
    return int(sum(series.counts.get((window.day, h), 0) for h in range(window.t_p, 24)))


def news_feature_interval(day: dt.date, t_p: int) -> tuple[dt.datetime, dt.datetime]:
    """Closed interval of news time used for features when predicting ``day`` at ``t_p``.

    >>> news_feature_interval(dt.date(2015, 3, 10), 8)[1].time()
    datetime.time(7, 59, 59)
    """
    if t_p not in TP_GRID:
        raise ValueError(f"t_p must be one of {TP_GRID}, got {t_p}")
    if t_p == 0:
        prev = day - dt.timedelta(days=1)
        start = dt.datetime.combine(prev, dt.time(0, 0, 0), tzinfo=UTC)
        end = dt.datetime.combine(prev, dt.time(23, 59, 59), tzinfo=UTC)
    else:
        start = dt.datetime.combine(day, dt.time(0, 0, 0), tzinfo=UTC)
        end = dt.datetime.combine(day, dt.time(t_p - 1, 59, 59), tzinfo=UTC)
    return start, end


def feature_span(day: dt.date, t_p: int) -> tuple[dt.date, int]:
    """``(feature_day, end_hour)`` such that features cover hours ``[0, end_hour)`` of ``feature_day``."""
    if t_p == 0:
        return day - dt.timedelta(days=1), 24
    return day, t_p
