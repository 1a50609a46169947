"""Horizon-shifted targets and the cohort filtering rules.

Canonical order when preparing a cohort: ``truncate_after_onset``, then
``clip_to_day_range``, then ``shift_labels``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigError, EmptyResultError

if TYPE_CHECKING:
    from .cohort import PatientSeries

UNKNOWN = -1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LabelTrack:
    """Hourly onset indicators and, once shifted, the horizon target.

    ``onset`` holds 0/1 per hour, or ``UNKNOWN`` (-1) where the input label
    was empty. ``shifted[i] == onset[i + horizon]``.
    """

    onset: np.ndarray
    horizon: int | None = None
    shifted: np.ndarray | None = None

    def __post_init__(self):
        onset = np.asarray(self.onset, dtype=np.int8)
        if not np.isin(onset, (0, 1, UNKNOWN)).all():
            raise ValueError("onset values must be 0, 1 or -1 (unknown)")
        object.__setattr__(self, "onset", _frozen(onset.copy()))
        if (self.horizon is None) != (self.shifted is None):
            raise ValueError("horizon and shifted must be given together")
        if self.shifted is not None:
            shifted = _frozen(np.asarray(self.shifted, dtype=np.int8).copy())
            if len(shifted) != len(onset) - self.horizon:
                raise ValueError("shifted length must equal len(onset) - horizon")
            object.__setattr__(self, "shifted", shifted)

    def __len__(self) -> int:
        return len(self.onset)

    def take(self, rows: slice) -> "LabelTrack":
        """Restrict to a contiguous row range; drops any shift."""
        return LabelTrack(self.onset[rows])

    def unshift(self) -> np.ndarray:
        """Move ``shifted`` back ``horizon`` hours; the first ``horizon`` hours are unknown."""
        if self.shifted is None:
            raise ValueError("track is not shifted")
        return np.concatenate([np.full(self.horizon, UNKNOWN, np.int8), self.shifted])


def shift_labels(track: LabelTrack, h: int) -> LabelTrack:
    """Move labels ``h`` hours earlier; the last ``h`` rows lose their target."""
    if h < 0:
        raise ConfigError(f"horizon must be >= 0, got {h}")
    if h >= len(track.onset):
        raise EmptyResultError(f"horizon {h} leaves no rows in a series of length {len(track.onset)}")
    return LabelTrack(track.onset, horizon=h, shifted=track.onset[h:])


def truncate_after_onset(series: PatientSeries) -> PatientSeries:
    """Drop every hour after the first onset; the onset hour itself stays."""
    hits = np.flatnonzero(series.labels.onset == 1)
    if hits.size == 0 or hits[0] == series.n_hours - 1:
        return series
    return series.take(slice(0, hits[0] + 1))


def day_to_hours(start_day: int, end_day: int) -> tuple[int, int]:
    """Inclusive hour range for days ``start_day..end_day`` (day 1 = hours 0-23)."""
    if not 1 <= start_day <= end_day:
        raise ConfigError(f"need 1 <= start_day <= end_day, got {start_day}, {end_day}")
    return 24 * (start_day - 1), 24 * end_day - 1


def clip_to_day_range(series: PatientSeries, start_day: int, end_day: int) -> PatientSeries:
    """Keep rows whose hour falls inside the day range.

    Raises ``EmptyResultError`` when nothing is left, which callers treat as
    excluding the patient.
    """
    lo, hi = day_to_hours(start_day, end_day)
    first = max(lo, series.start_hour) - series.start_hour
    last = min(hi, series.start_hour + series.n_hours - 1) - series.start_hour
    if last < first:
        raise EmptyResultError(f"patient {series.patient_id} has no hours in days {start_day}-{end_day}")
    if first == 0 and last == series.n_hours - 1:
        return series
    return series.take(slice(first, last + 1))


def shift_series(series: PatientSeries, h: int) -> PatientSeries:
    return replace(series, labels=shift_labels(series.labels, h))
