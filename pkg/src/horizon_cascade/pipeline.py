"""Cohort preparation: truncate, clip, select groups, impute."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .cohort import Cohort, carry_forward_impute, observed_medians, select_groups
from .errors import DataError, EmptyResultError
from .labeling import clip_to_day_range, truncate_after_onset

logger = logging.getLogger(__name__)

FIRST_DAY = 2
LAST_DAY = 14


@dataclass
class PreparedCohort:
    cohort: Cohort
    excluded: list[tuple[str, str]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def filter_cohort(cohort: Cohort, start_day: int = FIRST_DAY, end_day: int = LAST_DAY) -> PreparedCohort:
    """Drop hours after each patient's first onset, then keep days ``start_day..end_day``.

    Patients with no hours left are excluded and listed, not treated as errors.
    Patients whose onset falls before ``start_day`` stay as negatives-only.
    """
    kept, excluded = [], []
    onset_before_window = 0
    for p in cohort.patients:
        truncated = truncate_after_onset(p)
        try:
            clipped = clip_to_day_range(truncated, start_day, end_day)
        except EmptyResultError as exc:
            excluded.append((p.patient_id, str(exc)))
            continue
        if (truncated.labels.onset == 1).any() and not (clipped.labels.onset == 1).any():
            onset_before_window += 1
        kept.append(clipped)
    if not kept:
        raise DataError(f"no patient has any hours in days {start_day}-{end_day}")
    notes = [
        f"rows after the first onset removed; hours outside days {start_day}-{end_day} removed",
        f"{len(excluded)} patients excluded with no hours in the day window",
    ]
    if onset_before_window:
        notes.append(f"{onset_before_window} patients with onset before day {start_day} kept as negatives only")
    logger.info("filtered cohort: %d kept, %d excluded", len(kept), len(excluded))
    return PreparedCohort(Cohort(cohort.schema, tuple(kept)), excluded, notes)


def prepare_cohort(
    cohort: Cohort,
    groups=None,
    start_day: int = FIRST_DAY,
    end_day: int = LAST_DAY,
) -> PreparedCohort:
    """Filter, restrict to ``groups`` (all when None) and carry-forward impute.

    Medians for leading gaps come from the filtered cohort's observed cells.
    They are per column, so selecting groups first gives the same values.
    """
    prepared = filter_cohort(cohort, start_day, end_day)
    filtered = prepared.cohort
    if groups is not None:
        filtered = select_groups(filtered, groups)
    imputed = carry_forward_impute(filtered, observed_medians(filtered))
    prepared.notes.append("leading gaps filled with the cohort median of observed values; later gaps carried forward")
    return PreparedCohort(imputed, prepared.excluded, prepared.notes)
