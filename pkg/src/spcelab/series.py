"""Outcome time-series: the common record format of all three generators.

A series holds one coincidence experiment's trials in order: per trial a
pair (x, y) with x, y in {+1, -1}, or a no-detection mark when the
coincidence was lost to finite counting efficiency.  Internally the mark
is 0 in both columns (detection is modeled per pair, never per side);
externally it is the literal token ``ND``.

Trial indices are implicit: trial k is row k, counting from 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .errors import DomainError

ND = 0
ND_TOKEN = "ND"
MODEL_TAGS = ("quantum", "contextual", "lrhv", "external")


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """One trial, as parsed from or written to the external format."""

    trial_index: int
    setting_id: str
    x: int
    y: int

    @property
    def detected(self) -> bool:
        return self.x != ND


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Ordered outcomes of one run at one setting, plus provenance tags."""

    setting_id: str
    x: np.ndarray
    y: np.ndarray
    run_id: str = ""
    seed: Optional[int] = None
    model_tag: str = "external"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int8)
        y = np.asarray(self.y, dtype=np.int8)
        if x.ndim != 1 or x.shape != y.shape:
            raise DomainError(f"x and y must be equal-length 1-d arrays, got {x.shape} and {y.shape}")
        if x.size < 1:
            raise DomainError("a series needs at least one trial")
        for name, arr in (("x", x), ("y", y)):
            bad = ~np.isin(arr, (-1, ND, 1))
            if np.any(bad):
                raise DomainError(f"{name} contains values outside {{+1, -1, {ND_TOKEN}}}")
        if np.any((x == ND) != (y == ND)):
            raise DomainError("no-detection marks a whole trial; x and y must carry it together")
        if self.model_tag not in MODEL_TAGS:
            raise DomainError(f"model_tag must be one of {MODEL_TAGS}, got {self.model_tag!r}")
        x = x.copy()
        y = y.copy()
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_trials(self) -> int:
        return int(self.x.size)

    @property
    def detected(self) -> np.ndarray:
        """Boolean mask of trials with a recorded coincidence."""
        return self.x != ND

    @property
    def n_detected(self) -> int:
        return int(np.count_nonzero(self.detected))

    def detected_xy(self) -> Tuple[np.ndarray, np.ndarray]:
        mask = self.detected
        return self.x[mask], self.y[mask]

    def joint_counts(self) -> np.ndarray:
        """Detected outcomes as a (2, 2) count table, index 0 = +1, 1 = -1."""
        xd, yd = self.detected_xy()
        cell = ((xd < 0).astype(np.intp) << 1) | (yd < 0)
        return np.bincount(cell, minlength=4).reshape(2, 2).astype(np.int64)

    def take(self, indices: np.ndarray) -> "TimeSeries":
        """Sub-series at the given trial indices (provenance tags kept)."""
        idx = np.asarray(indices, dtype=np.intp)
        return replace(self, x=self.x[idx], y=self.y[idx])

    def relabeled(self) -> "TimeSeries":
        """The series with +1 and -1 swapped on both sides (ND unchanged)."""
        return replace(self, x=-self.x, y=-self.y)
