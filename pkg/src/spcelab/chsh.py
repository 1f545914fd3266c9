"""CHSH estimation from exact models and from recorded time-series.

Convention, fixed once for every caller:

    S = E(a, b) - E(a, b') + E(a', b) + E(a', b')

with E(a, b) = sum_xy xy P(x, y | a, b).  The sign of S then depends on
which physical directions are named a, a', b, b'; the classical bound and
the quantum maximum are statements about |S|, so reports carry the signed
value under this convention plus the maximum over the eight sign-variant
combinations (those with an odd number of minus signs) as a secondary
figure.

Standard errors are propagated per setting as independent binomial
experiments and combined in quadrature; different settings are separate
runs, never jointly sampled.  No-detection handling is explicit: the
``detected`` normalization conditions on coincidences (fair sampling),
``raw`` divides by all trials, deflating correlations by the detection
rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .directions import Direction, as_direction
from .errors import DataError, DomainError, ParameterError
from .quantum import OUTCOME_ORDER, Outcome
from .series import TimeSeries

CLASSICAL_BOUND = 2.0
TERM_SIGNS = (1.0, -1.0, 1.0, 1.0)
_EXACT_MARGIN = 1e-12
_SUM_TOL = 1e-9

# the CHSH family: every odd-minus-sign combination of the four terms
SIGN_VARIANTS = tuple(
    (s1, s2, s3, s4)
    for s1 in (1, -1)
    for s2 in (1, -1)
    for s3 in (1, -1)
    for s4 in (1, -1)
    if s1 * s2 * s3 * s4 == -1
)


@dataclass(frozen=True)
class ChshSettings:
    """The four analyzer directions of one CHSH run."""

    a: Direction
    a_prime: Direction
    b: Direction
    b_prime: Direction

    def __post_init__(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            if not isinstance(getattr(self, name), Direction):
                raise ParameterError(f"{name} must be a Direction")

    @classmethod
    def from_angles_deg(cls, a: float, a_prime: float, b: float, b_prime: float) -> "ChshSettings":
        return cls(as_direction(a), as_direction(a_prime), as_direction(b), as_direction(b_prime))

    @property
    def pairs(self) -> Tuple[Tuple[Direction, Direction], ...]:
        """Setting pairs in term order: (a,b), (a,b'), (a',b), (a',b')."""
        return (
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        )


@dataclass(frozen=True)
class CorrelationEstimate:
    """One setting's correlation with its sampling uncertainty."""

    value: float
    standard_error: float
    n_detected: int
    n_trials: int


@dataclass(frozen=True)
class ChshReport:
    """Signed CHSH value under the fixed convention, with per-term detail."""

    s_value: float
    standard_error: float
    correlations: Tuple[CorrelationEstimate, CorrelationEstimate, CorrelationEstimate, CorrelationEstimate]
    violation_flag: bool
    normalization: str
    max_sign_variant: float
    bound_classical: float = CLASSICAL_BOUND

    @property
    def abs_s(self) -> float:
        return abs(self.s_value)

    def term_values(self) -> Tuple[float, float, float, float]:
        return tuple(c.value for c in self.correlations)


def _assemble_report(correlations: Sequence[CorrelationEstimate], normalization: str) -> ChshReport:
    values = [c.value for c in correlations]
    s_value = float(sum(sign * v for sign, v in zip(TERM_SIGNS, values)))
    se = float(math.sqrt(sum(c.standard_error**2 for c in correlations)))
    best = max(float(sum(s * v for s, v in zip(signs, values))) for signs in SIGN_VARIANTS)
    violation = abs(s_value) - CLASSICAL_BOUND > max(3.0 * se, _EXACT_MARGIN)
    return ChshReport(
        s_value=s_value,
        standard_error=se,
        correlations=tuple(correlations),
        violation_flag=violation,
        normalization=normalization,
        max_sign_variant=best,
    )


def chsh_from_model(prob_fn: Callable, settings: ChshSettings) -> ChshReport:
    """Exact CHSH from a probability model prob_fn(a, b, outcome) -> float.

    Each setting's four outcome probabilities must sum to 1 within 1e-9.
    Standard errors are zero; the violation flag compares |S| against the
    bound with a 1e-12 margin.
    """
    correlations = []
    for a, b in settings.pairs:
        probs = {}
        for x, y in OUTCOME_ORDER:
            p = float(prob_fn(a, b, Outcome(x, y)))
            if not (-_SUM_TOL <= p <= 1.0 + _SUM_TOL):
                raise DomainError(f"model probability {p!r} outside [0, 1]")
            probs[(x, y)] = p
        total = sum(probs.values())
        if abs(total - 1.0) > _SUM_TOL:
            raise DomainError(f"model outcome probabilities sum to {total!r}, not 1")
        e = sum(x * y * p for (x, y), p in probs.items())
        correlations.append(CorrelationEstimate(float(e), 0.0, 0, 0))
    return _assemble_report(correlations, "exact")


def correlation_from_counts(
    counts: np.ndarray, n_trials: Optional[int] = None, normalization: str = "detected"
) -> CorrelationEstimate:
    """Plug-in correlation from a (2, 2) coincidence count table.

    counts[ix, iy] counts outcome (+1/-1 by index).  ``detected`` divides
    by the table total; ``raw`` divides by n_trials, treating missing
    trials as zeros in the product estimator.
    """
    c = np.asarray(counts, dtype=np.int64)
    if c.shape != (2, 2) or np.any(c < 0):
        raise ParameterError("counts must be a non-negative (2, 2) table")
    n_detected = int(c.sum())
    if n_detected == 0:
        raise DataError("no detected coincidences; correlation undefined")
    signed = float(c[0, 0] - c[0, 1] - c[1, 0] + c[1, 1])
    if normalization == "detected":
        n = n_detected
        e = signed / n
        var = max(1.0 - e * e, 0.0)
    elif normalization == "raw":
        if n_trials is None or n_trials < n_detected:
            raise ParameterError("raw normalization needs n_trials >= detected count")
        n = n_trials
        e = signed / n
        var = max(n_detected / n - e * e, 0.0)
    else:
        raise ParameterError(f"normalization must be 'detected' or 'raw', got {normalization!r}")
    se = math.sqrt(var / n)
    return CorrelationEstimate(e, se, n_detected, n_trials if n_trials is not None else n_detected)


def chsh_from_counts(
    count_tables: Sequence[np.ndarray],
    n_trials: Optional[Sequence[int]] = None,
    normalization: str = "detected",
) -> ChshReport:
    """CHSH from four count tables in term order (ab, ab', a'b, a'b')."""
    tables = list(count_tables)
    if len(tables) != 4:
        raise ParameterError(f"need exactly 4 count tables, got {len(tables)}")
    totals = list(n_trials) if n_trials is not None else [None] * 4
    correlations = [
        correlation_from_counts(t, n, normalization) for t, n in zip(tables, totals)
    ]
    return _assemble_report(correlations, normalization)


def chsh_from_series(
    series: Sequence[TimeSeries], normalization: str = "detected"
) -> ChshReport:
    """Empirical CHSH from four recorded series in term order.

    The violation flag is set when |S| - 2 exceeds three combined standard
    errors; swap to ``raw`` normalization to see the efficiency deflation
    instead of conditioning on coincidences.
    """
    runs = list(series)
    if len(runs) != 4:
        raise ParameterError(f"need exactly 4 series, got {len(runs)}")
    correlations = []
    for s in runs:
        if s.n_detected == 0:
            raise DataError(f"series {s.setting_id!r} has no detected coincidences")
        correlations.append(
            correlation_from_counts(s.joint_counts(), s.n_trials, normalization)
        )
    return _assemble_report(correlations, normalization)
