"""Non-parametric ensemble-purity tests on outcome time-series.

Operational criterion: a recorded series comes from a pure ensemble when
its counting-rate distributions are statistically invariant across rich
random sub-ensembles, and its trial order carries no reproducible fine
structure.  Three tests realize this:

* chi-square homogeneity of outcome-category counts across random
  subsamples (and across the first/second half as a fixed partition),
* Wald-Wolfowitz runs on each side's detected outcome sequence,
* the suite aggregates them under a Bonferroni family correction.

Category scheme: the four coincidence outcomes, plus no-detection as its
own counting category whenever the series contains any, so efficiency
drift is tested on the same footing as outcome drift.

Known blind spot, by design: these tests see only counting rates and run
structure, so an exchangeable shuffle of a mixed ensemble is
indistinguishable from a pure one.  Distinguishing mixtures requires the
order structure the shuffle destroys.

Calibration note: random subsamples of fraction f are drawn without
replacement, so category counts are hypergeometric and the plain Pearson
statistic is deflated by about (1 - f) relative to its chi-square
reference.  When the parent length is passed, the statistic is rescaled
by (n - 1)/(n - s), restoring the nominal size; fixed partitions (the
half-vs-half test) use the classic statistic unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.stats import chi2, norm

from .errors import ParameterError
from .series import ND, TimeSeries

RICHNESS_FLOOR = 30
DEFAULT_ALPHA = 0.05

_CATEGORY_LABELS = ("pp", "pm", "mp", "mm", "nd")


@dataclass(frozen=True)
class PurityReport:
    """One test's outcome; reject exactly when p_value < alpha."""

    test_name: str
    statistic: float
    p_value: float
    alpha: float
    params: Dict[str, object] = field(default_factory=dict)
    warning: str = ""
    applicable: bool = True

    @property
    def reject(self) -> bool:
        return self.applicable and self.p_value < self.alpha


@dataclass(frozen=True)
class PurityConfig:
    """Subsample scheme and family error level for the suite."""

    alpha: float = DEFAULT_ALPHA
    n_subsamples: int = 5
    fraction: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.n_subsamples < 2:
            raise ParameterError("need at least 2 subsamples")
        if not (0.0 < self.fraction <= 1.0):
            raise ParameterError(f"fraction must lie in (0, 1], got {self.fraction!r}")


@dataclass(frozen=True)
class PuritySuiteResult:
    """All reports plus the family verdict."""

    reports: List[PurityReport]
    family_alpha: float

    @property
    def pure_consistent(self) -> bool:
        return not any(r.reject for r in self.reports)


def random_subensembles(
    series: TimeSeries, m: int, fraction: float, rng: np.random.Generator
) -> List[TimeSeries]:
    """m random sub-series, each round(fraction * n) trials without replacement.

    Subsamples are drawn independently of each other, so they overlap;
    indices are kept in trial order inside each subsample.  The richness
    floor rejects subsamples under 30 trials.
    """
    if m < 1:
        raise ParameterError(f"need m >= 1 subsamples, got {m}")
    if not (0.0 < fraction <= 1.0):
        raise ParameterError(f"fraction must lie in (0, 1], got {fraction!r}")
    n = series.n_trials
    size = int(round(fraction * n))
    if size < RICHNESS_FLOOR:
        raise ParameterError(
            f"subsample of {size} trials is below the richness floor {RICHNESS_FLOOR}; "
            "use a longer series or a larger fraction"
        )
    out = []
    for _ in range(m):
        idx = np.sort(rng.permutation(n)[:size])
        out.append(series.take(idx))
    return out


def _category_counts(series: TimeSeries, with_nd: bool) -> np.ndarray:
    """Counts over (pp, pm, mp, mm[, nd]) for one series."""
    xd, yd = series.detected_xy()
    cell = ((xd < 0).astype(np.intp) << 1) | (yd < 0)
    counts = np.bincount(cell, minlength=4).astype(np.int64)
    if with_nd:
        counts = np.append(counts, series.n_trials - xd.size)
    return counts


def homogeneity_test(
    subsamples: Sequence[TimeSeries],
    alpha: float = DEFAULT_ALPHA,
    population_size: Optional[int] = None,
    test_name: str = "subsample-homogeneity",
) -> PurityReport:
    """Chi-square homogeneity of category counts across subsamples.

    population_size triggers the without-replacement rescaling described
    in the module docstring; leave it None for fixed partitions.  Columns
    empty in every subsample are dropped; a report-level warning flags
    expected cells under 5.
    """
    subs = list(subsamples)
    if len(subs) < 2:
        raise ParameterError("homogeneity needs at least 2 subsamples")
    ids = {s.setting_id for s in subs}
    if len(ids) > 1:
        raise ParameterError(f"subsamples mix settings {sorted(ids)}; compare one setting at a time")
    with_nd = any(s.n_detected < s.n_trials for s in subs)
    table = np.stack([_category_counts(s, with_nd) for s in subs])
    labels = list(_CATEGORY_LABELS[:4]) + (["nd"] if with_nd else [])
    keep = table.sum(axis=0) > 0
    table = table[:, keep]
    labels = [l for l, k in zip(labels, keep) if k]
    params: Dict[str, object] = {
        "n_subsamples": len(subs),
        "categories": ",".join(labels),
        "population_size": population_size,
    }
    if table.shape[1] < 2:
        return PurityReport(
            test_name, 0.0, 1.0, alpha, params,
            warning="fewer than 2 observed categories; nothing to compare",
            applicable=False,
        )
    row = table.sum(axis=1, keepdims=True).astype(np.float64)
    col = table.sum(axis=0, keepdims=True).astype(np.float64)
    total = float(table.sum())
    expected = row @ col / total
    stat = float(((table - expected) ** 2 / expected).sum())
    if population_size is not None:
        sizes = {s.n_trials for s in subs}
        if len(sizes) != 1:
            raise ParameterError("the without-replacement rescaling needs equal subsample sizes")
        size = sizes.pop()
        if not (0 < size <= population_size):
            raise ParameterError("population_size must be at least the subsample size")
        if size < population_size:
            stat *= (population_size - 1.0) / (population_size - size)
        params["subsample_size"] = size
    df = (table.shape[0] - 1) * (table.shape[1] - 1)
    p_value = float(chi2.sf(stat, df))
    params["df"] = df
    warning = "" if np.all(expected >= 5.0) else "some expected cell counts are below 5"
    return PurityReport(test_name, stat, p_value, alpha, params, warning=warning)


def half_split_test(series: TimeSeries, alpha: float = DEFAULT_ALPHA) -> PurityReport:
    """First half vs second half counting rates (fixed partition, classic)."""
    n = series.n_trials
    if n < 2 * RICHNESS_FLOOR:
        raise ParameterError(f"half-split needs at least {2 * RICHNESS_FLOOR} trials, got {n}")
    half = n // 2
    first = series.take(np.arange(half))
    second = series.take(np.arange(half, n))
    report = homogeneity_test([first, second], alpha=alpha, test_name="half-split")
    return report


def _side_values(series: Union[TimeSeries, np.ndarray], side: str) -> np.ndarray:
    if isinstance(series, TimeSeries):
        if side not in ("x", "y"):
            raise ParameterError(f"side must be 'x' or 'y', got {side!r}")
        values = series.x if side == "x" else series.y
        return values[values != ND]
    values = np.asarray(series)
    if values.ndim != 1:
        raise ParameterError("runs test needs a 1-d outcome sequence")
    return values[values != ND]


def runs_test(
    series: Union[TimeSeries, np.ndarray], side: str = "x", alpha: float = DEFAULT_ALPHA
) -> PurityReport:
    """Wald-Wolfowitz runs test for serial structure in one side's outcomes.

    Counts maximal same-sign runs R among the detected outcomes; under
    exchangeability R is asymptotically normal with mean 2 n1 n2 / n + 1
    and variance 2 n1 n2 (2 n1 n2 - n) / (n^2 (n - 1)).  Two-sided: too
    few runs means clumping, too many means anti-persistent alternation.
    Invisible to any reordering-invariant statistic, which is exactly why
    the suite includes it.
    """
    values = _side_values(series, side)
    name = f"runs-{side}" if isinstance(series, TimeSeries) else "runs"
    n = int(values.size)
    if n < RICHNESS_FLOOR:
        raise ParameterError(f"runs test needs at least {RICHNESS_FLOOR} detected outcomes, got {n}")
    n1 = int(np.count_nonzero(values > 0))
    n2 = n - n1
    params: Dict[str, object] = {"n": n, "n_plus": n1, "n_minus": n2}
    if n1 == 0 or n2 == 0:
        return PurityReport(
            name, 0.0, 1.0, alpha, params,
            warning="all outcomes identical; run structure is undefined",
            applicable=False,
        )
    runs = int(1 + np.count_nonzero(values[1:] != values[:-1]))
    mu = 2.0 * n1 * n2 / n + 1.0
    var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0))
    z = (runs - mu) / np.sqrt(var)
    p_value = float(2.0 * norm.sf(abs(z)))
    params.update({"runs": runs, "z": float(z)})
    return PurityReport(name, float(z), min(p_value, 1.0), alpha, params)


def purity_suite(
    series: TimeSeries, rng: np.random.Generator, config: Optional[PurityConfig] = None
) -> PuritySuiteResult:
    """Run the full purity battery with a Bonferroni family correction.

    Four tests: homogeneity across random subsamples, homogeneity across
    the half partition, and runs on each side.  The series is declared
    pure-consistent exactly when none rejects at family_alpha / 4.
    """
    cfg = config or PurityConfig()
    per_test_alpha = cfg.alpha / 4.0
    subs = random_subensembles(series, cfg.n_subsamples, cfg.fraction, rng)
    reports = [
        homogeneity_test(subs, alpha=per_test_alpha, population_size=series.n_trials),
        half_split_test(series, alpha=per_test_alpha),
        runs_test(series, side="x", alpha=per_test_alpha),
        runs_test(series, side="y", alpha=per_test_alpha),
    ]
    return PuritySuiteResult(reports=reports, family_alpha=cfg.alpha)
