"""Local hidden-variable models and the contextual generalization.

The local-realistic structure: each pair carries a hidden parameter lam
drawn from a context-independent distribution, and the two stations answer
independently,

    P(x, y | A, B) = Int p1(x | A, lam) p2(y | B, lam) rho(lam) dlam.

Any such model obeys the CHSH bound |S| <= 2.  Dropping context
independence gives the strictly larger contextual family

    P(x, y | A, B) = Int p(x, y | A, B, lam) rho_AB(lam) dlam

over a context-indexed parameter space, which can reproduce any target
coincidence distribution, the exact singlet one included.  The
factorization checker separates the two families pointwise in lam.

Conventions:

* Joint tables are (2, 2) arrays indexed [ix, iy] with index 0 for
  outcome +1 and index 1 for -1.
* The canonical deterministic response is s1 = sign(a.lam),
  s2 = -sign(b.lam), with sign(0) resolved to +1 before the negation.
* The protocol sampler evaluates every listed setting on the same draw,
  which is well defined only for deterministic responses; stochastic
  responses are restricted to one setting per draw.

Stream layout: an atomic draw consumes 1 uniform, a sphere draw consumes
2 (as one (n, 2) block); the stochastic protocol consumes one extra
(n, 2) block of response uniforms after the lam draws.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .backend import kernels
from .directions import Direction, random_directions
from .errors import ContractError, DataError, DomainError, ParameterError
from .quantum import Outcome

KERNEL_SUM_TOL = 1e-9
FACTORIZATION_TOL = 1e-10

_MIN_MC_SAMPLES = 100


def _outcome_index(v: int) -> int:
    return 0 if v > 0 else 1


# ---------------------------------------------------------------------------
# hidden-variable ensembles


@dataclass(frozen=True)
class AtomicEnsemble:
    """Finite ensemble {(lam_k, n_k)}: n_k pairs carry parameter lam_k.

    lams is (k, 3) unit direction rows, or a (k,) integer array of opaque
    ids pointing into a table kernel.
    """

    lams: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        lams = np.asarray(self.lams)
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 1:
            raise ParameterError("counts must be a non-empty 1-d array")
        if np.any(counts <= 0):
            raise ParameterError("all atom counts must be positive")
        if lams.ndim == 2 and lams.shape[1] == 3:
            lams = np.asarray(lams, dtype=np.float64)
            norms = np.linalg.norm(lams, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-12):
                raise ParameterError("direction-valued atoms must be unit vectors")
        elif lams.ndim == 1:
            lams = np.asarray(lams, dtype=np.int64)
        else:
            raise ParameterError(f"lams must be (k, 3) directions or (k,) ids, got shape {lams.shape}")
        if lams.shape[0] != counts.shape[0]:
            raise ParameterError("lams and counts must have the same length")
        lams = lams.copy()
        counts = counts.copy()
        lams.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "lams", lams)
        object.__setattr__(self, "counts", counts)

    @property
    def is_indexed(self) -> bool:
        return self.lams.ndim == 1

    @property
    def weights(self) -> np.ndarray:
        return self.counts / float(self.counts.sum())

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n atoms with replacement, proportional to counts; 1 uniform per draw."""
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(cum, rng.random(n), side="right")
        np.minimum(idx, self.lams.shape[0] - 1, out=idx)
        return self.lams[idx]


class SphereEnsemble:
    """Continuous ensemble: lam uniform on the unit sphere."""

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return random_directions(n, rng)

    def __repr__(self):
        return "SphereEnsemble()"


Ensemble = Union[AtomicEnsemble, SphereEnsemble]


# ---------------------------------------------------------------------------
# response models


class DeterministicSignResponse:
    """s1 = sign(a.lam), s2 = -sign(b.lam); sign(0) -> +1.

    Situation-1 response: both conditional probabilities are 0 or 1 for
    every (direction, lam), so outcomes for all settings coexist on one
    draw.
    """

    kind = "deterministic-sign"

    def p1_plus(self, a: Direction, lams: np.ndarray) -> np.ndarray:
        return (lams @ a.vec >= 0.0).astype(np.float64)

    def p2_plus(self, b: Direction, lams: np.ndarray) -> np.ndarray:
        return (lams @ b.vec < 0.0).astype(np.float64)

    def sphere_joint(self, a: Direction, b: Direction, out: Outcome) -> float:
        """Exact uniform-sphere average.

        sign(a.lam) and sign(b.lam) differ exactly when lam falls in the
        lune between the two boundary great circles, of relative area
        theta/pi; the four outcomes split it symmetrically.
        """
        theta = a.angle_to(b)
        if out.x == out.y:
            return theta / (2.0 * math.pi)
        return (math.pi - theta) / (2.0 * math.pi)


class StochasticResponse:
    """Factorizing stochastic response built from two conditional laws.

    p1_plus_fn(a, lams) and p2_plus_fn(b, lams) return the probability of
    outcome +1 on each side, as arrays over the lam rows; values must lie
    in [0, 1].  Locality is structural: the joint law is always the
    product of the two sides.
    """

    kind = "stochastic-independent"

    def __init__(self, p1_plus_fn: Callable, p2_plus_fn: Callable):
        self._p1 = p1_plus_fn
        self._p2 = p2_plus_fn

    def p1_plus(self, a: Direction, lams: np.ndarray) -> np.ndarray:
        return self._check(np.asarray(self._p1(a, lams), dtype=np.float64))

    def p2_plus(self, b: Direction, lams: np.ndarray) -> np.ndarray:
        return self._check(np.asarray(self._p2(b, lams), dtype=np.float64))

    @staticmethod
    def _check(p: np.ndarray) -> np.ndarray:
        if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12):
            raise DomainError("response probabilities must lie in [0, 1]")
        return np.clip(p, 0.0, 1.0)


def linear_response() -> StochasticResponse:
    """The smooth factorizing benchmark: p1(+|a,lam) = (1 + a.lam)/2,
    p2(+|b,lam) = (1 - b.lam)/2."""
    return StochasticResponse(
        lambda a, lams: (1.0 + lams @ a.vec) * 0.5,
        lambda b, lams: (1.0 - lams @ b.vec) * 0.5,
    )


ResponseModel = Union[DeterministicSignResponse, StochasticResponse]


# ---------------------------------------------------------------------------
# probabilities


def _joint_from_sides(p1p: np.ndarray, p2p: np.ndarray, out: Outcome) -> np.ndarray:
    px = p1p if out.x > 0 else 1.0 - p1p
    py = p2p if out.y > 0 else 1.0 - p2p
    return px * py


def lrhv_probability(
    ensemble: Ensemble,
    response: ResponseModel,
    a: Direction,
    b: Direction,
    out: Outcome,
    n_samples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Context-independent coincidence probability.

    Exact weighted sum for atomic ensembles; exact sphere average when the
    response provides one (the deterministic sign model does); otherwise a
    Monte Carlo average over n_samples sphere draws.
    """
    if not hasattr(response, "p1_plus"):
        raise ContractError(
            "response must expose factorizing per-side laws; "
            "context-indexed table kernels go through contextual_probability"
        )
    if isinstance(ensemble, AtomicEnsemble):
        if ensemble.is_indexed:
            raise ContractError(
                "indexed atoms have no per-side law; evaluate them with "
                "contextual_probability and a table kernel"
            )
        vals = _joint_from_sides(
            response.p1_plus(a, ensemble.lams), response.p2_plus(b, ensemble.lams), out
        )
        return float(vals @ ensemble.weights)
    if isinstance(ensemble, SphereEnsemble):
        sphere_joint = getattr(response, "sphere_joint", None)
        if sphere_joint is not None:
            return float(sphere_joint(a, b, out))
        if n_samples is None or rng is None:
            raise ParameterError(
                "continuous ensemble without an exact sphere average needs n_samples and rng"
            )
        if n_samples < _MIN_MC_SAMPLES:
            raise ParameterError(f"n_samples must be >= {_MIN_MC_SAMPLES}, got {n_samples}")
        lams = ensemble.draw(n_samples, rng)
        vals = _joint_from_sides(response.p1_plus(a, lams), response.p2_plus(b, lams), out)
        return float(vals.mean())
    raise ParameterError(f"unsupported ensemble type {type(ensemble).__name__}")


def lrhv_correlation(
    ensemble: Ensemble,
    response: ResponseModel,
    a: Direction,
    b: Direction,
    n_samples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """E(a, b) = sum_xy xy P(x, y | a, b) under the factorizing model."""
    total = 0.0
    for x in (1, -1):
        for y in (1, -1):
            p = lrhv_probability(ensemble, response, a, b, Outcome(x, y), n_samples, rng)
            total += x * y * p
    return total


def contextual_probability(lambda_space, kernel: Callable, a: Direction, b: Direction, out: Outcome) -> float:
    """Coincidence probability for a context-indexed hidden-variable model.

    lambda_space is an AtomicEnsemble or a callable (a, b) -> AtomicEnsemble
    supplying the per-context atoms and weights; kernel(a, b, lam) returns
    the (2, 2) joint table at that parameter value.  No factorization is
    assumed, so this family reproduces any target table (a single atom per
    context carrying the target does it).
    """
    ens = lambda_space(a, b) if callable(lambda_space) else lambda_space
    if not isinstance(ens, AtomicEnsemble):
        raise ParameterError("lambda_space must yield an AtomicEnsemble per context")
    ix, iy = _outcome_index(out.x), _outcome_index(out.y)
    weights = ens.weights
    total = 0.0
    for k in range(ens.lams.shape[0]):
        table = np.asarray(kernel(a, b, ens.lams[k]), dtype=np.float64)
        if table.shape != (2, 2):
            raise DomainError(f"kernel must return a (2, 2) table, got shape {table.shape}")
        s = float(table.sum())
        if abs(s - 1.0) > KERNEL_SUM_TOL:
            raise DomainError(f"kernel table sums to {s!r}, not 1")
        total += weights[k] * float(table[ix, iy])
    return total


# ---------------------------------------------------------------------------
# factorization witness


@dataclass(frozen=True)
class FactorizationReport:
    """Pointwise factorization audit of a joint kernel over a grid."""

    violations: np.ndarray
    tol: float

    @property
    def max_violation(self) -> float:
        return float(self.violations.max())

    @property
    def point_passed(self) -> np.ndarray:
        return self.violations <= self.tol

    @property
    def passed(self) -> bool:
        return bool(np.all(self.point_passed))

    @property
    def n_points(self) -> int:
        return int(self.violations.size)


def check_factorization(kernel: Callable, grid: Sequence[Tuple], tol: float = FACTORIZATION_TOL) -> FactorizationReport:
    """Test |p(x, y | a, b, lam) - p1(x) p2(y)| <= tol at each grid point.

    grid holds (a, b, lam) triples; p1, p2 are the kernel's own marginals
    at fixed lam.  A context-independent model factorizes everywhere; the
    singlet table used as a lam-independent kernel fails by 1/4 at equal
    settings.
    """
    pts = list(grid)
    if not pts:
        raise ParameterError("factorization grid must be non-empty")
    violations = np.empty(len(pts), dtype=np.float64)
    for i, (a, b, lam) in enumerate(pts):
        table = np.asarray(kernel(a, b, lam), dtype=np.float64)
        p1 = table.sum(axis=1)
        p2 = table.sum(axis=0)
        violations[i] = float(np.abs(table - np.outer(p1, p2)).max())
    return FactorizationReport(violations=violations, tol=tol)


# ---------------------------------------------------------------------------
# table kernels (file-loadable response tables)


@dataclass(frozen=True)
class TableKernel:
    """Joint outcome tables indexed by (lam id, setting-pair id).

    probs[i, j] is the (2, 2) table for lambda_ids[i] under
    direction_ids[j]; each table sums to 1.  Whether the table family is
    local-realistic is not assumed; run check_factorization to find out.
    """

    lambda_ids: np.ndarray
    direction_ids: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambda_ids, dtype=np.int64)
        dirs = np.asarray(self.direction_ids, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (lam.size, dirs.size, 2, 2):
            raise ParameterError("probs must have shape (n_lambda, n_direction, 2, 2)")
        if np.any(probs < -1e-12):
            raise DomainError("table probabilities must be non-negative")
        sums = probs.sum(axis=(2, 3))
        if np.any(np.abs(sums - 1.0) > KERNEL_SUM_TOL):
            raise DomainError("every (lam, direction) table must sum to 1")
        for arr in (lam, dirs, probs):
            arr.setflags(write=False)
        object.__setattr__(self, "lambda_ids", lam)
        object.__setattr__(self, "direction_ids", dirs)
        object.__setattr__(self, "probs", probs)

    def _lam_index(self, lambda_id: int) -> int:
        hits = np.flatnonzero(self.lambda_ids == lambda_id)
        if hits.size == 0:
            raise ParameterError(f"unknown lambda id {lambda_id}")
        return int(hits[0])

    def _dir_index(self, direction_id: int) -> int:
        hits = np.flatnonzero(self.direction_ids == direction_id)
        if hits.size == 0:
            raise ParameterError(f"unknown direction id {direction_id}")
        return int(hits[0])

    def cell(self, lambda_id: int, direction_id: int) -> np.ndarray:
        return self.probs[self._lam_index(lambda_id), self._dir_index(direction_id)]

    def context_kernel(self, direction_id: int) -> Callable:
        """A kernel (a, b, lam_id) -> (2, 2) bound to one setting-pair id."""
        j = self._dir_index(direction_id)
        lookup = {int(lid): i for i, lid in enumerate(self.lambda_ids)}

        def kernel(a, b, lam_id):
            return self.probs[lookup[int(lam_id)], j]

        return kernel


TABLE_HEADER = ("lambda_id", "direction_id", "x", "y", "probability")


def load_table_kernel(path) -> TableKernel:
    """Read a table kernel from a CSV file.

    Expected header: lambda_id,direction_id,x,y,probability with x, y in
    {1, -1}.  Every (lambda, direction) cell must list all four outcomes.
    """
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TABLE_HEADER:
            raise DataError(f"{path}: expected header {','.join(TABLE_HEADER)}")
        for ln, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                raise DataError(f"{path}: line {ln}: expected 5 columns, got {len(row)}")
            try:
                lam = int(row[0])
                did = int(row[1])
                x = int(row[2])
                y = int(row[3])
                p = float(row[4])
            except ValueError as exc:
                raise DataError(f"{path}: line {ln}: {exc}") from exc
            if x not in (1, -1) or y not in (1, -1):
                raise DataError(f"{path}: line {ln}: outcomes must be 1 or -1")
            rows.append((lam, did, x, y, p))
    if not rows:
        raise DataError(f"{path}: no data rows")
    lam_ids = np.array(sorted({r[0] for r in rows}), dtype=np.int64)
    dir_ids = np.array(sorted({r[1] for r in rows}), dtype=np.int64)
    probs = np.full((lam_ids.size, dir_ids.size, 2, 2), np.nan)
    lam_pos = {int(v): i for i, v in enumerate(lam_ids)}
    dir_pos = {int(v): i for i, v in enumerate(dir_ids)}
    for lam, did, x, y, p in rows:
        probs[lam_pos[lam], dir_pos[did], _outcome_index(x), _outcome_index(y)] = p
    if np.any(np.isnan(probs)):
        raise DataError(f"{path}: some (lambda, direction) cells are missing outcomes")
    return TableKernel(lambda_ids=lam_ids, direction_ids=dir_ids, probs=probs)


# ---------------------------------------------------------------------------
# the three-step random-experiment protocol


@dataclass(frozen=True)
class ProtocolTables:
    """Empirical per-setting joint tables from protocol draws.

    counts[j, ix, iy] is the number of draws mapped to outcome
    (x, y) = (+1/-1 by index) under setting j; tables normalizes by the
    draw count.
    """

    counts: np.ndarray
    n_draws: int

    @property
    def tables(self) -> np.ndarray:
        return self.counts / float(self.n_draws)

    def correlations(self) -> np.ndarray:
        t = self.tables
        return t[:, 0, 0] - t[:, 0, 1] - t[:, 1, 0] + t[:, 1, 1]


def _setting_arrays(settings: Sequence[Tuple[Direction, Direction]]):
    a_dirs = np.array([s[0].vec for s in settings], dtype=np.float64)
    b_dirs = np.array([s[1].vec for s in settings], dtype=np.float64)
    return a_dirs, b_dirs


def protocol_tables(lams: np.ndarray, settings: Sequence[Tuple[Direction, Direction]]) -> ProtocolTables:
    """Deterministic tally of sign outcomes for given draws and settings.

    Pure function of its inputs: permuting the lam rows permutes nothing
    in the result, since the tally is an order-free sum.
    """
    lams = np.asarray(lams, dtype=np.float64)
    a_dirs, b_dirs = _setting_arrays(settings)
    counts = np.zeros((a_dirs.shape[0], 2, 2), dtype=np.int64)
    kernels.sign_tally(lams, a_dirs, b_dirs, counts)
    return ProtocolTables(counts=counts, n_draws=lams.shape[0])


def _population_lams(ensemble: AtomicEnsemble, n_draws: int) -> np.ndarray:
    """n_draws parameters laid out as contiguous atom blocks.

    Atom k receives a share proportional to its count, rounded by largest
    remainder so the blocks sum to n_draws exactly.
    """
    shares = ensemble.weights * n_draws
    base = np.floor(shares).astype(np.int64)
    short = n_draws - int(base.sum())
    if short > 0:
        order = np.argsort(-(shares - base), kind="stable")
        base[order[:short]] += 1
    return np.repeat(ensemble.lams, base, axis=0)


def sample_series(
    ensemble: Ensemble,
    response: ResponseModel,
    a: Direction,
    b: Direction,
    n_draws: int,
    rng: np.random.Generator,
    order: str = "iid",
):
    """Outcome time-series (x, y int8 arrays) of n_draws trials at one setting.

    order selects how the pair parameters are arranged in time:

    * ``iid``: independent draws with replacement (any ensemble).
    * ``blocked``: the atomic ensemble laid out as contiguous blocks, atom
      by atom, proportional to counts; consumes no randomness for the
      deterministic response, so the fine structure is fully reproducible.
    * ``shuffled``: the same block population in a uniformly random order;
      an exchangeable mixing of ``blocked``.
    """
    if n_draws < 1:
        raise ParameterError(f"n_draws must be >= 1, got {n_draws}")
    if order not in ("iid", "blocked", "shuffled"):
        raise ParameterError(f"order must be iid, blocked, or shuffled, got {order!r}")
    if order == "iid":
        if isinstance(ensemble, AtomicEnsemble) and ensemble.is_indexed:
            raise ContractError("indexed atoms carry no direction responses; use a table kernel")
        lams = ensemble.draw(n_draws, rng)
    else:
        if not isinstance(ensemble, AtomicEnsemble) or ensemble.is_indexed:
            raise ParameterError(f"order={order!r} needs a direction-valued atomic ensemble")
        lams = _population_lams(ensemble, n_draws)
        if order == "shuffled":
            lams = lams[rng.permutation(n_draws)]
    x = np.empty(n_draws, dtype=np.int8)
    y = np.empty(n_draws, dtype=np.int8)
    if isinstance(response, DeterministicSignResponse):
        kernels.sign_outcomes(lams, a.vec, b.vec, x, y)
        return x, y
    u = rng.random((n_draws, 2))
    x[:] = np.where(u[:, 0] < response.p1_plus(a, lams), 1, -1)
    y[:] = np.where(u[:, 1] < response.p2_plus(b, lams), 1, -1)
    return x, y


def run_protocol(
    ensemble: Ensemble,
    response: ResponseModel,
    settings: Sequence[Tuple[Direction, Direction]],
    n_draws: int,
    rng: np.random.Generator,
) -> ProtocolTables:
    """The three-step random experiment, literally.

    (i) draw a pair parameter from the ensemble with replacement,
    (ii) evaluate the responses of both stations for every listed setting
    on that same draw, (iii) tally into per-setting joint tables.

    Step (ii) is only meaningful when each station's answer is a fixed
    function of (direction, lam); a stochastic response would need fresh
    randomness per setting, silently decorrelating the settings, so it is
    restricted to a single setting per call.
    """
    if n_draws < 1:
        raise ParameterError(f"n_draws must be >= 1, got {n_draws}")
    if not settings:
        raise ParameterError("settings must be non-empty")
    if isinstance(ensemble, AtomicEnsemble) and ensemble.is_indexed:
        raise ContractError("indexed atoms carry no direction responses; use a table kernel")
    if isinstance(response, DeterministicSignResponse):
        lams = ensemble.draw(n_draws, rng)
        return protocol_tables(lams, settings)
    if len(settings) != 1:
        raise ContractError(
            "stochastic responses admit one setting per draw; "
            "run each setting as its own protocol call"
        )
    a, b = settings[0]
    lams = ensemble.draw(n_draws, rng)
    u = rng.random((n_draws, 2))
    x_neg = u[:, 0] >= response.p1_plus(a, lams)
    y_neg = u[:, 1] >= response.p2_plus(b, lams)
    cell = (x_neg.astype(np.intp) << 1) | y_neg
    counts = np.bincount(cell, minlength=4).reshape(1, 2, 2).astype(np.int64)
    return ProtocolTables(counts=counts, n_draws=n_draws)
