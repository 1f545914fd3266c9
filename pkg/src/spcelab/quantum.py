"""Exact two-qubit singlet machinery.

States live in the product basis (++, +-, -+, --) of the fixed +z reference
axis.  Spin-1/2 semantics throughout: the projective outcome probabilities
for the singlet give correlation -a.b for sharp analyzer directions a, b.
An angle-doubling option for polarization conventions exists at the
configuration layer, not here.

Phase conventions are fixed by construction (no eigen-solver): the +1
eigenvector of the spin operator along d = (dx, dy, dz) is
(1 + dz, dx + i dy) normalized, the -1 eigenvector is (-(1 - dz), dx + i dy)
normalized, with the poles special-cased.  Reduced states are therefore
defined up to the global phase this construction fixes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .directions import Direction
from .errors import DomainError

NORM_TOL = 1e-12

# Probabilities this close to an exact 0 are rounding residue of the
# projector arithmetic and are snapped to 0 so that impossible outcomes
# are never sampled.
_PROB_FLOOR = 1e-15

# fixed outcome order used by distributions and samplers
OUTCOME_ORDER = ((1, 1), (1, -1), (-1, 1), (-1, -1))
_X4 = np.array([1, 1, -1, -1], dtype=np.int8)
_Y4 = np.array([1, -1, 1, -1], dtype=np.int8)


@dataclass(frozen=True)
class Outcome:
    """One coincidence outcome; each side is spin up (+1) or down (-1)."""

    x: int
    y: int

    def __post_init__(self):
        if self.x not in (1, -1) or self.y not in (1, -1):
            raise DomainError(f"outcome components must be +1 or -1, got ({self.x}, {self.y})")


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    """Pure two-qubit state as 4 complex amplitudes over (++, +-, -+, --)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=np.complex128)
        if a.shape != (4,):
            raise DomainError(f"state needs 4 amplitudes, got shape {a.shape}")
        n2 = float(np.sum(np.abs(a) ** 2))
        if abs(n2 - 1.0) > NORM_TOL:
            raise DomainError(f"state norm^2 {n2!r} deviates from 1 beyond {NORM_TOL}")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)


def build_singlet() -> TwoQubitState:
    """The total-spin-zero state (|+-> - |-+>)/sqrt(2), fixed global phase."""
    s = 1.0 / math.sqrt(2.0)
    return TwoQubitState(np.array([0.0, s, -s, 0.0], dtype=np.complex128))


def spin_axis_state(d: np.ndarray, s: int) -> np.ndarray:
    """Eigenvector of the spin operator along unit vector d with eigenvalue s.

    Analytic form; the poles dz -> +-1 are special-cased to avoid the
    vanishing-denominator branch.
    """
    dx, dy, dz = float(d[0]), float(d[1]), float(d[2])
    if dz >= 1.0 - 1e-14:
        return np.array([1.0, 0.0], dtype=np.complex128) if s > 0 else np.array([0.0, 1.0], dtype=np.complex128)
    if dz <= -1.0 + 1e-14:
        return np.array([0.0, 1.0], dtype=np.complex128) if s > 0 else np.array([1.0, 0.0], dtype=np.complex128)
    if s > 0:
        v = np.array([1.0 + dz, dx + 1j * dy], dtype=np.complex128)
        return v / math.sqrt(2.0 * (1.0 + dz))
    v = np.array([-(1.0 - dz), dx + 1j * dy], dtype=np.complex128)
    return v / math.sqrt(2.0 * (1.0 - dz))


def _check_normalized(state: TwoQubitState) -> np.ndarray:
    psi = np.asarray(state.amplitudes, dtype=np.complex128)
    n2 = float(np.sum(np.abs(psi) ** 2))
    if abs(n2 - 1.0) > NORM_TOL:
        raise DomainError(f"state norm^2 {n2!r} deviates from 1 beyond {NORM_TOL}")
    return psi


def joint_probability(state: TwoQubitState, a: Direction, b: Direction, out: Outcome) -> float:
    """Probability of coincidence outcome (x, y) for sharp directions a, b.

    Computed as the squared projection amplitude onto the product of the
    two spin eigenstates.  For the singlet this equals (1 - xy a.b)/4.
    """
    psi = _check_normalized(state).reshape(2, 2)
    ua = spin_axis_state(a.vec, out.x)
    vb = spin_axis_state(b.vec, out.y)
    amp = np.conj(ua) @ psi @ np.conj(vb)
    p = float(abs(amp) ** 2)
    if p < _PROB_FLOOR:
        return 0.0
    return min(p, 1.0)


def outcome_distribution(state: TwoQubitState, a: Direction, b: Direction) -> np.ndarray:
    """The four outcome probabilities in the order (+,+), (+,-), (-,+), (-,-)."""
    return np.array([joint_probability(state, a, b, Outcome(x, y)) for x, y in OUTCOME_ORDER])


def correlation(state: TwoQubitState, a: Direction, b: Direction) -> float:
    """E(a, b) = sum_xy xy p(x, y | a, b); equals -a.b for the singlet."""
    p = outcome_distribution(state, a, b)
    return float(p[0] - p[1] - p[2] + p[3])


def singlet_probability_from_dot(dot: float, x: int, y: int) -> float:
    """Closed form (1 - xy d)/4 with d clipped to [-1, 1].

    This is the hot-path form of ``joint_probability`` for the singlet,
    exact at parallel and antiparallel settings.
    """
    d = min(1.0, max(-1.0, float(dot)))
    return (1.0 - (x * y) * d) * 0.25


def reduce_on_outcome(state: TwoQubitState, a: Direction, x: int) -> np.ndarray:
    """Conditional state of particle II given particle I read x along a.

    This is a sub-ensemble descriptor: it describes the partners of the
    first-side systems that produced outcome x, not a physical change of
    the distant particle.  Returned up to the fixed global phase.
    """
    if x not in (1, -1):
        raise DomainError(f"conditioning outcome must be +1 or -1, got {x}")
    psi = _check_normalized(state).reshape(2, 2)
    ua = spin_axis_state(a.vec, x)
    w = np.conj(ua) @ psi
    n2 = float(np.sum(np.abs(w) ** 2))
    if n2 < 1e-14:
        raise DomainError("conditioning on a zero-probability outcome")
    return w / math.sqrt(n2)


def _sample_from_distribution(probs: np.ndarray, u: np.ndarray):
    cum = np.cumsum(probs)
    idx = np.searchsorted(cum, u, side="right")
    np.minimum(idx, 3, out=idx)
    return _X4[idx], _Y4[idx]


def sample_trial(state: TwoQubitState, a: Direction, b: Direction, rng: np.random.Generator) -> Outcome:
    """One coincidence outcome from the exact joint distribution.

    Consumes exactly one uniform; deterministic given the generator state.
    """
    probs = outcome_distribution(state, a, b)
    x, y = _sample_from_distribution(probs, rng.random(1))
    return Outcome(int(x[0]), int(y[0]))


def sample_trials(state: TwoQubitState, a: Direction, b: Direction, n: int, rng: np.random.Generator):
    """Vectorized sampler: n outcomes as int8 arrays (x, y).

    Same stream layout as n calls to ``sample_trial`` (one uniform per
    trial, in trial order).
    """
    probs = outcome_distribution(state, a, b)
    return _sample_from_distribution(probs, rng.random(n))


def sample_singlet_trials(a: Direction, b: Direction, n: int, rng: np.random.Generator):
    """Singlet-specific sampler on the closed-form table.

    Exactly zero probability for same-sign outcomes at parallel settings,
    so equal-setting runs are strictly anti-correlated trial by trial.
    """
    dot = a.dot(b)
    probs = np.array([singlet_probability_from_dot(dot, x, y) for x, y in OUTCOME_ORDER])
    return _sample_from_distribution(probs, rng.random(n))
