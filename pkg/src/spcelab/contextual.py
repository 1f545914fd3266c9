"""Contextual analyzer-smearing model.

The macroscopic settings (A, B) do not pin down the microscopic analyzer
orientations.  Each side draws a microscopic direction from a distribution
supported on the spherical cap {d : |1 - d.center| < epsilon} around its
macroscopic setting, and the coincidence probability is the smeared average

    P(x, y | A, B) = eta_a eta_b Int Int p(x, y | a, b) drho_A(a) drho_B(b)

with p the sharp singlet probability and eta the per-side counting
efficiencies.  The four detected-outcome probabilities therefore sum to
eta_a*eta_b, not 1; the remainder is the no-detection rate.

Two cap profiles are supported:

* ``uniform``: uniform over the cap area, i.e. cos(theta) uniform on
  (1 - epsilon, 1].
* ``gauss``: polar angle theta follows a centered gaussian of width sigma
  truncated at the cap edge, azimuth uniform.

Both profiles sample by inverse CDF in the polar angle (exact support, no
rejection).  Two independent integrators are provided for the smeared
probability: plain Monte Carlo with a standard error, and a deterministic
product quadrature rule for cross-checking.

Stream layout (the reproducibility contract): a cap draw consumes 2
uniforms (polar, azimuth); ``smeared_probability`` consumes an (n, 2) block
for side A then an (n, 2) block for side B; a contextual trial consumes 6
uniforms in the order (polar_a, azimuth_a, polar_b, azimuth_b, outcome,
detection), row per trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erf, erfinv

from .backend import kernels
from .directions import Direction, orthonormal_frame
from .errors import ParameterError
from .quantum import OUTCOME_ORDER, Outcome

PROFILES = ("uniform", "gauss")

_SQRT2 = math.sqrt(2.0)
_MIN_MC_SAMPLES = 100


@dataclass(frozen=True)
class CapDistribution:
    """Distribution of microscopic analyzer directions around a macroscopic one.

    epsilon parameterizes the support cap {d : |1 - d.center| < epsilon},
    so epsilon in (0, 2); epsilon = 2 would cover the whole sphere.
    """

    center: Direction
    epsilon: float
    profile: str = "uniform"
    sigma: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.center, Direction):
            raise ParameterError("cap center must be a Direction")
        e = float(self.epsilon)
        if not (0.0 < e < 2.0) or not math.isfinite(e):
            raise ParameterError(f"cap epsilon must lie in (0, 2), got {self.epsilon!r}")
        if self.profile not in PROFILES:
            raise ParameterError(f"unknown cap profile {self.profile!r}; choose from {PROFILES}")
        if self.profile == "gauss":
            if self.sigma is None or not (float(self.sigma) > 0.0):
                raise ParameterError("gauss profile needs sigma > 0 (radians)")
        elif self.sigma is not None:
            raise ParameterError("sigma is only meaningful for the gauss profile")
        object.__setattr__(self, "epsilon", e)

    @property
    def theta_max(self) -> float:
        """Polar half-opening of the support cap, radians."""
        return math.acos(1.0 - self.epsilon)

    def contains(self, d) -> np.ndarray:
        """Membership predicate |1 - d.center| < epsilon; d is (3,) or (n, 3)."""
        v = d.vec if isinstance(d, Direction) else np.asarray(d, dtype=np.float64)
        dots = v @ self.center.vec
        return np.abs(1.0 - dots) < self.epsilon

    def cos_theta_from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF of the polar angle, mapped to cos(theta).

        u in [0, 1) maps onto cos(theta) in (1 - epsilon, 1], so sampled
        directions always satisfy the support predicate strictly.
        """
        u = np.asarray(u, dtype=np.float64)
        if self.profile == "uniform":
            return 1.0 - self.epsilon * u
        z = erf(self.theta_max / (self.sigma * _SQRT2))
        theta = (self.sigma * _SQRT2) * erfinv(u * z)
        return np.cos(theta)

    def same_cap(self, other: "CapDistribution") -> bool:
        return (
            np.array_equal(self.center.vec, other.center.vec)
            and self.epsilon == other.epsilon
            and self.profile == other.profile
            and self.sigma == other.sigma
        )


@dataclass(frozen=True)
class ExperimentSetting:
    """One coincidence-experiment context: two caps plus counting efficiencies."""

    cap_a: CapDistribution
    cap_b: CapDistribution
    eta_a: float = 1.0
    eta_b: float = 1.0

    def __post_init__(self):
        for name, eta in (("eta_a", self.eta_a), ("eta_b", self.eta_b)):
            e = float(eta)
            if not (0.0 < e <= 1.0):
                raise ParameterError(f"{name} must lie in (0, 1], got {eta!r}")


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate with its standard error."""

    value: float
    standard_error: float
    n_samples: int


def sample_cap_directions(cap: CapDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """n microscopic directions from the cap, as an (n, 3) array.

    Consumes an (n, 2) uniform block: column 0 drives the polar inverse
    CDF, column 1 the azimuth.
    """
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    u = rng.random((n, 2))
    cos_t = cap.cos_theta_from_uniform(u[:, 0])
    frame = orthonormal_frame(cap.center.vec)
    out = np.empty((n, 3), dtype=np.float64)
    kernels.cap_directions(frame, cos_t, np.ascontiguousarray(u[:, 1]), out)
    return out


def sample_cap_direction(cap: CapDistribution, rng: np.random.Generator) -> Direction:
    """One microscopic direction from the cap."""
    return Direction(sample_cap_directions(cap, 1, rng)[0])


def _singlet_integrand(dots: np.ndarray, x: int, y: int) -> np.ndarray:
    d = np.clip(dots, -1.0, 1.0)
    return (1.0 - (x * y) * d) * 0.25


def _paired_cap_dots(setting: ExperimentSetting, n: int, rng: np.random.Generator) -> np.ndarray:
    a = sample_cap_directions(setting.cap_a, n, rng)
    b = sample_cap_directions(setting.cap_b, n, rng)
    dots = np.empty(n, dtype=np.float64)
    kernels.row_dots(a, b, dots)
    return dots


def _mean_with_se(values: np.ndarray, scale: float) -> Estimate:
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1)) / math.sqrt(n)
    return Estimate(scale * mean, scale * se, n)


def smeared_probability(
    setting: ExperimentSetting, out: Outcome, n_samples: int, rng: np.random.Generator
) -> Estimate:
    """Monte Carlo estimate of the smeared coincidence probability.

    Averages the exact singlet integrand over n_samples independent
    (a, b) cap draws; the standard error is the sample standard deviation
    of the integrand over sqrt(n).  The estimate lies in [0, eta_a*eta_b].
    """
    if n_samples < _MIN_MC_SAMPLES:
        raise ParameterError(f"n_samples must be >= {_MIN_MC_SAMPLES}, got {n_samples}")
    dots = _paired_cap_dots(setting, n_samples, rng)
    vals = _singlet_integrand(dots, out.x, out.y)
    return _mean_with_se(vals, setting.eta_a * setting.eta_b)


def anti_correlation_gap(
    setting: ExperimentSetting, n_samples: int, rng: np.random.Generator
) -> Estimate:
    """P(+,+|A,A) + P(-,-|A,A): the residual same-sign rate at equal settings.

    The sharp singlet gives exactly 0 here; any positive cap width leaves a
    strictly positive gap.  Both caps must be identical.  Estimated in one
    pass over the summed integrand (1 - a.b)/2, which is the same average
    as two smeared_probability calls but with paired draws.
    """
    if not setting.cap_a.same_cap(setting.cap_b):
        raise ParameterError("anti_correlation_gap needs identical caps on both sides")
    if n_samples < _MIN_MC_SAMPLES:
        raise ParameterError(f"n_samples must be >= {_MIN_MC_SAMPLES}, got {n_samples}")
    dots = _paired_cap_dots(setting, n_samples, rng)
    vals = (1.0 - np.clip(dots, -1.0, 1.0)) * 0.5
    return _mean_with_se(vals, setting.eta_a * setting.eta_b)


def _cap_quadrature_nodes(cap: CapDistribution, n_polar: int, n_azimuth: int):
    """Direction nodes and normalized weights for a product rule on one cap."""
    xg, wg = np.polynomial.legendre.leggauss(n_polar)
    if cap.profile == "uniform":
        cos_t = (1.0 - cap.epsilon * 0.5) + (cap.epsilon * 0.5) * xg
        w_pol = wg * 0.5
    else:
        theta = (cap.theta_max * 0.5) * (xg + 1.0)
        dens = np.exp(-0.5 * (theta / cap.sigma) ** 2)
        w_pol = wg * dens
        w_pol = w_pol / w_pol.sum()
        cos_t = np.cos(theta)
    # midpoint rule in azimuth: exact for trigonometric polynomials of
    # degree < n_azimuth, which covers the degree-1 integrand here
    phi = (np.arange(n_azimuth) + 0.5) * (2.0 * math.pi / n_azimuth)
    frame = orthonormal_frame(cap.center.vec)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t**2))
    dirs = (
        cos_t[:, None, None] * frame[2]
        + (sin_t[:, None] * np.cos(phi))[:, :, None] * frame[0]
        + (sin_t[:, None] * np.sin(phi))[:, :, None] * frame[1]
    ).reshape(-1, 3)
    weights = np.repeat(w_pol / n_azimuth, n_azimuth)
    return dirs, weights


def quadrature_probability(
    setting: ExperimentSetting, out: Outcome, n_polar: int = 24, n_azimuth: int = 16
) -> float:
    """Deterministic product-rule evaluation of the smeared probability.

    Independent of the Monte Carlo path (no random stream); used to
    cross-check smeared_probability.  Gauss-Legendre in the polar
    variable, midpoint in azimuth, per side.
    """
    da, wa = _cap_quadrature_nodes(setting.cap_a, n_polar, n_azimuth)
    db, wb = _cap_quadrature_nodes(setting.cap_b, n_polar, n_azimuth)
    dots = da @ db.T
    vals = _singlet_integrand(dots, out.x, out.y)
    total = float(wa @ vals @ wb)
    return setting.eta_a * setting.eta_b * total


def sample_contextual_trials(setting: ExperimentSetting, n: int, rng: np.random.Generator):
    """n generative trials: draw caps, draw the outcome, thin by efficiency.

    Returns int8 arrays (x, y); 0 marks a no-detection trial (both columns
    together, since only coincidences are modeled).  Consumes exactly 6
    uniforms per trial in a fixed documented order, so outputs are
    reproducible at any batching.
    """
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    u = rng.random((n, 6))
    cos_a = setting.cap_a.cos_theta_from_uniform(u[:, 0])
    cos_b = setting.cap_b.cos_theta_from_uniform(u[:, 2])
    frame_a = orthonormal_frame(setting.cap_a.center.vec)
    frame_b = orthonormal_frame(setting.cap_b.center.vec)
    x = np.empty(n, dtype=np.int8)
    y = np.empty(n, dtype=np.int8)
    kernels.contextual_outcomes(
        frame_a,
        cos_a,
        np.ascontiguousarray(u[:, 1]),
        frame_b,
        cos_b,
        np.ascontiguousarray(u[:, 3]),
        np.ascontiguousarray(u[:, 4]),
        x,
        y,
    )
    p_det = setting.eta_a * setting.eta_b
    if p_det < 1.0:
        missed = u[:, 5] >= p_det
        x[missed] = 0
        y[missed] = 0
    return x, y


def sample_contextual_trial(setting: ExperimentSetting, rng: np.random.Generator) -> Optional[Outcome]:
    """One generative trial; None when the coincidence goes undetected."""
    x, y = sample_contextual_trials(setting, 1, rng)
    if x[0] == 0:
        return None
    return Outcome(int(x[0]), int(y[0]))


def smeared_distribution(setting: ExperimentSetting, n_samples: int, rng: np.random.Generator):
    """All four outcome estimates from one set of paired cap draws.

    Shares draws across outcomes, so the four values sum to exactly
    eta_a*eta_b (the integrands sum to 1 pointwise).
    """
    if n_samples < _MIN_MC_SAMPLES:
        raise ParameterError(f"n_samples must be >= {_MIN_MC_SAMPLES}, got {n_samples}")
    dots = _paired_cap_dots(setting, n_samples, rng)
    scale = setting.eta_a * setting.eta_b
    return [
        _mean_with_se(_singlet_integrand(dots, x, y), scale) for x, y in OUTCOME_ORDER
    ]
