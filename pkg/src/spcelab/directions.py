"""Unit directions on the sphere and orthonormal frames around them.

Conventions used throughout the package:

* A direction is a real 3-vector of unit Euclidean norm (tolerance
  ``UNIT_TOL``).  The fixed reference axis is +z.
* Coplanar analyzer settings are specified by one polar angle, measured
  from +z in the x-z plane: angle 0 is +z, angle 90 deg is +x.
* Inner products of unit vectors are clipped to [-1, 1] before any acos
  or probability formula, so exactly-parallel settings behave exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

UNIT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Direction:
    """A unit 3-vector; the analyzer / hidden-variable orientation type."""

    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=np.float64)
        if v.shape != (3,):
            raise DomainError(f"direction must be a 3-vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("direction components must be finite")
        n = float(np.linalg.norm(v))
        if abs(n - 1.0) > UNIT_TOL:
            raise DomainError(f"direction norm {n!r} deviates from 1 beyond {UNIT_TOL}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)

    @classmethod
    def from_vector(cls, v) -> "Direction":
        """Normalize an arbitrary non-zero 3-vector into a Direction."""
        v = np.asarray(v, dtype=np.float64)
        n = float(np.linalg.norm(v))
        if not math.isfinite(n) or n < 1e-300:
            raise DomainError("cannot normalize a zero or non-finite vector")
        return cls(v / n)

    @classmethod
    def from_polar_deg(cls, angle_deg: float) -> "Direction":
        """Coplanar setting: polar angle in degrees from +z, in the x-z plane."""
        a = math.radians(float(angle_deg))
        return cls(np.array([math.sin(a), 0.0, math.cos(a)]))

    def dot(self, other: "Direction") -> float:
        v, w = self.vec, other.vec
        d = (v[0] * w[0] + v[1] * w[1]) + v[2] * w[2]
        return float(min(1.0, max(-1.0, d)))

    def angle_to(self, other: "Direction") -> float:
        """Angle in radians between the two directions.

        Uses atan2(|v x w|, v.w), which stays well conditioned at nearly
        parallel and nearly antiparallel pairs where acos(dot) loses
        half its digits.
        """
        v, w = self.vec, other.vec
        cross = np.cross(v, w)
        return math.atan2(float(np.linalg.norm(cross)), float(v @ w))

    def __repr__(self):
        return f"Direction([{self.vec[0]:.12g}, {self.vec[1]:.12g}, {self.vec[2]:.12g}])"


def as_direction(d) -> Direction:
    """Coerce a Direction, 3-sequence, or plain angle-in-degrees to Direction."""
    if isinstance(d, Direction):
        return d
    if np.isscalar(d):
        return Direction.from_polar_deg(float(d))
    return Direction(np.asarray(d, dtype=np.float64))


def orthonormal_frame(center: np.ndarray) -> np.ndarray:
    """Right-handed orthonormal frame (e1, e2, center) as a (3, 3) array.

    e1 is built from the coordinate axis least aligned with ``center`` so the
    construction is well conditioned everywhere on the sphere, and it is
    deterministic: equal centers always give equal frames.
    """
    c = np.asarray(center, dtype=np.float64)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(c)))] = 1.0
    e1 = np.cross(axis, c)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(c, e1)
    return np.array([e1, e2, c])


def random_directions(n: int, rng: np.random.Generator) -> np.ndarray:
    """n directions uniform on the sphere, as an (n, 3) array.

    Consumes exactly 2n uniforms from ``rng`` (z-coordinate, then azimuth,
    per row).
    """
    from .backend import kernels

    u = rng.random((n, 2))
    out = np.empty((n, 3))
    kernels.sphere_directions(np.ascontiguousarray(u[:, 0]), np.ascontiguousarray(u[:, 1]), out)
    return out
