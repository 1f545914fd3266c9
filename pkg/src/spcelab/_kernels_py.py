"""NumPy implementation of the hot sampling kernels.

This is the fallback backend; ``spcelab._kernels`` is the compiled twin.
Both consume pre-drawn uniforms in the same order and evaluate the same
scalar expressions in the same association order, so integer outcome arrays
are bit-identical across backends (floating-point intermediates can differ
in the last ulp where the two runtimes use different cos/sin code paths).

All float arrays are C-contiguous float64; outcome arrays are int8 holding
+1/-1; tallies are int64.
"""

from __future__ import annotations

import numpy as np

NAME = "python"

# outcome order used everywhere: (+,+), (+,-), (-,+), (-,-)
_X4 = np.array([1, 1, -1, -1], dtype=np.int8)
_Y4 = np.array([1, -1, 1, -1], dtype=np.int8)


def sphere_directions(u_z, u_phi, out):
    """Uniform directions on the sphere from per-row uniforms (z, azimuth)."""
    z = 2.0 * u_z - 1.0
    r = np.sqrt(1.0 - z * z)
    ang = (2.0 * np.pi) * u_phi
    out[:, 0] = r * np.cos(ang)
    out[:, 1] = r * np.sin(ang)
    out[:, 2] = z
    return out


def cap_directions(frame, cos_theta, u_phi, out):
    """Directions at polar cosine ``cos_theta`` around frame row 2.

    ``frame`` rows are (e1, e2, center); the azimuth is uniform via
    ``u_phi``.  The polar cosine profile is the caller's business.
    """
    c = cos_theta
    s = np.sqrt(1.0 - c * c)
    ang = (2.0 * np.pi) * u_phi
    t1 = s * np.cos(ang)
    t2 = s * np.sin(ang)
    for k in range(3):
        out[:, k] = c * frame[2, k] + t1 * frame[0, k] + t2 * frame[1, k]
    return out


def row_dots(a, b, out):
    """Row-wise inner products of two (n, 3) arrays."""
    out[:] = (a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]) + a[:, 2] * b[:, 2]
    return out


def singlet_pair_outcomes(dots, u, x, y):
    """Draw coincidence outcomes from the singlet pair distribution.

    For analyzer inner product d the four outcome probabilities are
    (1 - xy d)/4; one uniform per row selects the cell in the fixed order
    (+,+), (+,-), (-,+), (-,-).
    """
    d = np.minimum(1.0, np.maximum(-1.0, dots))
    q_same = (1.0 - d) * 0.25
    q_diff = (1.0 + d) * 0.25
    c1 = q_same
    c2 = c1 + q_diff
    c3 = c2 + q_diff
    idx = (u >= c1).astype(np.intp) + (u >= c2) + (u >= c3)
    x[:] = _X4[idx]
    y[:] = _Y4[idx]
    return x, y


def sign_outcomes(lams, a, b, x, y):
    """Deterministic sign responses x = sign(a.lam), y = -sign(b.lam).

    sign(0) resolves to +1 on both sides before the y negation.
    """
    da = (lams[:, 0] * a[0] + lams[:, 1] * a[1]) + lams[:, 2] * a[2]
    db = (lams[:, 0] * b[0] + lams[:, 1] * b[1]) + lams[:, 2] * b[2]
    x[:] = np.where(da >= 0.0, 1, -1).astype(np.int8)
    y[:] = np.where(db >= 0.0, -1, 1).astype(np.int8)
    return x, y


def sign_tally(lams, a_dirs, b_dirs, counts):
    """Tally deterministic-sign outcomes of every draw under every setting.

    counts has shape (n_settings, 2, 2); cell [j, ix, iy] counts outcome
    (x, y) with index 0 for +1 and 1 for -1.
    """
    n = lams.shape[0]
    x = np.empty(n, dtype=np.int8)
    y = np.empty(n, dtype=np.int8)
    for j in range(a_dirs.shape[0]):
        sign_outcomes(lams, a_dirs[j], b_dirs[j], x, y)
        cell = ((x < 0).astype(np.intp) << 1) | (y < 0)
        counts[j] += np.bincount(cell, minlength=4).reshape(2, 2)
    return counts


def contextual_outcomes(frame_a, cos_a, uphi_a, frame_b, cos_b, uphi_b, u_out, x, y):
    """Fused cap-smeared coincidence trial: sample both analyzer directions,
    then draw the pair outcome from the singlet distribution."""
    n = cos_a.shape[0]
    da = np.empty((n, 3))
    db = np.empty((n, 3))
    cap_directions(frame_a, cos_a, uphi_a, da)
    cap_directions(frame_b, cos_b, uphi_b, db)
    dots = np.empty(n)
    row_dots(da, db, dots)
    singlet_pair_outcomes(dots, u_out, x, y)
    return x, y
