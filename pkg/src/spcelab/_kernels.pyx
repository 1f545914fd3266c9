# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""C implementation of the hot sampling kernels.

Term-for-term mirror of ``spcelab._kernels_py``: the same uniforms are
consumed in the same order and every scalar expression keeps the same
association, so integer outcome arrays match the NumPy backend exactly on
equal inputs (float intermediates may differ in the last ulp where libm
and NumPy pick different cos/sin code paths).
"""

from libc.math cimport M_PI, cos, sin, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "cython"

cdef signed char _X4C[4]
cdef signed char _Y4C[4]
_X4C[0] = 1; _X4C[1] = 1; _X4C[2] = -1; _X4C[3] = -1
_Y4C[0] = 1; _Y4C[1] = -1; _Y4C[2] = 1; _Y4C[3] = -1


def sphere_directions(const double[::1] u_z, const double[::1] u_phi, double[:, ::1] out):
    """Uniform directions on the sphere from per-row uniforms (z, azimuth)."""
    cdef Py_ssize_t i, n = u_z.shape[0]
    cdef double z, r, ang
    for i in range(n):
        z = 2.0 * u_z[i] - 1.0
        r = sqrt(1.0 - z * z)
        ang = (2.0 * M_PI) * u_phi[i]
        out[i, 0] = r * cos(ang)
        out[i, 1] = r * sin(ang)
        out[i, 2] = z
    return np.asarray(out)


def cap_directions(const double[:, ::1] frame, const double[::1] cos_theta,
                   const double[::1] u_phi, double[:, ::1] out):
    """Directions at polar cosine ``cos_theta`` around frame row 2."""
    cdef Py_ssize_t i, k, n = cos_theta.shape[0]
    cdef double c, s, ang, t1, t2
    for i in range(n):
        c = cos_theta[i]
        s = sqrt(1.0 - c * c)
        ang = (2.0 * M_PI) * u_phi[i]
        t1 = s * cos(ang)
        t2 = s * sin(ang)
        for k in range(3):
            out[i, k] = c * frame[2, k] + t1 * frame[0, k] + t2 * frame[1, k]
    return np.asarray(out)


def row_dots(const double[:, ::1] a, const double[:, ::1] b, double[::1] out):
    """Row-wise inner products of two (n, 3) arrays."""
    cdef Py_ssize_t i, n = a.shape[0]
    for i in range(n):
        out[i] = (a[i, 0] * b[i, 0] + a[i, 1] * b[i, 1]) + a[i, 2] * b[i, 2]
    return np.asarray(out)


def singlet_pair_outcomes(const double[::1] dots, const double[::1] u,
                          signed char[::1] x, signed char[::1] y):
    """Draw coincidence outcomes from the singlet pair distribution."""
    cdef Py_ssize_t i, n = dots.shape[0]
    cdef double d, q_same, q_diff, c1, c2, c3, ui
    cdef int idx
    for i in range(n):
        d = dots[i]
        if d < -1.0:
            d = -1.0
        if d > 1.0:
            d = 1.0
        q_same = (1.0 - d) * 0.25
        q_diff = (1.0 + d) * 0.25
        c1 = q_same
        c2 = c1 + q_diff
        c3 = c2 + q_diff
        ui = u[i]
        idx = 0
        if ui >= c1:
            idx += 1
        if ui >= c2:
            idx += 1
        if ui >= c3:
            idx += 1
        x[i] = _X4C[idx]
        y[i] = _Y4C[idx]
    return np.asarray(x), np.asarray(y)


def sign_outcomes(const double[:, ::1] lams, const double[::1] a, const double[::1] b,
                  signed char[::1] x, signed char[::1] y):
    """Deterministic sign responses x = sign(a.lam), y = -sign(b.lam);
    sign(0) resolves to +1 on both sides before the y negation."""
    cdef Py_ssize_t i, n = lams.shape[0]
    cdef double da, db
    for i in range(n):
        da = (lams[i, 0] * a[0] + lams[i, 1] * a[1]) + lams[i, 2] * a[2]
        db = (lams[i, 0] * b[0] + lams[i, 1] * b[1]) + lams[i, 2] * b[2]
        x[i] = 1 if da >= 0.0 else -1
        y[i] = -1 if db >= 0.0 else 1
    return np.asarray(x), np.asarray(y)


def sign_tally(const double[:, ::1] lams, const double[:, ::1] a_dirs,
               const double[:, ::1] b_dirs, cnp.int64_t[:, :, ::1] counts):
    """Tally deterministic-sign outcomes of every draw under every setting."""
    cdef Py_ssize_t i, j, n = lams.shape[0], m = a_dirs.shape[0]
    cdef double da, db
    cdef int ix, iy
    for j in range(m):
        for i in range(n):
            da = (lams[i, 0] * a_dirs[j, 0] + lams[i, 1] * a_dirs[j, 1]) + lams[i, 2] * a_dirs[j, 2]
            db = (lams[i, 0] * b_dirs[j, 0] + lams[i, 1] * b_dirs[j, 1]) + lams[i, 2] * b_dirs[j, 2]
            ix = 0 if da >= 0.0 else 1
            iy = 1 if db >= 0.0 else 0
            counts[j, ix, iy] += 1
    return np.asarray(counts)


def contextual_outcomes(const double[:, ::1] frame_a, const double[::1] cos_a, const double[::1] uphi_a,
                        const double[:, ::1] frame_b, const double[::1] cos_b, const double[::1] uphi_b,
                        const double[::1] u_out, signed char[::1] x, signed char[::1] y):
    """Fused cap-smeared coincidence trial: sample both analyzer directions,
    then draw the pair outcome from the singlet distribution."""
    cdef Py_ssize_t i, n = cos_a.shape[0]
    cdef double c, s, ang, t1, t2
    cdef double ax, ay, az, bx, by, bz
    cdef double d, q_same, q_diff, c1, c2, c3, ui
    cdef int idx
    for i in range(n):
        c = cos_a[i]
        s = sqrt(1.0 - c * c)
        ang = (2.0 * M_PI) * uphi_a[i]
        t1 = s * cos(ang)
        t2 = s * sin(ang)
        ax = c * frame_a[2, 0] + t1 * frame_a[0, 0] + t2 * frame_a[1, 0]
        ay = c * frame_a[2, 1] + t1 * frame_a[0, 1] + t2 * frame_a[1, 1]
        az = c * frame_a[2, 2] + t1 * frame_a[0, 2] + t2 * frame_a[1, 2]

        c = cos_b[i]
        s = sqrt(1.0 - c * c)
        ang = (2.0 * M_PI) * uphi_b[i]
        t1 = s * cos(ang)
        t2 = s * sin(ang)
        bx = c * frame_b[2, 0] + t1 * frame_b[0, 0] + t2 * frame_b[1, 0]
        by = c * frame_b[2, 1] + t1 * frame_b[0, 1] + t2 * frame_b[1, 1]
        bz = c * frame_b[2, 2] + t1 * frame_b[0, 2] + t2 * frame_b[1, 2]

        d = (ax * bx + ay * by) + az * bz
        if d < -1.0:
            d = -1.0
        if d > 1.0:
            d = 1.0
        q_same = (1.0 - d) * 0.25
        q_diff = (1.0 + d) * 0.25
        c1 = q_same
        c2 = c1 + q_diff
        c3 = c2 + q_diff
        ui = u_out[i]
        idx = 0
        if ui >= c1:
            idx += 1
        if ui >= c2:
            idx += 1
        if ui >= c3:
            idx += 1
        x[i] = _X4C[idx]
        y[i] = _Y4C[idx]
    return np.asarray(x), np.asarray(y)
