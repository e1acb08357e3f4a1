# cython: language_level=3
"""Compiled solver kernels: the hot-loop backend.

Bitwise twin of fluxport.kernels_numpy.  Keep per-element expression
shapes exactly in sync with that module, and keep the build flags strict
(no FMA contraction, no fast-math) so both backends round identically.
"""

cimport cython
from libc.math cimport fmax, fmin

BACKEND_NAME = "compiled"

cdef double ONE_THIRD = 1.0 / 3.0
cdef double TWO_THIRDS = 2.0 / 3.0


@cython.boundscheck(False)
@cython.wraparound(False)
def seq_sum(double[::1] a):
    """Strict left-to-right sum of a 1-d array."""
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double s = 0.0
    with nogil:
        for i in range(n):
            s = s + a[i]
    return s


@cython.boundscheck(False)
@cython.wraparound(False)
def slab_min_max(double[:, ::1] x):
    """Exact (min, max) over the physical columns of a slab."""
    cdef Py_ssize_t j, k, ntm = x.shape[0], p = x.shape[1] - 1
    cdef double lo = x[0, 0], hi = x[0, 0]
    with nogil:
        for j in range(ntm):
            for k in range(p):
                lo = fmin(lo, x[j, k])
                hi = fmax(hi, x[j, k])
    return lo, hi


@cython.boundscheck(False)
@cython.wraparound(False)
def diffusion_interior(double[:, ::1] x, double[:, :, ::1] coef,
                       double[:, ::1] y):
    """Five-point stencil on interior rows, periodic in phi.

    Difference form of the product-form stencil; constants are annihilated
    exactly because every neighbor difference vanishes.
    """
    cdef Py_ssize_t j, k, km1, ntm = x.shape[0], p = x.shape[1] - 1
    cdef double xc
    with nogil:
        for j in range(1, ntm - 1):
            for k in range(p):
                km1 = p - 1 if k == 0 else k - 1
                xc = x[j, k]
                y[j, k] = (
                    coef[j, k, 0] * (x[j, km1] - xc)
                    + coef[j, k, 1] * (x[j - 1, k] - xc)
                    + coef[j, k, 3] * (x[j + 1, k] - xc)
                    + coef[j, k, 4] * (x[j, k + 1] - xc)
                )
            y[j, p] = y[j, 0]


@cython.boundscheck(False)
@cython.wraparound(False)
def pole_flux_sums(double[:, ::1] x, double[:, ::1] nu, double[::1] dp):
    """Polar boundary flux reductions (fn, fs), strict k order."""
    cdef Py_ssize_t k, ntm = x.shape[0], p = x.shape[1] - 1
    cdef double fn = 0.0, fs = 0.0
    with nogil:
        for k in range(p):
            fn = fn + (nu[0, k] + nu[1, k]) * (x[1, k] - x[0, k]) * dp[k]
            fs = fs + (
                (nu[ntm - 2, k] + nu[ntm - 1, k])
                * (x[ntm - 1, k] - x[ntm - 2, k])
                * dp[k]
            )
    return fn, fs


# BEGIN DIVISION-FREE KERNELS
# The donor-cell flux kernel and the flux-difference update perform no
# division anywhere; inverse areas arrive precomputed.

@cython.boundscheck(False)
@cython.wraparound(False)
def upwind_fluxes(double[:, ::1] x, double[:, ::1] vt, double[:, ::1] vp,
                  double[::1] theta_face_len, double phi_face_len,
                  double[:, ::1] ft, double[:, ::1] fp):
    cdef Py_ssize_t j, k, ntm = x.shape[0], p = x.shape[1] - 1
    cdef double vf, up
    with nogil:
        for j in range(ntm - 1):
            for k in range(p):
                vf = 0.5 * (vt[j, k] + vt[j + 1, k])
                up = fmax(vf, 0.0) * x[j, k] + fmin(vf, 0.0) * x[j + 1, k]
                ft[j, k] = theta_face_len[j] * up
        for j in range(1, ntm - 1):
            for k in range(p):
                vf = 0.5 * (vp[j, k] + vp[j, k + 1])
                up = fmax(vf, 0.0) * x[j, k] + fmin(vf, 0.0) * x[j, k + 1]
                fp[j, k] = phi_face_len * up
        for k in range(p):
            fp[0, k] = 0.0
            fp[ntm - 1, k] = 0.0


@cython.boundscheck(False)
@cython.wraparound(False)
def flux_update(double[:, ::1] x, double[:, ::1] ft, double[:, ::1] fp,
                double[:, ::1] dt_inv_area, double dt_inv_cap_n,
                double dt_inv_cap_s, double[:, ::1] y):
    cdef Py_ssize_t j, k, km1, ntm = x.shape[0], p = x.shape[1] - 1
    cdef double div, north_out = 0.0, south_in = 0.0
    with nogil:
        for j in range(1, ntm - 1):
            for k in range(p):
                km1 = p - 1 if k == 0 else k - 1
                div = (ft[j, k] - ft[j - 1, k]) + (fp[j, k] - fp[j, km1])
                y[j, k] = x[j, k] - dt_inv_area[j, k] * div
        for k in range(p):
            north_out = north_out + ft[0, k]
            south_in = south_in + ft[ntm - 2, k]
        for k in range(p):
            y[0, k] = x[0, k] - dt_inv_cap_n * north_out
            y[ntm - 1, k] = x[ntm - 1, k] + dt_inv_cap_s * south_in
        for j in range(ntm):
            y[j, p] = y[j, 0]

# END DIVISION-FREE KERNELS


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
cdef inline double _weno_face(double xm, double xc, double xp, double xpp,
                              double vf, double eps) noexcept nogil:
    """Upwinded WENO3 reconstruction at the face between xc and xp."""
    cdef double b0, b1, a0, a1, left, right
    b0 = (xc - xm) * (xc - xm)
    b1 = (xp - xc) * (xp - xc)
    a0 = ONE_THIRD / ((eps + b0) * (eps + b0))
    a1 = TWO_THIRDS / ((eps + b1) * (eps + b1))
    left = (a0 * (1.5 * xc - 0.5 * xm) + a1 * (0.5 * xc + 0.5 * xp)) / (
        a0 + a1
    )
    if vf >= 0.0:
        return left
    b0 = (xp - xpp) * (xp - xpp)
    b1 = (xc - xp) * (xc - xp)
    a0 = ONE_THIRD / ((eps + b0) * (eps + b0))
    a1 = TWO_THIRDS / ((eps + b1) * (eps + b1))
    right = (a0 * (1.5 * xp - 0.5 * xpp) + a1 * (0.5 * xp + 0.5 * xc)) / (
        a0 + a1
    )
    return right


@cython.boundscheck(False)
@cython.wraparound(False)
def weno3_fluxes(double[:, ::1] x, double[:, ::1] vt, double[:, ::1] vp,
                 double[::1] theta_face_len, double phi_face_len,
                 double eps_theta, double[::1] eps_phi,
                 double[:, ::1] ft, double[:, ::1] fp):
    """WENO3 face fluxes; cap-adjacent theta faces use donor-cell values."""
    cdef Py_ssize_t j, k, km1, kp1, kp2, ntm = x.shape[0]
    cdef Py_ssize_t p = x.shape[1] - 1
    cdef double vf, up, face, eps
    with nogil:
        for j in range(ntm - 1):
            if 1 <= j <= ntm - 3:
                for k in range(p):
                    vf = 0.5 * (vt[j, k] + vt[j + 1, k])
                    face = vf * _weno_face(
                        x[j - 1, k], x[j, k], x[j + 1, k], x[j + 2, k], vf,
                        eps_theta
                    )
                    ft[j, k] = theta_face_len[j] * face
            else:
                for k in range(p):
                    vf = 0.5 * (vt[j, k] + vt[j + 1, k])
                    up = fmax(vf, 0.0) * x[j, k] + fmin(vf, 0.0) * x[j + 1, k]
                    ft[j, k] = theta_face_len[j] * up
        for j in range(1, ntm - 1):
            eps = eps_phi[j]
            for k in range(p):
                km1 = p - 1 if k == 0 else k - 1
                kp1 = k + 1 if k + 1 < p else k + 1 - p
                kp2 = k + 2 if k + 2 < p else k + 2 - p
                vf = 0.5 * (vp[j, k] + vp[j, k + 1])
                face = vf * _weno_face(
                    x[j, km1], x[j, k], x[j, kp1], x[j, kp2], vf, eps
                )
                fp[j, k] = phi_face_len * face
        for k in range(p):
            fp[0, k] = 0.0
            fp[ntm - 1, k] = 0.0
