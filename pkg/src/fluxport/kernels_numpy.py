"""Pure-numpy kernels: the fallback backend for the compiled core.

Every function here has a bitwise-identical twin in the compiled extension
(fluxport._core).  Keep the floating-point expression shapes in the two
sources exactly in sync: same association, same evaluation order per
element.  The compiled core is built with FMA contraction disabled for the
same reason.

All kernels operate on one realization slab: x and y are (ntm, npm) arrays
whose last column is the periodic wrap point (column npm-1 aliases column
0), so physical longitude columns are 0..npm-2.
"""

import numpy as np

BACKEND_NAME = "numpy"

ONE_THIRD = 1.0 / 3.0
TWO_THIRDS = 2.0 / 3.0


def seq_sum(a):
    """Strict left-to-right sum, bitwise equal to a serial accumulation.

    numpy's add.accumulate applies the operation sequentially (unlike
    np.sum's pairwise blocking), which the test suite pins against a plain
    Python loop.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    return float(np.cumsum(a)[-1])


def slab_min_max(x):
    """Exact (min, max) over the physical columns of a slab."""
    phys = x[:, :-1]
    return float(np.min(phys)), float(np.max(phys))


def diffusion_interior(x, coef, y):
    """Five-point stencil on interior rows, periodic in phi.

    coef[j, k, :] holds (west, north, center, south, east) weights.  The
    update is evaluated in difference form,

        y = c_w*(x_w - x_c) + c_n*(x_n - x_c) + c_s*(x_s - x_c)
            + c_e*(x_e - x_c)

    which is algebraically the plain five-product form (the center weight
    is minus the sum of the others) but annihilates constant fields
    exactly in floating point.
    """
    ntm, npm = x.shape
    p = npm - 1
    xc = x[1:ntm - 1, 0:p]
    xw = np.empty_like(xc)
    xw[:, 0] = x[1:ntm - 1, p - 1]
    xw[:, 1:] = x[1:ntm - 1, 0:p - 1]
    xe = x[1:ntm - 1, 1:p + 1]
    xn = x[0:ntm - 2, 0:p]
    xs = x[2:ntm, 0:p]
    c = coef[1:ntm - 1, 0:p, :]
    y[1:ntm - 1, 0:p] = (
        c[:, :, 0] * (xw - xc)
        + c[:, :, 1] * (xn - xc)
        + c[:, :, 3] * (xs - xc)
        + c[:, :, 4] * (xe - xc)
    )
    y[1:ntm - 1, p] = y[1:ntm - 1, 0]


def pole_flux_sums(x, nu, dp):
    """Polar boundary flux reductions (fn, fs), strict k order.

    fn sums (nu_1k + nu_2k) * (x_2k - x_1k) * dp_k over physical columns,
    fs the mirrored expression at the south rows.
    """
    ntm, npm = x.shape
    p = npm - 1
    tn = (nu[0, 0:p] + nu[1, 0:p]) * (x[1, 0:p] - x[0, 0:p]) * dp[0:p]
    ts = (
        (nu[ntm - 2, 0:p] + nu[ntm - 1, 0:p])
        * (x[ntm - 1, 0:p] - x[ntm - 2, 0:p])
        * dp[0:p]
    )
    return seq_sum(tn), seq_sum(ts)


# The upwind flux and update kernels are intentionally free of division
# operations (precomputed inverse areas arrive as multipliers); the test
# suite audits their sources for that property.

def upwind_fluxes(x, vt, vp, theta_face_len, phi_face_len, ft, fp):
    """Donor-cell face fluxes.

    ft[j, k]: flux through the theta face between rows j and j+1, positive
    toward increasing theta.  fp[j, k]: flux through the phi face between
    columns k and k+1 on interior rows, positive toward increasing phi.
    """
    ntm, npm = x.shape
    p = npm - 1
    vtf = 0.5 * (vt[0:ntm - 1, 0:p] + vt[1:ntm, 0:p])
    xl = x[0:ntm - 1, 0:p]
    xr = x[1:ntm, 0:p]
    up = np.maximum(vtf, 0.0) * xl + np.minimum(vtf, 0.0) * xr
    ft[:, :] = theta_face_len[:, None] * up

    vpf = 0.5 * (vp[1:ntm - 1, 0:p] + vp[1:ntm - 1, 1:p + 1])
    xl = x[1:ntm - 1, 0:p]
    xr = x[1:ntm - 1, 1:p + 1]
    up = np.maximum(vpf, 0.0) * xl + np.minimum(vpf, 0.0) * xr
    fp[1:ntm - 1, :] = phi_face_len * up
    fp[0, :] = 0.0
    fp[ntm - 1, :] = 0.0


def flux_update(x, ft, fp, dt_inv_area, dt_inv_cap_n, dt_inv_cap_s, y):
    """Conservative update from precomputed face fluxes.

    Interior cells lose their net outgoing flux scaled by dt over area;
    pole rows are set uniformly from the net flux into each polar cap.
    """
    ntm, npm = x.shape
    p = npm - 1
    fpw = np.empty_like(fp[1:ntm - 1, :])
    fpw[:, 0] = fp[1:ntm - 1, p - 1]
    fpw[:, 1:] = fp[1:ntm - 1, 0:p - 1]
    div = (ft[1:ntm - 1, :] - ft[0:ntm - 2, :]) + (fp[1:ntm - 1, :] - fpw)
    y[1:ntm - 1, 0:p] = x[1:ntm - 1, 0:p] - dt_inv_area[1:ntm - 1, 0:p] * div

    north_out = seq_sum(ft[0, :])
    south_in = seq_sum(ft[ntm - 2, :])
    y[0, 0:p] = x[0, 0:p] - dt_inv_cap_n * north_out
    y[ntm - 1, 0:p] = x[ntm - 1, 0:p] + dt_inv_cap_s * south_in
    y[:, p] = y[:, 0]


def weno3_fluxes(x, vt, vp, theta_face_len, phi_face_len, eps_theta,
                 eps_phi, ft, fp):
    """Third-order WENO face fluxes with standard smoothness weights.

    The smoothness epsilon is mesh scaled (face-normal spacing squared,
    precomputed on the grid), which keeps third order through smooth
    extrema.  Faces adjacent to the polar caps lack a full stencil and
    fall back to donor-cell values there.  Unlike the upwind kernel this
    one divides (inside the nonlinear weights), which is what the method
    comparison measures.
    """
    ntm, npm = x.shape
    p = npm - 1

    # theta faces: full stencil on faces 1..ntm-3, donor-cell at the two
    # cap-adjacent faces.
    vtf = 0.5 * (vt[0:ntm - 1, 0:p] + vt[1:ntm, 0:p])
    xl = x[0:ntm - 1, 0:p]
    xr = x[1:ntm, 0:p]
    recon = np.maximum(vtf, 0.0) * xl + np.minimum(vtf, 0.0) * xr
    ft[:, :] = theta_face_len[:, None] * recon

    xm = x[0:ntm - 3, 0:p]
    xc = x[1:ntm - 2, 0:p]
    xp_ = x[2:ntm - 1, 0:p]
    xpp = x[3:ntm, 0:p]
    vff = vtf[1:ntm - 2, :]
    face = vff * _weno_face(xm, xc, xp_, xpp, vff, eps_theta)
    ft[1:ntm - 2, :] = theta_face_len[1:ntm - 2, None] * face

    # phi faces: fully periodic over the physical columns.
    xphys = x[1:ntm - 1, 0:p]
    idx = np.arange(p)
    xm = xphys[:, (idx - 1) % p]
    xc = xphys
    xp_ = xphys[:, (idx + 1) % p]
    xpp = xphys[:, (idx + 2) % p]
    vpf = 0.5 * (vp[1:ntm - 1, 0:p] + vp[1:ntm - 1, 1:p + 1])
    face = vpf * _weno_face(xm, xc, xp_, xpp, vpf,
                            eps_phi[1:ntm - 1, None])
    fp[1:ntm - 1, :] = phi_face_len * face
    fp[0, :] = 0.0
    fp[ntm - 1, :] = 0.0


def _weno_face(xm, xc, xp, xpp, vf, eps):
    """Upwinded WENO3 reconstruction at the face between xc and xp."""
    b0 = (xc - xm) * (xc - xm)
    b1 = (xp - xc) * (xp - xc)
    a0 = ONE_THIRD / ((eps + b0) * (eps + b0))
    a1 = TWO_THIRDS / ((eps + b1) * (eps + b1))
    left = (a0 * (1.5 * xc - 0.5 * xm) + a1 * (0.5 * xc + 0.5 * xp)) / (
        a0 + a1
    )

    b0 = (xp - xpp) * (xp - xpp)
    b1 = (xc - xp) * (xc - xp)
    a0 = ONE_THIRD / ((eps + b0) * (eps + b0))
    a1 = TWO_THIRDS / ((eps + b1) * (eps + b1))
    right = (a0 * (1.5 * xp - 0.5 * xpp) + a1 * (0.5 * xp + 0.5 * xc)) / (
        a0 + a1
    )
    return np.where(vf >= 0.0, left, right)
