"""Analytic surface flows and flux-form advection.

Flows are differential rotation (phi direction, latitude dependent) plus a
meridional profile (theta direction), optionally attenuated where the field
is strong.  Transport uses conservative flux-form updates with either
donor-cell upwind faces (method 1, division free) or WENO3 reconstruction
(method 2), advanced by the four-stage third-order SSP Runge-Kutta scheme.

Velocities are stored at cell centers as linear speeds on the unit sphere
(radians/hour times unit radius); faces average the two adjacent centers.
"""

import enum

import numpy as np

from . import kernels
from .errors import CflViolationError, DimensionMismatchError
from .grid import MapField
from .parloop import IndexSpace, default_executor

SUN_RADIUS_M = 6.96e8
DEG_PER_DAY = np.pi / 180.0 / 24.0     # -> radians/hour
M_PER_S = 3600.0 / SUN_RADIUS_M        # -> radians/hour on the unit sphere

CFL_SAFETY = 0.8
SSP_COEFFICIENT = 2.0                  # SSPRK(4,3) allows 2x the Euler CFL


class AdvectionMethod(enum.IntEnum):
    """Numeric codes follow the flow_num_method input convention."""

    UPWIND = 1
    WENO3 = 2


class FlowParams:
    """Analytic flow profile coefficients.

    d0, d2, d4: differential rotation in deg/day multiplying
    {1, cos^2(theta), cos^4(theta)}.  m1, m2: meridional amplitudes in m/s
    multiplying {sin(2 theta), sin(4 theta)}.  b0: attenuation scale in
    Gauss.  The defaults are conventional solar values, configurable and
    not tied to any particular data product.
    """

    def __init__(self, d0=0.18, d2=-2.36, d4=-1.787, m1=22.0, m2=11.0,
                 b0=500.0):
        if b0 <= 0.0:
            raise ValueError("attenuation scale b0 must be positive")
        self.d0 = float(d0)
        self.d2 = float(d2)
        self.d4 = float(d4)
        self.m1 = float(m1)
        self.m2 = float(m2)
        self.b0 = float(b0)


class FlowField:
    """Per-realization velocity components.

    vt and vp are (nr, ntm, npm); vt vanishes on the pole rows and vp is a
    linear speed along the parallel.  attenuation_enabled marks which
    realizations want field-strength attenuation; attenuation_applied
    records whether it has been applied to this instance.
    """

    def __init__(self, vt, vp, attenuation_enabled, attenuation_applied):
        self.vt = vt
        self.vp = vp
        self.attenuation_enabled = np.asarray(attenuation_enabled, bool)
        self.attenuation_applied = np.asarray(attenuation_applied, bool)
        self._cfl = None

    @property
    def nr(self):
        return self.vt.shape[0]


def build_analytic_flows(grid, params, nr, attenuation_enabled=None):
    """Sample the analytic profiles onto the grid for nr realizations.

    vp = sin(theta) * Omega(theta) with Omega = d0 + d2 cos^2 + d4 cos^4
    (converted to radians/hour); vt = m1 sin(2 theta) + m2 sin(4 theta).
    All realizations are identical before attenuation.
    """
    ct = np.cos(grid.theta)
    omega = (params.d0 + params.d2 * ct**2 + params.d4 * ct**4) * DEG_PER_DAY
    vp_row = grid.sin_theta * omega
    vt_row = (params.m1 * np.sin(2.0 * grid.theta)
              + params.m2 * np.sin(4.0 * grid.theta)) * M_PER_S
    vt_row[0] = 0.0
    vt_row[-1] = 0.0

    shape = (nr, grid.ntm, grid.npm)
    vt = np.broadcast_to(vt_row[None, :, None], shape).copy()
    vp = np.broadcast_to(vp_row[None, :, None], shape).copy()
    if attenuation_enabled is None:
        attenuation_enabled = np.zeros(nr, dtype=bool)
    return FlowField(vt, vp, attenuation_enabled, np.zeros(nr, dtype=bool))


def attenuate_flows(flow, field, params, enabled=None):
    """Scale flows down where the field is strong.

    multiplier(B) = 1 / (1 + (|B|/b0)^2), in (0, 1].  Realizations not
    enabled are returned bitwise unchanged.
    """
    if field.values.shape != flow.vt.shape:
        raise DimensionMismatchError(
            f"field shape {field.values.shape} does not match flow "
            f"{flow.vt.shape}"
        )
    if enabled is None:
        enabled = flow.attenuation_enabled
    enabled = np.asarray(enabled, bool)
    vt = flow.vt.copy()
    vp = flow.vp.copy()
    applied = flow.attenuation_applied.copy()
    for i in np.nonzero(enabled)[0]:
        b = field.values[i]
        mult = 1.0 / (1.0 + (np.abs(b) / params.b0) ** 2)
        vt[i] *= mult
        vp[i] *= mult
        vt[i, 0, :] = 0.0
        vt[i, -1, :] = 0.0
        applied[i] = True
    return FlowField(vt, vp, flow.attenuation_enabled.copy(), applied)


def cfl_dt_limit(grid, flow):
    """Advective step limit per realization (hours).

    0.8 times the shortest cell-crossing time over interior cells,
    min(dtheta/|vt|, sin(theta) dphi/|vp|); zero-velocity entries are
    excluded and an identically zero flow returns +inf.
    """
    if flow._cfl is not None:
        return flow._cfl.copy()
    ntm, npm = grid.ntm, grid.npm
    p = npm - 1
    dth = grid.dth_interior
    widths_phi = (grid.sin_theta[1:ntm - 1] * grid.dp[0])[None, :, None]
    avt = np.abs(flow.vt[:, 1:ntm - 1, :p])
    avp = np.abs(flow.vp[:, 1:ntm - 1, :p])
    with np.errstate(divide="ignore"):
        t_th = np.where(avt > 0.0, dth / avt, np.inf)
        t_ph = np.where(avp > 0.0, widths_phi / avp, np.inf)
    limit = CFL_SAFETY * np.minimum(t_th.min(axis=(1, 2)),
                                    t_ph.min(axis=(1, 2)))
    flow._cfl = limit
    return limit.copy()


def _resolve_method(method):
    try:
        return AdvectionMethod(int(method))
    except ValueError:
        raise ValueError(f"unknown advection method {method!r}") from None


def _euler_slab(grid, vt2, vp2, x2, dt, method, dt_inv_area):
    """One conservative Euler stage on a realization slab."""
    ntm, npm = x2.shape
    ft = np.empty((ntm - 1, npm - 1))
    fp = np.empty((ntm, npm - 1))
    if method == AdvectionMethod.UPWIND:
        kernels.upwind_fluxes(x2, vt2, vp2, grid.theta_face_len,
                              grid.phi_face_len, ft, fp)
    else:
        kernels.weno3_fluxes(x2, vt2, vp2, grid.theta_face_len,
                             grid.phi_face_len, grid.weno_eps_theta,
                             grid.weno_eps_phi, ft, fp)
    y2 = np.empty_like(x2)
    cap = dt * grid.inv_cap_area
    kernels.flux_update(x2, ft, fp, dt_inv_area, cap, cap, y2)
    return y2


def advect_step(grid, flow, x, dt, method, executor=None):
    """Single Euler stage over the whole ensemble.

    Raises CflViolationError instead of clamping when dt exceeds the
    stage limit of any realization.
    """
    method = _resolve_method(method)
    if x.values.shape != flow.vt.shape:
        raise DimensionMismatchError("field and flow shapes differ")
    limits = cfl_dt_limit(grid, flow)
    for i in range(x.nr):
        if dt > limits[i] * (1.0 + 1e-12):
            raise CflViolationError(i, dt, limits[i])
    ex = executor if executor is not None else default_executor()
    y = MapField.zeros(grid, x.nr)
    dt_inv_area = dt * grid.inv_cell_area

    def body(inner, i):
        y.values[i] = _euler_slab(grid, flow.vt[i], flow.vp[i],
                                  x.values[i], dt, method, dt_inv_area)

    ex.par_for_nested(IndexSpace((0, x.nr - 1)), body)
    return y


def ssprk43_combine(stage, u0, dt):
    """Four-stage third-order SSP combination of Euler stages.

    Shu-Osher form with SSP coefficient 2: three half-step Euler stages,
    a convex pullback toward u0, and a final half-step stage.  Works on
    anything supporting scalar multiplication and addition, which the
    temporal-order tests exploit with a scalar ODE surrogate.
    """
    h = 0.5 * dt
    u1 = stage(u0, h)
    u2 = stage(u1, h)
    # Anchored form of (2/3) u0 + (1/3) (u2 + h F(u2)); exact identity when
    # the stages pass the state through unchanged (zero flow is bitwise
    # identity).
    u3 = u0 + (1.0 / 3.0) * (stage(u2, h) - u0)
    return stage(u3, h)


def _ssprk_slab(grid, vt2, vp2, x2, dt, method):
    dt_inv_area_h = (0.5 * dt) * grid.inv_cell_area

    def stage(u, h):
        return _euler_slab(grid, vt2, vp2, u, h, method, dt_inv_area_h)

    return ssprk43_combine(stage, x2, dt)


def ssprk43_advance(grid, flow, x, dt, method, executor=None):
    """SSPRK(4,3) advance by dt; stable up to twice the Euler CFL limit."""
    method = _resolve_method(method)
    if x.values.shape != flow.vt.shape:
        raise DimensionMismatchError("field and flow shapes differ")
    limits = cfl_dt_limit(grid, flow)
    for i in range(x.nr):
        if dt > SSP_COEFFICIENT * limits[i] * (1.0 + 1e-12):
            raise CflViolationError(i, dt, SSP_COEFFICIENT * limits[i])
    ex = executor if executor is not None else default_executor()
    y = MapField.zeros(grid, x.nr)

    def body(inner, i):
        y.values[i] = _ssprk_slab(grid, flow.vt[i], flow.vp[i],
                                  x.values[i], dt, method)

    ex.par_for_nested(IndexSpace((0, x.nr - 1)), body)
    return y
