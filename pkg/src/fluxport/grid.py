"""Spherical surface mesh and the map fields that live on it.

The mesh covers the full sphere with colatitude rows j = 1..ntm (1-based in
the notation below; arrays are 0-based) and longitude columns k = 1..npm.
Rows 1 and ntm sit exactly at the poles and are treated as spherical caps;
column npm is a periodic wrap point aliasing column 1 and carries zero cell
area so integrals count each physical cell exactly once.
"""

import numpy as np

from .errors import DimensionMismatchError

FOUR_PI = 4.0 * np.pi


class SphericalGrid:
    """Uniform colatitude/longitude mesh on the unit sphere.

    Attributes
    ----------
    ntm : number of theta rows including the two pole rows
    npm : number of phi columns including the wrap column
    theta, phi : node coordinates (radians)
    dtheta, dp : cell widths (radians); pole rows have half width
    sin_theta : sin(theta) per row
    cell_area : steradians per cell, zero on the wrap column
    inv_cell_area : 1/cell_area with safe values on caps and wrap
    """

    def __init__(self, n_theta, n_phi):
        if n_theta < 5:
            raise ValueError(f"n_theta must be >= 5, got {n_theta}")
        if n_phi < 8:
            raise ValueError(f"n_phi must be >= 8, got {n_phi}")
        self.ntm = int(n_theta)
        self.npm = int(n_phi) + 1

        dth = np.pi / (self.ntm - 1)
        dph = 2.0 * np.pi / n_phi
        self.theta = np.linspace(0.0, np.pi, self.ntm)
        self.phi = np.linspace(0.0, 2.0 * np.pi, self.npm)
        self.dtheta = np.full(self.ntm, dth)
        self.dtheta[0] = 0.5 * dth
        self.dtheta[-1] = 0.5 * dth
        self.dp = np.full(self.npm, dph)
        self.sin_theta = np.sin(self.theta)
        # Exact zeros at the poles (np.sin(pi) is ~1e-16, not 0).
        self.sin_theta[0] = 0.0
        self.sin_theta[-1] = 0.0

        # Interior cell: latitude band of full width dth times dp.
        # Pole cell: cap of half the interior spacing, split over columns,
        # which preserves the 4*pi partition exactly (telescoping bands).
        band = 2.0 * self.sin_theta * np.sin(0.5 * dth)
        band[0] = 1.0 - np.cos(0.5 * dth)
        band[-1] = 1.0 - np.cos(0.5 * dth)
        self.cell_area = np.outer(band, self.dp)
        self.cell_area[:, -1] = 0.0

        self.cap_area = 2.0 * np.pi * (1.0 - np.cos(0.5 * dth))

        inv = np.empty_like(self.cell_area)
        inv[:, :-1] = 1.0 / self.cell_area[:, :-1]
        inv[:, -1] = inv[:, 0]
        inv[0, :] = 1.0 / self.cap_area
        inv[-1, :] = 1.0 / self.cap_area
        self.inv_cell_area = inv

        # Face geometry used by the flux-form operators.  theta_face_sin[j]
        # is sin at the face between rows j and j+1; the face between the
        # north cap and row 1 sits at dth/2, consistent with the band edges.
        face_theta = self.theta[:-1] + 0.5 * dth
        face_theta[0] = 0.5 * dth
        face_theta[-1] = np.pi - 0.5 * dth
        self.theta_face_sin = np.sin(face_theta)
        self.dth_interior = dth
        # Flux-form face lengths: theta faces span dp in phi, phi faces
        # span dth in theta (interior rows only have phi faces).
        self.theta_face_len = self.theta_face_sin * dph
        self.phi_face_len = dth
        self.inv_cap_area = 1.0 / self.cap_area
        # Mesh-scaled smoothness epsilon for the WENO weights (face-normal
        # spacing squared); a fixed epsilon loses an order of accuracy near
        # smooth extrema.
        self.weno_eps_theta = dth * dth
        self.weno_eps_phi = (self.sin_theta * dph) ** 2
        self.weno_eps_phi[0] = self.weno_eps_phi[1]
        self.weno_eps_phi[-1] = self.weno_eps_phi[-2]

    def check_field_shape(self, values):
        if values.ndim != 3 or values.shape[1:] != (self.ntm, self.npm):
            raise DimensionMismatchError(
                f"field shape {values.shape} does not match grid "
                f"(ntm={self.ntm}, npm={self.npm})"
            )


def build_uniform_grid(n_theta, n_phi):
    """Uniform grid with pole rows at theta = 0 and pi.

    n_theta counts theta points including both pole rows; n_phi counts
    physical longitude columns (the stored wrap column is added here).
    """
    return SphericalGrid(n_theta, n_phi)


class MapField:
    """Ensemble of scalar maps: values[i, j, k] for realization i.

    Stored C-contiguous with the realization axis outermost so each
    realization is a contiguous (ntm, npm) slab.  The on-disk order
    (j-major, then k, then i) is handled by the io module.
    """

    def __init__(self, values, validate=True):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 3:
            raise DimensionMismatchError("MapField expects a 3-d array")
        self.values = values
        if validate:
            if not np.all(np.isfinite(values)):
                raise ValueError("MapField values must be finite")

    @classmethod
    def zeros(cls, grid, nr):
        return cls(np.zeros((nr, grid.ntm, grid.npm)), validate=False)

    @classmethod
    def from_function(cls, grid, fn, nr=1):
        """Sample fn(theta, phi) onto every realization."""
        th, ph = np.meshgrid(grid.theta, grid.phi, indexing="ij")
        slab = np.asarray(fn(th, ph), dtype=np.float64)
        values = np.repeat(slab[None, :, :], nr, axis=0)
        f = cls(values)
        f.refresh_wrap()
        return f

    @property
    def nr(self):
        return self.values.shape[0]

    @property
    def ntm(self):
        return self.values.shape[1]

    @property
    def npm(self):
        return self.values.shape[2]

    def copy(self):
        return MapField(self.values.copy(), validate=False)

    def refresh_wrap(self):
        """Copy column 1 into the wrap column npm (same physical point)."""
        self.values[:, :, -1] = self.values[:, :, 0]

    def wrap_consistent(self):
        return bool(
            np.array_equal(self.values[:, :, -1], self.values[:, :, 0])
        )


def integrate_map(grid, field_slab):
    """Area-weighted totals of one realization slab.

    Returns (signed, positive, negative) in field units times steradian.
    The wrap column has zero area so each physical cell counts once, and
    signed is computed as positive + negative so the identity is exact.
    """
    slab = np.asarray(field_slab, dtype=np.float64)
    if slab.shape != (grid.ntm, grid.npm):
        raise DimensionMismatchError(
            f"slab shape {slab.shape} does not match grid "
            f"({grid.ntm}, {grid.npm})"
        )
    contrib = slab * grid.cell_area
    positive = float(np.sum(np.where(contrib > 0.0, contrib, 0.0)))
    negative = float(np.sum(np.where(contrib < 0.0, contrib, 0.0)))
    signed = positive + negative
    return signed, positive, negative
