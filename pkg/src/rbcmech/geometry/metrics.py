"""Shape measurements of equilibrium and stretched cell meshes."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mesh import TriMesh

logger = logging.getLogger(__name__)

THICKNESS_BINS = 64
# Relative radius below which the dimple thickness is read off.
AXIS_FIT_RADIUS = 0.35


@dataclass
class ShapeMetrics:
    """Equilibrium cell dimensions: diameter and extremal thicknesses (um)."""

    D: float
    h_min: float
    h_max: float


def _sample_points(mesh: TriMesh) -> np.ndarray:
    """Vertices plus face centroids; densifies the thickness profile."""
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    return np.vstack([mesh.vertices, centroids])


def _principal_frame(mesh: TriMesh):
    """Area-weighted centroid and gyration-tensor eigenvectors (ascending)."""
    areas = mesh.triangle_areas()
    w = np.zeros(mesh.n_vertices)
    np.add.at(w, mesh.faces.ravel(), np.repeat(areas / 3.0, 3))
    center = (w[:, None] * mesh.vertices).sum(axis=0) / w.sum()
    d = mesh.vertices - center
    gyr = (w[:, None, None] * d[:, :, None] * d[:, None, :]).sum(axis=0) / w.sum()
    evals, evecs = np.linalg.eigh(gyr)
    return center, evals, evecs


def shape_metrics(mesh: TriMesh) -> ShapeMetrics:
    """Diameter, minimal and maximal thickness of an axisymmetric cell.

    The symmetry axis is the minor principal axis of the gyration tensor.
    D is the maximal extent perpendicular to the axis.  The thickness
    profile h(r) is built from vertices and face centroids over
    THICKNESS_BINS radial bins; h_max is its maximum and h_min the
    thickness at the axis obtained from quadratic sheet fits near r = 0
    (equal to the axial extent for convex shapes).  Logs a warning when the
    mesh is visibly not axisymmetric about the chosen axis.
    """
    center, _, evecs = _principal_frame(mesh)
    axis = evecs[:, 0]
    pts = _sample_points(mesh) - center
    z = pts @ axis
    rho = np.linalg.norm(pts - z[:, None] * axis[None, :], axis=1)
    rho_max = rho.max()
    diameter = 2.0 * rho_max

    # Axisymmetry check: in-plane extents along the two major principal axes.
    u = pts @ evecs[:, 1]
    v = pts @ evecs[:, 2]
    ext_u = u.max() - u.min()
    ext_v = v.max() - v.min()
    if abs(ext_u - ext_v) > 0.03 * max(ext_u, ext_v):
        logger.warning(
            "mesh not axisymmetric: in-plane extents %.3f vs %.3f um", ext_u, ext_v
        )

    # Thickness profile over radial bins; a bin needs points on both sheets.
    edges = np.linspace(0.0, rho_max * (1.0 + 1e-9), THICKNESS_BINS + 1)
    idx = np.digitize(rho, edges) - 1
    h_profile = np.full(THICKNESS_BINS, np.nan)
    for b in range(THICKNESS_BINS):
        sel = idx == b
        if not np.any(sel):
            continue
        zb = z[sel]
        if zb.max() <= 0.0 or zb.min() >= 0.0:
            continue
        h_profile[b] = zb.max() - zb.min()
    valid = np.isfinite(h_profile)
    h_max = float(np.nanmax(h_profile)) if np.any(valid) else float(z.max() - z.min())

    # Dimple thickness from quadratic-in-r^2 fits of the two sheets near the axis.
    near = rho < AXIS_FIT_RADIUS * rho_max
    h_min = None
    up = near & (z > 0.0)
    lo = near & (z < 0.0)
    if up.sum() >= 3 and lo.sum() >= 3:
        z_up = _axis_height(rho[up], z[up])
        z_lo = _axis_height(rho[lo], z[lo])
        if z_up is not None and z_lo is not None:
            h_min = z_up - z_lo
    if h_min is None or not np.isfinite(h_min) or h_min <= 0.0:
        h_min = h_max
    h_min = min(h_min, h_max)
    return ShapeMetrics(D=float(diameter), h_min=float(h_min), h_max=float(h_max))


def _axis_height(rho: np.ndarray, z: np.ndarray) -> Optional[float]:
    """Height of one sheet at the axis from a least-squares fit z = c0 + c1 r^2."""
    basis = np.column_stack([np.ones_like(rho), rho * rho])
    try:
        coef, *_ = np.linalg.lstsq(basis, z, rcond=None)
    except np.linalg.LinAlgError:
        return None
    return float(coef[0])


def principal_diameters(mesh: TriMesh, stretch_axis: Optional[np.ndarray] = None) -> dict:
    """Extents along the two largest principal directions (um).

    When a stretch axis is supplied, D_ax is the extent along it and D_tr
    the extent along the maximal-variance direction orthogonal to it;
    otherwise the two largest gyration-tensor axes are used.
    """
    center, _, evecs = _principal_frame(mesh)
    pts = mesh.vertices - center
    if stretch_axis is not None:
        axis = np.asarray(stretch_axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        proj = pts @ axis
        d_ax = proj.max() - proj.min()
        perp = pts - proj[:, None] * axis[None, :]
        cov = perp.T @ perp
        evals, vecs = np.linalg.eigh(cov)
        tr_dir = vecs[:, -1]
        t = pts @ tr_dir
        d_tr = t.max() - t.min()
    else:
        p1 = pts @ evecs[:, 2]
        p2 = pts @ evecs[:, 1]
        d_ax = p1.max() - p1.min()
        d_tr = p2.max() - p2.min()
    return {"D_ax": float(d_ax), "D_tr": float(d_tr)}
