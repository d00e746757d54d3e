"""Discrete mean curvature from the cotangent Laplace-Beltrami operator."""

import numpy as np

from .._kernels import STATUS_BAD_DUAL_AREA, STATUS_OK, vertex_curvature
from ..errors import DegenerateTriangleError
from .mesh import TriMesh


def mean_curvature(mesh: TriMesh):
    """Per-vertex signed mean curvature H (1/um) and barycentric dual area (um^2).

    H_i = sign(K_i . n_i) |K_i| / (2 A_i) where K_i is the cotangent-weighted
    area gradient at vertex i (the integrated mean-curvature normal), A_i the
    cotangent Voronoi dual area and n_i the area-weighted vertex normal.
    Positive for an outward-oriented sphere (H = 1/R) and the dual areas sum
    exactly to the total surface area.

    Raises DegenerateTriangleError with the offending triangle index when a
    triangle is too close to collapse for the cotangents to be finite.
    """
    n_v = mesh.n_vertices
    K = np.empty((n_v, 3))
    a_vertex = np.empty(n_v)
    n_vertex = np.empty((n_v, 3))
    status = np.zeros(2, dtype=np.int64)
    vertex_curvature(mesh.vertices, mesh.faces, K, a_vertex, n_vertex, status)
    if status[0] == STATUS_BAD_DUAL_AREA:
        raise DegenerateTriangleError(
            status[1], f"non-positive dual area at vertex {status[1]}")
    if status[0] != STATUS_OK:
        raise DegenerateTriangleError(status[1])
    norm_k = np.linalg.norm(K, axis=1)
    sign = np.sign(np.einsum("ij,ij->i", K, n_vertex))
    sign[sign == 0.0] = 1.0
    h = sign * norm_k / (2.0 * a_vertex)
    return h, a_vertex


def willmore_measure(mesh: TriMesh) -> float:
    """Total squared-curvature measure, the integral of H^2 over the surface.

    Equals 4 pi for a sphere of any radius.
    """
    h, a = mean_curvature(mesh)
    return float(np.sum(h * h * a))
