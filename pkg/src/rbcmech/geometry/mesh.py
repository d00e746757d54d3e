"""Triangulated closed-surface mesh and basic geometric summaries.

Lengths are in micrometres throughout.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .._kernels import tri_geometry
from ..errors import MeshTopologyError

# Icosphere subdivision is capped to bound memory (level 7 = 163842 vertices).
MAX_SUBDIVISION_LEVEL = 7


@dataclass
class TriMesh:
    """Closed, orientable, genus-0 triangle mesh.

    vertices : (N, 3) float64 positions in um
    faces    : (F, 3) int64 vertex indices, counter-clockwise seen from outside
    velocities : optional (N, 3) float64 in um/ms
    """

    vertices: np.ndarray
    faces: np.ndarray
    velocities: Optional[np.ndarray] = None
    _edges: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshTopologyError("vertices must be an (N, 3) array")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise MeshTopologyError("faces must be an (F, 3) array")
        if self.velocities is not None:
            self.velocities = np.ascontiguousarray(self.velocities, dtype=np.float64)
            if self.velocities.shape != self.vertices.shape:
                raise MeshTopologyError("velocities must match vertices shape")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) int64 array, i < j, sorted."""
        if self._edges is None:
            pairs = np.vstack(
                [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
            )
            pairs.sort(axis=1)
            self._edges = np.unique(pairs, axis=0)
        return self._edges

    def copy(self) -> "TriMesh":
        vel = None if self.velocities is None else self.velocities.copy()
        return TriMesh(self.vertices.copy(), self.faces.copy(), vel)

    def scaled(self, factor: float) -> "TriMesh":
        return TriMesh(self.vertices * float(factor), self.faces.copy())

    def triangle_areas(self) -> np.ndarray:
        areas = np.empty(self.n_faces)
        normals = np.empty((self.n_faces, 3))
        tri_geometry(self.vertices, self.faces, areas, normals)
        return areas

    def validate(self) -> None:
        """Check closedness, orientability, Euler characteristic and orientation.

        Raises MeshTopologyError with a description of the first violation.
        """
        if self.faces.min(initial=0) < 0 or self.faces.max(initial=-1) >= self.n_vertices:
            raise MeshTopologyError("face indices out of range")
        directed = {}
        for t, (a, b, c) in enumerate(self.faces):
            for i, j in ((a, b), (b, c), (c, a)):
                if (i, j) in directed:
                    raise MeshTopologyError(
                        f"directed edge ({i}, {j}) repeated at face {t}: not orientable"
                    )
                directed[(i, j)] = t
        for (i, j) in directed:
            if (j, i) not in directed:
                raise MeshTopologyError(f"boundary edge ({i}, {j}): mesh not closed")
        n_e = len(directed) // 2
        euler = self.n_vertices - n_e + self.n_faces
        if euler != 2:
            raise MeshTopologyError(f"Euler characteristic {euler} != 2")
        areas = self.triangle_areas()
        if np.any(areas <= 0.0):
            t = int(np.argmin(areas))
            raise MeshTopologyError(f"non-positive area at triangle {t}")
        _, volume = _area_volume(self)
        if volume <= 0.0:
            raise MeshTopologyError(f"signed volume {volume:.4g} <= 0: inverted orientation")


def _area_volume(mesh: TriMesh):
    areas = np.empty(mesh.n_faces)
    normals = np.empty((mesh.n_faces, 3))
    return tri_geometry(mesh.vertices, mesh.faces, areas, normals)


def geometry_summary(mesh: TriMesh) -> dict:
    """Total area (um^2), enclosed volume (um^3) and reduced volume.

    The reduced volume is V / ((4 pi / 3) (A / 4 pi)^(3/2)), 1 for a sphere.
    Raises MeshTopologyError on inverted orientation (negative volume).
    """
    area, volume = _area_volume(mesh)
    if volume <= 0.0:
        raise MeshTopologyError(f"signed volume {volume:.4g} <= 0: inverted orientation")
    v_sphere = (4.0 * np.pi / 3.0) * (area / (4.0 * np.pi)) ** 1.5
    return {"area": area, "volume": volume, "reduced_volume": volume / v_sphere}


def sphere_volume_for_area(area: float) -> float:
    """Volume of the sphere with the given surface area."""
    return (4.0 * np.pi / 3.0) * (area / (4.0 * np.pi)) ** 1.5


def build_icosphere(subdivision_level: int, radius: float) -> TriMesh:
    """Subdivided icosahedron with all vertices at ``radius`` from the origin.

    V = 10 * 4^level + 2 vertices and F = 20 * 4^level faces, outward
    orientation.  The level is capped at MAX_SUBDIVISION_LEVEL.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    level = int(subdivision_level)
    if level < 0:
        raise ValueError("subdivision_level must be >= 0")
    level = min(level, MAX_SUBDIVISION_LEVEL)

    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )

    verts /= np.linalg.norm(verts, axis=1)[:, None]
    for _ in range(level):
        vert_list = list(verts)
        midpoint = {}

        def mid(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                p = vert_list[i] + vert_list[j]
                p = p / np.linalg.norm(p)
                midpoint[key] = len(vert_list)
                vert_list.append(p)
            return midpoint[key]

        new_faces = np.empty((4 * faces.shape[0], 3), dtype=np.int64)
        for t, (a, b, c) in enumerate(faces):
            ab = mid(a, b)
            bc = mid(b, c)
            ca = mid(c, a)
            new_faces[4 * t + 0] = (a, ab, ca)
            new_faces[4 * t + 1] = (b, bc, ab)
            new_faces[4 * t + 2] = (c, ca, bc)
            new_faces[4 * t + 3] = (ab, bc, ca)
        verts = np.array(vert_list)
        faces = new_faces

    return TriMesh(verts * float(radius), faces)
