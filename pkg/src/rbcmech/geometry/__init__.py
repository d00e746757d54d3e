from .mesh import TriMesh, build_icosphere, geometry_summary
from .curvature import mean_curvature
from .strain import StrainField, strain_invariants
from .metrics import ShapeMetrics, principal_diameters, shape_metrics
from .meshio import read_mesh, write_mesh

__all__ = [
    "TriMesh",
    "build_icosphere",
    "geometry_summary",
    "mean_curvature",
    "StrainField",
    "strain_invariants",
    "ShapeMetrics",
    "shape_metrics",
    "principal_diameters",
    "read_mesh",
    "write_mesh",
]
