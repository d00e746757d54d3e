"""Per-triangle strain invariants of the membrane relative to a reference mesh."""

from dataclasses import dataclass

import numpy as np

from .._kernels import STATUS_OK, inplane_energy_gradient, inplane_reference
from ..errors import CollapsedTriangleError, MeshTopologyError
from .mesh import TriMesh


@dataclass
class StrainField:
    """Dilation invariant alpha, shear invariant beta and reference area per triangle.

    alpha = lambda1 * lambda2 - 1 and beta = (lambda1/lambda2 +
    lambda2/lambda1)/2 - 1 where lambda1 >= lambda2 > 0 are the principal
    stretches of the in-plane deformation gradient mapping the reference
    triangle onto the current one.  Both vanish on the reference state and
    beta >= 0 everywhere.
    """

    alpha: np.ndarray
    beta: np.ndarray
    reference_area: np.ndarray


def strain_invariants(mesh: TriMesh, reference: TriMesh) -> StrainField:
    """Strain invariants of ``mesh`` relative to ``reference``.

    Both meshes must share the same face list.  Raises
    CollapsedTriangleError when a current triangle degenerates.
    """
    if mesh.faces.shape != reference.faces.shape or not np.array_equal(
        mesh.faces, reference.faces
    ):
        raise MeshTopologyError("mesh and reference must share an identical face list")
    n_f = mesh.n_faces
    m11 = np.empty(n_f)
    m12 = np.empty(n_f)
    m22 = np.empty(n_f)
    a0 = np.empty(n_f)
    inplane_reference(reference.vertices, reference.faces, m11, m12, m22, a0)
    grad = np.zeros_like(mesh.vertices)
    invariants = np.empty((n_f, 2))
    status = np.zeros(2, dtype=np.int64)
    # Moduli set to zero: only the invariants are wanted here.
    inplane_energy_gradient(
        mesh.vertices, mesh.faces, m11, m12, m22, a0,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, grad, invariants, status,
    )
    if status[0] != STATUS_OK:
        raise CollapsedTriangleError(status[1])
    # Clamp tiny negative beta from roundoff at the identity.
    beta = invariants[:, 1]
    beta[(beta < 0.0) & (beta > -1e-12)] = 0.0
    return StrainField(alpha=invariants[:, 0].copy(), beta=beta.copy(), reference_area=a0)


def principal_stretches(mesh: TriMesh, reference: TriMesh):
    """Principal stretches (lambda1 >= lambda2) per triangle."""
    f = strain_invariants(mesh, reference)
    det = f.alpha + 1.0
    trace = 2.0 * det * (f.beta + 1.0)  # lambda1^2 + lambda2^2
    disc = np.sqrt(np.maximum(trace * trace - 4.0 * det * det, 0.0))
    l1sq = 0.5 * (trace + disc)
    l2sq = 0.5 * (trace - disc)
    return np.sqrt(l1sq), np.sqrt(np.maximum(l2sq, 0.0))
