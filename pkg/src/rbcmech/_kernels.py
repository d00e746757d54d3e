"""Numba kernels for energies, forces and time stepping.

All kernels work in internal units (um, pN, ms, energy pN*um) on plain
float64/int64 arrays.  They are sequential and deterministic: identical
inputs produce bit-identical outputs regardless of process or thread count.

Energy/force conventions:

* ``grad`` arrays accumulate dE/dr (internal energy per um); forces are the
  negative of the accumulated gradient, taken by the callers.
* Degenerate geometry is reported through a status array
  ``status = [flag, triangle_index]`` instead of exceptions (numba cannot
  raise rich exceptions); wrappers translate flags into typed errors.
"""

import numpy as np
from numba import njit

# Triangle areas below this (um^2) are treated as degenerate (needle
# triangles overflow the cotangents long before hitting exact zero).
AREA_FLOOR = 1e-8

STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_BAD_DUAL_AREA = 2


@njit(cache=True)
def tri_geometry(x, faces, areas, normals):
    """Per-face areas and unit normals; returns (total_area, signed_volume).

    Signed volume uses the divergence theorem over the closed surface and is
    positive for outward-oriented meshes.
    """
    total_area = 0.0
    volume = 0.0
    for t in range(faces.shape[0]):
        a = faces[t, 0]
        b = faces[t, 1]
        c = faces[t, 2]
        ux = x[b, 0] - x[a, 0]
        uy = x[b, 1] - x[a, 1]
        uz = x[b, 2] - x[a, 2]
        vx = x[c, 0] - x[a, 0]
        vy = x[c, 1] - x[a, 1]
        vz = x[c, 2] - x[a, 2]
        nx = uy * vz - uz * vy
        ny = uz * vx - ux * vz
        nz = ux * vy - uy * vx
        nn = np.sqrt(nx * nx + ny * ny + nz * nz)
        area = 0.5 * nn
        areas[t] = area
        if nn > 0.0:
            normals[t, 0] = nx / nn
            normals[t, 1] = ny / nn
            normals[t, 2] = nz / nn
        else:
            normals[t, 0] = 0.0
            normals[t, 1] = 0.0
            normals[t, 2] = 0.0
        total_area += area
        volume += (
            x[a, 0] * (x[b, 1] * x[c, 2] - x[b, 2] * x[c, 1])
            + x[a, 1] * (x[b, 2] * x[c, 0] - x[b, 0] * x[c, 2])
            + x[a, 2] * (x[b, 0] * x[c, 1] - x[b, 1] * x[c, 0])
        ) / 6.0
    return total_area, volume


@njit(cache=True)
def vertex_curvature(x, faces, K, a_vertex, n_vertex, status):
    """Integrated mean-curvature vector, dual area and normal per vertex.

    K_i is the gradient of total mesh area at vertex i (cotangent formula),
    equal to 2 H_i A_i n_i in the smooth limit.  a_vertex is the cotangent
    Voronoi dual area, A_i = (1/8) sum_j (cot a_ij + cot b_ij) |e_ij|^2; the
    per-triangle pieces tile each triangle exactly, so the dual areas sum to
    the total surface area.  n_vertex accumulates area-weighted face normals
    (not normalized).
    """
    K[:] = 0.0
    a_vertex[:] = 0.0
    n_vertex[:] = 0.0
    status[0] = STATUS_OK
    for t in range(faces.shape[0]):
        a = faces[t, 0]
        b = faces[t, 1]
        c = faces[t, 2]
        ux = x[b, 0] - x[a, 0]
        uy = x[b, 1] - x[a, 1]
        uz = x[b, 2] - x[a, 2]
        vx = x[c, 0] - x[a, 0]
        vy = x[c, 1] - x[a, 1]
        vz = x[c, 2] - x[a, 2]
        nx = uy * vz - uz * vy
        ny = uz * vx - ux * vz
        nz = ux * vy - uy * vx
        two_area = np.sqrt(nx * nx + ny * ny + nz * nz)
        area = 0.5 * two_area
        if area < AREA_FLOOR:
            status[0] = STATUS_DEGENERATE
            status[1] = t
            return
        # cot at a: edges (b - a, c - a)
        cota = (ux * vx + uy * vy + uz * vz) / two_area
        # cot at b: edges (a - b, c - b)
        pbx = -ux
        pby = -uy
        pbz = -uz
        qbx = x[c, 0] - x[b, 0]
        qby = x[c, 1] - x[b, 1]
        qbz = x[c, 2] - x[b, 2]
        cotb = (pbx * qbx + pby * qby + pbz * qbz) / two_area
        # cot at c: edges (a - c, b - c)
        pcx = -vx
        pcy = -vy
        pcz = -vz
        qcx = -qbx
        qcy = -qby
        qcz = -qbz
        cotc = (pcx * qcx + pcy * qcy + pcz * qcz) / two_area

        # edge (b, c) weighted by cot at a
        ex = x[b, 0] - x[c, 0]
        ey = x[b, 1] - x[c, 1]
        ez = x[b, 2] - x[c, 2]
        K[b, 0] += 0.5 * cota * ex
        K[b, 1] += 0.5 * cota * ey
        K[b, 2] += 0.5 * cota * ez
        K[c, 0] -= 0.5 * cota * ex
        K[c, 1] -= 0.5 * cota * ey
        K[c, 2] -= 0.5 * cota * ez
        # edge (c, a) weighted by cot at b
        ex = x[c, 0] - x[a, 0]
        ey = x[c, 1] - x[a, 1]
        ez = x[c, 2] - x[a, 2]
        K[c, 0] += 0.5 * cotb * ex
        K[c, 1] += 0.5 * cotb * ey
        K[c, 2] += 0.5 * cotb * ez
        K[a, 0] -= 0.5 * cotb * ex
        K[a, 1] -= 0.5 * cotb * ey
        K[a, 2] -= 0.5 * cotb * ez
        # edge (a, b) weighted by cot at c
        ex = x[a, 0] - x[b, 0]
        ey = x[a, 1] - x[b, 1]
        ez = x[a, 2] - x[b, 2]
        K[a, 0] += 0.5 * cotc * ex
        K[a, 1] += 0.5 * cotc * ey
        K[a, 2] += 0.5 * cotc * ez
        K[b, 0] -= 0.5 * cotc * ex
        K[b, 1] -= 0.5 * cotc * ey
        K[b, 2] -= 0.5 * cotc * ez

        # Voronoi dual-area pieces: every edge length pairs with the
        # opposite-corner cotangent
        ab2 = ex * ex + ey * ey + ez * ez
        bc2 = (x[b, 0] - x[c, 0]) ** 2 + (x[b, 1] - x[c, 1]) ** 2 + (x[b, 2] - x[c, 2]) ** 2
        ca2 = vx * vx + vy * vy + vz * vz
        a_vertex[a] += 0.125 * (cotc * ab2 + cotb * ca2)
        a_vertex[b] += 0.125 * (cota * bc2 + cotc * ab2)
        a_vertex[c] += 0.125 * (cotb * ca2 + cota * bc2)
        n_vertex[a, 0] += 0.5 * nx
        n_vertex[a, 1] += 0.5 * ny
        n_vertex[a, 2] += 0.5 * nz
        n_vertex[b, 0] += 0.5 * nx
        n_vertex[b, 1] += 0.5 * ny
        n_vertex[b, 2] += 0.5 * nz
        n_vertex[c, 0] += 0.5 * nx
        n_vertex[c, 1] += 0.5 * ny
        n_vertex[c, 2] += 0.5 * nz

    # heavily obtuse neighborhoods can drive a Voronoi cell to zero
    for i in range(x.shape[0]):
        if a_vertex[i] < AREA_FLOOR:
            status[0] = STATUS_BAD_DUAL_AREA
            status[1] = i
            return


@njit(cache=True)
def bending_energy_gradient(x, faces, kappa, grad, K, a_vertex, n_vertex, status):
    """Helfrich bending energy 2*kappa*sum(H_i^2 A_i) and its gradient.

    With H_i = |K_i| / (2 A_i) the energy is (kappa/2) sum |K_i|^2 / A_i,
    smooth in the vertex positions away from degenerate triangles;
    spontaneous curvature is structurally zero.
    """
    vertex_curvature(x, faces, K, a_vertex, n_vertex, status)
    if status[0] != STATUS_OK:
        return 0.0
    n_v = x.shape[0]
    energy = 0.0
    # dE/dK_i and dE/dA_i, reusing K and a_vertex slots would corrupt pass 2,
    # so store gradients in fresh arrays.
    gK = np.empty((n_v, 3))
    eA = np.empty(n_v)
    for i in range(n_v):
        k2 = K[i, 0] * K[i, 0] + K[i, 1] * K[i, 1] + K[i, 2] * K[i, 2]
        ai = a_vertex[i]
        energy += 0.5 * kappa * k2 / ai
        gK[i, 0] = kappa * K[i, 0] / ai
        gK[i, 1] = kappa * K[i, 1] / ai
        gK[i, 2] = kappa * K[i, 2] / ai
        eA[i] = -0.5 * kappa * k2 / (ai * ai)

    for t in range(faces.shape[0]):
        a = faces[t, 0]
        b = faces[t, 1]
        c = faces[t, 2]
        ux = x[b, 0] - x[a, 0]
        uy = x[b, 1] - x[a, 1]
        uz = x[b, 2] - x[a, 2]
        vx = x[c, 0] - x[a, 0]
        vy = x[c, 1] - x[a, 1]
        vz = x[c, 2] - x[a, 2]
        nx = uy * vz - uz * vy
        ny = uz * vx - ux * vz
        nz = ux * vy - uy * vx
        two_area = np.sqrt(nx * nx + ny * ny + nz * nz)
        area = 0.5 * two_area
        hx = nx / two_area
        hy = ny / two_area
        hz = nz / two_area
        cota = (ux * vx + uy * vy + uz * vz) / two_area
        pbx = -ux
        pby = -uy
        pbz = -uz
        qbx = x[c, 0] - x[b, 0]
        qby = x[c, 1] - x[b, 1]
        qbz = x[c, 2] - x[b, 2]
        cotb = (pbx * qbx + pby * qby + pbz * qbz) / two_area
        cotc = (vx * qbx + vy * qby + vz * qbz) / two_area
        ab2 = ux * ux + uy * uy + uz * uz
        bc2 = qbx * qbx + qby * qby + qbz * qbz
        ca2 = vx * vx + vy * vy + vz * vz
        # grad of triangle area wrt a, b, c: 0.5 * nhat x opposite_edge
        gAax = 0.5 * (hy * qbz - hz * qby)
        gAay = 0.5 * (hz * qbx - hx * qbz)
        gAaz = 0.5 * (hx * qby - hy * qbx)
        gAbx = 0.5 * (hy * (-vz) - hz * (-vy))
        gAby = 0.5 * (hz * (-vx) - hx * (-vz))
        gAbz = 0.5 * (hx * (-vy) - hy * (-vx))
        gAcx = 0.5 * (hy * uz - hz * uy)
        gAcy = 0.5 * (hz * ux - hx * uz)
        gAcz = 0.5 * (hx * uy - hy * ux)

        # (1) direct position dependence at fixed cotangents: the K edge
        # vectors and the |e|^2 factors of the dual areas
        wbc = 0.25 * cota * (eA[b] + eA[c])
        fbc_x = 0.5 * cota * (gK[b, 0] - gK[c, 0]) + wbc * (x[b, 0] - x[c, 0])
        fbc_y = 0.5 * cota * (gK[b, 1] - gK[c, 1]) + wbc * (x[b, 1] - x[c, 1])
        fbc_z = 0.5 * cota * (gK[b, 2] - gK[c, 2]) + wbc * (x[b, 2] - x[c, 2])
        grad[b, 0] += fbc_x
        grad[b, 1] += fbc_y
        grad[b, 2] += fbc_z
        grad[c, 0] -= fbc_x
        grad[c, 1] -= fbc_y
        grad[c, 2] -= fbc_z
        wca = 0.25 * cotb * (eA[c] + eA[a])
        fca_x = 0.5 * cotb * (gK[c, 0] - gK[a, 0]) + wca * (x[c, 0] - x[a, 0])
        fca_y = 0.5 * cotb * (gK[c, 1] - gK[a, 1]) + wca * (x[c, 1] - x[a, 1])
        fca_z = 0.5 * cotb * (gK[c, 2] - gK[a, 2]) + wca * (x[c, 2] - x[a, 2])
        grad[c, 0] += fca_x
        grad[c, 1] += fca_y
        grad[c, 2] += fca_z
        grad[a, 0] -= fca_x
        grad[a, 1] -= fca_y
        grad[a, 2] -= fca_z
        wab = 0.25 * cotc * (eA[a] + eA[b])
        fab_x = 0.5 * cotc * (gK[a, 0] - gK[b, 0]) + wab * (x[a, 0] - x[b, 0])
        fab_y = 0.5 * cotc * (gK[a, 1] - gK[b, 1]) + wab * (x[a, 1] - x[b, 1])
        fab_z = 0.5 * cotc * (gK[a, 2] - gK[b, 2]) + wab * (x[a, 2] - x[b, 2])
        grad[a, 0] += fab_x
        grad[a, 1] += fab_y
        grad[a, 2] += fab_z
        grad[b, 0] -= fab_x
        grad[b, 1] -= fab_y
        grad[b, 2] -= fab_z

        # (2) dependence through the cotangents: K edge terms plus the
        # dual-area pieces they weight
        sa = 0.5 * (
            (gK[b, 0] - gK[c, 0]) * (x[b, 0] - x[c, 0])
            + (gK[b, 1] - gK[c, 1]) * (x[b, 1] - x[c, 1])
            + (gK[b, 2] - gK[c, 2]) * (x[b, 2] - x[c, 2])
        ) + 0.125 * bc2 * (eA[b] + eA[c])
        sb = 0.5 * (
            (gK[c, 0] - gK[a, 0]) * (x[c, 0] - x[a, 0])
            + (gK[c, 1] - gK[a, 1]) * (x[c, 1] - x[a, 1])
            + (gK[c, 2] - gK[a, 2]) * (x[c, 2] - x[a, 2])
        ) + 0.125 * ca2 * (eA[c] + eA[a])
        sc = 0.5 * (
            (gK[a, 0] - gK[b, 0]) * (x[a, 0] - x[b, 0])
            + (gK[a, 1] - gK[b, 1]) * (x[a, 1] - x[b, 1])
            + (gK[a, 2] - gK[b, 2]) * (x[a, 2] - x[b, 2])
        ) + 0.125 * ab2 * (eA[a] + eA[b])
        inv2A = 1.0 / two_area
        invA = 1.0 / area
        # cot at a = (u . v) / (2A); u = b - a, v = c - a
        grad[b, 0] += sa * (vx * inv2A - cota * gAbx * invA)
        grad[b, 1] += sa * (vy * inv2A - cota * gAby * invA)
        grad[b, 2] += sa * (vz * inv2A - cota * gAbz * invA)
        grad[c, 0] += sa * (ux * inv2A - cota * gAcx * invA)
        grad[c, 1] += sa * (uy * inv2A - cota * gAcy * invA)
        grad[c, 2] += sa * (uz * inv2A - cota * gAcz * invA)
        grad[a, 0] += sa * (-(ux + vx) * inv2A - cota * gAax * invA)
        grad[a, 1] += sa * (-(uy + vy) * inv2A - cota * gAay * invA)
        grad[a, 2] += sa * (-(uz + vz) * inv2A - cota * gAaz * invA)
        # cot at b = (p . q) / (2A); p = a - b, q = c - b
        grad[c, 0] += sb * (pbx * inv2A - cotb * gAcx * invA)
        grad[c, 1] += sb * (pby * inv2A - cotb * gAcy * invA)
        grad[c, 2] += sb * (pbz * inv2A - cotb * gAcz * invA)
        grad[a, 0] += sb * (qbx * inv2A - cotb * gAax * invA)
        grad[a, 1] += sb * (qby * inv2A - cotb * gAay * invA)
        grad[a, 2] += sb * (qbz * inv2A - cotb * gAaz * invA)
        grad[b, 0] += sb * (-(pbx + qbx) * inv2A - cotb * gAbx * invA)
        grad[b, 1] += sb * (-(pby + qby) * inv2A - cotb * gAby * invA)
        grad[b, 2] += sb * (-(pbz + qbz) * inv2A - cotb * gAbz * invA)
        # cot at c = (s . t) / (2A); s = a - c, t = b - c
        scx = -vx
        scy = -vy
        scz = -vz
        tcx = -qbx
        tcy = -qby
        tcz = -qbz
        grad[a, 0] += sc * (tcx * inv2A - cotc * gAax * invA)
        grad[a, 1] += sc * (tcy * inv2A - cotc * gAay * invA)
        grad[a, 2] += sc * (tcz * inv2A - cotc * gAaz * invA)
        grad[b, 0] += sc * (scx * inv2A - cotc * gAbx * invA)
        grad[b, 1] += sc * (scy * inv2A - cotc * gAby * invA)
        grad[b, 2] += sc * (scz * inv2A - cotc * gAbz * invA)
        grad[c, 0] += sc * (-(scx + tcx) * inv2A - cotc * gAcx * invA)
        grad[c, 1] += sc * (-(scy + tcy) * inv2A - cotc * gAcy * invA)
        grad[c, 2] += sc * (-(scz + tcz) * inv2A - cotc * gAcz * invA)
    return energy


@njit(cache=True)
def inplane_reference(x, faces, m11, m12, m22, a0):
    """Inverse reference Gram matrices and reference areas per triangle."""
    for t in range(faces.shape[0]):
        a = faces[t, 0]
        b = faces[t, 1]
        c = faces[t, 2]
        ux = x[b, 0] - x[a, 0]
        uy = x[b, 1] - x[a, 1]
        uz = x[b, 2] - x[a, 2]
        vx = x[c, 0] - x[a, 0]
        vy = x[c, 1] - x[a, 1]
        vz = x[c, 2] - x[a, 2]
        g11 = ux * ux + uy * uy + uz * uz
        g12 = ux * vx + uy * vy + uz * vz
        g22 = vx * vx + vy * vy + vz * vz
        det = g11 * g22 - g12 * g12
        m11[t] = g22 / det
        m12[t] = -g12 / det
        m22[t] = g11 / det
        a0[t] = 0.5 * np.sqrt(det)


@njit(cache=True)
def inplane_energy_gradient(
    x, faces, m11, m12, m22, a0, k_alpha, a3, a4, mu, b1, b2, grad, invariants, status
):
    """Dilation + shear energy over the reference surface and its gradient.

    Strain invariants per triangle come from the 2x2 deformation gradient F
    relative to the reference triangle: alpha = det F - 1 = A/A0 - 1 and
    beta = tr(F^T F) / (2 det F) - 1, both computed from the current Gram
    matrix and the precomputed inverse reference Gram matrix (rotation
    invariant by construction).  invariants[:, 0] = alpha, [:, 1] = beta.
    Returns (dilation_energy, shear_energy).
    """
    e_dil = 0.0
    e_shear = 0.0
    status[0] = STATUS_OK
    for t in range(faces.shape[0]):
        a = faces[t, 0]
        b = faces[t, 1]
        c = faces[t, 2]
        ux = x[b, 0] - x[a, 0]
        uy = x[b, 1] - x[a, 1]
        uz = x[b, 2] - x[a, 2]
        vx = x[c, 0] - x[a, 0]
        vy = x[c, 1] - x[a, 1]
        vz = x[c, 2] - x[a, 2]
        nx = uy * vz - uz * vy
        ny = uz * vx - ux * vz
        nz = ux * vy - uy * vx
        two_area = np.sqrt(nx * nx + ny * ny + nz * nz)
        area = 0.5 * two_area
        if area < AREA_FLOOR:
            status[0] = STATUS_DEGENERATE
            status[1] = t
            return 0.0, 0.0
        g11 = ux * ux + uy * uy + uz * uz
        g12 = ux * vx + uy * vy + uz * vz
        g22 = vx * vx + vy * vy + vz * vz
        tr_c = g11 * m11[t] + 2.0 * g12 * m12[t] + g22 * m22[t]
        a0t = a0[t]
        alpha = area / a0t - 1.0
        beta = a0t * tr_c / (2.0 * area) - 1.0
        invariants[t, 0] = alpha
        invariants[t, 1] = beta

        e_dil += 0.5 * k_alpha * (alpha * alpha + a3 * alpha**3 + a4 * alpha**4) * a0t
        e_shear += mu * (beta + b1 * alpha * beta + b2 * beta * beta) * a0t

        de_da = (
            0.5 * k_alpha * (2.0 * alpha + 3.0 * a3 * alpha * alpha + 4.0 * a4 * alpha**3)
            + mu * b1 * beta
        ) * a0t
        de_db = mu * (1.0 + b1 * alpha + 2.0 * b2 * beta) * a0t

        hx = nx / two_area
        hy = ny / two_area
        hz = nz / two_area
        qbx = x[c, 0] - x[b, 0]
        qby = x[c, 1] - x[b, 1]
        qbz = x[c, 2] - x[b, 2]
        gAax = 0.5 * (hy * qbz - hz * qby)
        gAay = 0.5 * (hz * qbx - hx * qbz)
        gAaz = 0.5 * (hx * qby - hy * qbx)
        gAbx = 0.5 * (hy * (-vz) - hz * (-vy))
        gAby = 0.5 * (hz * (-vx) - hx * (-vz))
        gAbz = 0.5 * (hx * (-vy) - hy * (-vx))
        gAcx = 0.5 * (hy * uz - hz * uy)
        gAcy = 0.5 * (hz * ux - hx * uz)
        gAcz = 0.5 * (hx * uy - hy * ux)

        # grad tr(C): d/db = 2 M11 u + 2 M12 v,  d/dc = 2 M22 v + 2 M12 u
        tbx = 2.0 * (m11[t] * ux + m12[t] * vx)
        tby = 2.0 * (m11[t] * uy + m12[t] * vy)
        tbz = 2.0 * (m11[t] * uz + m12[t] * vz)
        tcx = 2.0 * (m22[t] * vx + m12[t] * ux)
        tcy = 2.0 * (m22[t] * vy + m12[t] * uy)
        tcz = 2.0 * (m22[t] * vz + m12[t] * uz)

        # alpha = A/A0 - 1, beta = A0 tr / (2A) - 1
        ca = de_da / a0t - de_db * (beta + 1.0) / area
        cb = de_db * a0t / (2.0 * area)
        grad[a, 0] += ca * gAax + cb * (-(tbx + tcx))
        grad[a, 1] += ca * gAay + cb * (-(tby + tcy))
        grad[a, 2] += ca * gAaz + cb * (-(tbz + tcz))
        grad[b, 0] += ca * gAbx + cb * tbx
        grad[b, 1] += ca * gAby + cb * tby
        grad[b, 2] += ca * gAbz + cb * tbz
        grad[c, 0] += ca * gAcx + cb * tcx
        grad[c, 1] += ca * gAcy + cb * tcy
        grad[c, 2] += ca * gAcz + cb * tcz
    return e_dil, e_shear


@njit(cache=True)
def penalty_energy_gradient(x, faces, k_area, area0, k_volume, volume0, grad):
    """Quadratic area and volume penalties; returns (E_area, E_volume, A, V)."""
    total_area = 0.0
    volume = 0.0
    for t in range(faces.shape[0]):
        a = faces[t, 0]
        b = faces[t, 1]
        c = faces[t, 2]
        ux = x[b, 0] - x[a, 0]
        uy = x[b, 1] - x[a, 1]
        uz = x[b, 2] - x[a, 2]
        vx = x[c, 0] - x[a, 0]
        vy = x[c, 1] - x[a, 1]
        vz = x[c, 2] - x[a, 2]
        nx = uy * vz - uz * vy
        ny = uz * vx - ux * vz
        nz = ux * vy - uy * vx
        total_area += 0.5 * np.sqrt(nx * nx + ny * ny + nz * nz)
        volume += (
            x[a, 0] * (x[b, 1] * x[c, 2] - x[b, 2] * x[c, 1])
            + x[a, 1] * (x[b, 2] * x[c, 0] - x[b, 0] * x[c, 2])
            + x[a, 2] * (x[b, 0] * x[c, 1] - x[b, 1] * x[c, 0])
        ) / 6.0
    e_area = k_area * (total_area - area0) ** 2 / area0
    e_volume = k_volume * (volume - volume0) ** 2 / volume0
    dda = 2.0 * k_area * (total_area - area0) / area0
    ddv = 2.0 * k_volume * (volume - volume0) / volume0
    for t in range(faces.shape[0]):
        a = faces[t, 0]
        b = faces[t, 1]
        c = faces[t, 2]
        ux = x[b, 0] - x[a, 0]
        uy = x[b, 1] - x[a, 1]
        uz = x[b, 2] - x[a, 2]
        vx = x[c, 0] - x[a, 0]
        vy = x[c, 1] - x[a, 1]
        vz = x[c, 2] - x[a, 2]
        nx = uy * vz - uz * vy
        ny = uz * vx - ux * vz
        nz = ux * vy - uy * vx
        two_area = np.sqrt(nx * nx + ny * ny + nz * nz)
        if two_area <= 0.0:
            continue
        hx = nx / two_area
        hy = ny / two_area
        hz = nz / two_area
        qbx = x[c, 0] - x[b, 0]
        qby = x[c, 1] - x[b, 1]
        qbz = x[c, 2] - x[b, 2]
        grad[a, 0] += dda * 0.5 * (hy * qbz - hz * qby)
        grad[a, 1] += dda * 0.5 * (hz * qbx - hx * qbz)
        grad[a, 2] += dda * 0.5 * (hx * qby - hy * qbx)
        grad[b, 0] += dda * 0.5 * (hy * (-vz) - hz * (-vy))
        grad[b, 1] += dda * 0.5 * (hz * (-vx) - hx * (-vz))
        grad[b, 2] += dda * 0.5 * (hx * (-vy) - hy * (-vx))
        grad[c, 0] += dda * 0.5 * (hy * uz - hz * uy)
        grad[c, 1] += dda * 0.5 * (hz * ux - hx * uz)
        grad[c, 2] += dda * 0.5 * (hx * uy - hy * ux)
        # volume gradient: dV/da = (b x c) / 6 etc.
        grad[a, 0] += ddv * (x[b, 1] * x[c, 2] - x[b, 2] * x[c, 1]) / 6.0
        grad[a, 1] += ddv * (x[b, 2] * x[c, 0] - x[b, 0] * x[c, 2]) / 6.0
        grad[a, 2] += ddv * (x[b, 0] * x[c, 1] - x[b, 1] * x[c, 0]) / 6.0
        grad[b, 0] += ddv * (x[c, 1] * x[a, 2] - x[c, 2] * x[a, 1]) / 6.0
        grad[b, 1] += ddv * (x[c, 2] * x[a, 0] - x[c, 0] * x[a, 2]) / 6.0
        grad[b, 2] += ddv * (x[c, 0] * x[a, 1] - x[c, 1] * x[a, 0]) / 6.0
        grad[c, 0] += ddv * (x[a, 1] * x[b, 2] - x[a, 2] * x[b, 1]) / 6.0
        grad[c, 1] += ddv * (x[a, 2] * x[b, 0] - x[a, 0] * x[b, 2]) / 6.0
        grad[c, 2] += ddv * (x[a, 0] * x[b, 1] - x[a, 1] * x[b, 0]) / 6.0
    return e_area, e_volume, total_area, volume


@njit(cache=True)
def elastic_energy_forces(
    x,
    faces,
    m11,
    m12,
    m22,
    a0,
    kappa,
    k_alpha,
    a3,
    a4,
    mu,
    b1,
    b2,
    k_area,
    area0,
    k_volume,
    volume0,
    forces,
    parts,
    work_K,
    work_a,
    work_n,
    work_inv,
    status,
):
    """Total elastic forces (negative energy gradient, pN) and energy parts.

    parts = [bending, dilation, shear, area_penalty, volume_penalty, A, V]
    in internal units.  Returns total elastic energy (internal units).
    """
    forces[:] = 0.0
    e_b = bending_energy_gradient(x, faces, kappa, forces, work_K, work_a, work_n, status)
    if status[0] != STATUS_OK:
        return 0.0
    e_d, e_s = inplane_energy_gradient(
        x, faces, m11, m12, m22, a0, k_alpha, a3, a4, mu, b1, b2, forces, work_inv, status
    )
    if status[0] != STATUS_OK:
        return 0.0
    e_a, e_v, area, volume = penalty_energy_gradient(
        x, faces, k_area, area0, k_volume, volume0, forces
    )
    for i in range(forces.shape[0]):
        forces[i, 0] = -forces[i, 0]
        forces[i, 1] = -forces[i, 1]
        forces[i, 2] = -forces[i, 2]
    parts[0] = e_b
    parts[1] = e_d
    parts[2] = e_s
    parts[3] = e_a
    parts[4] = e_v
    parts[5] = area
    parts[6] = volume
    return e_b + e_d + e_s + e_a + e_v


@njit(cache=True)
def viscous_forces_kernel(x, vel, edges, gamma, forces):
    """Pairwise edge friction projected on the edge direction; adds into forces."""
    for k in range(edges.shape[0]):
        i = edges[k, 0]
        j = edges[k, 1]
        ex = x[i, 0] - x[j, 0]
        ey = x[i, 1] - x[j, 1]
        ez = x[i, 2] - x[j, 2]
        rr = np.sqrt(ex * ex + ey * ey + ez * ez)
        if rr <= 0.0:
            continue
        ex /= rr
        ey /= rr
        ez /= rr
        dvx = vel[i, 0] - vel[j, 0]
        dvy = vel[i, 1] - vel[j, 1]
        dvz = vel[i, 2] - vel[j, 2]
        proj = dvx * ex + dvy * ey + dvz * ez
        fx = -gamma * proj * ex
        fy = -gamma * proj * ey
        fz = -gamma * proj * ez
        forces[i, 0] += fx
        forces[i, 1] += fy
        forces[i, 2] += fz
        forces[j, 0] -= fx
        forces[j, 1] -= fy
        forces[j, 2] -= fz


@njit(cache=True)
def verlet_chunk(
    x,
    vel,
    faces,
    edges,
    m11,
    m12,
    m22,
    a0,
    kappa,
    k_alpha,
    a3,
    a4,
    mu,
    b1,
    b2,
    k_area,
    area0,
    k_volume,
    volume0,
    gamma,
    gamma_ambient,
    f_ext,
    mass,
    dt,
    n_steps,
    forces,
    parts,
    work_K,
    work_a,
    work_n,
    work_inv,
    status,
):
    """Advance n_steps of velocity Verlet in place; returns potential energy.

    Dissipative forces (pairwise edge friction gamma plus per-vertex ambient
    drag gamma_ambient) on the second half kick use the half-step velocities
    (standard scheme for velocity-dependent friction); with both set to zero
    this reduces to exactly time-reversible velocity Verlet.
    """
    n_v = x.shape[0]
    energy = elastic_energy_forces(
        x, faces, m11, m12, m22, a0, kappa, k_alpha, a3, a4, mu, b1, b2,
        k_area, area0, k_volume, volume0, forces, parts,
        work_K, work_a, work_n, work_inv, status,
    )
    if status[0] != STATUS_OK:
        return 0.0
    if gamma > 0.0:
        viscous_forces_kernel(x, vel, edges, gamma, forces)
    for i in range(n_v):
        forces[i, 0] += f_ext[i, 0] - gamma_ambient * vel[i, 0]
        forces[i, 1] += f_ext[i, 1] - gamma_ambient * vel[i, 1]
        forces[i, 2] += f_ext[i, 2] - gamma_ambient * vel[i, 2]
    half = 0.5 * dt / mass
    for s in range(n_steps):
        for i in range(n_v):
            vel[i, 0] += half * forces[i, 0]
            vel[i, 1] += half * forces[i, 1]
            vel[i, 2] += half * forces[i, 2]
            x[i, 0] += dt * vel[i, 0]
            x[i, 1] += dt * vel[i, 1]
            x[i, 2] += dt * vel[i, 2]
        energy = elastic_energy_forces(
            x, faces, m11, m12, m22, a0, kappa, k_alpha, a3, a4, mu, b1, b2,
            k_area, area0, k_volume, volume0, forces, parts,
            work_K, work_a, work_n, work_inv, status,
        )
        if status[0] != STATUS_OK:
            return 0.0
        if gamma > 0.0:
            viscous_forces_kernel(x, vel, edges, gamma, forces)
        for i in range(n_v):
            forces[i, 0] += f_ext[i, 0] - gamma_ambient * vel[i, 0]
            forces[i, 1] += f_ext[i, 1] - gamma_ambient * vel[i, 1]
            forces[i, 2] += f_ext[i, 2] - gamma_ambient * vel[i, 2]
            vel[i, 0] += half * forces[i, 0]
            vel[i, 1] += half * forces[i, 1]
            vel[i, 2] += half * forces[i, 2]
    return energy
