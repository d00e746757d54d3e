import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbcmech.errors import DataError, DegenerateTriangleError, MeshTopologyError
from rbcmech.geometry import (
    TriMesh,
    build_icosphere,
    geometry_summary,
    mean_curvature,
    principal_diameters,
    read_mesh,
    shape_metrics,
    strain_invariants,
    write_mesh,
)
from rbcmech.geometry.curvature import willmore_measure
from rbcmech.geometry.mesh import sphere_volume_for_area
from rbcmech.geometry.strain import principal_stretches


def rotation_matrix(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis /= np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


class TestIcosphere:
    def test_level0_is_icosahedron(self):
        mesh = build_icosphere(0, 1.0)
        assert mesh.n_vertices == 12
        assert mesh.n_faces == 20
        euler = mesh.n_vertices - mesh.edges.shape[0] + mesh.n_faces
        assert euler == 2
        mesh.validate()

    def test_level4_counts(self):
        # 10 * 4^k + 2 vertices, 20 * 4^k faces
        mesh = build_icosphere(4, 3.28)
        assert mesh.n_vertices == 10 * 4**4 + 2 == 2562
        assert mesh.n_faces == 20 * 4**4 == 5120

    def test_level2_volume_against_tetrahedron_sum(self):
        mesh = build_icosphere(2, 2.0)
        volume = geometry_summary(mesh)["volume"]
        # brute-force oracle: sum of signed tetrahedra (origin, a, b, c)
        brute = 0.0
        for a, b, c in mesh.faces:
            brute += np.dot(mesh.vertices[a],
                            np.cross(mesh.vertices[b], mesh.vertices[c])) / 6.0
        assert volume == pytest.approx(brute, rel=1e-12)
        # the inscribed polyhedron at this resolution sits ~3.4% below the ball
        analytic = 4.0 / 3.0 * np.pi * 2.0**3
        assert abs(volume - analytic) / analytic < 0.04

    def test_vertices_on_radius(self):
        mesh = build_icosphere(3, 3.28)
        r = np.linalg.norm(mesh.vertices, axis=1)
        np.testing.assert_allclose(r, 3.28, rtol=1e-12)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            build_icosphere(2, -1.0)
        with pytest.raises(ValueError):
            build_icosphere(-1, 1.0)

    def test_level_cap_bounds_memory(self):
        mesh = build_icosphere(50, 1.0)  # capped at the documented maximum
        assert mesh.n_vertices == 10 * 4**7 + 2

    @pytest.mark.parametrize("level", [0, 1, 2, 3])
    def test_euler_characteristic_all_levels(self, level):
        mesh = build_icosphere(level, 1.0)
        assert mesh.n_vertices - mesh.edges.shape[0] + mesh.n_faces == 2

    def test_area_volume_second_order_convergence(self):
        # error vs analytic sphere shrinks ~4x per subdivision level
        errs = []
        for level in (1, 2, 3):
            s = geometry_summary(build_icosphere(level, 1.0))
            errs.append(abs(s["volume"] - 4 * np.pi / 3) / (4 * np.pi / 3))
        assert errs[1] < errs[0] / 3.0
        assert errs[2] < errs[1] / 3.0


class TestGeometrySummary:
    def test_fine_sphere_reduced_volume(self, sphere_l4):
        assert geometry_summary(sphere_l4)["reduced_volume"] == pytest.approx(1.0, abs=0.01)

    def test_hand_computed_reduced_volume(self):
        # 94 / ((4 pi / 3) (135 / 4 pi)^(3/2)) = 0.6375
        assert 94.0 / sphere_volume_for_area(135.0) == pytest.approx(0.6375, abs=5e-4)

    def test_scale_invariance(self, sphere_l2):
        rv1 = geometry_summary(sphere_l2)["reduced_volume"]
        rv2 = geometry_summary(sphere_l2.scaled(2.0))["reduced_volume"]
        assert rv2 == pytest.approx(rv1, rel=1e-12)

    def test_inverted_orientation_rejected(self, sphere_l2):
        flipped = TriMesh(sphere_l2.vertices.copy(), sphere_l2.faces[:, ::-1].copy())
        with pytest.raises(MeshTopologyError):
            geometry_summary(flipped)


class TestMeanCurvature:
    def test_sphere_curvature(self, sphere_l4):
        h, _ = mean_curvature(sphere_l4)
        np.testing.assert_allclose(h, 1.0 / 3.28, rtol=0.02)

    def test_willmore_measure_radius_independent(self):
        # integral of H^2 dA = 4 pi for any sphere
        for radius in (1.0, 3.28):
            w = willmore_measure(build_icosphere(4, radius))
            assert w == pytest.approx(4.0 * np.pi, rel=0.02)

    def test_dual_area_sums_to_total(self, perturbed_l2):
        _, dual = mean_curvature(perturbed_l2)
        total = geometry_summary(perturbed_l2)["area"]
        assert abs(dual.sum() - total) / total < 1e-9

    def test_needle_triangle_reports_index(self, sphere_l2):
        mesh = sphere_l2.copy()
        a, b = mesh.faces[7, 0], mesh.faces[7, 1]
        mesh.vertices[b] = mesh.vertices[a] + 1e-9
        with pytest.raises(DegenerateTriangleError) as err:
            mean_curvature(mesh)
        bad = err.value.triangle
        assert a in mesh.faces[bad] and b in mesh.faces[bad]


class TestStrainInvariants:
    def test_identity_deformation(self, perturbed_l2):
        f = strain_invariants(perturbed_l2, perturbed_l2)
        np.testing.assert_allclose(f.alpha, 0.0, atol=1e-12)
        np.testing.assert_allclose(f.beta, 0.0, atol=1e-12)

    def test_uniform_scale(self, sphere_l2):
        s = 1.3
        f = strain_invariants(sphere_l2.scaled(s), sphere_l2)
        np.testing.assert_allclose(f.alpha, s**2 - 1.0, rtol=1e-9)
        np.testing.assert_allclose(f.beta, 0.0, atol=1e-9)

    def test_single_triangle_pure_shear(self):
        # lambda1 = 2, lambda2 = 0.5: alpha = 0, beta = (4 + 0.25)/2 - 1
        ref = TriMesh(np.array([[0.0, 0, 0], [1, 0, 0], [0.3, 0.8, 0]]),
                      np.array([[0, 1, 2]]))
        cur = TriMesh(ref.vertices * np.array([2.0, 0.5, 1.0]), ref.faces.copy())
        f = strain_invariants(cur, ref)
        assert f.alpha[0] == pytest.approx(0.0, abs=1e-12)
        assert f.beta[0] == pytest.approx(1.125, rel=1e-12)
        l1, l2 = principal_stretches(cur, ref)
        assert l1[0] == pytest.approx(2.0, rel=1e-9)
        assert l2[0] == pytest.approx(0.5, rel=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(angle=st.floats(0.01, 3.1), ax=st.integers(0, 2))
    def test_rigid_rotation_invariance(self, angle, ax):
        base = build_icosphere(1, 2.0)
        rng = np.random.default_rng(3)
        cur = TriMesh(base.vertices + 0.05 * rng.standard_normal(base.vertices.shape),
                      base.faces.copy())
        f0 = strain_invariants(cur, base)
        axis = np.eye(3)[ax]
        rot = TriMesh(cur.vertices @ rotation_matrix(axis, angle).T, base.faces.copy())
        f1 = strain_invariants(rot, base)
        np.testing.assert_allclose(f1.alpha, f0.alpha, atol=1e-12)
        np.testing.assert_allclose(f1.beta, f0.beta, atol=1e-12)

    def test_face_list_mismatch(self, sphere_l2):
        other = build_icosphere(1, 3.28)
        with pytest.raises(MeshTopologyError):
            strain_invariants(sphere_l2, other)


class TestShapeMetrics:
    def test_sphere(self, sphere_l4):
        m = shape_metrics(sphere_l4)
        assert m.D == pytest.approx(2 * 3.28, rel=0.01)
        assert m.h_min == pytest.approx(2 * 3.28, rel=0.01)
        assert m.h_max == pytest.approx(2 * 3.28, rel=0.01)

    def test_oblate_spheroid(self):
        base = build_icosphere(4, 1.0)
        a, c = 4.0, 1.5
        mesh = TriMesh(base.vertices * np.array([a, a, c]), base.faces.copy())
        m = shape_metrics(mesh)
        assert m.D == pytest.approx(2 * a, rel=0.01)
        assert m.h_min == pytest.approx(2 * c, rel=0.02)
        assert m.h_max == pytest.approx(2 * c, rel=0.02)

    def test_biconcave_ordering(self, equilibrium_l2):
        m = equilibrium_l2.metrics
        assert m.h_min < m.h_max < m.D


class TestPrincipalDiameters:
    def test_sphere_isotropy(self, sphere_l4):
        d = principal_diameters(sphere_l4)
        assert d["D_ax"] == pytest.approx(2 * 3.28, rel=0.01)
        assert d["D_tr"] == pytest.approx(2 * 3.28, rel=0.01)

    def test_triaxial_ellipsoid(self):
        base = build_icosphere(4, 1.0)
        mesh = TriMesh(base.vertices * np.array([4.0, 3.0, 1.0]), base.faces.copy())
        d = principal_diameters(mesh)
        assert d["D_ax"] == pytest.approx(8.0, rel=0.01)
        assert d["D_tr"] == pytest.approx(6.0, rel=0.01)

    def test_unstretched_matches_shape_metrics(self, equilibrium_l2):
        d = principal_diameters(equilibrium_l2.mesh)
        m = equilibrium_l2.metrics
        assert d["D_ax"] == pytest.approx(m.D, rel=0.02)
        assert d["D_tr"] == pytest.approx(m.D, rel=0.02)


class TestMeshIO:
    @pytest.mark.parametrize("ext", ["off", "ply"])
    def test_roundtrip(self, tmp_path, perturbed_l2, ext):
        path = tmp_path / f"mesh.{ext}"
        write_mesh(perturbed_l2, path)
        back = read_mesh(path)
        np.testing.assert_array_equal(back.faces, perturbed_l2.faces)
        np.testing.assert_allclose(back.vertices, perturbed_l2.vertices, rtol=0, atol=0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_mesh(tmp_path / "absent.off")

    def test_malformed_off(self, tmp_path):
        bad = tmp_path / "bad.off"
        bad.write_text("OFF\n3 1 0\n0 0 0\n")
        with pytest.raises(DataError):
            read_mesh(bad)


class TestValidation:
    def test_flipped_face_not_orientable(self, sphere_l2):
        faces = sphere_l2.faces.copy()
        faces[0] = faces[0, ::-1]
        with pytest.raises(MeshTopologyError):
            TriMesh(sphere_l2.vertices.copy(), faces).validate()

    def test_open_mesh_rejected(self, sphere_l2):
        with pytest.raises(MeshTopologyError):
            TriMesh(sphere_l2.vertices.copy(), sphere_l2.faces[:-1].copy()).validate()
