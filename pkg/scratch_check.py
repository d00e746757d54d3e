"""Scratch validation of kernels (not part of the package)."""
import time
import numpy as np

from rbcmech.geometry import build_icosphere, geometry_summary, mean_curvature
from rbcmech.geometry.curvature import willmore_measure
from rbcmech import membrane
from rbcmech.membrane import MembraneParams, bending_energy, elastic_forces
from rbcmech import units

t0 = time.time()
mesh = build_icosphere(2, 3.28)
print("icosphere L2:", mesh.n_vertices, mesh.n_faces, "compile+build %.1fs" % (time.time() - t0))
mesh.validate()
print("summary:", geometry_summary(mesh))

m4 = build_icosphere(4, 3.28)
H, A = mean_curvature(m4)
print("sphere L4 H*R:", (H * 3.28).mean(), (H * 3.28).std())
print("willmore L4 / 4pi:", willmore_measure(m4) / (4 * np.pi))
print("dual area sum rel err:", abs(A.sum() - geometry_summary(m4)["area"]) / A.sum())
print("bending energy L4 kappa=1:", bending_energy(m4, 1.0), "target", 8 * np.pi)

# FD check of total elastic gradient on a perturbed level-2 icosphere
rng = np.random.default_rng(0)
ref = build_icosphere(2, 3.28)
cur = ref.copy()
cur.vertices = cur.vertices + 0.02 * rng.standard_normal(cur.vertices.shape)
params = MembraneParams(v=0.95, mu=4.6, kappa_b=1.46, b2=1.69, eta_m=0.66)

area0, vol0 = 135.0, 94.0

def total_energy(x):
    m = ref.copy()
    m.vertices = x
    eb = membrane.energy_breakdown(m, ref, params, area0, vol0)
    return eb.total / units.ENERGY_INTERNAL_TO_E19J  # internal pN*um

F = elastic_forces(cur, ref, params, area0, vol0)
print("sum F:", np.abs(F.sum(axis=0)).max(), " max|F|:", np.abs(F).max())
torque = np.cross(cur.vertices, F).sum(axis=0)
print("sum torque:", np.abs(torque).max())

h = 1e-6
idx = rng.integers(0, cur.n_vertices, 8)
errs = []
t0 = time.time()
for i in idx:
    for d in range(3):
        xp = cur.vertices.copy(); xp[i, d] += h
        xm = cur.vertices.copy(); xm[i, d] -= h
        fd = -(total_energy(xp) - total_energy(xm)) / (2 * h)
        err = abs(fd - F[i, d]) / max(1e-12, np.abs(F).max())
        errs.append(err)
print("FD vs analytic rel err (max over sampled comps): %.3e" % max(errs), "in %.1fs" % (time.time() - t0))

# timing of force eval
import rbcmech._kernels as K
m11 = np.empty(ref.n_faces); m12 = np.empty(ref.n_faces); m22 = np.empty(ref.n_faces); a0 = np.empty(ref.n_faces)
K.inplane_reference(ref.vertices, ref.faces, m11, m12, m22, a0)
forces = np.zeros_like(cur.vertices)
parts = np.zeros(7)
wK = np.empty_like(cur.vertices); wa = np.empty(cur.n_vertices); wn = np.empty_like(cur.vertices)
winv = np.empty((cur.n_faces, 2)); status = np.zeros(2, dtype=np.int64)
args = (cur.vertices, ref.faces, m11, m12, m22, a0, params.kappa_i, params.k_alpha_i,
        membrane.A3, membrane.A4, params.mu_i, membrane.B1, params.b2,
        params.k_area_i, area0, params.k_volume_i, vol0, forces, parts, wK, wa, wn, winv, status)
K.elastic_energy_forces(*args)
t0 = time.time()
n = 2000
for _ in range(n):
    K.elastic_energy_forces(*args)
dt = (time.time() - t0) / n
print(f"elastic force eval L2: {dt*1e6:.1f} us")

m3 = build_icosphere(3, 3.28)
m11 = np.empty(m3.n_faces); m12 = np.empty(m3.n_faces); m22 = np.empty(m3.n_faces); a0 = np.empty(m3.n_faces)
K.inplane_reference(m3.vertices, m3.faces, m11, m12, m22, a0)
forces = np.zeros_like(m3.vertices); wK = np.empty_like(m3.vertices); wa = np.empty(m3.n_vertices)
wn = np.empty_like(m3.vertices); winv = np.empty((m3.n_faces, 2))
args3 = (m3.vertices, m3.faces, m11, m12, m22, a0, params.kappa_i, params.k_alpha_i,
         membrane.A3, membrane.A4, params.mu_i, membrane.B1, params.b2,
         params.k_area_i, area0, params.k_volume_i, vol0, forces, parts, wK, wa, wn, winv, status)
K.elastic_energy_forces(*args3)
t0 = time.time()
for _ in range(500):
    K.elastic_energy_forces(*args3)
print(f"elastic force eval L3: {(time.time()-t0)/500*1e6:.1f} us")
