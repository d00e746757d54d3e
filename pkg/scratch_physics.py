"""Scratch physics validation of the protocol chain."""
import time
import numpy as np

from rbcmech.geometry import geometry_summary, shape_metrics
from rbcmech.membrane import MembraneParams
from rbcmech import protocols

MAP = MembraneParams(v=0.96, mu=4.60, kappa_b=1.46, b2=1.69, eta_m=0.66)

print("=== SFS family (level 3) ===")
for v in (1.0, 0.94, 0.65):
    t0 = time.time()
    sfs = protocols.generate_sfs(v, mesh_level=3)
    s = geometry_summary(sfs)
    m = shape_metrics(sfs)
    r = np.linalg.norm(sfs.vertices - sfs.vertices.mean(axis=0), axis=1)
    print(f"v={v}: area={s['area']:.2f} rv={s['reduced_volume']:.4f} "
          f"D={m.D:.2f} h_min={m.h_min:.2f} h_max={m.h_max:.2f} "
          f"radial_dev={(r.max()-r.min())/r.mean():.4f}  [{time.time()-t0:.1f}s]")

print("=== Equilibrate at MAP (level 3) ===")
t0 = time.time()
eq = protocols.equilibrate(MAP, mesh_level=3)
s = geometry_summary(eq.mesh)
print(f"D={eq.metrics.D:.2f} (Evans 7.82+-0.62) h_min={eq.metrics.h_min:.2f} (0.81+-0.35) "
      f"h_max={eq.metrics.h_max:.2f} (2.58+-0.27)")
print(f"area={s['area']:.2f} vol={s['volume']:.2f} converged={eq.converged} [{time.time()-t0:.1f}s]")

print("=== Stretch at MAP (level 3) ===")
for F in (50.0, 100.0, 190.0):
    t0 = time.time()
    st = protocols.stretch(MAP, F, base=eq)
    print(f"F={F}: D_ax={st.D_ax:.2f} D_tr={st.D_tr:.2f} conv={st.converged} [{time.time()-t0:.1f}s]")

print("=== Relax at MAP (level 3) ===")
t0 = time.time()
rx = protocols.relax(MAP, mesh_level=3)
print(f"t_c={rx.fit.t_c:.1f} ms z0={rx.fit.z0:.3f} z_inf={rx.fit.z_inf:.3f} "
      f"rms={rx.fit.rms:.2e} monotone={rx.monotone} [{time.time()-t0:.1f}s]")
