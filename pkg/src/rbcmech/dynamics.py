"""Energy minimization (FIRE) and velocity-Verlet time integration.

Both drive the same fused elastic-force kernel.  A simulation owns its
arrays; nothing here mutates caller-provided meshes.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize as sp_minimize

from . import membrane
from ._kernels import (
    STATUS_OK,
    elastic_energy_forces,
    inplane_reference,
    verlet_chunk,
    viscous_forces_kernel,
)
from .errors import DegenerateTriangleError, InstabilityError
from .geometry.mesh import TriMesh

logger = logging.getLogger(__name__)

# FIRE constants (standard values).
FIRE_ALPHA0 = 0.1
FIRE_F_INC = 1.1
FIRE_F_DEC = 0.5
FIRE_F_ALPHA = 0.99
FIRE_N_MIN = 5


@dataclass
class MinimizeOptions:
    force_tol: float = 5e-3          # pN, max per-vertex force at convergence
    max_iterations: int = 40000
    mass: float = 1.0                # internal mass units, sets FIRE timescale only
    dt_init: Optional[float] = None  # ms; estimated from forces when None
    dt_max_factor: float = 50.0
    # Accepted iterates may raise the energy by at most this relative amount
    # (absorbs summation roundoff; a hard zero collapses the timestep).
    uphill_rtol: float = 1e-9


@dataclass
class IntegrateOptions:
    dt: Optional[float] = None       # ms; estimated when None
    mass: Optional[float] = None     # internal units; estimated when None
    sample_every: int = 25           # steps between recorded states
    energy_blowup_factor: float = 10.0
    external_forces: Optional[np.ndarray] = None  # (N, 3) pN, held constant
    # Per-vertex drag (pN*ms/um): damps the near-isometric bending modes the
    # edge friction cannot see (a solvent stand-in); 0 keeps pure Newton.
    ambient_drag: float = 0.0


@dataclass
class MinimizeResult:
    mesh: TriMesh
    converged: bool
    iterations: int
    max_force: float                 # pN
    energy: float                    # internal pN*um, elastic part only
    area: float
    volume: float


@dataclass
class DynamicsState:
    mesh: TriMesh
    velocities: np.ndarray           # um/ms
    mass: float                      # internal mass units (pN ms^2/um)
    time: float = 0.0                # ms

    def kinetic_energy(self) -> float:
        return 0.5 * self.mass * float(np.sum(self.velocities**2))


class _ForceField:
    """Owns the kernel work arrays for one mesh topology + reference."""

    def __init__(self, reference: TriMesh, params: membrane.MembraneParams,
                 area0: float, volume0: float):
        self.faces = reference.faces
        self.edges = reference.edges
        n_f = reference.n_faces
        n_v = reference.n_vertices
        self.m11 = np.empty(n_f)
        self.m12 = np.empty(n_f)
        self.m22 = np.empty(n_f)
        self.a0 = np.empty(n_f)
        inplane_reference(reference.vertices, reference.faces,
                          self.m11, self.m12, self.m22, self.a0)
        self.params = params
        self.area0 = float(area0)
        self.volume0 = float(volume0)
        self.forces = np.zeros((n_v, 3))
        self.parts = np.zeros(7)
        self._wK = np.empty((n_v, 3))
        self._wa = np.empty(n_v)
        self._wn = np.empty((n_v, 3))
        self._winv = np.empty((n_f, 2))
        self.status = np.zeros(2, dtype=np.int64)

    def scalar_args(self):
        p = self.params
        return (p.kappa_i, p.k_alpha_i, membrane.A3, membrane.A4, p.mu_i,
                membrane.B1, p.b2, p.k_area_i, self.area0, p.k_volume_i, self.volume0)

    def evaluate(self, x: np.ndarray) -> float:
        """Elastic energy (internal units); forces land in self.forces (pN)."""
        e = elastic_energy_forces(
            x, self.faces, self.m11, self.m12, self.m22, self.a0,
            *self.scalar_args(),
            self.forces, self.parts, self._wK, self._wa, self._wn, self._winv,
            self.status,
        )
        if self.status[0] != STATUS_OK:
            raise DegenerateTriangleError(int(self.status[1]))
        return e

    def min_edge_length(self, x: np.ndarray) -> float:
        d = x[self.edges[:, 0]] - x[self.edges[:, 1]]
        return float(np.sqrt((d * d).sum(axis=1).min()))

    def max_degree(self) -> int:
        counts = np.bincount(self.edges.ravel())
        return int(counts.max())


def minimize(mesh: TriMesh, reference: TriMesh, params: membrane.MembraneParams,
             opts: Optional[MinimizeOptions] = None,
             area0: float = membrane.AREA_TARGET,
             volume0: float = membrane.VOLUME_TARGET,
             external_forces: Optional[np.ndarray] = None) -> MinimizeResult:
    """Quasi-static energy minimization to max per-vertex force <= force_tol.

    The objective includes the -f_ext . x work term when external forces are
    applied.  L-BFGS drives the descent (the penalty terms make the
    landscape too ill-conditioned for inertial relaxation to be the primary
    engine); if it stalls above the tolerance, FIRE finishes from its best
    iterate.  Accepted iterates never increase the objective.  Returns the
    best iterate with a convergence flag; does not raise on non-convergence.
    """
    opts = opts or MinimizeOptions()
    ff = _ForceField(reference, params, area0, volume0)
    x0 = mesh.vertices.copy()

    f_ext = external_forces
    if f_ext is not None:
        f_ext = np.ascontiguousarray(f_ext, dtype=np.float64)

    e0 = ff.evaluate(x0)
    if f_ext is not None:
        ff.forces += f_ext
        e0 -= float(np.sum(f_ext * x0))
    f_max = float(np.sqrt((ff.forces**2).sum(axis=1).max()))
    if f_max <= opts.force_tol:
        return MinimizeResult(TriMesh(x0, reference.faces.copy()), True, 0, f_max,
                              float(ff.parts[:5].sum()), float(ff.parts[5]),
                              float(ff.parts[6]))

    def objective(xflat):
        x = np.ascontiguousarray(xflat.reshape(-1, 3))
        try:
            e = ff.evaluate(x)
        except DegenerateTriangleError:
            # barrier: make the line search back off degenerate configurations
            return 1e30, np.zeros(x.size)
        grad = -ff.forces
        if f_ext is not None:
            grad = grad - f_ext
            e -= float(np.sum(f_ext * x))
        return e, grad.ravel()

    res = sp_minimize(
        objective, x0.ravel(), jac=True, method="L-BFGS-B",
        options=dict(maxiter=opts.max_iterations, maxcor=20,
                     ftol=1e-16, gtol=opts.force_tol / np.sqrt(3.0)),
    )
    x = np.ascontiguousarray(res.x.reshape(-1, 3))
    try:
        ff.evaluate(x)
    except DegenerateTriangleError:
        # back out to the last healthy iterate and let FIRE take over
        x = x0.copy()
        ff.evaluate(x)
    if f_ext is not None:
        ff.forces += f_ext
    f_max = float(np.sqrt((ff.forces**2).sum(axis=1).max()))
    iterations = int(res.nit)

    if f_max > opts.force_tol:
        x, f_max, fire_iters = _fire_descent(ff, x, f_ext, opts)
        iterations += fire_iters

    converged = f_max <= opts.force_tol
    if not converged:
        logger.warning("minimize: not converged after %d iterations (max|f| = %.3g pN)",
                       iterations, f_max)
    ff.evaluate(x)  # refresh parts/area/volume at the returned iterate
    return MinimizeResult(TriMesh(x, reference.faces.copy()), converged, iterations,
                          f_max, float(ff.parts[:5].sum()), float(ff.parts[5]),
                          float(ff.parts[6]))


def _fire_descent(ff: _ForceField, x0: np.ndarray, f_ext: Optional[np.ndarray],
                  opts: MinimizeOptions):
    """Fast inertial relaxation engine; finishing pass of minimize().

    Iterates with adaptive timestep and velocity mixing; steps that raise
    the objective beyond the roundoff allowance are rejected (positions
    restored, timestep halved, inertia reset).
    """
    x = x0.copy()
    vel = np.zeros_like(x)

    def eval_objective():
        try:
            e = ff.evaluate(x)
        except DegenerateTriangleError:
            ff.forces[:] = 0.0
            return 1e30
        if f_ext is not None:
            ff.forces += f_ext
            e -= float(np.sum(f_ext * x))
        return e

    energy = eval_objective()
    forces = ff.forces
    f_max = float(np.sqrt((forces**2).sum(axis=1).max()))
    l_min = ff.min_edge_length(x)
    f_bulk = float(np.percentile(np.sqrt((forces**2).sum(axis=1)), 90))
    dt = 0.25 * np.sqrt(opts.mass * l_min / max(f_bulk, 1e-6))
    dt_max = opts.dt_max_factor * dt
    alpha = FIRE_ALPHA0
    n_pos = 0
    x_prev = x.copy()

    it = 0
    for it in range(1, opts.max_iterations + 1):
        if f_max <= opts.force_tol:
            break
        power = float(np.sum(forces * vel))
        if power > 0.0:
            n_pos += 1
            if n_pos > FIRE_N_MIN:
                dt = min(dt * FIRE_F_INC, dt_max)
                alpha *= FIRE_F_ALPHA
        else:
            n_pos = 0
            dt *= FIRE_F_DEC
            alpha = FIRE_ALPHA0
            vel[:] = 0.0

        vel += (dt / opts.mass) * forces
        v_norm = float(np.sqrt(np.sum(vel * vel)))
        f_norm = float(np.sqrt(np.sum(forces * forces)))
        if f_norm > 0.0:
            vel = (1.0 - alpha) * vel + alpha * (v_norm / f_norm) * forces
        np.copyto(x_prev, x)
        e_prev = energy
        x += dt * vel

        energy = eval_objective()
        if energy > e_prev + opts.uphill_rtol * (abs(e_prev) + 1.0):
            np.copyto(x, x_prev)
            energy = eval_objective()
            vel[:] = 0.0
            n_pos = 0
            dt *= FIRE_F_DEC
            if dt < 1e-12:
                break
            forces = ff.forces
            continue
        forces = ff.forces
        f_max = float(np.sqrt((forces**2).sum(axis=1).max()))
    return x, f_max, it


# Fraction of the viscous stability limit m / (gamma deg) used as timestep;
# also bounds the relative bias of the half-step friction discretization.
VISCOUS_DT_FACTOR = 0.5


def estimate_timestep(mass: float, l_min: float, f_max: float, gamma: float,
                      max_degree: int) -> float:
    """Stable timestep: elastic bound 0.25 sqrt(m l / f), viscous bound m / (gamma deg)."""
    dt = 0.25 * np.sqrt(mass * l_min / max(f_max, 1e-6))
    if gamma > 0.0:
        dt = min(dt, VISCOUS_DT_FACTOR * mass / (gamma * max_degree))
    return dt


def stiffness_proxy(params: membrane.MembraneParams, l_min: float,
                    area0: float, volume0: float) -> float:
    """Order-of-magnitude per-vertex stiffness (pN/um) used for mass selection."""
    k_inplane = 2.0 * params.mu_i
    k_bend = params.kappa_i / max(l_min**2, 1e-12)
    k_area = 2.0 * params.k_area_i * l_min**2 / area0
    a_face = 0.43 * l_min**2
    k_vol = 2.0 * params.k_volume_i * a_face**2 / volume0
    return k_inplane + k_bend + k_area + k_vol


def choose_mass(params: membrane.MembraneParams, l_min: float,
                area0: float = membrane.AREA_TARGET,
                volume0: float = membrane.VOLUME_TARGET,
                inertial_fraction: float = 0.02) -> float:
    """Vertex mass making the inertial timescale a small fraction of the
    viscous relaxation scale eta_m / mu (quasi-overdamped dynamics)."""
    k = stiffness_proxy(params, l_min, area0, volume0)
    if params.eta_i <= 0.0:
        return 1.0
    t_visc = params.eta_i / params.mu_i  # ms
    tau_inertial = inertial_fraction * t_visc
    return max(1e-8, k * tau_inertial**2)


def integrate(state: DynamicsState, reference: TriMesh, params: membrane.MembraneParams,
              opts: Optional[IntegrateOptions] = None, duration: float = 1.0,
              area0: float = membrane.AREA_TARGET,
              volume0: float = membrane.VOLUME_TARGET):
    """Advance Newtonian dynamics for ``duration`` ms; returns the trajectory.

    The trajectory is the list of sampled DynamicsState snapshots (the last
    one at >= duration).  Elastic, pairwise-viscous and constant external
    forces act on every vertex of mass state.mass.  Aborts with
    InstabilityError when the total energy grows past
    opts.energy_blowup_factor times its initial magnitude.
    """
    opts = opts or IntegrateOptions()
    ff = _ForceField(reference, params, area0, volume0)
    x = state.mesh.vertices.copy()
    vel = state.velocities.copy()
    mass = float(state.mass)
    gamma = params.gamma_i

    f_ext = opts.external_forces
    if f_ext is None:
        f_ext = np.zeros_like(x)
    else:
        f_ext = np.ascontiguousarray(f_ext, dtype=np.float64)

    e0 = ff.evaluate(x)
    f_max = float(np.sqrt((ff.forces**2).sum(axis=1).max()))
    if opts.dt is not None:
        dt = float(opts.dt)
    else:
        gamma_eff = gamma + opts.ambient_drag / max(ff.max_degree(), 1)
        dt = estimate_timestep(mass, ff.min_edge_length(x), f_max, gamma_eff,
                               ff.max_degree())
    n_steps = max(1, int(np.ceil(duration / dt)))
    dt = duration / n_steps

    ke0 = 0.5 * mass * float(np.sum(vel**2))
    e_budget = opts.energy_blowup_factor * (abs(e0) + ke0 + 1.0)

    trajectory = [DynamicsState(TriMesh(x.copy(), reference.faces.copy()),
                                vel.copy(), mass, state.time)]
    done = 0
    t = state.time
    while done < n_steps:
        chunk = min(opts.sample_every, n_steps - done)
        e_pot = verlet_chunk(
            x, vel, ff.faces, ff.edges, ff.m11, ff.m12, ff.m22, ff.a0,
            *ff.scalar_args(), gamma, opts.ambient_drag, f_ext, mass, dt, chunk,
            ff.forces, ff.parts, ff._wK, ff._wa, ff._wn, ff._winv, ff.status,
        )
        if ff.status[0] != STATUS_OK:
            raise DegenerateTriangleError(int(ff.status[1]))
        done += chunk
        t += chunk * dt
        ke = 0.5 * mass * float(np.sum(vel**2))
        if not np.isfinite(e_pot) or e_pot + ke > e_budget:
            raise InstabilityError(
                f"energy grew to {e_pot + ke:.3g} (budget {e_budget:.3g}) at t = {t:.3g} ms"
            )
        trajectory.append(DynamicsState(TriMesh(x.copy(), reference.faces.copy()),
                                        vel.copy(), mass, t))
    return trajectory


def total_energy(state: DynamicsState, reference: TriMesh,
                 params: membrane.MembraneParams,
                 area0: float = membrane.AREA_TARGET,
                 volume0: float = membrane.VOLUME_TARGET) -> float:
    """Kinetic + elastic energy in internal units."""
    ff = _ForceField(reference, params, area0, volume0)
    return ff.evaluate(state.mesh.vertices) + state.kinetic_energy()


def viscous_power(state: DynamicsState, gamma: float) -> float:
    """Instantaneous dissipated power sum(f_visc . v), always <= 0."""
    forces = np.zeros_like(state.velocities)
    viscous_forces_kernel(state.mesh.vertices, state.velocities,
                          state.mesh.edges, gamma, forces)
    return float(np.sum(forces * state.velocities))


def dump_trajectory(trajectory, reference: TriMesh, params: membrane.MembraneParams,
                    out_dir, every: int = 1,
                    area0: float = membrane.AREA_TARGET,
                    volume0: float = membrane.VOLUME_TARGET):
    """Write every k-th state as PLY plus a CSV of energy diagnostics.

    Returns the list of written paths; the CSV columns are t_ms, kinetic,
    bending, dilation, shear, area_penalty, volume_penalty (1e-19 J),
    area_um2 and volume_um3.
    """
    import csv
    from pathlib import Path

    from . import units
    from .geometry.meshio import write_mesh

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ff = _ForceField(reference, params, area0, volume0)
    paths = []
    csv_path = out_dir / "diagnostics.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ms", "kinetic_e19J", "bending_e19J", "dilation_e19J",
                         "shear_e19J", "area_penalty_e19J", "volume_penalty_e19J",
                         "area_um2", "volume_um3"])
        for k, state in enumerate(trajectory):
            if k % every:
                continue
            ff.evaluate(state.mesh.vertices)
            frame = out_dir / f"frame_{k:05d}.ply"
            write_mesh(state.mesh, frame)
            paths.append(frame)
            row = [state.time, units.energy_to_e19j(state.kinetic_energy())]
            row += [units.energy_to_e19j(e) for e in ff.parts[:5]]
            row += [ff.parts[5], ff.parts[6]]
            writer.writerow([f"{x:.10g}" for x in row])
    paths.append(csv_path)
    return paths
