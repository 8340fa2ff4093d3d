"""Partitioned and monolithic time steppers for the transmission problem.

The explicit synchronous partitioned framework advances both subdomains with
forward Euler; a pluggable synchronization operator supplies the interface
flux multiplier at every step. Dual-Schur synchronization (consistent or
lumped mass) reproduces the monolithic trajectory on matching interface
grids; the monolithic solver itself steps the single-domain Galerkin system
and serves as the benchmark.
"""

import time
from dataclasses import dataclass

import numpy as np

from .assembly import (
    SubdomainOperators,
    assemble_constraint,
    dirichlet_values,
    set_initial,
)
from .errors import AssemblyError, InstabilityError
from .linalg import spd_factor, spd_solve
from .mesh import (
    DomainSpec,
    build_full_mesh,
    build_meshes,
    free_restriction,
    patch_indices,
    submesh_node_map,
)

# Reference stable step sizes per grid; step count is round(T / dt).
DEFAULT_DT = {16: 1.42e-2, 32: 6.84e-3, 64: 3.37e-3, 128: 1.67e-3}


def default_dt(n: int) -> float:
    try:
        return DEFAULT_DT[n]
    except KeyError:
        raise AssemblyError(
            f"no default time step for n = {n}; pass dt explicitly"
        ) from None


@dataclass(eq=False)
class SchurSystem:
    """Dual Schur complement with its Cholesky factor and the precomputed
    flux-recovery maps H_i = G_i M_i^{-1}.

    For the lumped variant the interface DoFs decouple from the interior, so
    H_i shrinks to the n_gamma x n_gamma interface block.
    """

    variant: str
    s: np.ndarray
    chol: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    n_gamma: int


def build_schur(ops1: SubdomainOperators, ops2: SubdomainOperators, variant):
    """Assemble and factorize the dual Schur complement S = sum_i H_i G_i^T."""
    g = ops1.constraint
    if g is None or ops2.constraint is None:
        raise AssemblyError("subdomain operators carry no constraint matrix")
    ng = g.shape[0]
    if variant == "consistent":
        rhs = np.zeros((ops1.n_free, ng))
        rhs[:ng] = g  # G is symmetric
        h1 = ops1.mass_solve(rhs).T
        rhs2 = np.zeros((ops2.n_free, ng))
        rhs2[:ng] = g
        h2 = ops2.mass_solve(rhs2).T
        s = h1[:, :ng] @ g + h2[:, :ng] @ g
    elif variant == "lumped":
        h1 = g / ops1.mass_lumped[:ng][None, :]
        h2 = g / ops2.mass_lumped[:ng][None, :]
        s = h1 @ g + h2 @ g
    else:
        raise AssemblyError(f"unknown mass variant {variant!r}")
    s = 0.5 * (s + s.T)
    return SchurSystem(
        variant=variant, s=s, chol=spd_factor(s), h1=h1, h2=h2, n_gamma=ng
    )


def schur_sync(schur: SchurSystem, b1, b2):
    """Solve S lambda = H_1 b_1 - H_2 b_2 for the interface multiplier."""
    if schur.variant == "lumped":
        c = schur.h1 @ b1[: schur.n_gamma] - schur.h2 @ b2[: schur.n_gamma]
    else:
        c = schur.h1 @ b1 - schur.h2 @ b2
    return spd_solve(schur.chol, c)


def euler_step(ops: SubdomainOperators, u, b, lam_load, dt, variant):
    """One forward Euler step u + dt M^{-1} (b + lam_load)."""
    rhs = b + lam_load
    if variant == "consistent":
        return u + dt * ops.mass_solve(rhs)
    if variant == "lumped":
        return u + dt * (rhs / ops.mass_lumped)
    raise AssemblyError(f"unknown mass variant {variant!r}")


class LoadModel:
    """Cached load evaluation; affine scenarios need two assemblies total."""

    def __init__(self, ops: SubdomainOperators):
        self._ops = ops
        self._affine = bool(ops.scenario.time_affine)
        if self._affine:
            b0 = ops.load(0.0)
            self.const = b0
            self.slope = ops.load(1.0) - b0
            check = ops.load(0.5)
            scale = max(1.0, float(np.abs(check).max()))
            if np.abs(self.const + 0.5 * self.slope - check).max() > 1e-9 * scale:
                raise AssemblyError(
                    "scenario declares time-affine data but the load is not affine"
                )

    def __call__(self, t):
        if self._affine:
            return self.const + t * self.slope
        return self._ops.load(t)


class SchurSync:
    """Synchronization operator of the flux-recovery schemes.

    ``variant="consistent"`` gives the scheme named ``ivrc`` on the CLI,
    ``variant="lumped"`` the cheaper first-order ``ivrl``.
    """

    def __init__(self, schur: SchurSystem):
        self.schur = schur
        self.name = "ivrc" if schur.variant == "consistent" else "ivrl"

    @classmethod
    def build(cls, problem, variant):
        return cls(build_schur(problem.ops1, problem.ops2, variant))

    @property
    def variant(self):
        return self.schur.variant

    def __call__(self, k, u1, u2, b1, b2, lam_prev):
        return schur_sync(self.schur, b1, b2)


@dataclass(eq=False)
class Trajectory:
    """States of one partitioned run.

    lam[k] is the multiplier used to advance from t_k; patch1/patch2 hold the
    near-interface coefficient restrictions at every step, which is all the
    surrogate training needs. Full free-DoF histories are kept only when
    requested.
    """

    scheme: str
    variant: str
    dt: float
    times: np.ndarray
    lam: np.ndarray
    patch1: np.ndarray
    patch2: np.ndarray
    patch_size: int
    u1: np.ndarray
    u2: np.ndarray
    u1_hist: np.ndarray | None = None
    u2_hist: np.ndarray | None = None
    sync_seconds: float = 0.0
    loop_seconds: float = 0.0

    @property
    def steps(self) -> int:
        return self.lam.shape[0]

    @property
    def n_gamma(self) -> int:
        return self.lam.shape[1]


@dataclass(eq=False)
class MonoTrajectory:
    dt: float
    times: np.ndarray
    u: np.ndarray
    u_hist: np.ndarray | None = None
    loop_seconds: float = 0.0


class CoupledProblem:
    """Meshes, operators, loads, and initial data for one problem instance.

    The initial condition is computed on the full-domain mesh (projection by
    default) and restricted to the subdomains, so partitioned and monolithic
    runs start from the same coefficients.
    """

    def __init__(self, spec: DomainSpec, scenario, init_method="projection"):
        self.spec = spec
        self.scenario = scenario
        self.init_method = init_method
        self.mesh1, self.mesh2 = build_meshes(spec)
        constraint = assemble_constraint(self.mesh1, self.mesh2)
        self.ops1 = SubdomainOperators.build(self.mesh1, scenario, constraint)
        self.ops2 = SubdomainOperators.build(self.mesh2, scenario, constraint)
        self.full_mesh = build_full_mesh(spec)
        self.full_ops = SubdomainOperators.build(self.full_mesh, scenario)
        self.map1 = free_restriction(self.full_mesh, self.mesh1)
        self.map2 = free_restriction(self.full_mesh, self.mesh2)
        self.node_map1 = submesh_node_map(self.full_mesh, self.mesh1)
        self.node_map2 = submesh_node_map(self.full_mesh, self.mesh2)
        self.load1 = LoadModel(self.ops1)
        self.load2 = LoadModel(self.ops2)
        self.full_load = LoadModel(self.full_ops)
        self._initial = None

    @property
    def constraint(self):
        return self.ops1.constraint

    def _full_u0(self):
        u0_1, u0_2 = self.scenario.u0_1, self.scenario.u0_2

        def u0(x, y):
            left = x <= 0.5
            v = np.broadcast_to(np.asarray(u0_2(x, y), dtype=float), left.shape).copy()
            v1 = np.broadcast_to(np.asarray(u0_1(x, y), dtype=float), left.shape)
            v[left] = v1[left]
            return v

        return u0

    def initial_states(self):
        """Initial coefficients (u1, u2, full) from the full-mesh projection."""
        if self._initial is None:
            g0 = dirichlet_values(
                self.full_mesh, self.scenario.g1, self.scenario.g2, 0.0
            )
            w0 = set_initial(
                self.full_mesh,
                self._full_u0(),
                method=self.init_method,
                boundary_values=g0,
            )
            self._initial = (w0[self.map1], w0[self.map2], w0)
        return self._initial

    def nodal_fields(self, u1_free, u2_free, t):
        """Full nodal vectors per subdomain (free values plus Dirichlet data)."""
        out = []
        for mesh, u in ((self.mesh1, u1_free), (self.mesh2, u2_free)):
            vec = np.zeros(mesh.n_nodes)
            vec[mesh.free_nodes] = u
            vec[mesh.dirichlet_nodes] = dirichlet_values(
                mesh, self.scenario.g1, self.scenario.g2, t
            )
            out.append(vec)
        return tuple(out)

    def mono_nodal_fields(self, w_free, t):
        """Restrict a full-mesh state to per-subdomain nodal vectors."""
        full = self.full_mesh
        vec = np.zeros(full.n_nodes)
        vec[full.free_nodes] = w_free
        vec[full.dirichlet_nodes] = dirichlet_values(
            full, self.scenario.g1, self.scenario.g2, t
        )
        return vec[self.node_map1], vec[self.node_map2]


def num_steps_for(scenario, dt) -> int:
    return int(round(scenario.final_time / dt))


def run_partitioned(
    sync,
    problem: CoupledProblem,
    dt=None,
    variant="consistent",
    record="light",
    patch_size=2,
    num_steps=None,
):
    """Explicit synchronous partitioned run.

    Each step synchronizes (computes the multiplier lam_k from the chosen
    operator), forms the Neumann loads G^T lam_k with opposite signs on the
    two subdomains, and advances both with forward Euler. Non-finite states
    abort with the step index.
    """
    if dt is None:
        dt = default_dt(problem.spec.n)
    q = num_steps if num_steps is not None else num_steps_for(problem.scenario, dt)
    if q < 1:
        raise AssemblyError("time grid must contain at least one step")
    ops1, ops2 = problem.ops1, problem.ops2
    g = problem.constraint
    ng = g.shape[0]
    idx1 = patch_indices(problem.mesh1, patch_size)
    idx2 = patch_indices(problem.mesh2, patch_size)
    u1, u2, _ = problem.initial_states()
    u1 = u1.copy()
    u2 = u2.copy()

    lam_hist = np.empty((q, ng))
    p1 = np.empty((q + 1, idx1.size))
    p2 = np.empty((q + 1, idx2.size))
    p1[0] = u1[idx1]
    p2[0] = u2[idx2]
    full = record == "full"
    u1_hist = np.empty((q + 1, u1.size)) if full else None
    u2_hist = np.empty((q + 1, u2.size)) if full else None
    if full:
        u1_hist[0] = u1
        u2_hist[0] = u2

    lam_prev = np.zeros(ng)
    load1, load2 = problem.load1, problem.load2
    k1, k2 = ops1.stiffness, ops2.stiffness
    # Flux loads live on the gamma block only; reuse the buffers across steps.
    l1 = np.zeros(u1.size)
    l2 = np.zeros(u2.size)
    sync_seconds = 0.0
    perf = time.perf_counter
    loop_start = perf()
    for k in range(q):
        t = k * dt
        b1 = load1(t) - k1 @ u1
        b2 = load2(t) - k2 @ u2
        t0 = perf()
        lam = sync(k, u1, u2, b1, b2, lam_prev)
        glam = g @ lam
        l1[:ng] = -glam
        l2[:ng] = glam
        sync_seconds += perf() - t0
        u1 = euler_step(ops1, u1, b1, l1, dt, variant)
        u2 = euler_step(ops2, u2, b2, l2, dt, variant)
        if not (np.isfinite(u1).all() and np.isfinite(u2).all()):
            raise InstabilityError(
                f"non-finite state after step {k} (t = {t:.6g})", step=k
            )
        lam_hist[k] = lam
        p1[k + 1] = u1[idx1]
        p2[k + 1] = u2[idx2]
        if full:
            u1_hist[k + 1] = u1
            u2_hist[k + 1] = u2
        lam_prev = lam
    loop_seconds = perf() - loop_start

    return Trajectory(
        scheme=getattr(sync, "name", "custom"),
        variant=variant,
        dt=dt,
        times=np.arange(q + 1) * dt,
        lam=lam_hist,
        patch1=p1,
        patch2=p2,
        patch_size=patch_size,
        u1=u1,
        u2=u2,
        u1_hist=u1_hist,
        u2_hist=u2_hist,
        sync_seconds=sync_seconds,
        loop_seconds=loop_seconds,
    )


def run_monolithic(problem: CoupledProblem, dt=None, record="light", num_steps=None):
    """Forward Euler on the single-domain Galerkin system (consistent mass)."""
    if dt is None:
        dt = default_dt(problem.spec.n)
    q = num_steps if num_steps is not None else num_steps_for(problem.scenario, dt)
    ops = problem.full_ops
    _, _, w = problem.initial_states()
    w = w.copy()
    full = record == "full"
    w_hist = np.empty((q + 1, w.size)) if full else None
    if full:
        w_hist[0] = w
    load = problem.full_load
    k_mat = ops.stiffness
    perf = time.perf_counter
    loop_start = perf()
    for k in range(q):
        b = load(k * dt) - k_mat @ w
        w = w + dt * ops.mass_solve(b)
        if not np.isfinite(w).all():
            raise InstabilityError(f"non-finite state after step {k}", step=k)
        if full:
            w_hist[k + 1] = w
    loop_seconds = perf() - loop_start
    return MonoTrajectory(
        dt=dt,
        times=np.arange(q + 1) * dt,
        u=w,
        u_hist=w_hist,
        loop_seconds=loop_seconds,
    )


def trajectory_errors(problem, traj, mono, forms=None):
    """Relative (E0, E1) of a partitioned run against the monolithic one."""
    from .scenarios import relative_errors

    t_final = traj.times[-1]
    u_x = problem.nodal_fields(traj.u1, traj.u2, t_final)
    u_m = problem.mono_nodal_fields(mono.u, t_final)
    return relative_errors(u_x, u_m, (problem.mesh1, problem.mesh2), forms=forms)


def max_nodal_difference(problem, traj, mono):
    """Max over steps and nodes of |partitioned - monolithic|, relative to
    the largest monolithic nodal value over the whole trajectory."""
    if traj.u1_hist is None or mono.u_hist is None:
        raise AssemblyError("both runs must be recorded with record='full'")
    m1 = mono.u_hist[:, problem.map1]
    m2 = mono.u_hist[:, problem.map2]
    scale = max(np.abs(m1).max(), np.abs(m2).max(), 1e-300)
    d1 = np.abs(traj.u1_hist - m1).max()
    d2 = np.abs(traj.u2_hist - m2).max()
    return max(d1, d2) / scale


def measure_sync_times(problem, syncs, dt=None, repeats=3, num_steps=None):
    """Median online timings per scheme over repeated full runs.

    Returns a dict scheme -> {"sync": ..., "loop": ..., "per_step": ...};
    one warmup run precedes the timed repetitions.
    """
    results = {}
    for name, (sync, variant) in syncs.items():
        run_partitioned(
            sync, problem, dt=dt, variant=variant, num_steps=num_steps
        )
        sync_times, loop_times, steps = [], [], 1
        for _ in range(max(3, repeats)):
            traj = run_partitioned(
                sync, problem, dt=dt, variant=variant, num_steps=num_steps
            )
            sync_times.append(traj.sync_seconds)
            loop_times.append(traj.loop_seconds)
            steps = traj.steps
        results[name] = {
            "sync": float(np.median(sync_times)),
            "loop": float(np.median(loop_times)),
            "per_step": float(np.median(sync_times)) / steps,
            "steps": steps,
        }
    return results
