"""Bilinear (Q1) finite element assembly on the structured meshes.

All operators act on the free DoFs (gamma block first, interior second).
Dirichlet data enters through the lift blocks: with boundary values g(t) the
semi-discrete system for the free coefficients reads

    M du/dt = b(t) - K u + lambda-load,
    b(t) = f-load(t) - K_fd g(t) - M_fd dg/dt(t).

Integrals use a 2x2 Gauss rule per element, which is exact for every bilinear
form appearing here (all elements are axis-aligned h x h squares).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError
from .mesh import SubdomainMesh

_G0 = 0.5 - 0.5 / np.sqrt(3.0)
_G1 = 0.5 + 0.5 / np.sqrt(3.0)
# Reference coordinates of the 2x2 Gauss points on the unit square.
_GAUSS = np.array([[_G0, _G0], [_G1, _G0], [_G1, _G1], [_G0, _G1]])


def _shape_values():
    """Q1 shape functions at the Gauss points, shape (4 points, 4 nodes)."""
    xi, eta = _GAUSS[:, 0], _GAUSS[:, 1]
    return np.column_stack(
        [(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta]
    )


def _shape_gradients(h):
    """Physical shape gradients at the Gauss points, shape (4, 4, 2)."""
    xi, eta = _GAUSS[:, 0], _GAUSS[:, 1]
    dxi = np.column_stack([-(1 - eta), (1 - eta), eta, -eta]) / h
    deta = np.column_stack([-(1 - xi), -xi, xi, (1 - xi)]) / h
    return np.stack([dxi, deta], axis=-1)


def _gauss_points(mesh):
    """Physical Gauss point coordinates, shape (n_elems, 4, 2)."""
    lower_left = mesh.coords[mesh.quads[:, 0]]
    return lower_left[:, None, :] + mesh.h * _GAUSS[None, :, :]


def _scatter_matrix(mesh, element_mats):
    """Assemble per-element 4x4 matrices into a full-node CSR matrix."""
    rows = np.repeat(mesh.quads, 4, axis=1).ravel()
    cols = np.tile(mesh.quads, (1, 4)).ravel()
    a = sp.coo_matrix(
        (element_mats.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)
    )
    return a.tocsr()


def _free_blocks(a_full, mesh):
    """Split a full-node matrix into free-free and free-Dirichlet blocks."""
    rows = a_full[mesh.free_nodes]
    return rows[:, mesh.free_nodes].tocsr(), rows[:, mesh.dirichlet_nodes].tocsr()


def mass_element_matrix(h):
    """Consistent Q1 mass matrix of a single h x h element."""
    m = np.array([[4, 2, 1, 2], [2, 4, 2, 1], [1, 2, 4, 2], [2, 1, 2, 4]], dtype=float)
    return (h * h / 36.0) * m


def consistent_mass_full(mesh) -> sp.csr_matrix:
    """Full-node consistent mass matrix (no Dirichlet elimination)."""
    e = mass_element_matrix(mesh.h)
    mats = np.broadcast_to(e, (mesh.quads.shape[0], 4, 4))
    return _scatter_matrix(mesh, mats)


def assemble_mass(mesh, variant="consistent"):
    """Free-DoF mass matrix.

    Parameters
    ----------
    variant : {"consistent", "lumped"}
        The lumped variant is the row-sum diagonal of the consistent
        free-DoF matrix.
    """
    m_ff, _ = _free_blocks(consistent_mass_full(mesh), mesh)
    if variant == "consistent":
        return m_ff
    if variant == "lumped":
        return sp.diags(np.asarray(m_ff.sum(axis=1)).ravel()).tocsr()
    raise AssemblyError(f"unknown mass variant {variant!r}")


def diffusion_element_matrix():
    """Unit-diffusivity Q1 stiffness matrix of a square element (h-free)."""
    d = np.array(
        [[4, -1, -2, -1], [-1, 4, -1, -2], [-2, -1, 4, -1], [-1, -2, -1, 4]],
        dtype=float,
    )
    return d / 6.0


def stiffness_full(mesh, kappa, velocity=None) -> sp.csr_matrix:
    """Full-node matrix of the form (kappa grad(u) - v u, grad(w)).

    Parameters
    ----------
    kappa : float or ndarray
        Diffusion coefficient; a scalar, or one value per element for the
        single-domain mesh with a material jump at the interface.
    velocity : callable or None
        Vectorized velocity field ``v(x, y) -> (vx, vy)``; ``None`` means
        pure diffusion.
    """
    n_el = mesh.quads.shape[0]
    kappa = np.asarray(kappa, dtype=float)
    if kappa.ndim == 0:
        kappa = np.full(n_el, float(kappa))
    elif kappa.shape != (n_el,):
        raise AssemblyError("kappa must be a scalar or a per-element array")
    if np.any(kappa <= 0):
        raise AssemblyError("diffusion coefficient must be positive")

    mats = kappa[:, None, None] * diffusion_element_matrix()[None, :, :]
    if velocity is not None:
        s = _shape_values()
        ds = _shape_gradients(mesh.h)
        pts = _gauss_points(mesh)
        vx, vy = velocity(pts[..., 0], pts[..., 1])
        w = mesh.h * mesh.h / 4.0
        # -(v u, grad w): rows are test functions, columns trial functions.
        adv = np.einsum("eg,ga,gb->eab", vx, ds[:, :, 0], s)
        adv += np.einsum("eg,ga,gb->eab", vy, ds[:, :, 1], s)
        mats = mats - w * adv
    return _scatter_matrix(mesh, mats)


def assemble_stiffness(mesh, kappa, velocity=None):
    """Free-DoF stiffness matrix for the flux kappa grad(u) - v u."""
    k_ff, _ = _free_blocks(stiffness_full(mesh, kappa, velocity), mesh)
    return k_ff


def assemble_constraint(mesh_l: SubdomainMesh, mesh_i: SubdomainMesh) -> np.ndarray:
    """Interface constraint matrix: the 1D trace mass matrix on gamma.

    With matching interface nodes the matrix is identical for both
    subdomains: tridiagonal with rows (h/6, 4h/6, h/6).
    """
    if mesh_l.n_gamma != mesh_i.n_gamma:
        raise AssemblyError("interface node counts do not match")
    if not np.array_equal(
        mesh_l.coords[mesh_l.gamma_nodes], mesh_i.coords[mesh_i.gamma_nodes]
    ):
        raise AssemblyError("interface nodes do not match")
    n, h = mesh_l.n_gamma, mesh_l.h
    g = np.zeros((n, n))
    np.fill_diagonal(g, 4.0 * h / 6.0)
    idx = np.arange(n - 1)
    g[idx, idx + 1] = h / 6.0
    g[idx + 1, idx] = h / 6.0
    return g


def _eval_sided(mesh, func_1, func_2, points_x, points_y, *args):
    """Evaluate a per-side field; the full mesh dispatches on x <= 0.5."""
    if mesh.side == 1:
        return np.asarray(func_1(points_x, points_y, *args), dtype=float)
    if mesh.side == 2:
        return np.asarray(func_2(points_x, points_y, *args), dtype=float)
    left = points_x < 0.5
    vals = np.asarray(func_2(points_x, points_y, *args), dtype=float)
    vals = np.broadcast_to(vals, points_x.shape).copy()
    v1 = np.broadcast_to(
        np.asarray(func_1(points_x, points_y, *args), dtype=float), points_x.shape
    )
    vals[left] = v1[left]
    return vals


def source_load(mesh, scenario, t) -> np.ndarray:
    """Quadrature load vector of the source term over the free DoFs."""
    pts = _gauss_points(mesh)
    # Element membership decides the side on the full mesh; Gauss points of
    # interface-adjacent elements lie strictly inside their subdomain.
    fvals = _eval_sided(mesh, scenario.f1, scenario.f2, pts[..., 0], pts[..., 1], t)
    w = mesh.h * mesh.h / 4.0
    contrib = np.einsum("eg,ga->ea", w * fvals, _shape_values())
    vec = np.zeros(mesh.n_nodes)
    np.add.at(vec, mesh.quads, contrib)
    return vec[mesh.free_nodes]


def dirichlet_values(mesh, g1, g2, t=None) -> np.ndarray:
    """Nodal interpolant of per-side boundary data on the Dirichlet nodes."""
    xy = mesh.coords[mesh.dirichlet_nodes]
    args = () if t is None else (t,)
    if mesh.side == 1:
        vals = g1(xy[:, 0], xy[:, 1], *args)
    elif mesh.side == 2:
        vals = g2(xy[:, 0], xy[:, 1], *args)
    else:
        # On the shared outer corners at x = 0.5 the two data sets agree.
        vals = np.where(
            xy[:, 0] <= 0.5,
            np.broadcast_to(np.asarray(g1(xy[:, 0], xy[:, 1], *args)), xy[:, 0].shape),
            np.broadcast_to(np.asarray(g2(xy[:, 0], xy[:, 1], *args)), xy[:, 0].shape),
        )
    return np.broadcast_to(np.asarray(vals, dtype=float), (xy.shape[0],)).copy()


def _kappa_for(mesh, scenario):
    if mesh.side == 1:
        return scenario.kappa1
    if mesh.side == 2:
        return scenario.kappa2
    centers = 0.5 * (
        mesh.coords[mesh.quads[:, 0], 0] + mesh.coords[mesh.quads[:, 1], 0]
    )
    return np.where(centers < 0.5, scenario.kappa1, scenario.kappa2)


def lift_blocks(mesh, scenario):
    """Free x Dirichlet stiffness and mass blocks for the boundary lift."""
    k_full = stiffness_full(mesh, _kappa_for(mesh, scenario), scenario.velocity)
    _, k_fd = _free_blocks(k_full, mesh)
    _, m_fd = _free_blocks(consistent_mass_full(mesh), mesh)
    return k_fd, m_fd


def assemble_load(mesh, scenario, t, blocks=None) -> np.ndarray:
    """Right-hand side b(t) of the free-DoF system at time t.

    b(t) = f-load(t) - K_fd g(t) - M_fd dg/dt(t), where g is the nodal
    interpolant of the Dirichlet data. The load is shared by every scheme
    and mass variant.
    """
    if blocks is None:
        blocks = lift_blocks(mesh, scenario)
    k_fd, m_fd = blocks
    b = source_load(mesh, scenario, t)
    g = dirichlet_values(mesh, scenario.g1, scenario.g2, t)
    dg = dirichlet_values(mesh, scenario.dg1_dt, scenario.dg2_dt, t)
    b -= k_fd @ g
    b -= m_fd @ dg
    return b


def set_initial(mesh, u0, method="projection", boundary_values=None) -> np.ndarray:
    """Initial free-DoF coefficients from a field u0(x, y).

    ``projection`` solves M_C c = (u0, phi) with the consistent mass matrix,
    accounting for the boundary lift; ``interpolation`` samples u0 at the
    free nodes. Boundary values default to u0 on the Dirichlet nodes.
    """
    if method == "interpolation":
        xy = mesh.coords[mesh.free_nodes]
        return np.asarray(u0(xy[:, 0], xy[:, 1]), dtype=float) * np.ones(
            mesh.n_free
        )
    if method != "projection":
        raise AssemblyError(f"unknown initial-condition method {method!r}")
    pts = _gauss_points(mesh)
    vals = np.broadcast_to(
        np.asarray(u0(pts[..., 0], pts[..., 1]), dtype=float), pts[..., 0].shape
    )
    w = mesh.h * mesh.h / 4.0
    contrib = np.einsum("eg,ga->ea", w * vals, _shape_values())
    vec = np.zeros(mesh.n_nodes)
    np.add.at(vec, mesh.quads, contrib)
    m_ff, m_fd = _free_blocks(consistent_mass_full(mesh), mesh)
    rhs = vec[mesh.free_nodes]
    if boundary_values is None:
        xy = mesh.coords[mesh.dirichlet_nodes]
        boundary_values = np.asarray(u0(xy[:, 0], xy[:, 1]), dtype=float) * np.ones(
            mesh.n_dirichlet
        )
    rhs -= m_fd @ boundary_values
    return spla.spsolve(m_ff.tocsc(), rhs)


@dataclass(eq=False)
class NormForms:
    """Full-node quadratic forms for norms of finite element functions."""

    mass: sp.csr_matrix
    diffusion: sp.csr_matrix

    def l2(self, u):
        return float(np.sqrt(u @ (self.mass @ u)))

    def h1(self, u):
        return float(np.sqrt(u @ (self.mass @ u) + u @ (self.diffusion @ u)))


def norm_forms(mesh) -> NormForms:
    """L2 and H1-seminorm (unit diffusion) forms over all nodes."""
    return NormForms(
        mass=consistent_mass_full(mesh),
        diffusion=stiffness_full(mesh, 1.0, velocity=None),
    )


@dataclass(eq=False)
class SubdomainOperators:
    """Assembled operators of one subdomain (or of the full domain).

    Holds the consistent and lumped mass matrices, the stiffness matrix for
    the scenario's flux, the interface constraint matrix G (None on the full
    mesh), and the Dirichlet lift blocks. The consistent-mass factorization
    is computed once on first use and reused for every solve.
    """

    mesh: SubdomainMesh
    scenario: object
    mass_consistent: sp.csr_matrix
    mass_lumped: np.ndarray
    stiffness: sp.csr_matrix
    constraint: np.ndarray | None
    stiffness_lift: sp.csr_matrix
    mass_lift: sp.csr_matrix
    _mass_lu: object = field(default=None, repr=False)

    @classmethod
    def build(cls, mesh, scenario, constraint=None):
        kappa = _kappa_for(mesh, scenario)
        k_full = stiffness_full(mesh, kappa, scenario.velocity)
        k_ff, k_fd = _free_blocks(k_full, mesh)
        m_full = consistent_mass_full(mesh)
        m_ff, m_fd = _free_blocks(m_full, mesh)
        lumped = np.asarray(m_ff.sum(axis=1)).ravel()
        return cls(
            mesh=mesh,
            scenario=scenario,
            mass_consistent=m_ff,
            mass_lumped=lumped,
            stiffness=k_ff,
            constraint=constraint,
            stiffness_lift=k_fd,
            mass_lift=m_fd,
        )

    @property
    def n_free(self) -> int:
        return self.mesh.n_free

    @property
    def n_gamma(self) -> int:
        return self.mesh.n_gamma

    def mass_solve(self, rhs):
        """Apply the inverse consistent mass matrix (cached factorization)."""
        if self._mass_lu is None:
            self._mass_lu = spla.splu(self.mass_consistent.tocsc())
        return self._mass_lu.solve(rhs)

    def load(self, t) -> np.ndarray:
        return assemble_load(
            self.mesh, self.scenario, t, blocks=(self.stiffness_lift, self.mass_lift)
        )
