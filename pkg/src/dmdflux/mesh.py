"""Structured Q1 meshes of the split unit square.

The unit square is meshed by N x N uniform quadrilaterals and split along the
vertical line x = 0.5 into two subdomain meshes with matching interface nodes.
Each subdomain partitions its nodes into interface (gamma), interior, and
Dirichlet sets; the free degrees of freedom are ordered gamma-block first,
interior second, each block sorted lexicographically (x-major, then y).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

INTERFACE_X = 0.5


@dataclass(frozen=True)
class DomainSpec:
    """Discretization of the unit square [0,1]^2 split at x = 0.5.

    Parameters
    ----------
    n : int
        Elements per side of the full mesh. Must be even and positive so the
        interface lies on a mesh line; mesh size is h = 1/n.
    """

    n: int
    interface_x: float = INTERFACE_X

    def __post_init__(self):
        if self.n < 2 or self.n % 2 != 0:
            raise MeshError(f"n must be an even integer >= 2, got {self.n}")
        if self.interface_x != INTERFACE_X:
            raise MeshError("interface must sit at x = 0.5")

    @property
    def h(self) -> float:
        return 1.0 / self.n


@dataclass(frozen=True, eq=False)
class SubdomainMesh:
    """One structured subdomain mesh with its node index partition.

    Attributes
    ----------
    side : int
        1 for the left subdomain [0, 0.5] x [0, 1], 2 for the right one,
        0 for the full single-domain mesh (no interface partition).
    coords : ndarray, shape (n_nodes, 2)
        Node coordinates, numbered lexicographically (x-major, then y).
    quads : ndarray, shape (n_elems, 4)
        Element connectivity, counterclockwise from the lower-left corner.
    gamma_nodes, interior_nodes, dirichlet_nodes : ndarray
        Disjoint node-id sets covering all nodes, each in lexicographic order.
        Interface endpoints on y = 0 and y = 1 belong to the Dirichlet set.
    free_nodes : ndarray
        Node ids of the free DoFs in solver order: gamma block first, then
        interior block.
    node_to_free : ndarray
        Inverse map (node id -> free DoF index, -1 for Dirichlet nodes).
    """

    side: int
    n: int
    h: float
    nx: int
    ny: int
    coords: np.ndarray
    quads: np.ndarray
    gamma_nodes: np.ndarray
    interior_nodes: np.ndarray
    dirichlet_nodes: np.ndarray
    free_nodes: np.ndarray = field(repr=False)
    node_to_free: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_gamma(self) -> int:
        return self.gamma_nodes.size

    @property
    def n_interior(self) -> int:
        return self.interior_nodes.size

    @property
    def n_dirichlet(self) -> int:
        return self.dirichlet_nodes.size

    @property
    def n_free(self) -> int:
        return self.free_nodes.size


def _grid(side: int, n: int):
    """Build one structured grid: coordinates, connectivity, index partition."""
    if side == 0:
        ix_offset, nx = 0, n + 1
    elif side == 1:
        ix_offset, nx = 0, n // 2 + 1
    elif side == 2:
        ix_offset, nx = n // 2, n // 2 + 1
    else:
        raise MeshError(f"side must be 0, 1 or 2, got {side}")
    ny = n + 1

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    # Coordinates come from the global grid index divided by n, so matching
    # nodes of the two subdomains (and of the full mesh) are bitwise equal.
    coords = np.column_stack(
        [(ix.ravel() + ix_offset) / n, iy.ravel() / n]
    ).astype(float)

    ex, ey = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    ll = ex.ravel() * ny + ey.ravel()
    quads = np.column_stack([ll, ll + ny, ll + ny + 1, ll + 1])

    node_ids = np.arange(nx * ny)
    on_bottom = (iy == 0).ravel()
    on_top = (iy == ny - 1).ravel()
    x = coords[:, 0]
    # Dirichlet nodes lie on the outer boundary of the unit square; the
    # interface endpoints at y = 0 and y = 1 are Dirichlet, not gamma.
    dirichlet = on_bottom | on_top | (x == 0.0) | (x == 1.0)
    if side == 0:
        on_gamma = np.zeros(coords.shape[0], dtype=bool)
    else:
        on_gamma = (x == INTERFACE_X) & ~dirichlet

    interior = ~dirichlet & ~on_gamma
    # node_ids is already lexicographic (x-major, then y), so boolean masking
    # yields each index class in lexicographic order.
    gamma_nodes = node_ids[on_gamma]
    interior_nodes = node_ids[interior]
    dirichlet_nodes = node_ids[dirichlet]
    free_nodes = np.concatenate([gamma_nodes, interior_nodes])
    node_to_free = np.full(coords.shape[0], -1, dtype=np.int64)
    node_to_free[free_nodes] = np.arange(free_nodes.size)

    return SubdomainMesh(
        side=side,
        n=n,
        h=1.0 / n,
        nx=nx,
        ny=ny,
        coords=coords,
        quads=quads,
        gamma_nodes=gamma_nodes,
        interior_nodes=interior_nodes,
        dirichlet_nodes=dirichlet_nodes,
        free_nodes=free_nodes,
        node_to_free=node_to_free,
    )


def build_meshes(spec: DomainSpec):
    """Build the two subdomain meshes with matching interface nodes.

    Returns
    -------
    (SubdomainMesh, SubdomainMesh)
        Subdomain 1 covers [0, 0.5] x [0, 1], subdomain 2 covers
        [0.5, 1] x [0, 1]; both have (n/2) x n elements and n-1 free
        interface nodes.
    """
    m1 = _grid(1, spec.n)
    m2 = _grid(2, spec.n)
    if not np.allclose(
        m1.coords[m1.gamma_nodes], m2.coords[m2.gamma_nodes], rtol=0, atol=0
    ):
        raise MeshError("interface nodes of the two subdomains do not match")
    return m1, m2


def build_full_mesh(spec: DomainSpec) -> SubdomainMesh:
    """Build the single-domain mesh of the whole unit square (side = 0)."""
    return _grid(0, spec.n)


def submesh_node_map(full: SubdomainMesh, sub: SubdomainMesh) -> np.ndarray:
    """Map subdomain node ids to full-mesh node ids (matching coordinates)."""
    if full.side != 0:
        raise MeshError("first argument must be the full-domain mesh")
    offset = 0 if sub.side == 1 else (sub.n // 2) * full.ny
    ix, iy = np.divmod(np.arange(sub.n_nodes), sub.ny)
    return offset + ix * full.ny + iy


def free_restriction(full: SubdomainMesh, sub: SubdomainMesh) -> np.ndarray:
    """Map subdomain free-DoF indices to full-mesh free-DoF indices."""
    nodes = submesh_node_map(full, sub)
    mapped = full.node_to_free[nodes[sub.free_nodes]]
    if np.any(mapped < 0):
        raise MeshError("subdomain free DoF maps to a full-mesh Dirichlet node")
    return mapped


def patch_indices(mesh: SubdomainMesh, size: int) -> np.ndarray:
    """Free-DoF indices of the interface patch of the given size.

    The patch collects all free DoFs on the interface grid line and the
    ``size - 1`` vertical grid lines adjacent to it inside the subdomain.
    Lines are ordered by increasing distance from the interface; within a
    line, nodes run bottom to top. The result has length size * (n - 1).
    """
    if mesh.side not in (1, 2):
        raise MeshError("patches are defined on subdomain meshes only")
    if size < 1 or size > mesh.n // 2:
        raise MeshError(
            f"patch size must satisfy 1 <= size <= n/2 = {mesh.n // 2}, got {size}"
        )
    gamma_ix = mesh.nx - 1 if mesh.side == 1 else 0
    step = -1 if mesh.side == 1 else 1
    idx = []
    iy = np.arange(1, mesh.ny - 1)
    for d in range(size):
        ix = gamma_ix + step * d
        nodes = ix * mesh.ny + iy
        dofs = mesh.node_to_free[nodes]
        if np.any(dofs < 0):
            raise MeshError("patch line contains Dirichlet nodes")
        idx.append(dofs)
    return np.concatenate(idx)
