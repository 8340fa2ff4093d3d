"""Problem instances and error metrics.

A Scenario bundles everything that defines one transmission-problem
instance: per-subdomain diffusion coefficients, the rotating velocity field,
sources, Dirichlet data with its time derivative, and initial conditions.
All field callables are vectorized over numpy arrays.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import assembly
from .errors import AssemblyError
from .mesh import DomainSpec

FINAL_TIME = 2.0 * math.pi


def rotating_velocity(x, y):
    """Divergence-free rotation about the domain center (0.5, 0.5)."""
    return 0.5 - y, x - 0.5


def _zero(x, y, t=None):
    return np.zeros(np.broadcast(x, y).shape)


@dataclass(frozen=True)
class Scenario:
    """One evaluable problem instance on the split unit square.

    ``f1/f2`` are sources, ``g1/g2`` Dirichlet data with analytic time
    derivatives ``dg1_dt/dg2_dt``, and ``u0_1/u0_2`` initial conditions; the
    index picks the subdomain. ``time_affine`` declares that sources and
    boundary data depend (at most) affinely on time, which lets solvers
    precompute the load once.
    """

    name: str
    kappa1: float
    kappa2: float
    f1: Callable = _zero
    f2: Callable = _zero
    g1: Callable = _zero
    g2: Callable = _zero
    dg1_dt: Callable = _zero
    dg2_dt: Callable = _zero
    u0_1: Callable = _zero
    u0_2: Callable = _zero
    final_time: float = FINAL_TIME
    time_affine: bool = True
    velocity: Callable = field(default=rotating_velocity)

    def __post_init__(self):
        if self.kappa1 <= 0 or self.kappa2 <= 0:
            raise AssemblyError("diffusion coefficients must be positive")

    @property
    def mu(self):
        return (self.kappa1, self.kappa2)


def patch_exact(kappa1, kappa2):
    """Exact patch-test solution, one callable u(x, y, t) per subdomain.

    The solution is linear in time and piecewise linear in space with a kink
    along the interface sized so that both coupling conditions hold for any
    positive coefficient pair.
    """
    a = kappa1 / kappa2
    c = (kappa2 - kappa1) / (2.0 * kappa2)

    def u1(x, y, t):
        return t * (x + 2.0 * y + 3.0)

    def u2(x, y, t):
        return t * (a * x + 2.0 * y + c + 3.0)

    return u1, u2


def patch_scenario(kappa1, kappa2) -> Scenario:
    """Manufactured patch test: sources and boundary data follow from the
    exact solution inserted into the governing equations.

    The solution is spatially linear and the velocity field divergence-free,
    so the diffusive term drops out and f_i = du/dt + v . grad(u_i).
    """
    if kappa1 <= 0 or kappa2 <= 0:
        raise AssemblyError("diffusion coefficients must be positive")
    a = kappa1 / kappa2
    c = (kappa2 - kappa1) / (2.0 * kappa2)
    u1, u2 = patch_exact(kappa1, kappa2)

    def f1(x, y, t):
        return (x + 2.0 * y + 3.0) + t * (2.0 * x - y - 0.5)

    def f2(x, y, t):
        return (a * x + 2.0 * y + c + 3.0) + t * (a * (0.5 - y) + 2.0 * (x - 0.5))

    def dg1(x, y, t):
        return x + 2.0 * y + 3.0

    def dg2(x, y, t):
        return a * x + 2.0 * y + c + 3.0

    return Scenario(
        name="patch",
        kappa1=kappa1,
        kappa2=kappa2,
        f1=f1,
        f2=f2,
        g1=u1,
        g2=u2,
        dg1_dt=dg1,
        dg2_dt=dg2,
    )


_BODY_RADIUS = 0.15


def _hill(x, y, xc, yc):
    # Smooth compactly supported bump, normalized to 1 at the center.
    r = np.hypot(x - xc, y - yc)
    return np.where(r < _BODY_RADIUS, 0.5 * (1.0 + np.cos(np.pi * np.minimum(r / _BODY_RADIUS, 1.0))), 0.0)


def _cone(x, y, xc, yc):
    r = np.hypot(x - xc, y - yc)
    return np.maximum(1.0 - r / _BODY_RADIUS, 0.0)


def _slotted_cylinder(x, y, xc, yc):
    # Unit disk with a vertical slot of width 0.05 cut from below, reaching
    # up to 0.25 * radius above the center.
    r = np.hypot(x - xc, y - yc)
    in_disk = r <= _BODY_RADIUS
    in_slot = (np.abs(x - xc) < 0.025) & (y < yc + 0.25 * _BODY_RADIUS)
    return np.where(in_disk & ~in_slot, 1.0, 0.0)


def _staircase_cylinder(x, y, xc, yc):
    # Four concentric terraces at heights 0.25, 0.5, 0.75, 1.0.
    r = np.hypot(x - xc, y - yc)
    levels = np.ceil(4.0 * np.clip(1.0 - r / _BODY_RADIUS, 0.0, 1.0)) / 4.0
    return np.where(r <= _BODY_RADIUS, levels, 0.0)


def combination_initial(x, y):
    """Superposition of the four test bodies, one per quadrant center."""
    return (
        _hill(x, y, 0.25, 0.25)
        + _cone(x, y, 0.75, 0.25)
        + _slotted_cylinder(x, y, 0.25, 0.75)
        + _staircase_cylinder(x, y, 0.75, 0.75)
    )


def combination_scenario(kappa1=1e-3, kappa2=1e-3) -> Scenario:
    """Combination test: zero sources and boundary data, bodies of varying
    smoothness as the initial condition."""

    def u0(x, y):
        return combination_initial(x, y)

    return Scenario(
        name="combination",
        kappa1=kappa1,
        kappa2=kappa2,
        u0_1=u0,
        u0_2=u0,
    )


@dataclass(frozen=True)
class GaussianHill:
    """Gaussian bump of width sigma centered at (x0, y0), value 1 at center."""

    x0: float
    y0: float
    sigma: float

    def __call__(self, x, y):
        return np.exp(
            -((x - self.x0) ** 2 + (y - self.y0) ** 2) / (2.0 * self.sigma**2)
        )


def gaussian_training_set(spec: DomainSpec) -> list[GaussianHill]:
    """Gaussian-hill initial conditions along the horizontal midline.

    Centers sit at x0 = 2hj, 0 < x0 < 0.5, on y = 0.5 with sigma = 2h, so
    halving h doubles the number of hills and halves their width. For a
    grid with N elements per side this yields N/4 - 1 hills.
    """
    h = spec.h
    spacing = 2.0 * h
    count = spec.n // 4 - 1
    if count < 1:
        raise AssemblyError(f"grid too coarse for training hills (n = {spec.n})")
    return [
        GaussianHill(x0=spacing * j, y0=0.5, sigma=spacing) for j in range(1, count + 1)
    ]


def training_scenarios(base: Scenario, spec: DomainSpec) -> list[Scenario]:
    """Training instances: the base problem's sources and boundary data with
    each Gaussian hill substituted as the initial condition."""
    out = []
    for j, hill in enumerate(gaussian_training_set(spec)):
        out.append(
            replace(base, name=f"{base.name}-train-{j}", u0_1=hill, u0_2=hill)
        )
    return out


def relative_errors(u_x, u_m, meshes, forms=None):
    """Relative L2 and H1 errors of a partitioned solution vs the benchmark.

    Parameters
    ----------
    u_x, u_m : pair of ndarray
        Full nodal vectors (free and Dirichlet values) on each subdomain for
        the candidate scheme and the monolithic benchmark.
    meshes : pair of SubdomainMesh
    forms : pair of NormForms, optional
        Precomputed norm forms; assembled on the fly if omitted.

    Returns
    -------
    (float, float)
        E^0 and E^1: half the sum over subdomains of the per-subdomain
        relative L2 / H1 error.
    """
    if forms is None:
        forms = tuple(assembly.norm_forms(m) for m in meshes)
    e0 = 0.0
    e1 = 0.0
    for ux, um, f in zip(u_x, u_m, forms):
        diff = ux - um
        denom0 = f.l2(um)
        denom1 = f.h1(um)
        if denom0 == 0.0 or denom1 == 0.0:
            raise ZeroDivisionError("benchmark solution has zero norm")
        e0 += 0.5 * f.l2(diff) / denom0
        e1 += 0.5 * f.h1(diff) / denom1
    return e0, e1
