"""Data-driven interface flux surrogate.

Staggered states pair the previous multiplier with the current near-interface
solution patches of both subdomains:

    y_{k-1} = (lam_{k-1}, u_{1,k}(patch), u_{2,k}(patch)),

length (2K+1) * n_gamma for patch size K. A linear one-step operator is
identified from snapshot pairs of flux-recovery trajectories via the
energy-truncated SVD pseudo-inverse, and only its multiplier rows are kept,
stored in factored form A = P Q. A family of operators trained on a 2x2
parameter grid interpolates bilinearly to new diffusion coefficient pairs.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HullError, LayoutError, TrainingError
from .linalg import PINV_CUTOFF, select_rank, thin_svd
from .mesh import patch_indices


@dataclass(frozen=True)
class StaggeredLayout:
    """Shape metadata of the staggered state: (lam, patch 1, patch 2)."""

    n_gamma: int
    patch_size: int
    grid_n: int

    @property
    def n_fs(self) -> int:
        return (2 * self.patch_size + 1) * self.n_gamma

    @property
    def patch_len(self) -> int:
        return self.patch_size * self.n_gamma


def assemble_state(lam, p1, p2, layout: StaggeredLayout | None = None):
    """Stack (lam, patch1, patch2) into one staggered state vector."""
    y = np.concatenate([lam, p1, p2])
    if layout is not None and y.size != layout.n_fs:
        raise LayoutError(f"state length {y.size} != layout {layout.n_fs}")
    return y


def split_state(y, layout: StaggeredLayout):
    """Inverse of assemble_state; returns views into y."""
    if y.shape[0] != layout.n_fs:
        raise LayoutError(f"state length {y.shape[0]} != layout {layout.n_fs}")
    ng, m = layout.n_gamma, layout.patch_len
    return y[:ng], y[ng : ng + m], y[ng + m :]


@dataclass(eq=False)
class SnapshotSet:
    """Aligned snapshot matrices: column j of y_next succeeds column j of y
    within the same trajectory (pairs never straddle trajectories).
    ``segments`` records the column count contributed by each trajectory."""

    y: np.ndarray
    y_next: np.ndarray
    layout: StaggeredLayout
    mu: tuple = (math.nan, math.nan)
    source: str = ""
    segments: tuple = ()

    @property
    def columns(self) -> int:
        return self.y.shape[1]


def collect_snapshots(trajectories, patch_size, mu=None, source=""):
    """Build staggered snapshot matrices from recorded trajectories.

    For a trajectory of q steps the states are y_j = (lam_j, u_{1,j+1},
    u_{2,j+1}) for j = 0..q-1; Y collects y_0..y_{q-2} and Y' their
    successors. Multiple trajectories concatenate column-wise.
    """
    if not trajectories:
        raise TrainingError("no trajectories supplied")
    ng = trajectories[0].n_gamma
    layout = StaggeredLayout(
        n_gamma=ng, patch_size=patch_size, grid_n=ng + 1
    )
    ys, yps = [], []
    for tr in trajectories:
        if tr.n_gamma != ng or tr.patch_size != patch_size:
            raise LayoutError("trajectory layouts are inconsistent")
        if tr.patch1.shape[1] != layout.patch_len:
            raise LayoutError("recorded patch width does not match patch size")
        states = np.vstack([tr.lam.T, tr.patch1[1:].T, tr.patch2[1:].T])
        ys.append(states[:, :-1])
        yps.append(states[:, 1:])
    y = np.hstack(ys)
    y_next = np.hstack(yps)
    if mu is None:
        mu = (math.nan, math.nan)
    return SnapshotSet(
        y=y,
        y_next=y_next,
        layout=layout,
        mu=tuple(mu),
        source=source,
        segments=tuple(block.shape[1] for block in ys),
    )


@dataclass(eq=False)
class DmdFluxOperator:
    """Row-truncated one-step flux operator.

    Trained operators are kept factored (A = P Q with Q the transposed
    leading left singular vectors); interpolated or re-loaded dense operators
    store A directly. Both forms apply identically to within roundoff.
    """

    layout: StaggeredLayout
    epsilon: float
    rank: int
    mu: tuple = (math.nan, math.nan)
    p: np.ndarray | None = None
    q: np.ndarray | None = None
    a: np.ndarray | None = None
    singular_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        factored = self.p is not None and self.q is not None
        if factored == (self.a is not None):
            raise LayoutError("operator must be either factored or dense")
        if self.rank < 1:
            raise LayoutError("operator rank must be at least 1")

    @property
    def kind(self) -> str:
        return "dense" if self.a is not None else "factored"

    def apply(self, y: np.ndarray) -> np.ndarray:
        if y.shape[0] != self.layout.n_fs:
            raise LayoutError(
                f"state length {y.shape[0]} != operator layout {self.layout.n_fs}"
            )
        if self.a is not None:
            return self.a @ y
        return self.p @ (self.q @ y)

    def dense(self) -> np.ndarray:
        return self.a if self.a is not None else self.p @ self.q


def apply_flux_operator(op: DmdFluxOperator, y: np.ndarray) -> np.ndarray:
    """Predict the next multiplier from a staggered state."""
    return op.apply(y)


def train_flux_operator(snapshots: SnapshotSet, eps: float) -> DmdFluxOperator:
    """Identify the flux operator from snapshot pairs.

    The snapshot matrix is factored by a thin SVD, the rank is the smallest
    one whose energy deficit is at most eps, and the multiplier rows of the
    least-squares one-step operator are kept:
    P = Y'_lam V_k S_k^+, Q = U_k^T.
    """
    if not 0.0 < eps < 1.0:
        raise TrainingError(f"energy threshold must lie in (0, 1), got {eps}")
    y, y_next = snapshots.y, snapshots.y_next
    if y.shape[1] == 0 or not np.any(y):
        raise TrainingError("snapshot matrix is empty or identically zero")
    svd = thin_svd(y)
    k = select_rank(svd.s, eps)
    # Singular values under the cutoff are dropped from the pseudo-inverse.
    s_k = svd.s[:k]
    s_inv = np.zeros(k)
    keep = s_k > PINV_CUTOFF * svd.s[0]
    s_inv[keep] = 1.0 / s_k[keep]
    ng = snapshots.layout.n_gamma
    p = (y_next[:ng] @ svd.vt[:k].T) * s_inv[None, :]
    q = np.ascontiguousarray(svd.u[:, :k].T)
    return DmdFluxOperator(
        layout=snapshots.layout,
        epsilon=eps,
        rank=k,
        mu=snapshots.mu,
        p=p,
        q=q,
        singular_values=svd.s.copy(),
    )


def training_fit(op: DmdFluxOperator, snapshots: SnapshotSet) -> np.ndarray:
    """Per-step multiplier reproduction error on the training data.

    Each one-step prediction error is measured relative to the largest
    recorded multiplier norm of the snapshot set; early-trajectory steps with
    a vanishing multiplier would otherwise dominate a per-step quotient.
    """
    ng = op.layout.n_gamma
    if op.a is not None:
        pred = op.a @ snapshots.y
    else:
        pred = op.p @ (op.q @ snapshots.y)
    rec = snapshots.y_next[:ng]
    num = np.linalg.norm(pred - rec, axis=0)
    scale = np.linalg.norm(rec, axis=0).max()
    return num / max(scale, 1e-300)


def replay_frobenius(op: DmdFluxOperator, snapshots: SnapshotSet):
    """Relative Frobenius error of the multiplier replay.

    Returns (total, per_trajectory): ||A_lam Y - Y'_lam||_F / ||Y'_lam||_F
    over all snapshot pairs and over each trajectory's column segment.
    """
    ng = op.layout.n_gamma
    if op.a is not None:
        pred = op.a @ snapshots.y
    else:
        pred = op.p @ (op.q @ snapshots.y)
    rec = snapshots.y_next[:ng]
    diff = pred - rec
    total = float(np.linalg.norm(diff) / np.linalg.norm(rec))
    per_traj = []
    start = 0
    for count in snapshots.segments or (snapshots.columns,):
        sl = slice(start, start + count)
        per_traj.append(
            float(np.linalg.norm(diff[:, sl]) / np.linalg.norm(rec[:, sl]))
        )
        start += count
    return total, per_traj


def dmdfs_sync(op, lam_prev, u1, u2, idx1, idx2):
    """Assemble the staggered state and predict the next multiplier."""
    y = assemble_state(lam_prev, u1[idx1], u2[idx2], op.layout)
    return op.apply(y)


class DmdFluxSync:
    """Synchronization operator backed by a trained flux surrogate.

    The first online step needs a multiplier from before the initial time;
    by default it is zero, or a one-time consistent-mass Schur solve when a
    bootstrap operator is supplied.
    """

    name = "dmdfs"

    def __init__(self, op: DmdFluxOperator, mesh1, mesh2, bootstrap=None):
        if op.layout.grid_n != mesh1.n or op.layout.n_gamma != mesh1.n_gamma:
            raise LayoutError(
                f"operator layout (n = {op.layout.grid_n}, n_gamma = "
                f"{op.layout.n_gamma}) does not match the mesh "
                f"(n = {mesh1.n}, n_gamma = {mesh1.n_gamma})"
            )
        self.op = op
        self.idx1 = patch_indices(mesh1, op.layout.patch_size)
        self.idx2 = patch_indices(mesh2, op.layout.patch_size)
        self.bootstrap = bootstrap
        self._y = np.empty(op.layout.n_fs)
        self._ng = op.layout.n_gamma
        self._m = op.layout.patch_len
        self._p, self._q, self._a = op.p, op.q, op.a

    def __call__(self, k, u1, u2, b1, b2, lam_prev):
        if k == 0 and self.bootstrap is not None:
            return self.bootstrap(k, u1, u2, b1, b2, lam_prev)
        ng, m, y = self._ng, self._m, self._y
        y[:ng] = lam_prev
        np.take(u1, self.idx1, out=y[ng : ng + m])
        np.take(u2, self.idx2, out=y[ng + m :])
        if self._a is not None:
            return self._a @ y
        return self._p @ (self._q @ y)


def _tensor_grid(samples):
    """Detect a 2x2 tensor parameter grid; returns (k1 pair, k2 pair, ops)."""
    if len(samples) != 4:
        raise HullError(f"parametric interpolation needs 4 corner operators, got {len(samples)}")
    k1s = sorted({mu[0] for mu, _ in samples})
    k2s = sorted({mu[1] for mu, _ in samples})
    if len(k1s) != 2 or len(k2s) != 2:
        raise HullError("corner parameters do not form a 2x2 tensor grid")
    if k1s[0] <= 0 or k2s[0] <= 0:
        raise HullError("diffusion coefficients must be positive")
    by_mu = {mu: op for mu, op in samples}
    if len(by_mu) != 4:
        raise HullError("duplicate corner parameters")
    try:
        ops = {(i, j): by_mu[(k1s[i], k2s[j])] for i in (0, 1) for j in (0, 1)}
    except KeyError as exc:
        raise HullError("corner parameters do not form a 2x2 tensor grid") from exc
    return k1s, k2s, ops


def rkoi(samples, mu, radius=None) -> DmdFluxOperator:
    """Interpolate trained flux operators to a new parameter pair.

    ``samples`` is a list of ((kappa1, kappa2), operator) trained on a 2x2
    tensor grid. The combination uses bilinear Lagrange weights on the dense
    operator forms; querying a corner returns that corner's operator
    exactly. An optional radius restricts the sample set to a ball around
    the query before interpolation (with four-corner sampling the ball is
    chosen to cover all corners, so the filter is inactive by default).
    """
    samples = [((float(m[0]), float(m[1])), op) for m, op in samples]
    layouts = {op.layout for _, op in samples}
    if len(layouts) != 1:
        raise LayoutError("operators have mismatched layouts")
    if radius is not None:
        samples = [
            (m, op)
            for m, op in samples
            if math.hypot(m[0] - mu[0], m[1] - mu[1]) <= radius
        ]
    k1s, k2s, ops = _tensor_grid(samples)
    if not (k1s[0] <= mu[0] <= k1s[1] and k2s[0] <= mu[1] <= k2s[1]):
        raise HullError(
            f"query {tuple(mu)} lies outside the sampled rectangle "
            f"[{k1s[0]}, {k1s[1]}] x [{k2s[0]}, {k2s[1]}]"
        )
    s = (mu[0] - k1s[0]) / (k1s[1] - k1s[0])
    t = (mu[1] - k2s[0]) / (k2s[1] - k2s[0])
    w1 = (1.0 - s, s)
    w2 = (1.0 - t, t)
    layout = samples[0][1].layout
    a = np.zeros((layout.n_gamma, layout.n_fs))
    for i in (0, 1):
        for j in (0, 1):
            w = w1[i] * w2[j]
            if w != 0.0:
                a += w * ops[(i, j)].dense()
    return DmdFluxOperator(
        layout=layout,
        epsilon=max(op.epsilon for _, op in samples),
        rank=max(op.rank for _, op in samples),
        mu=(float(mu[0]), float(mu[1])),
        a=a,
    )


def lagrange_weights(corners, mu):
    """Bilinear weights of the four corners at the query point (sum to 1)."""
    k1s = sorted({c[0] for c in corners})
    k2s = sorted({c[1] for c in corners})
    s = (mu[0] - k1s[0]) / (k1s[1] - k1s[0])
    t = (mu[1] - k2s[0]) / (k2s[1] - k2s[0])
    return {
        (k1s[i], k2s[j]): ((1.0 - s, s)[i] * ((1.0 - t, t)[j]))
        for i in (0, 1)
        for j in (0, 1)
    }
