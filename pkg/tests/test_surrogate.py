import numpy as np
import pytest

from dmdflux.errors import HullError, LayoutError, TrainingError
from dmdflux.mesh import DomainSpec
from dmdflux.scenarios import patch_scenario, training_scenarios
from dmdflux.solvers import CoupledProblem, SchurSync, run_partitioned
from dmdflux.surrogate import (
    DmdFluxOperator,
    DmdFluxSync,
    SnapshotSet,
    StaggeredLayout,
    apply_flux_operator,
    assemble_state,
    collect_snapshots,
    dmdfs_sync,
    lagrange_weights,
    replay_frobenius,
    rkoi,
    split_state,
    train_flux_operator,
    training_fit,
)


def _training_runs(n=16, mu=(1e-3, 1e-3), patch_size=2, num_steps=None):
    import copy

    spec = DomainSpec(n)
    base = patch_scenario(*mu)
    prob = CoupledProblem(spec, base)
    sync = SchurSync.build(prob, "consistent")
    dt = 2e-2 if n == 8 else None
    trajs = []
    for scen in training_scenarios(base, spec):
        clone = copy.copy(prob)
        clone.scenario = scen
        clone._initial = None
        trajs.append(
            run_partitioned(
                sync, clone, dt=dt, variant="consistent", patch_size=patch_size,
                num_steps=num_steps,
            )
        )
    return prob, trajs


def test_layout_round_trip(rng):
    layout = StaggeredLayout(n_gamma=7, patch_size=2, grid_n=8)
    lam = rng.standard_normal(7)
    p1 = rng.standard_normal(14)
    p2 = rng.standard_normal(14)
    y = assemble_state(lam, p1, p2, layout)
    assert y.size == layout.n_fs == 35
    lam2, p1b, p2b = split_state(y, layout)
    assert np.array_equal(lam2, lam)
    assert np.array_equal(p1b, p1)
    assert np.array_equal(p2b, p2)


def test_state_length_validation(rng):
    layout = StaggeredLayout(n_gamma=3, patch_size=1, grid_n=4)
    with pytest.raises(LayoutError):
        split_state(rng.standard_normal(10), layout)
    with pytest.raises(LayoutError):
        assemble_state(np.zeros(3), np.zeros(3), np.zeros(4), layout)


def test_collect_snapshot_counts():
    # n=8 has a single training hill; stacking the trajectory twice still
    # exercises the multi-trajectory concatenation rule
    prob, trajs = _training_runs(n=8, num_steps=4)
    snap = collect_snapshots(trajs[:1], 2)
    assert snap.y.shape == (5 * prob.mesh1.n_gamma, 3)
    assert snap.y_next.shape == snap.y.shape
    both = collect_snapshots(trajs * 2, 2)
    assert both.columns == 6
    assert both.segments == (3, 3)


def test_collect_rejects_mixed_layouts():
    _, trajs8 = _training_runs(n=8, num_steps=3)
    _, trajs16 = _training_runs(n=16, num_steps=3)
    with pytest.raises(LayoutError):
        collect_snapshots([trajs8[0], trajs16[0]], 2)
    with pytest.raises(LayoutError):
        collect_snapshots(trajs8[:1], 3)  # recorded patch width is for K=2


def test_snapshot_successor_alignment():
    _, trajs = _training_runs(n=8, num_steps=5)
    snap = collect_snapshots(trajs[:1], 2)
    tr = trajs[0]
    ng = tr.n_gamma
    # column j of y is (lam_j, patches at j+1); its successor column holds
    # (lam_{j+1}, patches at j+2)
    assert np.array_equal(snap.y[:ng, 1], tr.lam[1])
    assert np.array_equal(snap.y_next[:ng, 0], tr.lam[1])
    assert np.array_equal(snap.y[ng : ng + tr.patch1.shape[1], 0], tr.patch1[1])
    assert np.array_equal(snap.y_next[ng : ng + tr.patch1.shape[1], 0], tr.patch1[2])


def test_train_recovers_known_linear_map(rng):
    # snapshots generated by a known rotation; no patches (layout with K=0)
    a_true = np.array([[0.0, 1.0], [-1.0, 0.0]])
    layout = StaggeredLayout(n_gamma=2, patch_size=0, grid_n=3)
    cols, cols_next = [], []
    for _ in range(4):
        y = rng.standard_normal(2)
        for _ in range(3):
            cols.append(y)
            y = a_true @ y
            cols_next.append(y)
    snap = SnapshotSet(
        y=np.column_stack(cols),
        y_next=np.column_stack(cols_next),
        layout=layout,
        segments=(3, 3, 3, 3),
    )
    op = train_flux_operator(snap, 1e-12)
    assert np.allclose(op.dense(), a_true, atol=1e-12)


def test_train_fixed_point_consistency():
    layout = StaggeredLayout(n_gamma=2, patch_size=0, grid_n=3)
    y_star = np.array([1.5, -0.5])
    y = np.tile(y_star[:, None], (1, 6))
    snap = SnapshotSet(y=y, y_next=y, layout=layout)
    op = train_flux_operator(snap, 0.5)
    assert op.rank == 1
    assert np.allclose(op.apply(y_star), y_star, atol=1e-12)


def test_train_rejects_bad_inputs():
    layout = StaggeredLayout(n_gamma=2, patch_size=0, grid_n=3)
    zero = SnapshotSet(y=np.zeros((2, 5)), y_next=np.zeros((2, 5)), layout=layout)
    with pytest.raises(TrainingError):
        train_flux_operator(zero, 1e-8)
    empty = SnapshotSet(y=np.zeros((2, 0)), y_next=np.zeros((2, 0)), layout=layout)
    with pytest.raises(TrainingError):
        train_flux_operator(empty, 1e-8)
    good = SnapshotSet(y=np.eye(2), y_next=np.eye(2), layout=layout)
    with pytest.raises(TrainingError):
        train_flux_operator(good, 0.0)
    with pytest.raises(TrainingError):
        train_flux_operator(good, 1.0)


def test_apply_linearity_and_factored_dense_agreement(rng):
    layout = StaggeredLayout(n_gamma=4, patch_size=2, grid_n=5)
    p = rng.standard_normal((4, 3))
    q = rng.standard_normal((3, layout.n_fs))
    op = DmdFluxOperator(layout=layout, epsilon=1e-8, rank=3, p=p, q=q)
    y = rng.standard_normal(layout.n_fs)
    assert np.allclose(apply_flux_operator(op, np.zeros(layout.n_fs)), 0.0)
    assert np.allclose(op.apply(2 * y), 2 * op.apply(y), atol=1e-13)
    dense = DmdFluxOperator(
        layout=layout, epsilon=1e-8, rank=3, a=op.dense()
    )
    rel = np.linalg.norm(dense.apply(y) - op.apply(y)) / np.linalg.norm(op.apply(y))
    assert rel <= 1e-12
    with pytest.raises(LayoutError):
        op.apply(np.zeros(layout.n_fs + 1))


def test_operator_form_validation(rng):
    layout = StaggeredLayout(n_gamma=2, patch_size=1, grid_n=3)
    with pytest.raises(LayoutError):
        DmdFluxOperator(layout=layout, epsilon=1e-8, rank=1)
    with pytest.raises(LayoutError):
        DmdFluxOperator(
            layout=layout,
            epsilon=1e-8,
            rank=1,
            p=np.zeros((2, 1)),
            q=np.zeros((1, layout.n_fs)),
            a=np.zeros((2, layout.n_fs)),
        )


def test_identity_operator_stub_returns_previous_multiplier(rng):
    # plumbing check: A = [I 0 0] reproduces lam_prev
    spec = DomainSpec(8)
    prob = CoupledProblem(spec, patch_scenario(1e-3, 1e-3))
    ng = prob.mesh1.n_gamma
    layout = StaggeredLayout(n_gamma=ng, patch_size=2, grid_n=8)
    a = np.zeros((ng, layout.n_fs))
    a[:, :ng] = np.eye(ng)
    op = DmdFluxOperator(layout=layout, epsilon=1e-8, rank=ng, a=a)
    sync = DmdFluxSync(op, prob.mesh1, prob.mesh2)
    lam_prev = rng.standard_normal(ng)
    u1 = rng.standard_normal(prob.ops1.n_free)
    u2 = rng.standard_normal(prob.ops2.n_free)
    out = sync(3, u1, u2, None, None, lam_prev)
    assert np.allclose(out, lam_prev)
    # functional form agrees
    out2 = dmdfs_sync(op, lam_prev, u1, u2, sync.idx1, sync.idx2)
    assert np.allclose(out2, lam_prev)


def test_schur_bootstrap_used_once(rng):
    # with bootstrap enabled the first multiplier comes from the consistent
    # Schur solve; later steps use the operator prediction
    spec = DomainSpec(8)
    prob = CoupledProblem(spec, patch_scenario(1e-3, 1e-3))
    ng = prob.mesh1.n_gamma
    layout = StaggeredLayout(n_gamma=ng, patch_size=2, grid_n=8)
    a = np.zeros((ng, layout.n_fs))
    a[:, :ng] = np.eye(ng)
    op = DmdFluxOperator(layout=layout, epsilon=1e-8, rank=ng, a=a)
    schur = SchurSync.build(prob, "consistent")
    sync = DmdFluxSync(op, prob.mesh1, prob.mesh2, bootstrap=schur)
    u1, _, _ = prob.initial_states()
    u2 = prob.initial_states()[1]
    b1 = prob.load1(0.0) - prob.ops1.stiffness @ u1
    b2 = prob.load2(0.0) - prob.ops2.stiffness @ u2
    lam0 = sync(0, u1, u2, b1, b2, np.zeros(ng))
    expected = schur(0, u1, u2, b1, b2, np.zeros(ng))
    assert np.allclose(lam0, expected)
    lam_prev = rng.standard_normal(ng)
    lam1 = sync(1, u1, u2, b1, b2, lam_prev)
    assert np.allclose(lam1, lam_prev)  # identity stub takes over after k=0


def test_sync_layout_mismatch_rejected():
    spec = DomainSpec(8)
    prob = CoupledProblem(spec, patch_scenario(1e-3, 1e-3))
    layout = StaggeredLayout(n_gamma=15, patch_size=2, grid_n=16)
    op = DmdFluxOperator(
        layout=layout, epsilon=1e-8, rank=2,
        p=np.zeros((15, 2)), q=np.zeros((2, layout.n_fs)),
    )
    with pytest.raises(LayoutError):
        DmdFluxSync(op, prob.mesh1, prob.mesh2)


def test_open_loop_replay_on_training_data():
    _, trajs = _training_runs(n=16)
    snap = collect_snapshots(trajs, 2, mu=(1e-3, 1e-3))
    op = train_flux_operator(snap, 1e-13)
    fit = training_fit(op, snap)
    assert fit.max() <= 1e-4
    total, per_traj = replay_frobenius(op, snap)
    assert total <= 1e-5
    assert max(per_traj) <= 1e-5


def test_training_determinism():
    from dmdflux.opio import operator_bytes

    _, trajs = _training_runs(n=8, num_steps=40)
    snap1 = collect_snapshots(trajs, 2, mu=(1e-3, 1e-3))
    snap2 = collect_snapshots(trajs, 2, mu=(1e-3, 1e-3))
    op1 = train_flux_operator(snap1, 1e-10)
    op2 = train_flux_operator(snap2, 1e-10)
    assert operator_bytes(op1) == operator_bytes(op2)


def _corner_ops(rng, layout, corners):
    ops = []
    for mu in corners:
        a = rng.standard_normal((layout.n_gamma, layout.n_fs))
        ops.append((mu, DmdFluxOperator(layout=layout, epsilon=1e-8, rank=2, a=a)))
    return ops


CORNERS = [(1e-3, 2e-3), (1e-3, 3e-3), (2e-3, 2e-3), (2e-3, 3e-3)]


def test_rkoi_cardinality(rng):
    layout = StaggeredLayout(n_gamma=3, patch_size=1, grid_n=4)
    ops = _corner_ops(rng, layout, CORNERS)
    for mu, op in ops:
        out = rkoi(ops, mu)
        assert np.array_equal(out.dense(), op.dense())


def test_rkoi_edge_and_center(rng):
    layout = StaggeredLayout(n_gamma=3, patch_size=1, grid_n=4)
    ops = _corner_ops(rng, layout, CORNERS)
    by_mu = dict(ops)
    mid = rkoi(ops, (1.5e-3, 2e-3))
    expected = 0.5 * (by_mu[(1e-3, 2e-3)].dense() + by_mu[(2e-3, 2e-3)].dense())
    assert np.allclose(mid.dense(), expected, atol=1e-15)
    center = rkoi(ops, (1.5e-3, 2.5e-3))
    expected = 0.25 * sum(op.dense() for _, op in ops)
    assert np.allclose(center.dense(), expected, atol=1e-15)


def test_rkoi_weights_sum_to_one(rng):
    w = lagrange_weights(CORNERS, (1.3e-3, 2.9e-3))
    assert np.isclose(sum(w.values()), 1.0, atol=1e-14)
    layout = StaggeredLayout(n_gamma=2, patch_size=1, grid_n=3)
    a = rng.standard_normal((2, layout.n_fs))
    same = [
        (mu, DmdFluxOperator(layout=layout, epsilon=1e-8, rank=1, a=a.copy()))
        for mu in CORNERS
    ]
    out = rkoi(same, (1.7e-3, 2.2e-3))
    assert np.allclose(out.dense(), a, atol=1e-14)


def test_rkoi_rejects_outside_hull(rng):
    layout = StaggeredLayout(n_gamma=3, patch_size=1, grid_n=4)
    ops = _corner_ops(rng, layout, CORNERS)
    with pytest.raises(HullError):
        rkoi(ops, (0.5e-3, 2.5e-3))
    with pytest.raises(HullError):
        rkoi(ops, (1.5e-3, 3.5e-3))


def test_rkoi_rejects_bad_grids(rng):
    layout = StaggeredLayout(n_gamma=3, patch_size=1, grid_n=4)
    ops = _corner_ops(rng, layout, CORNERS)
    with pytest.raises(HullError):
        rkoi(ops[:3], (1.5e-3, 2.5e-3))
    skew = _corner_ops(rng, layout, [(1e-3, 2e-3), (1e-3, 3e-3), (2e-3, 2.5e-3), (2e-3, 3e-3)])
    with pytest.raises(HullError):
        rkoi(skew, (1.5e-3, 2.5e-3))
    other_layout = StaggeredLayout(n_gamma=3, patch_size=2, grid_n=4)
    mixed = ops[:3] + [
        (
            CORNERS[3],
            DmdFluxOperator(
                layout=other_layout,
                epsilon=1e-8,
                rank=1,
                a=rng.standard_normal((3, other_layout.n_fs)),
            ),
        )
    ]
    with pytest.raises(LayoutError):
        rkoi(mixed, (1.5e-3, 2.5e-3))


def test_rkoi_radius_filter(rng):
    layout = StaggeredLayout(n_gamma=3, patch_size=1, grid_n=4)
    ops = _corner_ops(rng, layout, CORNERS)
    # a radius covering all four corners reproduces the unfiltered result
    full = rkoi(ops, (1.4e-3, 2.6e-3), radius=1.0)
    plain = rkoi(ops, (1.4e-3, 2.6e-3))
    assert np.array_equal(full.dense(), plain.dense())
    # too small a radius strips the grid
    with pytest.raises(HullError):
        rkoi(ops, (1.4e-3, 2.6e-3), radius=1e-5)
