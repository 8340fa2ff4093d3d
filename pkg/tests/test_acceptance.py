"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s``. The heavy artifacts
(training sets, benchmark runs) are session-scoped and shared across
criteria; the whole suite completes in a few minutes on a laptop.
"""

import numpy as np
import pytest

from dmdflux.cli import collect_training_snapshots
from dmdflux.config import RunConfig
from dmdflux.linalg import energy_deficits, select_rank
from dmdflux.mesh import DomainSpec
from dmdflux.opio import load_operator, operator_bytes, save_operator
from dmdflux.scenarios import (
    combination_scenario,
    patch_scenario,
    relative_errors,
)
from dmdflux.solvers import (
    CoupledProblem,
    SchurSync,
    build_schur,
    max_nodal_difference,
    measure_sync_times,
    run_monolithic,
    run_partitioned,
    trajectory_errors,
)
from dmdflux.surrogate import DmdFluxSync, replay_frobenius, rkoi, train_flux_operator

SINGLE_MU = (1e-3, 1e-3)
MULTI_PATCH_MU = (1.5e-3, 2.5e-3)
COMBO_QUERY_MU = (1.5e-3, 3.5e-3)
COMBO_CORNERS = [(1e-3, 3e-3), (1e-3, 4e-3), (2e-3, 3e-3), (2e-3, 4e-3)]

# per-grid energy thresholds for the patch-test surrogates
PATCH_EPS = {16: 1e-8, 32: 1e-11, 64: 1e-13}
COMBO_EPS = 1e-8


def _report(num, ok, detail):
    print(f"\n[criterion {num:>2}] {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    assert ok, f"criterion {num}: {detail}"


def _problem(n, scenario):
    return CoupledProblem(DomainSpec(n), scenario)


@pytest.fixture(scope="session")
def single_patch_runs():
    """Monolithic benchmark plus both flux-recovery schemes, single material."""
    out = {}
    for n in (16, 32, 64):
        prob = _problem(n, patch_scenario(*SINGLE_MU))
        mono = run_monolithic(prob)
        ivrc = run_partitioned(
            SchurSync.build(prob, "consistent"), prob, variant="consistent"
        )
        ivrl = run_partitioned(
            SchurSync.build(prob, "lumped"), prob, variant="consistent"
        )
        out[n] = {
            "prob": prob,
            "mono": mono,
            "ivrc": trajectory_errors(prob, ivrc, mono),
            "ivrl": trajectory_errors(prob, ivrl, mono),
        }
    return out


@pytest.fixture(scope="session")
def multi_patch64():
    prob = _problem(64, patch_scenario(*MULTI_PATCH_MU))
    mono = run_monolithic(prob)
    ivrc = run_partitioned(
        SchurSync.build(prob, "consistent"), prob, variant="consistent"
    )
    return prob, mono, ivrc


@pytest.fixture(scope="session")
def patch_training():
    """Gaussian-hill trainings with the manufactured sources, per grid."""
    out = {}
    for n in (32, 64):
        cfg = RunConfig(n=n, scenario="patch", kappa1=SINGLE_MU[0], kappa2=SINGLE_MU[1])
        snap = collect_training_snapshots(cfg, SINGLE_MU)
        out[n] = {
            "snap": snap,
            "op": train_flux_operator(snap, PATCH_EPS[n]),
            "op13": train_flux_operator(snap, 1e-13),
        }
    return out


@pytest.fixture(scope="session")
def combo_training():
    """Four-corner combination-test trainings and the interpolation query."""
    ops = []
    for mu in COMBO_CORNERS:
        cfg = RunConfig(
            n=64, scenario="combination", kappa1=mu[0], kappa2=mu[1],
            epsilon=COMBO_EPS,
        )
        snap = collect_training_snapshots(cfg, mu)
        ops.append((mu, train_flux_operator(snap, COMBO_EPS)))
    prob = _problem(64, combination_scenario(*COMBO_QUERY_MU))
    mono = run_monolithic(prob)
    op_q = rkoi(ops, COMBO_QUERY_MU)
    dmd = run_partitioned(
        DmdFluxSync(op_q, prob.mesh1, prob.mesh2), prob, variant="consistent"
    )
    ivrl = run_partitioned(
        SchurSync.build(prob, "lumped"), prob, variant="consistent"
    )
    return {
        "corner_ops": ops,
        "prob": prob,
        "mono": mono,
        "dmd_errors": trajectory_errors(prob, dmd, mono),
        "ivrl_errors": trajectory_errors(prob, ivrl, mono),
    }


def test_criterion_01_multi_material_patch_exactness(multi_patch64):
    prob, mono, ivrc = multi_patch64
    e0, e1 = trajectory_errors(prob, ivrc, mono)
    ok = e0 <= 1e-10 and e1 <= 1e-8
    _report(
        1, ok,
        f"multi-material patch IVR(C), N=64: E0={e0:.3e} (<=1e-10), "
        f"E1={e1:.3e} (<=1e-8)",
    )


def test_criterion_02_monolithic_equivalence():
    details = []
    worst = 0.0
    for n in (16, 32):
        for scen in (patch_scenario(*MULTI_PATCH_MU), combination_scenario(*COMBO_QUERY_MU)):
            prob = _problem(n, scen)
            mono = run_monolithic(prob, record="full")
            ivrc = run_partitioned(
                SchurSync.build(prob, "consistent"),
                prob,
                variant="consistent",
                record="full",
            )
            diff = max_nodal_difference(prob, ivrc, mono)
            worst = max(worst, diff)
            details.append(f"{scen.name}/N={n}: {diff:.2e}")
    ok = worst <= 1e-10
    _report(2, ok, "monolithic == IVR(C) max nodal difference " + ", ".join(details))


def test_criterion_03_single_material_patch_grids(single_patch_runs):
    errs = {n: single_patch_runs[n]["ivrc"][0] for n in (16, 32, 64)}
    ok = all(e <= 1e-10 for e in errs.values())
    detail = ", ".join(f"N={n}: E0={e:.3e}" for n, e in errs.items())
    _report(3, ok, f"single-material patch IVR(C) (<=1e-10 each): {detail}")


def test_criterion_04_lumped_convergence(single_patch_runs):
    reference = {16: 1.16e-3, 32: 4.17e-4, 64: 1.49e-4}
    errs = {n: single_patch_runs[n]["ivrl"][0] for n in (16, 32, 64)}
    r1 = errs[16] / errs[32]
    r2 = errs[32] / errs[64]
    ratios_ok = 1.5 <= r1 <= 4.0 and 1.5 <= r2 <= 4.0
    bands_ok = all(reference[n] / 3 <= errs[n] <= reference[n] * 3 for n in errs)
    detail = (
        ", ".join(f"N={n}: E0={errs[n]:.3e} ({errs[n] / reference[n]:.2f}x ref)" for n in errs)
        + f"; ratios {r1:.2f}, {r2:.2f} in [1.5, 4]"
    )
    _report(4, ratios_ok and bands_ok, f"IVR(L) convergence: {detail}")


def test_criterion_05_training_fit(patch_training):
    # relative l2 error of the one-step replay over the training data, the
    # quantity the training contract itself bounds: ||A Y - Y'_lam||_F /
    # ||Y'_lam||_F <= 1e-6 for eps <= 1e-12
    total, per_traj = replay_frobenius(
        patch_training[64]["op13"], patch_training[64]["snap"]
    )
    ok = total <= 1e-6
    _report(
        5, ok,
        f"open-loop multiplier replay (eps=1e-13, N=64): total={total:.3e} "
        f"(<=1e-6), worst single trajectory={max(per_traj):.3e}",
    )


def test_criterion_06_fixed_parameter_surrogate(patch_training, single_patch_runs):
    prob = single_patch_runs[32]["prob"]
    mono = single_patch_runs[32]["mono"]
    sync = DmdFluxSync(patch_training[32]["op"], prob.mesh1, prob.mesh2)
    traj = run_partitioned(sync, prob, variant="consistent")
    e0, e1 = trajectory_errors(prob, traj, mono)
    ok = e0 <= 1e-4
    _report(
        6, ok,
        f"surrogate closed loop, single-material patch N=32: E0={e0:.3e} "
        f"(<=1e-4; reference 1.04e-6), E1={e1:.3e}",
    )


def test_criterion_07_parametric_surrogate(combo_training):
    e0_dmd = combo_training["dmd_errors"][0]
    e0_ivrl = combo_training["ivrl_errors"][0]
    ok = e0_dmd <= 3e-2 and e0_dmd < e0_ivrl
    _report(
        7, ok,
        f"parametric surrogate, combination N=64 at query: E0={e0_dmd:.3e} "
        f"(<=3e-2) vs IVR(L) E0={e0_ivrl:.3e} (must be larger)",
    )


def test_criterion_08_interpolation_cardinality(combo_training):
    ops = combo_training["corner_ops"]
    worst = 0.0
    for mu, op in ops:
        out = rkoi(ops, mu)
        rel = np.linalg.norm(out.dense() - op.dense()) / np.linalg.norm(op.dense())
        worst = max(worst, rel)
    ok = worst <= 1e-12
    _report(8, ok, f"corner query reproduces the corner operator: worst rel {worst:.2e}")


def test_criterion_09_rank_selection(patch_training):
    op = patch_training[64]["op13"]
    s = op.singular_values
    deficits = energy_deficits(s)
    k = op.rank
    minimal = deficits[k - 1] <= 1e-13 and (k == 1 or deficits[k - 2] > 1e-13)
    ok = 25 <= k <= 65 and minimal
    _report(
        9, ok,
        f"rank at eps=1e-13, single-material patch N=64: k={k} in [25, 65] "
        f"(reference 45), minimal={minimal}",
    )


def test_criterion_10_efficiency_ordering(patch_training):
    prob = _problem(64, combination_scenario(*SINGLE_MU))
    op = patch_training[64]["op"]
    syncs = {
        "ivrc": (SchurSync.build(prob, "consistent"), "consistent"),
        "ivrl": (SchurSync.build(prob, "lumped"), "consistent"),
        "dmdfs": (DmdFluxSync(op, prob.mesh1, prob.mesh2), "consistent"),
    }
    res = measure_sync_times(prob, syncs, repeats=5)
    t = {k: v["sync"] for k, v in res.items()}
    speedup = t["ivrc"] / t["dmdfs"]
    ordered = t["dmdfs"] < t["ivrl"] < t["ivrc"]
    ok = ordered and speedup >= 3.0
    _report(
        10, ok,
        "median sync seconds "
        + ", ".join(f"{k}={v:.4f}" for k, v in t.items())
        + f"; ordering={ordered}, sync speedup dmdfs vs ivrc {speedup:.1f}x (>=3)",
    )


def test_criterion_11_property_suite(patch_training, rng):
    checks = []

    # Schur SPD factorization for all grids and both mass variants
    spd_ok = True
    for n in (16, 32, 64, 128):
        prob = _problem(n, patch_scenario(*MULTI_PATCH_MU))
        for variant in ("consistent", "lumped"):
            schur = build_schur(prob.ops1, prob.ops2, variant)
            spd_ok &= np.all(np.isfinite(schur.chol))
    checks.append(("schur-spd-all-grids", spd_ok))

    # flux action-reaction: one shared multiplier, loads negate exactly
    prob = _problem(16, patch_scenario(*SINGLE_MU))
    g = prob.constraint
    lam = rng.standard_normal(g.shape[0])
    glam = g @ lam
    checks.append(("action-reaction", bool(np.all((-glam) + glam == 0.0))))

    # select_rank monotone in eps
    mono_ok = True
    for _ in range(40):
        s = np.sort(rng.random(15))[::-1]
        eps = np.sort(rng.random(5) * 0.9 + 1e-6)
        ks = [select_rank(s, e) for e in eps]
        mono_ok &= all(a >= b for a, b in zip(ks, ks[1:]))
    checks.append(("select-rank-monotone", mono_ok))

    # energy deficit of the selected rank is at most eps (real spectrum)
    s = patch_training[64]["op13"].singular_values
    deficit_ok = True
    for eps in (1e-6, 1e-10, 1e-13):
        k = select_rank(s, eps)
        deficit_ok &= energy_deficits(s)[k - 1] <= eps
    checks.append(("energy-deficit-bound", deficit_ok))

    # operator persistence round-trips bit-exactly
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "op.dmdf"
        save_operator(patch_training[64]["op13"], path)
        loaded = load_operator(path)
        checks.append(
            ("persistence-bit-exact", operator_bytes(loaded) == path.read_bytes())
        )

    # relative_errors homogeneity
    meshes = (prob.mesh1, prob.mesh2)
    um = (
        rng.random(prob.mesh1.n_nodes) + 0.5,
        rng.random(prob.mesh2.n_nodes) + 0.5,
    )
    e0, e1 = relative_errors((2 * um[0], 2 * um[1]), um, meshes)
    checks.append(
        ("relative-errors-homogeneity", bool(np.isclose(e0, 1.0) and np.isclose(e1, 1.0)))
    )

    ok = all(flag for _, flag in checks)
    detail = ", ".join(f"{name}={'ok' if flag else 'FAIL'}" for name, flag in checks)
    _report(11, ok, f"property suite: {detail}")
