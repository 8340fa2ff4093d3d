"""Experiment driver.

Subcommands:

* ``train``   -- run flux-recovery trainings over the Gaussian-hill set and
  write one operator file per parameter sample plus a manifest.
* ``solve``   -- run one scheme and dump the final nodal solution and the
  per-step multiplier.
* ``compare`` -- run the schemes against the monolithic benchmark and write
  the error/speedup table as CSV, with figures alongside.
* ``bench``   -- time the synchronization and online loops.

Flags mirror the config-file keys and override them. Exit code 0 on
success; failures print one machine-parsable ``<error-class>: <message>``
line on stderr.
"""

import argparse
import copy
import csv
import sys
from pathlib import Path

import numpy as np

from .config import (
    RunConfig,
    config_from_mapping,
    parse_config_text,
    parse_corners,
    serialize_config,
)
from .errors import ConfigError, DmdfluxError
from .mesh import DomainSpec
from .opio import load_operator_set, save_operator, write_manifest
from .scenarios import (
    combination_scenario,
    patch_scenario,
    relative_errors,
    training_scenarios,
)
from .solvers import (
    CoupledProblem,
    SchurSync,
    measure_sync_times,
    run_monolithic,
    run_partitioned,
)
from .surrogate import DmdFluxSync, collect_snapshots, rkoi, train_flux_operator


def base_scenario(cfg: RunConfig, mu=None):
    k1, k2 = mu if mu is not None else (cfg.kappa1, cfg.kappa2)
    if cfg.scenario == "patch":
        return patch_scenario(k1, k2)
    return combination_scenario(k1, k2)


def _with_initial(problem: CoupledProblem, scenario) -> CoupledProblem:
    """Share operators and loads, replace only the initial condition."""
    clone = copy.copy(problem)
    clone.scenario = scenario
    clone._initial = None
    return clone


def collect_training_snapshots(cfg: RunConfig, mu):
    """Flux-recovery trainings over the Gaussian set for one parameter pair."""
    spec = DomainSpec(cfg.n)
    base = base_scenario(cfg, mu)
    problem = CoupledProblem(spec, base, init_method=cfg.init)
    sync = SchurSync.build(problem, "consistent")
    dt = cfg.resolved_dt
    trajectories = []
    for scen in training_scenarios(base, spec):
        traj = run_partitioned(
            sync,
            _with_initial(problem, scen),
            dt=dt,
            variant="consistent",
            patch_size=cfg.patch_size,
        )
        trajectories.append(traj)
    return collect_snapshots(
        trajectories, cfg.patch_size, mu=mu, source=f"{base.name}-n{cfg.n}"
    )


def train_operator_at(cfg: RunConfig, mu):
    """Train the flux operator for one parameter sample."""
    return train_flux_operator(collect_training_snapshots(cfg, mu), cfg.epsilon)


def _operator_filename(cfg, mu):
    return f"op_{cfg.scenario}_n{cfg.n}_{mu[0]:.4e}_{mu[1]:.4e}.dmdf"


def cmd_train(cfg: RunConfig):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples = cfg.corner_points() if cfg.corners else [(cfg.kappa1, cfg.kappa2)]
    entries = []
    for mu in samples:
        op = train_operator_at(cfg, mu)
        fname = _operator_filename(cfg, mu)
        save_operator(op, out / fname)
        entries.append((fname, op))
        print(
            f"trained {fname}: rank {op.rank}, epsilon {op.epsilon:g}, "
            f"state length {op.layout.n_fs}"
        )
        if cfg.figures:
            from . import plots

            plots.save_energy_decay(
                out / f"energy_{fname.removesuffix('.dmdf')}.png",
                op.singular_values,
                op.rank,
                op.epsilon,
                title=f"{cfg.scenario}, n={cfg.n}, mu=({mu[0]:g}, {mu[1]:g})",
            )
    manifest = write_manifest(out / "manifest.csv", entries)
    (out / "train.cfg").write_text(serialize_config(cfg))
    print(f"wrote {manifest}")
    return 0


def _select_operator(operator_set, mu):
    """Exact-parameter operator if present, otherwise interpolate."""
    for m, op in operator_set:
        if np.isclose(m[0], mu[0], rtol=1e-12, atol=0.0) and np.isclose(
            m[1], mu[1], rtol=1e-12, atol=0.0
        ):
            return op
    return rkoi(operator_set, mu)


def build_sync(cfg: RunConfig, problem: CoupledProblem):
    """Synchronization operator and Euler mass variant for the scheme.

    ivrl lumps the flux recovery (its defining cost saving); the subdomain
    updates keep the consistent mass, which reproduces the reported accuracy
    of the lumped scheme.
    """
    if cfg.scheme == "ivrc":
        return SchurSync.build(problem, "consistent"), "consistent"
    if cfg.scheme == "ivrl":
        return SchurSync.build(problem, "lumped"), "consistent"
    if cfg.scheme == "dmdfs":
        if not cfg.operators:
            raise ConfigError("scheme dmdfs needs --operators <dir>")
        op = _select_operator(load_operator_set(cfg.operators), cfg.mu)
        bootstrap = (
            SchurSync.build(problem, "consistent") if cfg.bootstrap == "schur" else None
        )
        return (
            DmdFluxSync(op, problem.mesh1, problem.mesh2, bootstrap=bootstrap),
            "consistent",
        )
    raise ConfigError(f"scheme {cfg.scheme!r} has no synchronization operator")


def _write_solution_csv(path, problem, nodal_pair, t_final):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subdomain", "x", "y", "u"])
        for side, (mesh, vals) in enumerate(
            zip((problem.mesh1, problem.mesh2), nodal_pair), start=1
        ):
            for (x, y), v in zip(mesh.coords, vals):
                writer.writerow([side, f"{x:.8e}", f"{y:.8e}", f"{v:.8e}"])
    return path


def _write_lambda_csv(path, traj):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "t"] + [f"lam_{i}" for i in range(traj.n_gamma)])
        for k in range(traj.steps):
            writer.writerow(
                [k, f"{k * traj.dt:.8e}"] + [f"{v:.8e}" for v in traj.lam[k]]
            )
    return path


def cmd_solve(cfg: RunConfig):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = DomainSpec(cfg.n)
    problem = CoupledProblem(spec, base_scenario(cfg), init_method=cfg.init)
    dt = cfg.resolved_dt
    if cfg.scheme == "monolithic":
        mono = run_monolithic(problem, dt=dt)
        t_final = mono.times[-1]
        nodal = problem.mono_nodal_fields(mono.u, t_final)
        online = mono.loop_seconds
        traj = None
    else:
        sync, variant = build_sync(cfg, problem)
        traj = run_partitioned(
            sync, problem, dt=dt, variant=variant, patch_size=cfg.patch_size
        )
        t_final = traj.times[-1]
        nodal = problem.nodal_fields(traj.u1, traj.u2, t_final)
        online = traj.loop_seconds
    paths = [_write_solution_csv(out / f"solution_{cfg.scheme}.csv", problem, nodal, t_final)]
    if traj is not None:
        paths.append(_write_lambda_csv(out / f"lambda_{cfg.scheme}.csv", traj))
    with open(out / f"timing_{cfg.scheme}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "n", "steps", "online_seconds"])
        steps = traj.steps if traj is not None else mono.times.size - 1
        writer.writerow([cfg.scheme, cfg.n, steps, f"{online:.6e}"])
    if cfg.figures:
        from . import plots

        full_nodal = np.zeros(problem.full_mesh.n_nodes)
        full_nodal[problem.node_map1] = nodal[0]
        full_nodal[problem.node_map2] = nodal[1]
        paths.append(
            plots.save_solution_surface(
                out / f"surface_{cfg.scheme}.png",
                problem.full_mesh,
                full_nodal,
                title=f"{cfg.scheme}, {cfg.scenario}, n={cfg.n}",
            )
        )
    print(f"solved {cfg.scenario} with {cfg.scheme}: online {online:.3f}s")
    for p in paths:
        print(f"wrote {p}")
    return 0


def compare_rows(cfg: RunConfig):
    """Error and timing rows of every runnable scheme vs the benchmark."""
    spec = DomainSpec(cfg.n)
    problem = CoupledProblem(spec, base_scenario(cfg), init_method=cfg.init)
    dt = cfg.resolved_dt
    mono_runs = [run_monolithic(problem, dt=dt) for _ in range(max(3, cfg.repeats))]
    mono = mono_runs[0]
    t_final = mono.times[-1]
    u_m = problem.mono_nodal_fields(mono.u, t_final)

    schemes = ["monolithic", "ivrc", "ivrl"]
    if cfg.operators:
        schemes.append("dmdfs")

    rows = []
    traces = {"monolithic": u_m[0][problem.mesh1.gamma_nodes]}
    surfaces = {"monolithic": u_m}
    loop_times = {"monolithic": float(np.median([m.loop_seconds for m in mono_runs]))}
    for scheme in schemes:
        if scheme == "monolithic":
            rows.append(
                {
                    "scheme": scheme,
                    "e0": 0.0,
                    "e1": 0.0,
                    "online": loop_times["monolithic"],
                }
            )
            continue
        sub_cfg = copy.copy(cfg)
        sub_cfg.scheme = scheme
        sync, variant = build_sync(sub_cfg, problem)
        runs = [
            run_partitioned(
                sync, problem, dt=dt, variant=variant, patch_size=cfg.patch_size
            )
            for _ in range(max(3, cfg.repeats))
        ]
        traj = runs[0]
        u_x = problem.nodal_fields(traj.u1, traj.u2, t_final)
        e0, e1 = relative_errors(u_x, u_m, (problem.mesh1, problem.mesh2))
        rows.append(
            {
                "scheme": scheme,
                "e0": e0,
                "e1": e1,
                "online": float(np.median([r.loop_seconds for r in runs])),
            }
        )
        traces[scheme] = u_x[0][problem.mesh1.gamma_nodes]
        surfaces[scheme] = u_x
        loop_times[scheme] = rows[-1]["online"]

    ivrc_time = loop_times["ivrc"]
    for row in rows:
        row["speedup"] = ivrc_time / row["online"] if row["online"] > 0 else float("nan")
    return problem, rows, traces, surfaces


def cmd_compare(cfg: RunConfig):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem, rows, traces, surfaces = compare_rows(cfg)
    csv_path = out / f"compare_{cfg.scenario}_n{cfg.n}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scheme", "n", "kappa1", "kappa2", "l2_error", "h1_error",
             "online_seconds", "speedup_vs_ivrc"]
        )
        for row in rows:
            writer.writerow(
                [
                    row["scheme"],
                    cfg.n,
                    f"{cfg.kappa1:.8e}",
                    f"{cfg.kappa2:.8e}",
                    f"{row['e0']:.8e}",
                    f"{row['e1']:.8e}",
                    f"{row['online']:.8e}",
                    f"{row['speedup']:.8e}",
                ]
            )
    print(f"wrote {csv_path}")
    for row in rows:
        print(
            f"  {row['scheme']:<11} E0 = {row['e0']:.3e}  E1 = {row['e1']:.3e}  "
            f"online = {row['online']:.3f}s  speedup = {row['speedup']:.2f}"
        )
    if cfg.figures:
        from . import plots

        plots.save_interface_profiles(
            out / f"profile_{cfg.scenario}_n{cfg.n}.png",
            problem.mesh1,
            traces,
            title=f"{cfg.scenario}, n={cfg.n}",
        )
        for scheme, nodal_pair in surfaces.items():
            full_nodal = np.zeros(problem.full_mesh.n_nodes)
            full_nodal[problem.node_map1] = nodal_pair[0]
            full_nodal[problem.node_map2] = nodal_pair[1]
            plots.save_solution_surface(
                out / f"surface_{cfg.scenario}_n{cfg.n}_{scheme}.png",
                problem.full_mesh,
                full_nodal,
                title=f"{scheme}, {cfg.scenario}, n={cfg.n}",
            )
        print(f"wrote figures to {out}")
    return 0


def cmd_bench(cfg: RunConfig):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = DomainSpec(cfg.n)
    problem = CoupledProblem(spec, base_scenario(cfg), init_method=cfg.init)
    syncs = {
        "ivrc": (SchurSync.build(problem, "consistent"), "consistent"),
        "ivrl": (SchurSync.build(problem, "lumped"), "lumped"),
    }
    if cfg.operators:
        op = _select_operator(load_operator_set(cfg.operators), cfg.mu)
        syncs["dmdfs"] = (
            DmdFluxSync(op, problem.mesh1, problem.mesh2),
            "consistent",
        )
    timings = measure_sync_times(
        problem, syncs, dt=cfg.resolved_dt, repeats=cfg.repeats
    )
    csv_path = out / f"bench_{cfg.scenario}_n{cfg.n}.csv"
    ivrc_sync = timings["ivrc"]["sync"]
    ivrc_loop = timings["ivrc"]["loop"]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scheme", "n", "steps", "median_sync_seconds", "median_loop_seconds",
             "sync_per_step_seconds", "sync_speedup_vs_ivrc", "loop_speedup_vs_ivrc"]
        )
        for name, t in timings.items():
            writer.writerow(
                [
                    name,
                    cfg.n,
                    t["steps"],
                    f"{t['sync']:.8e}",
                    f"{t['loop']:.8e}",
                    f"{t['per_step']:.8e}",
                    f"{ivrc_sync / t['sync']:.8e}",
                    f"{ivrc_loop / t['loop']:.8e}",
                ]
            )
    print(f"wrote {csv_path}")
    for name, t in timings.items():
        print(
            f"  {name:<6} sync {t['sync']:.4f}s ({t['per_step'] * 1e6:.1f} us/step), "
            f"loop {t['loop']:.4f}s"
        )
    if cfg.figures:
        from . import plots

        plots.save_sync_times(
            out / f"bench_{cfg.scenario}_n{cfg.n}.png",
            timings,
            title=f"{cfg.scenario}, n={cfg.n}",
        )
    return 0


def _add_common(parser):
    parser.add_argument("--config", help="config file (key = value lines)")
    parser.add_argument("--n", type=int)
    parser.add_argument("--scenario", choices=["patch", "combination"])
    parser.add_argument("--kappa1", type=float)
    parser.add_argument("--kappa2", type=float)
    parser.add_argument("--scheme", choices=["monolithic", "ivrc", "ivrl", "dmdfs"])
    parser.add_argument("--dt", type=float)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--patch-size", dest="patch_size", type=int)
    parser.add_argument(
        "--corners", help="training rectangle: k1min,k1max,k2min,k2max"
    )
    parser.add_argument("--bootstrap", choices=["zero", "schur"])
    parser.add_argument("--init", choices=["projection", "interpolation"])
    parser.add_argument("--operators", help="directory of trained operator files")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--repeats", type=int)
    parser.add_argument(
        "--figures", dest="figures", action="store_true", default=None
    )
    parser.add_argument("--no-figures", dest="figures", action="store_false")
    parser.add_argument("--seed", type=int)


def _resolve_config(args) -> RunConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(parse_config_text(fh.read()))
    for key in (
        "n", "scenario", "kappa1", "kappa2", "scheme", "dt", "epsilon",
        "patch_size", "bootstrap", "init", "operators", "output_dir",
        "repeats", "figures", "seed",
    ):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    if getattr(args, "corners", None) is not None:
        values["corners"] = parse_corners(args.corners)
    return config_from_mapping(values)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dmdflux",
        description="Partitioned transmission-problem solvers with a trained "
        "interface flux surrogate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "train": cmd_train,
        "solve": cmd_solve,
        "compare": cmd_compare,
        "bench": cmd_bench,
    }
    for name in handlers:
        _add_common(sub.add_parser(name))
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return handlers[args.command](cfg)
    except DmdfluxError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return 10


if __name__ == "__main__":
    sys.exit(main())
