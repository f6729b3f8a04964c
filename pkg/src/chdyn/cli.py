"""Command line entry point: ``chdyn run|verify|refine <config>``."""
from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import os
import sys

import numpy as np

from .assembly import Discretization
from .config import RunConfig, initial_condition, load_config
from .diagnostics import CSV_COLUMNS, increment_terms
from .model import ConfigError
from .oracle import Check, DenseOracle, verify_matrixform
from .refine import refinement_study
from .schur import SchurOperator, SchurSolveError, compatibility_defect, recover_potentials
from .stepper import EnergyIncreaseError, NewtonError, Scheme
from .vtk import write_vtk

logger = logging.getLogger("chdyn")


def build_scheme(cfg: RunConfig) -> Scheme:
    disc = Discretization.from_mesh(cfg.mesh)
    schur = SchurOperator(disc, cfg.params, cfg.schur_method, cfg.cg_tol, cfg.cg_maxit)
    return Scheme(disc, cfg.params, cfg.bulk, cfg.surface, cfg.newton, schur)


def _csv_row(state) -> list[str]:
    rep = state.diagnostics.as_dict()
    row = [state.step, state.time, state.newton_iters] + [rep[c] for c in CSV_COLUMNS[3:]]
    return [repr(v) if isinstance(v, float) else str(v) for v in row]


def cmd_run(cfg: RunConfig) -> int:
    scheme = build_scheme(cfg)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if cfg.dump_matrices:
        scheme.disc.dump(out / "matrices")
    phi0 = initial_condition(cfg.initial, cfg.mesh, cfg.seed)
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)

        def record(state):
            writer.writerow(_csv_row(state))
            last = state.step == cfg.n_steps
            if state.potentials is not None and (
                    last or (cfg.output_every and state.step % cfg.output_every == 0)):
                write_vtk(cfg.mesh, state.phi, state.potentials.P, state.potentials.P_gamma,
                          out / f"state_{state.step:06d}.vtk")
            if state.step:
                logger.info("step %d t=%.6g newton=%d E=%.10g", state.step, state.time,
                            state.newton_iters, state.diagnostics.total)

        scheme.run(phi0, cfg.n_steps, callback=record)
    print(f"wrote {out / 'diagnostics.csv'}")
    return 0


def verification_checks(cfg: RunConfig, trials: int = 5, seed: int = 1) -> list[Check]:
    """Oracle comparison suite for the mesh and parameters of ``cfg``."""
    scheme = build_scheme(cfg)
    disc, params = scheme.disc, scheme.params
    oracle = DenseOracle(cfg.mesh, params, cfg.bulk, cfg.surface)
    rng = np.random.default_rng(seed)
    inner_tol = cfg.cg_tol
    checks = []

    S = scheme.schur.S.toarray()
    norm_s = np.abs(S).max()
    checks.append(Check("Schur symmetry defect", np.abs(S - S.T).max() <= 1e-14 * norm_s,
                        np.abs(S - S.T).max() / norm_s, 1e-14))
    lam = np.linalg.eigvalsh(S).min()
    checks.append(Check("Schur smallest eigenvalue > 0", lam > 0, lam, 0.0))
    dev = np.abs(S - oracle.schur_dense()).max() / norm_s
    checks.append(Check("Schur vs dense elimination", dev <= 1e-12, dev, 1e-12))

    worst_red = worst_compat = worst_jac = 0.0
    for _ in range(trials):
        phi = rng.uniform(-1.2, 1.2, disc.n)
        old = rng.uniform(-1.2, 1.2, disc.n)
        pots = recover_potentials(scheme.schur, phi, old, params, cfg.bulk, cfg.surface)
        ref = oracle.coupled_solve(phi, old)
        err = max(np.abs(pots.P - ref.P).max() / max(np.abs(ref.P).max(), 1e-300),
                  np.abs(pots.P_gamma - ref.P_gamma).max()
                  / max(np.abs(ref.P_gamma).max(), 1e-300))
        worst_red = max(worst_red, err)
        worst_compat = max(worst_compat, compatibility_defect(disc, params, pots)[1])
        v = rng.standard_normal(disc.n)
        eps = 1e-6 * np.linalg.norm(phi) / np.linalg.norm(v)
        fd = (scheme.residual(phi + eps * v, old) - scheme.residual(phi - eps * v, old)) / (2 * eps)
        jv = scheme.jacobian_apply(phi, v)
        worst_jac = max(worst_jac, np.linalg.norm(jv - fd) / np.linalg.norm(fd))
    checks.append(Check("reduced vs monolithic potentials", worst_red <= 1e-8, worst_red, 1e-8))
    checks.append(Check("compatibility identity", worst_compat <= 10 * inner_tol,
                        worst_compat, 10 * inner_tol))
    checks.append(Check("Jacobian vs finite differences", worst_jac <= 1e-5, worst_jac, 1e-5))

    phi_old = initial_condition(cfg.initial, cfg.mesh, cfg.seed)
    phi, pots, _, _ = scheme.solve_step(phi_old)
    tol = max(cfg.newton.abs_tol, inner_tol)
    checks += verify_matrixform(oracle, phi, phi_old, pots, tol)
    h_dense = oracle.scheme_residual(phi, phi_old)
    checks.append(Check("dense scheme residual at converged step",
                        np.linalg.norm(h_dense) <= 10 * (cfg.newton.abs_tol + np.linalg.norm(
                            scheme.residual(phi_old, phi_old)) * cfg.newton.rel_tol),
                        float(np.linalg.norm(h_dense)),
                        10 * (cfg.newton.abs_tol + np.linalg.norm(
                            scheme.residual(phi_old, phi_old)) * cfg.newton.rel_tol)))
    before = scheme.report(phi_old)
    after = scheme.report(phi, pots)
    extras = increment_terms(disc, params, cfg.surface, phi, phi_old)
    lhs = after.total + after.dissipation_bulk + after.dissipation_surf + extras
    slack = 1e-12 * max(1.0, abs(before.total))
    checks.append(Check("discrete energy law (one step)", lhs <= before.total + slack,
                        lhs - before.total, slack))
    drift = abs(after.bulk_mass - before.bulk_mass) / (disc.m_omega.sum() * max(np.abs(phi_old).max(), 1e-300))
    checks.append(Check("bulk mass conservation", drift <= 1e-10, drift, 1e-10))
    if params.bc_mode == "CH":
        sdrift = abs(after.surf_mass - before.surf_mass) / (
            disc.m_gamma.sum() * max(np.abs(phi_old).max(), 1e-300))
        checks.append(Check("surface mass conservation", sdrift <= 1e-10, sdrift, 1e-10))
    return checks


def cmd_verify(cfg: RunConfig) -> int:
    checks = verification_checks(cfg)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def cmd_refine(cfg: RunConfig, levels: int) -> int:
    result = refinement_study(cfg, levels)
    print("level,h,tau,n_steps,coupling_ratio,shape_regularity,final_energy")
    for j, lv in enumerate(result.levels):
        print(f"{j},{lv.h:.6g},{lv.tau:.6g},{lv.n_steps},{lv.coupling_ratio:.6g},"
              f"{lv.shape_regularity:.6g},{lv.final_energy:.12g}")
    print("pair,l2_difference,h1_difference")
    for j, (a, b) in enumerate(zip(result.l2_differences, result.h1_differences)):
        print(f"{j}-{j + 1},{a:.6e},{b:.6e}")
    print(f"successive L2 differences decreasing: {'yes' if result.decreasing else 'no'}")
    return 0


def _thread_limit():
    limit = os.environ.get("CHDYN_THREADS")
    if not limit:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(limit))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="chdyn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "verify", "refine"):
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key")
        if name == "refine":
            p.add_argument("--levels", type=int, default=3)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        overrides = dict(item.split("=", 1) for item in args.set)
    except ValueError:
        print("error: --set expects KEY=VALUE", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, {k.strip(): v.strip() for k, v in overrides.items()})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        with _thread_limit():
            if args.command == "run":
                return cmd_run(cfg)
            if args.command == "verify":
                return cmd_verify(cfg)
            return cmd_refine(cfg, args.levels)
    except (NewtonError, SchurSolveError, EnergyIncreaseError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
