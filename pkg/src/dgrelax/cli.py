"""Command line entry points.

dgrelax run <config.toml>   execute the experiment described by the config
dgrelax check               fast self-test battery, PASS/FAIL per item
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np


def _cmd_run(args: argparse.Namespace) -> int:
    from .harness import load_config, run_experiment
    cfg = load_config(args.config)
    records = run_experiment(cfg)
    for rec in records:
        print(f"{rec.run_id}: total={rec.total:.6g} "
              f"iters={rec.iterations} [{rec.termination}]")
    if cfg.output_dir:
        print(f"wrote {len(records)} runs to {cfg.output_dir}/report.csv")
    return 0


def _check_items():
    from .energy import DiscreteEnergyConfig, EnergyAssembler
    from .mesh import build_crisscross_mesh
    from .minimize import check_gradient
    from .models import model_detsq, model_twowell, solve_twinning
    from .quadrature import triangle_rule
    from .space import DGSpace, interpolate
    from .traces import broken_gradient, discrete_gradient, lift

    def mesh_counts():
        m = build_crisscross_mesh(3, 2)
        ok = (m.num_triangles == 4 * 3 * 2
              and m.num_vertices == 4 * 3 + 3 * 2
              and m.num_edges == 4 * 6 + 3 * 3 + 4 * 2
              and len(m.boundary_edges()) == 2 * (3 + 2))
        return ok, "criss-cross entity counts on a 3x2 grid"

    def quadrature_exactness():
        rule = triangle_rule(6)
        worst = 0.0
        for a in range(7):
            for b in range(7 - a):
                got = np.sum(rule.weights * rule.points[:, 0] ** a
                             * rule.points[:, 1] ** b)
                exact = (math.factorial(a) * math.factorial(b)
                         / math.factorial(a + b + 2))
                worst = max(worst, abs(got - exact))
        return worst < 1e-13, f"degree-6 monomial exactness (worst {worst:.2e})"

    def affine_reproduction():
        mesh = build_crisscross_mesh(2, 2)
        space = DGSpace(mesh, 1)
        F = np.array([[1.0, 0.3], [-0.2, 0.8]])
        u = interpolate(space, lambda x: x @ F.T)
        g = u.gradients(np.array([[0.25, 0.25]]))
        err = float(np.abs(g - F).max())
        return err < 1e-12, f"affine interpolation gradient (err {err:.2e})"

    def gradient_consistency():
        mesh = build_crisscross_mesh(2, 2)
        space = DGSpace(mesh, 1)
        model = model_detsq()
        conf = DiscreteEnergyConfig(alpha=5.0)
        asm = EnergyAssembler(space, model, conf,
                              boundary_datum=lambda x: 0.9 * x)
        rng = np.random.default_rng(7)
        x = 0.9 * space.element_nodes.reshape(space.mesh.num_triangles, -1, 2)
        x = (x + 0.05 * rng.standard_normal(x.shape)).ravel()
        err = check_gradient(asm.energy_value, asm.gradient, x)
        return err < 1e-6, f"analytic vs central-difference gradient (err {err:.2e})"

    def lifting_identity():
        mesh = build_crisscross_mesh(3, 3)
        space = DGSpace(mesh, 1)
        rng = np.random.default_rng(3)
        u = interpolate(space, lambda x: x)
        coeffs = u.coeffs + 0.1 * rng.standard_normal(u.coeffs.shape)
        from .space import DGField
        v = DGField(space, coeffs)
        resid = (discrete_gradient(v) - (broken_gradient(v) - lift(v))).lp_norm_pow(2)
        return resid < 1e-20, f"lifted gradient decomposition (resid {resid:.2e})"

    def twinning():
        model = model_twowell()
        s1, s2 = solve_twinning(model.meta["V"])
        e1 = abs(abs(s1.n[0]) - 1.0) + abs(s1.n[1])
        e2 = abs(s2.n[0]) + abs(abs(s2.n[1]) - 1.0)
        return e1 + e2 < 1e-8, "twinning interface normals along the axes"

    return [mesh_counts, quadrature_exactness, affine_reproduction,
            gradient_consistency, lifting_identity, twinning]


def _cmd_check(args: argparse.Namespace) -> int:
    failures = 0
    for item in _check_items():
        try:
            ok, desc = item()
        except Exception as exc:  # hard failure still reports a line
            ok, desc = False, f"{item.__name__} raised {type(exc).__name__}: {exc}"
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {desc}")
        failures += 0 if ok else 1
    print(f"{failures} failure(s)" if failures else "all checks passed")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dgrelax",
                                     description="stabilized broken-polynomial "
                                     "energy minimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment in a TOML config")
    p_run.add_argument("config", help="path to config.toml")
    p_run.set_defaults(func=_cmd_run)
    p_check = sub.add_parser("check", help="run the quick self-test battery")
    p_check.set_defaults(func=_cmd_check)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
