"""Command-line driver for the benchmark experiments.

Subcommands
-----------
convergence
    Error table for Example 1 over a list of mesh levels.
layers
    Solve Example 2 or 3, write fields, cross-sections and iteration counts.
mesh-info
    Counts and angle statistics of a structured mesh.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    ConvergenceRow,
    bounds_audit,
    cross_section,
    error_energy,
    error_l2,
    fill_rates,
    format_table,
    measure,
    norm_s,
    write_run_json,
    write_section_csv,
    write_table_csv,
)
from .assembly import discretize
from .fe_space import ELEMENTS, ElementSpec, build_dof_map
from .mesh import FAMILIES, build_structured_mesh
from .method import solve_discretization
from .projection import AdmissibleBox, split
from .problems import get_case
from .solver import FixedPointConfig, LinearSolver, LinearSolverError
from .vtk_writer import write_vtk

log = logging.getLogger("bpfem")

DEFAULT_LEVELS = (5, 9, 17, 33, 65, 129)
LINE_TAGS = {"y=x": "yx", "x=0.9": "x0.9"}


@dataclass
class RunConfig:
    command: str
    example: int = 1
    element: str = "p1"
    mesh: str = "tri-alt"
    levels: tuple = DEFAULT_LEVELS
    variant: str | None = None
    gamma: float | None = None
    gamma_beta: float | None = None
    alpha: float | None = None
    omega: float | None = None
    tol: float = 1e-8
    max_iter: int = 3000
    method: str = "bpm"
    solver: str = "direct"
    out: str = "."
    pretty: bool = False
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def case(self):
        kwargs = {}
        if self.example == 2 and self.gamma_beta is not None:
            kwargs["gamma_beta"] = self.gamma_beta
        return get_case(self.example, **kwargs)

    def stab(self, case):
        st = case.stab_for(self.element)
        changes = {k: getattr(self, k) for k in ("variant", "gamma", "gamma_beta", "alpha")
                   if getattr(self, k) is not None}
        return dataclasses.replace(st, **changes)

    def fixed_point(self, case) -> FixedPointConfig:
        omega = case.omega if self.omega is None else self.omega
        return FixedPointConfig(omega=omega, tol=self.tol, max_iter=self.max_iter)

    def tag(self) -> str:
        return f"ex{self.example}_{self.element}_{self.mesh}_{self.method}"


def _levels(text: str) -> tuple:
    try:
        levels = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers, got {text!r}") from None
    if not levels or any(n < 2 for n in levels) or list(levels) != sorted(set(levels)):
        raise argparse.ArgumentTypeError("levels must be strictly increasing integers >= 2")
    return levels


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bpfem", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, example_choices, levels_default):
        p.add_argument("--example", type=int, choices=example_choices, default=example_choices[0])
        p.add_argument("--element", choices=sorted(ELEMENTS), default="p1")
        p.add_argument("--mesh", choices=FAMILIES, default=None,
                       help="mesh family (default: tri-alt for p elements, quad for q elements)")
        p.add_argument("--levels", type=_levels, default=levels_default,
                       help="comma-separated N values (vertices per side)")
        p.add_argument("--variant", choices=("normal", "upwind", "none"), default=None,
                       help="CIP variant (default: the example's)")
        p.add_argument("--gamma", type=float, default=None, help="penalty of the normal variant")
        p.add_argument("--gamma-beta", type=float, default=None, help="penalty of the upwind variant")
        p.add_argument("--alpha", type=float, default=None, help="scaling of the s form")
        p.add_argument("--omega", type=float, default=None, help="Richardson damping in (0, 1]")
        p.add_argument("--tol", type=float, default=1e-8, help="L2 increment tolerance")
        p.add_argument("--max-iter", type=int, default=3000, help="cap on linear solves")
        p.add_argument("--method", choices=("bpm", "cip"), default="bpm",
                       help="bound-preserving method or the linear CIP baseline")
        p.add_argument("--solver", choices=("direct", "iterative"), default="direct")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--pretty", action="store_true", help="print aligned text tables")

    p = sub.add_parser("convergence", help="error table for Example 1")
    common(p, (1,), DEFAULT_LEVELS)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes over levels")

    p = sub.add_parser("layers", help="fields and cross-sections for Examples 2 and 3")
    common(p, (2, 3), DEFAULT_LEVELS)

    p = sub.add_parser("mesh-info", help="mesh counts and quality")
    p.add_argument("--mesh", choices=FAMILIES, default="tri-alt")
    p.add_argument("--levels", type=_levels, default=(5,))
    p.add_argument("--element", choices=sorted(ELEMENTS), default=None,
                   help="also report dof counts for this element")
    return parser


def config_from_args(args, parser) -> RunConfig:
    element = getattr(args, "element", None)
    mesh = args.mesh
    if mesh is None:
        mesh = "quad" if element and element.startswith("q") else "tri-alt"
    if element is not None:
        family = ElementSpec.from_name(element).family
        if (family == "tensor") != (mesh == "quad"):
            parser.error(f"element {element} is not defined on mesh family {mesh}")
    values = {k: v for k, v in vars(args).items() if k in {f.name for f in dataclasses.fields(RunConfig)}}
    values.update(mesh=mesh, element=element or "p1")
    cfg = RunConfig(**values)
    if cfg.omega is not None and not 0.0 < cfg.omega <= 1.0:
        parser.error("--omega must lie in (0, 1]")
    if cfg.tol <= 0 or cfg.max_iter < 1:
        parser.error("--tol must be positive and --max-iter at least 1")
    for name in ("gamma", "gamma_beta"):
        value = getattr(cfg, name)
        if value is not None and not value >= 0:
            parser.error(f"--{name.replace('_', '-')} must be nonnegative")
    if cfg.alpha is not None and not cfg.alpha > 0:
        parser.error("--alpha must be positive")
    return cfg


# -- convergence ---------------------------------------------------------------


def _cip_row(cfg: RunConfig, case, N: int) -> ConvergenceRow:
    """Errors of the linear CIP solution, with ``u-`` its clipped remainder."""
    t0 = time.perf_counter()
    disc = discretize(case.problem, build_structured_mesh(cfg.mesh, N), cfg.element, cfg.stab(case))
    A, F, _, _ = disc.reduced
    u = disc.u_g + disc.expand(LinearSolver(A, cfg.solver).solve(F))
    _, u_minus = split(u, AdmissibleBox(case.kappa))
    dm = disc.dofmap
    return ConvergenceRow(
        N=N, iterations=1, converged=True,
        err_l2=error_l2(dm, u, case.exact),
        err_energy=error_energy(dm, u, case.exact, case.exact_grad, disc.problem, stab=disc.stab),
        norm_s_minus=norm_s(disc.sigma, u_minus),
        seconds=time.perf_counter() - t0,
    )


def _bpm_row(cfg: RunConfig, case, N: int) -> ConvergenceRow:
    disc = discretize(case.problem, build_structured_mesh(cfg.mesh, N), cfg.element, cfg.stab(case))
    return measure(solve_discretization(disc, cfg.fixed_point(case), cfg.solver), case)


def _row_worker(payload):
    cfg, N = payload
    case = cfg.case()
    return (_cip_row if cfg.method == "cip" else _bpm_row)(cfg, case, N)


def cmd_convergence(cfg: RunConfig) -> list[ConvergenceRow]:
    case = cfg.case()
    t0 = time.perf_counter()
    tasks = [(cfg, N) for N in cfg.levels]
    if cfg.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(cfg.jobs) as pool:
            rows = list(pool.map(_row_worker, tasks))
    else:
        rows = []
        for task in tasks:
            rows.append(_row_worker(task))
            log.info("N=%d done: Itr=%s", rows[-1].N, rows[-1].itr_label)
    fill_rates(rows)
    os.makedirs(cfg.out, exist_ok=True)
    table = os.path.join(cfg.out, f"table_{cfg.tag()}.csv")
    write_table_csv(table, rows)
    write_run_json(os.path.join(cfg.out, f"run_{cfg.tag()}.json"), {
        "command": "convergence",
        "config": _config_record(cfg, case),
        "rows": [dataclasses.asdict(r) for r in rows],
        "seconds": time.perf_counter() - t0,
    })
    if cfg.pretty:
        print(format_table(rows))
    else:
        with open(table) as fh:
            sys.stdout.write(fh.read())
    return rows


def _config_record(cfg: RunConfig, case) -> dict:
    record = dataclasses.asdict(cfg)
    record["levels"] = list(cfg.levels)
    record["stab"] = dataclasses.asdict(cfg.stab(case))
    record["omega_used"] = cfg.fixed_point(case).omega
    record["kappa"] = case.kappa
    return record


# -- layers --------------------------------------------------------------------


def cmd_layers(cfg: RunConfig) -> list[dict]:
    case = cfg.case()
    stab = cfg.stab(case)
    os.makedirs(cfg.out, exist_ok=True)
    lines = ["y=x"] + (["x=0.9"] if cfg.example == 3 else [])
    runs = []
    for N in cfg.levels:
        t0 = time.perf_counter()
        disc = discretize(case.problem, build_structured_mesh(cfg.mesh, N), cfg.element, stab)
        dm = disc.dofmap
        if cfg.method == "bpm":
            result = solve_discretization(disc, cfg.fixed_point(case), cfg.solver)
            u_plus, u_minus, u_cip = result.u_plus, result.u_minus, result.u_cip
            report = result.report
            itr, converged = report.itr_label, report.converged
            stats = {"iterations": report.iterations, "converged": converged,
                     "final_increment": report.increments[-1] if report.increments else None}
        else:
            A, F, _, _ = disc.reduced
            u_cip = disc.u_g + disc.expand(LinearSolver(A, cfg.solver).solve(F))
            u_plus, u_minus = split(u_cip, AdmissibleBox(case.kappa))
            itr, converged = "1", True
            stats = {"iterations": 1, "converged": True, "final_increment": None}
        tag = f"ex{cfg.example}_{cfg.element}_{cfg.mesh}_N{N}"
        write_vtk(os.path.join(cfg.out, f"field_{tag}.vtk"), dm,
                  {"u_plus": u_plus, "u_minus": u_minus, "u_cip": u_cip}, title=f"{tag} {cfg.method}")
        for line in lines:
            for name, coeffs in (("uplus", u_plus), ("uminus", u_minus), ("ucip", u_cip)):
                sec = cross_section(dm, coeffs, line)
                write_section_csv(os.path.join(cfg.out, f"section_{tag}_{LINE_TAGS[line]}_{name}.csv"), sec)
        audit = bounds_audit(dm, u_plus, case.kappa, unknown=disc.unknown_idx)
        cip_audit = bounds_audit(dm, u_cip, case.kappa, unknown=disc.unknown_idx)
        run = {"N": N, "Itr": itr, "n_dofs": dm.n_dofs, "n_unknowns": int(disc.unknown.sum()),
               "seconds": time.perf_counter() - t0, "solver": stats,
               "bounds_bpm": audit, "bounds_cip": cip_audit}
        runs.append(run)
        log.info("N=%d: Itr=%s", N, itr)
    write_run_json(os.path.join(cfg.out, f"run_{cfg.tag()}_layers.json"), {
        "command": "layers", "config": _config_record(cfg, case), "runs": runs,
    })
    _print_layers(cfg, runs)
    return runs


def _print_layers(cfg: RunConfig, runs: list[dict]) -> None:
    if cfg.pretty:
        head = ["N", "Itr", "min u+", "max u+", "min u_cip", "max u_cip"]
        body = [[str(r["N"]), r["Itr"], f"{r['bounds_bpm']['sampled_min']:.3e}",
                 f"{r['bounds_bpm']['sampled_max']:.3e}", f"{r['bounds_cip']['sampled_min']:.3e}",
                 f"{r['bounds_cip']['sampled_max']:.3e}"] for r in runs]
        widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
        for row in [head] + body:
            print("  ".join(c.rjust(w) for c, w in zip(row, widths)))
    else:
        print("N,Itr")
        for r in runs:
            print(f"{r['N']},{r['Itr']}")


# -- mesh-info -----------------------------------------------------------------


def cmd_mesh_info(cfg: RunConfig) -> list[dict]:
    infos = []
    for N in cfg.levels:
        mesh = build_structured_mesh(cfg.mesh, N)
        angles = np.degrees(mesh.angles())
        info = {
            "family": cfg.mesh, "N": N, "h": mesh.h,
            "vertices": mesh.n_vertices, "cells": mesh.n_cells,
            "facets": len(mesh.facets), "interior_facets": len(mesh.interior_facets),
            "min_angle": float(angles.min()), "max_angle": float(angles.max()),
            "delaunay_violations": mesh.delaunay_violations(),
        }
        if cfg.extra.get("element"):
            dm = build_dof_map(mesh, cfg.extra["element"])
            info["element"] = cfg.extra["element"]
            info["dofs"] = dm.n_dofs
            info["interior_dofs"] = dm.n_interior
        infos.append(info)
        print(" ".join(f"{k}={_fmt_info(v)}" for k, v in info.items()))
    return infos


def _fmt_info(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    if args.command == "mesh-info":
        cfg = RunConfig(command="mesh-info", mesh=args.mesh, levels=args.levels,
                        extra={"element": args.element})
        if args.element:
            config_from_args(args, parser)
        cmd_mesh_info(cfg)
        return 0
    cfg = config_from_args(args, parser)
    try:
        if args.command == "convergence":
            cmd_convergence(cfg)
        else:
            cmd_layers(cfg)
    except LinearSolverError as exc:
        print(f"bpfem: linear solver failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
