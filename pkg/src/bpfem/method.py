"""Driver tying assembly and the fixed-point solver together."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .assembly import Discretization, discretize
from .projection import AdmissibleBox
from .solver import FixedPointConfig, LinearSolver, SolveReport, richardson


@dataclass
class MethodResult:
    """Full-length coefficient vectors of one bound-preserving solve.

    ``u_plus`` includes the Dirichlet values; ``u_minus`` vanishes on
    Dirichlet nodes; ``u_cip`` is the linear stabilized solution used as the
    initial iterate.
    """

    disc: Discretization
    report: SolveReport
    u_plus: np.ndarray
    u_minus: np.ndarray
    u_cip: np.ndarray
    seconds: float

    @property
    def dofmap(self):
        return self.disc.dofmap

    @property
    def u(self) -> np.ndarray:
        return self.u_plus + self.u_minus


def solve_discretization(disc: Discretization, config: FixedPointConfig,
                         linear_solver: str = "direct") -> MethodResult:
    t0 = time.perf_counter()
    A, F, sigma, M = disc.reduced
    solver = LinearSolver(A, linear_solver)
    u0 = solver.solve(F)
    report = richardson(A, sigma, F, AdmissibleBox(disc.problem.kappa), config, mass=M, u0=u0, solver=solver)
    return MethodResult(
        disc=disc,
        report=report,
        u_plus=disc.u_g + disc.expand(report.u_plus),
        u_minus=disc.expand(report.u_minus),
        u_cip=disc.u_g + disc.expand(u0),
        seconds=time.perf_counter() - t0,
    )


def solve_case(case, mesh, element, *, stab=None, omega=None, tol=1e-8, max_iter=3000,
               linear_solver: str = "direct") -> MethodResult:
    """Discretize a :class:`~bpfem.problems.BenchmarkCase` and run the BPM solve."""
    stab = stab or case.stab_for(element)
    disc = discretize(case.problem, mesh, element, stab)
    config = FixedPointConfig(omega=case.omega if omega is None else omega, tol=tol, max_iter=max_iter)
    return solve_discretization(disc, config, linear_solver)
