"""Benchmark problems on the unit square."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .assembly import ProblemSpec, StabConfig
from .fe_space import ElementSpec

EDGE_TOL = 1e-12
# Conventions on quadrilaterals: largest component of beta and the cell side
# length in the mesh function. Triangles keep the StabConfig defaults
# (Euclidean norm, cell diameter).
TENSOR_CONVENTIONS = {"beta_norm": "max", "cell_size": "min-edge"}


@dataclass
class BenchmarkCase:
    """A problem together with the stabilization and damping it is run with."""

    number: int
    problem: ProblemSpec
    stab_simplex: StabConfig
    stab_tensor: StabConfig
    omega: float
    exact: Optional[Callable] = None
    exact_grad: Optional[Callable] = None

    @property
    def kappa(self) -> float:
        return self.problem.kappa

    def stab_for(self, element: ElementSpec | str) -> StabConfig:
        if isinstance(element, str):
            element = ElementSpec.from_name(element)
        return self.stab_simplex if element.family == "simplex" else self.stab_tensor


def _tensor(stab: StabConfig) -> StabConfig:
    return replace(stab, **TENSOR_CONVENTIONS)


def example1(eps: float = 1e-5) -> BenchmarkCase:
    """Smooth solution ``u = 100 sin(pi x) sin(pi y)`` with anisotropic diffusion."""
    pi = np.pi

    def exact(x, y):
        return 100.0 * np.sin(pi * x) * np.sin(pi * y)

    def exact_grad(x, y):
        return np.stack(
            [100.0 * pi * np.cos(pi * x) * np.sin(pi * y), 100.0 * pi * np.sin(pi * x) * np.cos(pi * y)],
            axis=-1,
        )

    def diffusion(x, y):
        x = np.asarray(x, dtype=float)
        c = np.cos(x)
        D = np.empty(x.shape + (2, 2))
        D[..., 0, 0] = 100.0
        D[..., 0, 1] = c
        D[..., 1, 0] = c
        D[..., 1, 1] = 1.0
        return eps * D

    def convection(x, y):
        return np.broadcast_to(np.array([2.0, 1.0]), np.shape(x) + (2,))

    def source(x, y):
        s_x, c_x = np.sin(pi * x), np.cos(pi * x)
        s_y, c_y = np.sin(pi * y), np.cos(pi * y)
        u = 100.0 * s_x * s_y
        u_x = 100.0 * pi * c_x * s_y
        u_y = 100.0 * pi * s_x * c_y
        u_xx = -100.0 * pi**2 * s_x * s_y
        u_yy = u_xx
        u_xy = 100.0 * pi**2 * c_x * c_y
        div_flux = 100.0 * u_xx + 2.0 * np.cos(x) * u_xy - np.sin(x) * u_y + u_yy
        return -eps * div_flux + 2.0 * u_x + u_y + u

    problem = ProblemSpec(
        diffusion=diffusion,
        convection=convection,
        reaction=1.0,
        source=source,
        kappa=100.0,
        name="example1",
    )
    stab = StabConfig("normal", gamma=0.025, alpha=1.0)
    return BenchmarkCase(1, problem, stab, _tensor(stab), omega=1.0, exact=exact, exact_grad=exact_grad)


def _isotropic(eps):
    def diffusion(x, y):
        D = np.zeros(np.shape(x) + (2, 2))
        D[..., 0, 0] = eps
        D[..., 1, 1] = eps
        return D

    return diffusion


def example2(eps: float = 1e-5, gamma_beta: float = 0.05) -> BenchmarkCase:
    """Rotating flow carrying a three-valued inflow profile; two interior layers.

    Dirichlet data on the inflow edges ``x = 1`` and ``y = 0``, homogeneous
    Neumann on ``x = 0`` and ``y = 1``. Corners on an inflow edge are
    Dirichlet. With ``gamma_beta = 0`` the damping drops to 0.05.
    """

    def convection(x, y):
        return np.stack(np.broadcast_arrays(-np.asarray(y, float), np.asarray(x, float)), axis=-1)

    def dirichlet(x, y):
        return (np.abs(np.asarray(x) - 1.0) <= EDGE_TOL) | (np.abs(np.asarray(y)) <= EDGE_TOL)

    def boundary(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        bottom = np.abs(y) <= EDGE_TOL
        g = np.ones(x.shape)
        g[bottom & (x <= 1.0 / 3.0)] = 0.0
        g[bottom & (x > 1.0 / 3.0) & (x < 2.0 / 3.0)] = 0.5
        return g

    problem = ProblemSpec(
        diffusion=_isotropic(eps),
        convection=convection,
        reaction=0.0,
        boundary=boundary,
        kappa=1.0,
        dirichlet=dirichlet,
        name="example2",
    )
    stab = StabConfig("upwind", gamma_beta=gamma_beta, alpha=1.0)
    omega = 0.1 if gamma_beta > 0 else 0.05
    return BenchmarkCase(2, problem, stab, _tensor(stab), omega=omega)


def example3(eps: float = 1e-5) -> BenchmarkCase:
    """Constant oblique flow; an interior layer meeting an outflow boundary layer."""
    b = np.array([np.cos(np.pi / 3), np.sin(np.pi / 3)])

    def convection(x, y):
        return np.broadcast_to(b, np.shape(x) + (2,))

    def boundary(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        hot = (np.abs(x) <= EDGE_TOL) | (np.abs(y - 1.0) <= EDGE_TOL)
        return np.where(hot, 1.0, 0.0)

    problem = ProblemSpec(
        diffusion=_isotropic(eps),
        convection=convection,
        reaction=0.0,
        boundary=boundary,
        kappa=1.0,
        name="example3",
    )
    return BenchmarkCase(
        3,
        problem,
        StabConfig("normal", gamma=0.01, alpha=1.0),
        _tensor(StabConfig("upwind", gamma_beta=0.01, alpha=1.0)),
        omega=0.1,
    )


def get_case(number: int, **kwargs) -> BenchmarkCase:
    makers = {1: example1, 2: example2, 3: example3}
    try:
        return makers[int(number)](**kwargs)
    except KeyError:
        raise ValueError(f"unknown example {number}; expected 1, 2 or 3") from None
