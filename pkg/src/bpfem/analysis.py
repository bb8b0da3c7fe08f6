"""Error norms, convergence rates, cross-sections and bound audits."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .assembly import cip_energy
from .fe_space import DofMap, evaluate
from .mesh import build_structured_mesh


def _errors_at_quadrature(dofmap: DofMap, coeffs, exact, exact_grad=None, quad_degree=None):
    rule = dofmap.cell_quadrature(quad_degree)
    phi = dofmap.element.values(rule.points)
    dphi = dofmap.element.gradients(rule.points)
    coeffs = np.asarray(coeffs)
    for cells in dofmap.cell_chunks():
        xq = dofmap.quadrature_points(rule, cells)
        local = coeffs[dofmap.cell_dofs[cells]]
        uh = local @ phi.T
        w = np.abs(dofmap.mesh.dets[cells])[:, None] * rule.weights[None, :]
        e = exact(xq[..., 0], xq[..., 1]) - uh
        ge = None
        if exact_grad is not None:
            G = dofmap.physical_gradients(dphi, cells)
            ge = exact_grad(xq[..., 0], xq[..., 1]) - np.einsum("cqla,cl->cqa", G, local)
        yield cells, xq, w, e, ge


def error_l2(dofmap: DofMap, u_plus, exact: Callable, quad_degree: Optional[int] = None) -> float:
    """``||u - u_h||_0`` with a degree ``2k+2`` rule by default."""
    total = 0.0
    for _, _, w, e, _ in _errors_at_quadrature(dofmap, u_plus, exact, quad_degree=quad_degree):
        total += float(np.sum(w * e**2))
    return math.sqrt(total)


def error_energy(dofmap: DofMap, u_plus, exact: Callable, exact_grad: Callable, problem, J=None,
                 stab=None) -> float:
    """Energy-norm error ``sqrt(|D^1/2 grad e|^2 + mu |e|^2 + J(u_h, u_h))``.

    The penalty term only involves the discrete function: a smooth exact
    solution has no gradient jumps. With ``stab`` it is summed from facet
    jumps (no cancellation); otherwise ``u_h @ J @ u_h`` is used.
    """
    diff = 0.0
    l2 = 0.0
    for _, xq, w, e, ge in _errors_at_quadrature(dofmap, u_plus, exact, exact_grad):
        D = np.broadcast_to(problem.diffusion(xq[..., 0], xq[..., 1]), xq.shape[:-1] + (2, 2))
        diff += float(np.einsum("cq,cqa,cqab,cqb->", w, ge, D, ge))
        l2 += float(np.sum(w * e**2))
    u = np.asarray(u_plus)
    if stab is not None:
        jump = cip_energy(dofmap, u, problem.convection, stab)
    elif J is not None:
        jump = float(u @ (J @ u))
    else:
        raise ValueError("error_energy needs J or stab")
    return math.sqrt(max(diff + problem.reaction * l2 + jump, 0.0))


def norm_s(sigma, u_minus) -> float:
    """``sqrt(sum_i sigma_i (u-_i)^2)``."""
    sigma = np.asarray(sigma, dtype=float)
    u_minus = np.asarray(u_minus, dtype=float)
    return float(np.sqrt(np.sum(sigma * u_minus**2)))


def eoc(errors: Sequence[float], Ns: Sequence[int]) -> list:
    """Estimated orders ``ln(e_{i-1}/e_i) / ln(N_i/N_{i-1})``.

    The first entry, and any entry involving a zero error, is ``None``.
    """
    rates = [None]
    for i in range(1, len(errors)):
        e0, e1 = errors[i - 1], errors[i]
        if Ns[i] <= Ns[i - 1]:
            raise ValueError("N values must increase")
        if not (e0 > 0 and e1 > 0):
            rates.append(None)
            continue
        rates.append(math.log(e0 / e1) / math.log(Ns[i] / Ns[i - 1]))
    return rates


# -- cross-sections ----------------------------------------------------------

NAMED_LINES = {
    "y=x": ((0.0, 0.0), (1.0, 1.0)),
    "x=0.9": ((0.9, 0.0), (0.0, 1.0)),
}


@dataclass
class CrossSection:
    name: str
    t: np.ndarray
    points: np.ndarray
    values: np.ndarray


def _clip_line(p, d):
    """Parameter interval where ``p + t d`` lies in the closed unit square."""
    lo, hi = -np.inf, np.inf
    for k in range(2):
        if d[k] == 0:
            if p[k] < 0 or p[k] > 1:
                return None
            continue
        t0, t1 = (0 - p[k]) / d[k], (1 - p[k]) / d[k]
        lo, hi = max(lo, min(t0, t1)), min(hi, max(t0, t1))
    if lo > hi:
        return None
    return lo, hi


def cross_section(dofmap: DofMap, coeffs, line, n: int = 10000) -> CrossSection:
    """Sample a finite element function at ``n`` equidistant points of a line.

    ``line`` is a name from :data:`NAMED_LINES` or a pair ``(point, direction)``.
    The line is clipped to the closed unit square; ``t`` is the arc length
    from the first intersection point.
    """
    name = line if isinstance(line, str) else "custom"
    if isinstance(line, str):
        try:
            line = NAMED_LINES[line]
        except KeyError:
            raise ValueError(f"unknown line {line!r}") from None
    p, d = (np.asarray(v, dtype=float) for v in line)
    d = d / np.linalg.norm(d)
    span = _clip_line(p, d)
    if span is None:
        raise ValueError("line does not intersect the unit square")
    s = np.linspace(span[0], span[1], n)
    pts = np.clip(p[None, :] + s[:, None] * d[None, :], 0.0, 1.0)
    return CrossSection(name, s - span[0], pts, evaluate(dofmap, coeffs, pts))


def bounds_audit(dofmap: DofMap, u_plus, kappa: float, n_samples: int = 100000, seed: int = 0,
                 unknown=None) -> dict:
    """Nodal and densely sampled extrema of a constrained solution.

    Nodal extrema are taken over ``unknown`` (all dofs if omitted). Sampled
    extrema may leave ``[0, kappa]`` for degree >= 2; they are reported only.
    """
    u = np.asarray(u_plus)
    nodal = u if unknown is None else u[np.asarray(unknown)]
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 1.0, size=(n_samples, 2))
    vals = evaluate(dofmap, u, pts)
    return {
        "kappa": float(kappa),
        "nodal_min": float(nodal.min()),
        "nodal_max": float(nodal.max()),
        "sampled_min": float(vals.min()),
        "sampled_max": float(vals.max()),
        "undershoot": float(max(0.0, -vals.min())),
        "overshoot": float(max(0.0, vals.max() - kappa)),
    }


# -- convergence tables ------------------------------------------------------

TABLE_COLUMNS = ["N", "Itr", "err_L2", "EOC", "err_h", "EOC", "norm_s_minus", "EOC"]


@dataclass
class ConvergenceRow:
    N: int
    iterations: int
    converged: bool
    err_l2: float
    err_energy: float
    norm_s_minus: float
    eoc_l2: Optional[float] = None
    eoc_energy: Optional[float] = None
    eoc_s: Optional[float] = None
    seconds: float = 0.0

    @property
    def itr_label(self) -> str:
        return str(self.iterations) if self.converged else "NC"


def measure(result, case) -> ConvergenceRow:
    """Error quantities of a finished solve against the case's exact solution."""
    disc = result.disc
    dm = disc.dofmap
    return ConvergenceRow(
        N=dm.mesh.N,
        iterations=result.report.iterations,
        converged=result.report.converged,
        err_l2=error_l2(dm, result.u_plus, case.exact),
        err_energy=error_energy(dm, result.u_plus, case.exact, case.exact_grad, disc.problem, stab=disc.stab),
        norm_s_minus=norm_s(disc.sigma, result.u_minus),
        seconds=result.seconds,
    )


def fill_rates(rows: list[ConvergenceRow]) -> list[ConvergenceRow]:
    Ns = [r.N for r in rows]
    for attr, target in (("err_l2", "eoc_l2"), ("err_energy", "eoc_energy"), ("norm_s_minus", "eoc_s")):
        for row, rate in zip(rows, eoc([getattr(r, attr) for r in rows], Ns)):
            setattr(row, target, rate)
    return rows


def _solve_level(args):
    from .method import solve_case

    case, family, element, N, kwargs = args
    result = solve_case(case, build_structured_mesh(family, N), element, **kwargs)
    return measure(result, case)


def convergence_study(case, element: str, family: str, levels=(5, 9, 17, 33, 65, 129), jobs: int = 1,
                      **solve_kwargs) -> list[ConvergenceRow]:
    """Solve on every level and tabulate errors and rates.

    ``jobs > 1`` runs the levels in separate processes; cases holding
    closures must then be rebuilt inside workers, so only ``jobs=1`` accepts
    arbitrary cases.
    """
    if case.exact is None:
        raise ValueError("convergence study needs an exact solution")
    tasks = [(case, family, element, N, solve_kwargs) for N in levels]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_solve_level_by_number, [(case.number,) + t[1:] for t in tasks]))
    else:
        rows = [_solve_level(t) for t in tasks]
    return fill_rates(rows)


def _solve_level_by_number(args):
    from .problems import get_case

    number, family, element, N, kwargs = args
    return _solve_level((get_case(number), family, element, N, kwargs))


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.6e}"


def _fmt_rate(x) -> str:
    return "" if x is None else f"{x:.4f}"


def table_records(rows: list[ConvergenceRow]) -> list[list[str]]:
    return [
        [str(r.N), r.itr_label, _fmt(r.err_l2), _fmt_rate(r.eoc_l2), _fmt(r.err_energy),
         _fmt_rate(r.eoc_energy), _fmt(r.norm_s_minus), _fmt_rate(r.eoc_s)]
        for r in rows
    ]


def write_table_csv(path, rows: list[ConvergenceRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        writer.writerows(table_records(rows))


def format_table(rows: list[ConvergenceRow]) -> str:
    """Aligned text rendering in the layout of a printed convergence table."""
    head = ["N", "Itr", "||u-u+||_0", "EOC", "||u-u+||_h", "EOC", "||u-||_s", "EOC"]
    body = []
    for r in rows:
        body.append([
            str(r.N), r.itr_label, f"{r.err_l2:.2e}", _rate(r.eoc_l2), f"{r.err_energy:.2e}",
            _rate(r.eoc_energy), "0" if r.norm_s_minus == 0 else f"{r.norm_s_minus:.2e}", _rate(r.eoc_s),
        ])
    widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in [head] + body]
    return "\n".join(lines)


def _rate(x) -> str:
    return "--" if x is None else f"{x:.2f}"


def write_section_csv(path, section: CrossSection) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "x", "y", "value"])
        for t, (x, y), v in zip(section.t, section.points, section.values):
            writer.writerow([f"{t:.10e}", f"{x:.10e}", f"{y:.10e}", f"{v:.10e}"])


def write_run_json(path, metadata: dict) -> None:
    def default(obj):
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if hasattr(obj, "__dataclass_fields__"):
            return asdict(obj)
        raise TypeError(f"cannot serialise {type(obj).__name__}")

    with open(path, "w") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")
