"""Linear solves, the damped fixed-point iteration and a brute-force VI oracle."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .projection import AdmissibleBox, clip_plus, complement

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-12
ORACLE_MAX_UNKNOWNS = 12


class LinearSolverError(RuntimeError):
    """The inner linear solve broke down or missed its residual target."""


class OracleError(RuntimeError):
    """The enumeration oracle found no solution or several distinct ones."""


class LinearSolver:
    """Reusable solver for a fixed sparse matrix.

    ``method="direct"`` factorizes once with SuperLU (COLAMD ordering);
    ``"iterative"`` runs BiCGSTAB preconditioned by an incomplete LU.
    Every solve is followed by up to three steps of iterative refinement and
    must reach a relative residual of ``rtol``.
    """

    def __init__(self, A, method: str = "direct", rtol: float = RESIDUAL_TOL):
        self.A = sp.csc_matrix(A)
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError(f"matrix must be square, got {self.A.shape}")
        self.method = method
        self.rtol = rtol
        if method == "direct":
            try:
                self._lu = spla.splu(self.A, permc_spec="COLAMD")
            except RuntimeError as exc:
                raise LinearSolverError(f"LU factorization failed: {exc}") from exc
        elif method == "iterative":
            self._ilu = spla.spilu(self.A, drop_tol=1e-6, fill_factor=20)
            self._prec = spla.LinearOperator(self.A.shape, self._ilu.solve)
        else:
            raise ValueError(f"unknown linear solver {method!r}")

    def _raw_solve(self, b):
        if self.method == "direct":
            return self._lu.solve(b)
        x, info = spla.bicgstab(self.A, b, rtol=self.rtol * 1e-2, atol=0.0, M=self._prec, maxiter=5000)
        if info < 0:
            raise LinearSolverError(f"BiCGSTAB breakdown (info={info})")
        return x

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return np.zeros_like(b)
        x = self._raw_solve(b)
        for _ in range(3):
            r = b - self.A @ x
            rel = np.linalg.norm(r) / nb
            if rel <= self.rtol:
                return x
            x = x + self._raw_solve(r)
        rel = np.linalg.norm(b - self.A @ x) / nb
        if not np.isfinite(rel) or rel > self.rtol:
            raise LinearSolverError(f"linear solve residual {rel:.3e} exceeds {self.rtol:.1e}")
        return x


def solve_sparse(A, b, method: str = "direct") -> np.ndarray:
    """Solve ``A x = b`` to a relative residual of 1e-12."""
    return LinearSolver(A, method).solve(b)


@dataclass
class FixedPointConfig:
    omega: float = 1.0
    tol: float = 1e-8
    max_iter: int = 3000

    def __post_init__(self):
        if not 0.0 < self.omega <= 1.0:
            raise ValueError(f"damping omega must lie in (0, 1], got {self.omega}")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")


@dataclass
class SolveReport:
    """Outcome of the fixed-point iteration.

    ``iterations`` counts linear solves including the one producing the
    initial CIP iterate, so a problem whose constraint is inactive reports 2.
    """

    u: np.ndarray
    u_plus: np.ndarray
    u_minus: np.ndarray
    iterations: int
    converged: bool
    increments: list = field(default_factory=list)

    @property
    def itr_label(self) -> str:
        return str(self.iterations) if self.converged else "NC"


def cip_initial(A_red, F_red, solver: LinearSolver | None = None) -> np.ndarray:
    """Initial iterate: the linear stabilized (CIP) solution on the unknowns."""
    solver = solver or LinearSolver(A_red)
    return solver.solve(F_red)


def richardson(
    A,
    sigma,
    F,
    box: AdmissibleBox,
    config: FixedPointConfig | None = None,
    *,
    mass=None,
    u0=None,
    solver: LinearSolver | None = None,
    linear_solver: str = "direct",
) -> SolveReport:
    """Damped Richardson iteration for ``A u+ + diag(sigma) u- = F``.

    Each step solves with the same matrix ``A`` (factorized once)::

        u_{n+1} = u_n + omega * A^{-1} (F - A u_n+ - sigma * u_n-)

    and stops once ``||u_{n+1} - u_n||_0 <= tol``, measured with ``mass``
    (Euclidean norm when no mass matrix is supplied), or after ``max_iter``
    linear solves.
    """
    config = config or FixedPointConfig()
    sigma = np.asarray(sigma, dtype=float)
    F = np.asarray(F, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be strictly positive")
    solver = solver or LinearSolver(A, linear_solver)
    A = solver.A

    def norm(d):
        if mass is None:
            return float(np.linalg.norm(d))
        return float(np.sqrt(max(d @ (mass @ d), 0.0)))

    u = cip_initial(A, F, solver) if u0 is None else np.array(u0, dtype=float)
    iterations = 1
    increments = []
    converged = False
    omega = config.omega
    while iterations < config.max_iter:
        up = clip_plus(u, box)
        um = complement(u, up)
        with np.errstate(over="ignore", invalid="ignore"):
            rhs = F - A @ up - sigma * um
            finite = bool(np.all(np.isfinite(rhs)))
            if finite:
                step = solver.solve(rhs)
                trial = u + omega * step
                inc = omega * norm(step)
                finite = np.isfinite(inc) and bool(np.all(np.isfinite(trial)))
        iterations += 1
        if not finite:
            # diverged: keep the last finite iterate and report NC
            increments.append(np.inf)
            break
        u = trial
        increments.append(inc)
        if inc <= config.tol:
            converged = True
            break
    up = clip_plus(u, box)
    um = complement(u, up)
    log.debug("richardson: %d solves, converged=%s", iterations, converged)
    return SolveReport(up + um, up, um, iterations, converged, increments)


def recover_complement(A, sigma, F, u_plus) -> np.ndarray:
    """Diagonal solve for the complementary part given the constrained part."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma == 0):
        raise ZeroDivisionError("sigma has a zero entry")
    return (np.asarray(F, dtype=float) - A @ np.asarray(u_plus, dtype=float)) / sigma


def vi_oracle(A, F, box: AdmissibleBox, tol: float = 1e-10) -> np.ndarray:
    """Solve the box-constrained variational inequality by enumeration.

    Every node is assigned to the lower bound, the upper bound or the free
    set (``3**m`` assignments for ``m`` unknowns). An assignment is accepted
    when the free values lie strictly inside the box and the residual
    ``A u - F`` is ``>= -tol`` on lower-active nodes and ``<= tol`` on
    upper-active ones.
    """
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    F = np.asarray(F, dtype=float)
    m = len(F)
    if m > ORACLE_MAX_UNKNOWNS:
        raise ValueError(f"oracle limited to {ORACLE_MAX_UNKNOWNS} unknowns, got {m}")
    lo, hi = box.lower, box.kappa
    accepted = []
    idx = np.arange(m)
    for free_mask in range(1 << m):
        free = np.array([(free_mask >> i) & 1 for i in idx], dtype=bool)
        S, C = idx[free], idx[~free]
        nc = len(C)
        # columns enumerate lower/upper assignments of the constrained nodes
        bits = (np.arange(1 << nc)[None, :] >> np.arange(nc)[:, None]) & 1
        uC = np.where(bits == 1, hi, lo).astype(float)
        if len(S):
            rhs = F[S, None] - A[np.ix_(S, C)] @ uC
            try:
                uS = np.linalg.solve(A[np.ix_(S, S)], rhs)
            except np.linalg.LinAlgError:
                continue
            ok = np.all((uS > lo) & (uS < hi), axis=0)
        else:
            uS = np.zeros((0, uC.shape[1]))
            ok = np.ones(uC.shape[1], dtype=bool)
        if not ok.any():
            continue
        uS, uC, bits = uS[:, ok], uC[:, ok], bits[:, ok]
        r = A[np.ix_(C, S)] @ uS + A[np.ix_(C, C)] @ uC - F[C, None]
        sign_ok = np.all(np.where(bits == 1, r <= tol, r >= -tol), axis=0)
        for col in np.flatnonzero(sign_ok):
            u = np.empty(m)
            u[S] = uS[:, col]
            u[C] = uC[:, col]
            accepted.append(u)
    if not accepted:
        raise OracleError("no assignment satisfies the complementarity conditions")
    ref = accepted[0]
    for u in accepted[1:]:
        if np.max(np.abs(u - ref)) > 1e-9 * max(1.0, np.max(np.abs(ref))):
            raise OracleError("variational inequality has several distinct solutions")
    return ref
