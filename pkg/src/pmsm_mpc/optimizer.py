"""Suboptimal constrained minimization of the trajectory cost.

Pipeline: algebraic unconstrained optimum, affine change of coordinates via
a Cholesky factor that turns the cost into a plain sum of squares, swap of
squares for absolute values, positive variable splitting into a standard
form linear program, simplex solve, retransform. The result coincides with
the exact optimum whenever no constraint is active, and stays feasible
otherwise at a modest cost penalty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .simplex import (DEFAULT_TOLERANCES, OPTIMAL, SimplexTolerances,
                      simplex_solve)
from .trajectory import QuadraticProblem

FEASIBILITY_TOL = 1e-7
ACTIVE_TOL = 1e-6


class ConvexityError(ValueError):
    """Raised when the assembled cost is not positive definite."""


def unconstrained_optimum(Q, q) -> np.ndarray:
    """Stationary point of alpha' Q alpha + q' alpha for positive definite Q."""
    Q = np.asarray(Q, float)
    q = np.asarray(q, float)
    try:
        lower = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise ConvexityError("cost Hessian is not positive definite") from exc
    y = solve_triangular(lower, -0.5 * q, lower=True)
    return solve_triangular(lower.T, y, lower=False)


@dataclass(frozen=True)
class LeastDistanceProblem:
    """Distance-to-optimum form: J = |A (alpha - alpha0)|^2 + offset."""

    A: np.ndarray          # upper triangular, A'A = Q
    alpha0: np.ndarray
    Gb: np.ndarray         # constraint rows in the distance coordinates
    hb: np.ndarray
    offset: float          # cost value at the unconstrained optimum

    def to_alpha(self, z: np.ndarray) -> np.ndarray:
        return self.alpha0 + solve_triangular(self.A, z, lower=False)


def to_least_distance(qp: QuadraticProblem) -> LeastDistanceProblem:
    """Shift, rotate and scale coordinates so the cost is a sum of squares."""
    try:
        lower = np.linalg.cholesky(qp.Q)
    except np.linalg.LinAlgError as exc:
        raise ConvexityError("cost Hessian is not positive definite") from exc
    a = lower.T
    alpha0 = unconstrained_optimum(qp.Q, qp.q)
    if qp.G is not None and len(qp.G):
        gb = solve_triangular(a.T, qp.G.T, lower=True).T
        hb = qp.h - qp.G @ alpha0
    else:
        gb = np.zeros((0, len(qp.q)))
        hb = np.zeros(0)
    return LeastDistanceProblem(A=a, alpha0=alpha0, Gb=gb, hb=hb,
                                offset=qp.value(alpha0))


@dataclass(frozen=True)
class LinearProgramStd:
    """Standard form min c'x, a x = b, x >= 0 after variable splitting.

    Columns are ordered (z+, z-, row slacks); the cost is all ones on the
    split pairs and zero on slacks, so minimizing reproduces the 1-norm of
    z = z+ - z- and at most one variable of each pair ends up nonzero.
    """

    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    n_split: int
    n_slack: int

    def recover(self, x: np.ndarray) -> np.ndarray:
        half = self.n_split // 2
        return x[:half] - x[half:self.n_split]


def linearize_to_lp(ld: LeastDistanceProblem) -> LinearProgramStd:
    """Replace the squared distance by the 1-norm and split signs."""
    m, n = ld.Gb.shape
    a = np.hstack([ld.Gb, -ld.Gb, np.eye(m)])
    c = np.concatenate([np.ones(2 * n), np.zeros(m)])
    return LinearProgramStd(c=c, a=a, b=ld.hb.copy(), n_split=2 * n, n_slack=m)


@dataclass
class SolveReport:
    alpha_star: np.ndarray
    iterations: int
    active_constraints: tuple[int, ...]
    status: str
    objective: float       # full cost value at alpha_star


def solve(qp: QuadraticProblem, iter_limit: int | None = None,
          tol: SimplexTolerances = DEFAULT_TOLERANCES) -> SolveReport:
    """Run the full pipeline on an assembled problem."""
    ld = to_least_distance(qp)
    n = len(qp.q)
    if qp.G is None or len(qp.G) == 0:
        return SolveReport(ld.alpha0, 0, (), OPTIMAL, ld.offset)
    if iter_limit is None:
        iter_limit = 4 * (2 * n + len(qp.h))
    lp = linearize_to_lp(ld)
    res = simplex_solve(lp, iter_limit=iter_limit, tol=tol)
    if res.status != OPTIMAL:
        return SolveReport(ld.alpha0, res.iterations, (), res.status,
                           float("nan"))
    alpha = ld.to_alpha(lp.recover(res.x))
    slack = qp.h - qp.G @ alpha
    active = tuple(int(i) for i in np.nonzero(slack <= ACTIVE_TOL)[0])
    return SolveReport(alpha, res.iterations, active, OPTIMAL, qp.value(alpha))
