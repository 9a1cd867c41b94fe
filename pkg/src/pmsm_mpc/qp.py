"""Primal active-set solver for small dense quadratic programs.

Reference solver used to measure the suboptimality of the linearized path
and to validate the pipeline. Exact active sets fall out of the method,
which makes constrained-operation comparisons directly observable. Not
runtime-budgeted: simulation use only.

Problem form: min x' Q x + q' x subject to G x <= h, Q positive definite.
Note the quadratic term carries no 1/2, matching the trajectory cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simplex import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, simplex

FEAS_TOL = 1e-9
STEP_TOL = 1e-11
DUAL_TOL = 1e-9


@dataclass
class QpResult:
    alpha_star: np.ndarray
    objective: float            # x'Qx + q'x at the solution
    active_set: tuple[int, ...]
    iterations: int
    status: str
    lam: np.ndarray | None = None   # multipliers for the active rows


def _feasible_start(alpha0: np.ndarray, G: np.ndarray, h: np.ndarray):
    """Phase-1 LP: minimize a single violation slack t with G x - t <= h."""
    if np.all(G @ alpha0 <= h + FEAS_TOL):
        return alpha0, True
    m, n = G.shape
    # columns: x+ (n), x- (n), t (1), row slacks (m)
    a = np.hstack([G, -G, -np.ones((m, 1)), np.eye(m)])
    c = np.zeros(2 * n + 1 + m)
    c[2 * n] = 1.0
    res = simplex(a, h, c, iter_limit=20 * (m + n))
    if res.status != OPTIMAL or res.objective > 1e-7:
        return alpha0, False
    x = res.x[:n] - res.x[n:2 * n]
    return x, True


def qp_solve(Q, q, G=None, h=None, iter_limit: int | None = None) -> QpResult:
    """Active-set iteration from a feasible point.

    Tie-breaking is fixed for determinism: the lowest-index blocking row
    enters the working set; the most negative multiplier (lowest index on
    ties) leaves it.
    """
    Q = np.asarray(Q, float)
    q = np.asarray(q, float)
    n = len(q)
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Q must be positive definite") from exc
    alpha0 = -0.5 * np.linalg.solve(Q, q)

    if G is None or len(G) == 0:
        obj = float(alpha0 @ Q @ alpha0 + q @ alpha0)
        return QpResult(alpha0, obj, (), 0, OPTIMAL, np.zeros(0))
    G = np.asarray(G, float)
    h = np.asarray(h, float)
    m = len(h)
    if iter_limit is None:
        iter_limit = 50 * (m + n)

    x, ok = _feasible_start(alpha0, G, h)
    if not ok:
        return QpResult(x, float("nan"), (), 0, INFEASIBLE)

    work: list[int] = []
    iterations = 0
    scale = 1.0 + float(np.linalg.norm(q))
    while iterations < iter_limit:
        iterations += 1
        grad = 2.0 * Q @ x + q
        if work:
            gw = G[work]
            # direction in the null space of the working rows
            _, sv, vt = np.linalg.svd(gw, full_matrices=True)
            rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0] if len(sv) else 1.0)))
            null = vt[rank:].T
            if null.shape[1] == 0:
                p = np.zeros(n)
            else:
                red = null.T @ (2.0 * Q) @ null
                p = null @ np.linalg.solve(red, -(null.T @ grad))
        else:
            p = np.linalg.solve(2.0 * Q, -grad)

        if np.linalg.norm(p) <= STEP_TOL * (1.0 + np.linalg.norm(x)):
            if not work:
                break
            lam, *_ = np.linalg.lstsq(G[work].T, -grad, rcond=None)
            worst = int(np.argmin(lam))
            if lam[worst] >= -DUAL_TOL * scale:
                obj = float(x @ Q @ x + q @ x)
                return QpResult(x, obj, tuple(sorted(work)), iterations,
                                OPTIMAL, lam)
            work.pop(worst)
            continue

        # longest step keeping all inactive rows satisfied
        step = 1.0
        blocker = -1
        gp = G @ p
        gx = G @ x
        for i in range(m):
            if i in work or gp[i] <= 1e-12:
                continue
            ratio = (h[i] - gx[i]) / gp[i]
            if ratio < step - 1e-12:
                step = max(ratio, 0.0)
                blocker = i
        x = x + step * p
        if blocker >= 0:
            work.append(blocker)
            work.sort()

    grad = 2.0 * Q @ x + q
    if work:
        lam, *_ = np.linalg.lstsq(G[work].T, -grad, rcond=None)
    else:
        lam = np.zeros(0)
    obj = float(x @ Q @ x + q @ x)
    status = OPTIMAL if not work or np.all(lam >= -DUAL_TOL * scale) else ITERATION_LIMIT
    if iterations >= iter_limit:
        status = ITERATION_LIMIT
    return QpResult(x, obj, tuple(sorted(work)), iterations, status, lam)
