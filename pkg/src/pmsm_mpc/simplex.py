"""Dense two-phase simplex solver for small standard-form linear programs.

Sized for the controller's problems (a few dozen variables and rows), so
the tableau is kept dense and no factorization machinery is used. Pivoting
is Dantzig's rule with an automatic switch to Bland's rule after a run of
degenerate pivots, which guarantees termination. Iteration counts are
reported for solver-work accounting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"


@dataclass(frozen=True)
class SimplexTolerances:
    """All numeric thresholds in one place, for reproducibility."""

    pivot: float = 1e-9         # smallest usable pivot magnitude
    reduced_cost: float = 1e-9  # optimality threshold on reduced costs
    feasibility: float = 1e-7   # primal feasibility / degeneracy threshold
    artificial: float = 1e-7    # residual phase-1 objective treated as infeasible


DEFAULT_TOLERANCES = SimplexTolerances()


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    iterations: int
    status: str
    basis: list[int] = field(default_factory=list)
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    tableau_text: str | None = None


class SimplexTableau:
    """Dense tableau: constraint rows, right-hand side column, objective row."""

    def __init__(self, a: np.ndarray, b: np.ndarray):
        m, n = a.shape
        self.body = np.hstack([a, b.reshape(-1, 1)])
        self.obj = np.zeros(n + 1)
        self.basis = [-1] * m
        self.m = m
        self.n = n

    @property
    def rhs(self) -> np.ndarray:
        return self.body[:, -1]

    def set_objective(self, c: np.ndarray):
        """Price out the current basis so reduced costs are consistent."""
        row = np.zeros(self.n + 1)
        row[:self.n] = c
        for i, j in enumerate(self.basis):
            if c[j] != 0.0:
                row -= c[j] * self.body[i]
        self.obj = row

    def pivot(self, row: int, col: int):
        self.body[row] /= self.body[row, col]
        piv = self.body[row]
        for i in range(self.m):
            if i != row and self.body[i, col] != 0.0:
                self.body[i] -= self.body[i, col] * piv
        if self.obj[col] != 0.0:
            self.obj = self.obj - self.obj[col] * piv
        self.basis[row] = col

    def text(self) -> str:
        lines = []
        for i in range(self.m):
            cells = " ".join(f"{v: .6g}" for v in self.body[i])
            lines.append(f"x{self.basis[i]:<3d} | {cells}")
        lines.append("z    | " + " ".join(f"{v: .6g}" for v in self.obj))
        return "\n".join(lines)


def _run_phase(tab: SimplexTableau, allowed: np.ndarray, tol: SimplexTolerances,
               iter_limit: int, counter: list[int]) -> str:
    m = tab.m
    use_bland = False
    degenerate_streak = 0
    bland_after = 2 * m
    while True:
        costs = tab.obj[:tab.n].copy()
        costs[~allowed] = np.inf
        if use_bland:
            neg = np.nonzero(costs < -tol.reduced_cost)[0]
            if len(neg) == 0:
                return OPTIMAL
            col = int(neg[0])
        else:
            col = int(np.argmin(costs))
            if costs[col] >= -tol.reduced_cost:
                return OPTIMAL
        if counter[0] >= iter_limit:
            return ITERATION_LIMIT
        column = tab.body[:, col]
        positive = column > tol.pivot
        if not positive.any():
            return UNBOUNDED
        ratios = np.full(m, np.inf)
        ratios[positive] = tab.rhs[positive] / column[positive]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + tol.pivot * (1.0 + abs(best)))[0]
        if use_bland and len(ties) > 1:
            row = int(min(ties, key=lambda i: tab.basis[i]))
        else:
            row = int(ties[0])
        if best <= tol.feasibility:
            degenerate_streak += 1
            if degenerate_streak > bland_after:
                use_bland = True
        else:
            degenerate_streak = 0
        tab.pivot(row, col)
        counter[0] += 1


def simplex(a, b, c, iter_limit: int | None = None,
            tol: SimplexTolerances = DEFAULT_TOLERANCES,
            keep_tableau: bool = False) -> SimplexResult:
    """Solve min c'x subject to a x = b, x >= 0."""
    a = np.array(a, float)
    b = np.array(b, float)
    c = np.array(c, float)
    m, n = a.shape
    if iter_limit is None:
        iter_limit = 4 * (n + m)

    flipped = b < 0.0
    a[flipped] *= -1.0
    b[flipped] *= -1.0

    # reuse existing unit columns as the starting basis where possible
    basis = [-1] * m
    taken: set[int] = set()
    for j in range(n):
        col = a[:, j]
        nz = np.nonzero(np.abs(col) > tol.pivot)[0]
        if len(nz) == 1 and abs(col[nz[0]] - 1.0) <= 1e-12:
            i = int(nz[0])
            if basis[i] == -1 and j not in taken:
                basis[i] = j
                taken.add(j)

    art_rows = [i for i in range(m) if basis[i] == -1]
    n_art = len(art_rows)
    a_work = np.hstack([a, np.zeros((m, n_art))])
    for k, i in enumerate(art_rows):
        a_work[i, n + k] = 1.0
        basis[i] = n + k

    tab = SimplexTableau(a_work, b)
    tab.basis = basis
    counter = [0]
    keep = list(range(m))

    # phase 1: drive artificials to zero
    if n_art:
        c1 = np.zeros(n + n_art)
        c1[n:] = 1.0
        tab.set_objective(c1)
        status = _run_phase(tab, np.ones(n + n_art, bool), tol, iter_limit, counter)
        if status != OPTIMAL:
            return SimplexResult(np.zeros(n), float("nan"), counter[0], status)
        if -tab.obj[-1] > tol.artificial:
            return SimplexResult(np.zeros(n), float("nan"), counter[0], INFEASIBLE)
        # pivot remaining artificials out of the basis; drop redundant rows
        drop_rows = []
        for i in range(tab.m):
            if tab.basis[i] >= n:
                entry = np.nonzero(np.abs(tab.body[i, :n]) > tol.pivot)[0]
                if len(entry):
                    tab.pivot(i, int(entry[0]))
                    counter[0] += 1
                else:
                    drop_rows.append(i)
        if drop_rows:
            keep = [i for i in range(tab.m) if i not in drop_rows]
            tab.body = tab.body[keep]
            tab.basis = [tab.basis[i] for i in keep]
            tab.m = len(keep)
        tab.body = np.hstack([tab.body[:, :n], tab.body[:, -1:]])
        tab.n = n

    tab.set_objective(c)
    status = _run_phase(tab, np.ones(n, bool), tol, iter_limit, counter)

    x = np.zeros(n)
    for i, j in enumerate(tab.basis):
        x[j] = tab.rhs[i]
    objective = float(c @ x)

    # duals from the final basis: B' y = c_B on the sign-normalized rows,
    # flips undone afterwards; dropped redundant rows get a zero price
    duals = None
    if status == OPTIMAL and tab.m:
        try:
            y = np.linalg.solve(a[keep][:, tab.basis].T, c[tab.basis])
            duals = np.zeros(m)
            duals[keep] = y
            duals[flipped] *= -1.0
        except np.linalg.LinAlgError:
            duals = None

    return SimplexResult(
        x=x, objective=objective, iterations=counter[0], status=status,
        basis=list(tab.basis), duals=duals,
        reduced_costs=tab.obj[:n].copy(),
        tableau_text=tab.text() if keep_tableau else None,
    )


def simplex_solve(lp, iter_limit: int | None = None,
                  tol: SimplexTolerances = DEFAULT_TOLERANCES,
                  keep_tableau: bool = False) -> SimplexResult:
    """Solve a standard-form LP container (see optimizer.LinearProgramStd)."""
    return simplex(lp.a, lp.b, lp.c, iter_limit=iter_limit, tol=tol,
                   keep_tableau=keep_tableau)
