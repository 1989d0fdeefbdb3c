"""Exact rational linear programming with Farkas certificates.

Two-phase full-tableau simplex over ``fractions.Fraction`` with Bland's rule,
so every run terminates and is deterministic.  Problems are stated as::

    minimize c . x
    subject to row . x (>= | ==) rhs        for each row
               x[j] >= 0 unless j in free

On infeasibility the result carries multipliers ``farkas`` satisfying
``sum(y_i * row_i) <= 0`` componentwise (with equality on free columns),
``y_i >= 0`` on every ``>=`` row, and ``sum(y_i * rhs_i) > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass
class LPResult:
    status: str                      # "optimal" | "infeasible" | "unbounded"
    x: list | None = None
    objective: Fraction | None = None
    farkas: list | None = None


class _Tableau:
    def __init__(self, rows_matrix, rhs, basis):
        self.m = len(rows_matrix)
        self.rows = [row + [r] for row, r in zip(rows_matrix, rhs)]
        self.basis = basis          # row -> column index
        self.z = None               # objective row (reduced costs + value)

    def set_cost(self, cost):
        width = len(self.rows[0])
        z = list(cost) + [ZERO]
        for r in range(self.m):
            cb = cost[self.basis[r]]
            if cb != 0:
                row = self.rows[r]
                for j in range(width):
                    if row[j] != 0:
                        z[j] -= cb * row[j]
        self.z = z
        self.cost = list(cost)

    def pivot(self, pr, pc):
        row = self.rows[pr]
        inv = ONE / row[pc]
        if inv != 1:
            row = [v * inv for v in row]
            self.rows[pr] = row
        for r in range(self.m):
            if r == pr:
                continue
            f = self.rows[r][pc]
            if f != 0:
                self.rows[r] = [v - f * p for v, p in zip(self.rows[r], row)]
        f = self.z[pc]
        if f != 0:
            self.z = [v - f * p for v, p in zip(self.z, row)]
        self.basis[pr] = pc

    def run(self, banned):
        """Bland's rule to optimality; returns 'optimal' or 'unbounded'."""
        ncols = len(self.z) - 1
        while True:
            entering = -1
            for j in range(ncols):
                if j not in banned and self.z[j] < 0:
                    entering = j
                    break
            if entering < 0:
                return "optimal"
            leaving = -1
            best = None
            for r in range(self.m):
                a = self.rows[r][entering]
                if a > 0:
                    ratio = self.rows[r][-1] / a
                    if best is None or ratio < best or (
                            ratio == best and self.basis[r] < self.basis[leaving]):
                        best = ratio
                        leaving = r
            if leaving < 0:
                return "unbounded"
            self.pivot(leaving, entering)

    def objective_value(self):
        return -self.z[-1]


def solve(n_cols: int, objective, rows, free=frozenset()) -> LPResult:
    """Solve the LP described in the module docstring."""
    free = frozenset(free)
    col_map = []                       # tableau column -> (var index, sign)
    for j in range(n_cols):
        col_map.append((j, 1))
        if j in free:
            col_map.append((j, -1))
    n_struct = len(col_map)

    m = len(rows)
    sigma = []
    A = []
    b = []
    senses = []
    for coeffs, sense, rhs in rows:
        coeffs = [Fraction(v) for v in coeffs]
        rhs = Fraction(rhs)
        if rhs < 0:
            coeffs = [-v for v in coeffs]
            rhs = -rhs
            sigma.append(-1)
            sense = {">=": "<=", "<=": ">="}.get(sense, sense)
        else:
            sigma.append(1)
        A.append([coeffs[j] * s for j, s in col_map])
        b.append(rhs)
        senses.append(sense)

    # slack (+1, '<=') or surplus (-1, '>=') columns
    slack_col = [None] * m
    for i in range(m):
        if senses[i] == "==":
            continue
        coef = ONE if senses[i] == "<=" else -ONE
        for r in range(m):
            A[r].append(coef if r == i else ZERO)
        slack_col[i] = len(col_map)
        col_map.append(None)
    n_real = len(col_map)

    # initial basis: the slack where possible, a zero-rhs surplus after a row
    # flip, otherwise an artificial
    basis: list[int | None] = [None] * m
    artificial = []
    for i in range(m):
        sc = slack_col[i]
        if sc is not None and senses[i] == "<=":
            basis[i] = sc
            continue
        if sc is not None and b[i] == 0:
            A[i] = [-v for v in A[i]]
            sigma[i] = -sigma[i]
            basis[i] = sc
            continue
        for r in range(m):
            A[r].append(ONE if r == i else ZERO)
        basis[i] = n_real + len(artificial)
        artificial.append(basis[i])
    art_set = set(artificial)
    n_total = n_real + len(artificial)

    tab = _Tableau(A, b, basis)
    initial_basis = list(basis)

    if artificial:
        cost1 = [ZERO] * n_total
        for j in artificial:
            cost1[j] = ONE
        tab.set_cost(cost1)
        status = tab.run(banned=art_set)
        assert status == "optimal"  # bounded below by zero
        if tab.objective_value() > 0:
            # duals of phase 1: y = cB . B^-1, read from the columns that
            # started as the identity (the initial basis)
            farkas = []
            for i in range(m):
                col = initial_basis[i]
                yi = sum((cost1[tab.basis[r]] * tab.rows[r][col]
                          for r in range(m)), ZERO)
                farkas.append(sigma[i] * yi)
            return LPResult("infeasible", farkas=farkas)
        # drive lingering artificials out of the basis where possible
        for r in range(m):
            if tab.basis[r] in art_set:
                for j in range(n_real):
                    if tab.rows[r][j] != 0:
                        tab.pivot(r, j)
                        break
                # an all-zero row is redundant; its artificial stays at 0

    cost2 = [ZERO] * n_total
    for c in range(n_struct):
        j, s = col_map[c]
        cost2[c] = Fraction(objective[j]) * s
    tab.set_cost(cost2)
    status = tab.run(banned=art_set)
    if status == "unbounded":
        return LPResult("unbounded")
    x = [ZERO] * n_cols
    for r in range(m):
        j = tab.basis[r]
        if j < n_struct:
            var, s = col_map[j]
            x[var] += s * tab.rows[r][-1]
    obj = sum((Fraction(objective[j]) * x[j] for j in range(n_cols)), ZERO)
    return LPResult("optimal", x=x, objective=obj)
