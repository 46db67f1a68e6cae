"""Bounded-variable LP solver for the branch-and-cut node relaxations.

A self-contained revised simplex over the standard bounded-variable form:
rows become equalities by adding one slack per row (slack bounds encode the
sense), the basis inverse is kept dense and updated in product form, and the
basis is refactorized every ``refactor_every`` pivots to bound drift.

Solve strategy: the all-slack basis with structurals placed at their
cost-favourable bounds is dual feasible whenever every negative-cost column
has a finite upper bound (always true for the routing LPs, whose costs are
nonnegative); then the dual simplex alone reaches optimality or proves
infeasibility.  Otherwise a phase-1 dual run with zero costs finds a primal
feasible basis and the primal simplex finishes (detecting unboundedness).
Bland's rule engages after a run of degenerate pivots to break cycling.

The solver presolves by fixed-variable substitution only: variables with
equal bounds are removed from rows, singleton rows become bounds, and rows
that the remaining bounds already imply are dropped.  The reduced problem has
the same feasible set, optimum, and vertices as the original.

``SimplexSolver`` is a session: the engine adds cut rows and changes bounds
incrementally and re-optimizes warm from the previous basis.  A session is
single-threaded; distinct sessions are independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from cagvrp.model import LinearRow, SENSE_EQ, SENSE_GE, SENSE_LE

FEAS_TOL = 1e-7
DUAL_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 100
DEGENERATE_RUN = 60     # consecutive degenerate pivots before Bland's rule

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

_LB, _UB, _BASIC, _FREE = 0, 1, 2, 3


class LpError(RuntimeError):
    """Structural misuse of the LP layer (bad indices, malformed rows)."""


@dataclass
class LpProblem:
    """Minimization LP: objective, sparse rows, per-variable bounds."""

    num_vars: int
    objective: np.ndarray
    rows: list
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        if self.objective.shape != (self.num_vars,):
            raise LpError("objective length mismatch")
        if self.lb.shape != (self.num_vars,) or self.ub.shape != (self.num_vars,):
            raise LpError("bounds length mismatch")
        if np.any(self.lb > self.ub):
            k = int(np.argmax(self.lb > self.ub))
            raise LpError(f"variable {k}: lower bound {self.lb[k]} exceeds upper bound {self.ub[k]}")
        for row in self.rows:
            if row.indices and (row.indices[-1] >= self.num_vars or row.indices[0] < 0):
                raise LpError(f"row {row.tag}: variable index out of range")


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    iterations: int


def solve(problem: LpProblem, **solver_kwargs) -> LpResult:
    """Solve an LP from scratch; deterministic for identical input."""
    return SimplexSolver(problem, **solver_kwargs).optimize()


def resolve_with(base: LpProblem, added_rows=(), changed_bounds=()) -> LpResult:
    """Solve ``base`` with extra rows and/or bound overrides.

    ``changed_bounds`` holds (variable, lower, upper) triples.  The result
    matches solving the modified problem from scratch; sessions kept by the
    engine warm-start instead, which must not change status or objective.
    """
    lb = base.lb.copy()
    ub = base.ub.copy()
    for var, lo, hi in changed_bounds:
        lb[var] = lo
        ub[var] = hi
    modified = LpProblem(
        num_vars=base.num_vars,
        objective=base.objective,
        rows=list(base.rows) + list(added_rows),
        lb=lb,
        ub=ub,
    )
    return solve(modified)


def write_lp_text(problem: LpProblem, path) -> None:
    """Dump the problem in a human-readable LP text form for cross-checking."""
    terms_obj = " + ".join(f"{c:.12g} v{j}" for j, c in enumerate(problem.objective) if c != 0.0)
    lines = ["Minimize", " obj: " + (terms_obj if terms_obj else "0")]
    lines.append("Subject To")
    for k, row in enumerate(problem.rows):
        terms = " + ".join(f"{c:.12g} v{j}" for j, c in zip(row.indices, row.coeffs))
        op = {SENSE_LE: "<=", SENSE_GE: ">=", SENSE_EQ: "="}[row.sense]
        lines.append(f" r{k}_{row.tag}: {terms} {op} {row.rhs:.12g}")
    lines.append("Bounds")
    for j in range(problem.num_vars):
        lines.append(f" {problem.lb[j]:.12g} <= v{j} <= {problem.ub[j]:.12g}")
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _presolve(problem: LpProblem, feas_tol: float):
    """Fixed-variable substitution, singleton rows to bounds, implied-row drops.

    Returns (keep_cols, fixed_values, red_rows, red_lb, red_ub, infeasible)
    where red_rows hold (indices-into-kept-cols, coeffs, sense, rhs).
    """
    nv = problem.num_vars
    lb = problem.lb.copy()
    ub = problem.ub.copy()
    fixed = lb == ub
    rows = [(np.array(r.indices, dtype=int), np.array(r.coeffs, dtype=float), r.sense, r.rhs)
            for r in problem.rows]
    alive = [True] * len(rows)
    infeasible = False

    changed = True
    while changed and not infeasible:
        changed = False
        for k, (idx, coef, sense, rhs) in enumerate(rows):
            if not alive[k]:
                continue
            f = fixed[idx]
            if f.any():
                rhs = rhs - float(coef[f] @ lb[idx[f]])
                idx, coef = idx[~f], coef[~f]
                rows[k] = (idx, coef, sense, rhs)
            if len(idx) == 0:
                ok = (rhs >= -feas_tol) if sense == SENSE_LE else \
                     (rhs <= feas_tol) if sense == SENSE_GE else (abs(rhs) <= feas_tol)
                if not ok:
                    infeasible = True
                    break
                alive[k] = False
                changed = True
                continue
            if len(idx) == 1:
                j, a = int(idx[0]), float(coef[0])
                v = rhs / a
                if sense == SENSE_EQ:
                    new_lo, new_hi = max(lb[j], v), min(ub[j], v)
                elif (sense == SENSE_LE) == (a > 0):
                    new_lo, new_hi = lb[j], min(ub[j], v)
                else:
                    new_lo, new_hi = max(lb[j], v), ub[j]
                if new_lo > new_hi:
                    if new_lo > new_hi + feas_tol:
                        infeasible = True
                        break
                    new_hi = new_lo
                if new_lo != lb[j] or new_hi != ub[j]:
                    lb[j], ub[j] = new_lo, new_hi
                    if lb[j] == ub[j]:
                        fixed[j] = True
                    changed = True
                alive[k] = False
                continue
            # drop rows the bounds already imply (no epsilon slack: safe side)
            hi_act = float(np.sum(np.where(coef > 0, coef * ub[idx], coef * lb[idx])))
            lo_act = float(np.sum(np.where(coef > 0, coef * lb[idx], coef * ub[idx])))
            if sense == SENSE_LE and hi_act <= rhs:
                alive[k] = False
                changed = True
            elif sense == SENSE_GE and lo_act >= rhs:
                alive[k] = False
                changed = True
            elif sense == SENSE_EQ and hi_act <= rhs and lo_act >= rhs:
                alive[k] = False
                changed = True

    keep = np.flatnonzero(~fixed)
    col_map = np.full(nv, -1, dtype=int)
    col_map[keep] = np.arange(len(keep))
    red_rows = []
    if not infeasible:
        for k, (idx, coef, sense, rhs) in enumerate(rows):
            if alive[k]:
                red_rows.append((col_map[idx], coef, sense, rhs))
    return keep, lb, ub, col_map, red_rows, infeasible


class SimplexSolver:
    """Revised simplex session over one problem, supporting warm re-optimization."""

    def __init__(self, problem: LpProblem, feas_tol: float = FEAS_TOL,
                 pivot_tol: float = PIVOT_TOL, refactor_every: int = REFACTOR_EVERY,
                 max_iter: int | None = None):
        self.problem = problem
        self.feas_tol = feas_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.max_iter_setting = max_iter
        self.total_iterations = 0
        self._fresh = True

        keep, lb_all, ub_all, col_map, red_rows, infeasible = _presolve(problem, feas_tol)
        self.keep = keep
        self.col_map = col_map
        self.fixed_values = lb_all.copy()        # meaningful only at eliminated columns
        self.presolve_infeasible = infeasible
        self.ns = len(keep)
        self.c_struct = problem.objective[keep].copy()

        rows_i, rows_c, senses, rhs = [], [], [], []
        for idx, coef, sense, r in red_rows:
            rows_i.append(idx)
            rows_c.append(coef)
            senses.append(sense)
            rhs.append(r)
        self.senses = senses
        self.b = np.array(rhs, dtype=float)
        self.m = len(senses)
        self._build_matrix(rows_i, rows_c)

        nt = self.ns + self.m
        self.lb = np.empty(nt)
        self.ub = np.empty(nt)
        self.lb[:self.ns] = lb_all[keep]
        self.ub[:self.ns] = ub_all[keep]
        for r, s in enumerate(senses):
            self.lb[self.ns + r], self.ub[self.ns + r] = self._slack_bounds(s)
        self.c = np.concatenate([self.c_struct, np.zeros(self.m)])

        self.basis = np.empty(0, dtype=int)
        self.vstat = np.empty(0, dtype=np.int8)
        self.xval = np.empty(0)
        self.xB = np.empty(0)
        self.d = np.empty(0)
        self.Binv = np.empty((0, 0))
        self._pivots_since_refactor = 0

    # ------------------------------------------------------------ structure

    @staticmethod
    def _slack_bounds(sense: str):
        if sense == SENSE_LE:
            return 0.0, np.inf
        if sense == SENSE_GE:
            return -np.inf, 0.0
        return 0.0, 0.0

    def _build_matrix(self, rows_i, rows_c):
        data, ii, jj = [], [], []
        for r, (idx, coef) in enumerate(zip(rows_i, rows_c)):
            ii.extend([r] * len(idx))
            jj.extend(idx.tolist())
            data.extend(coef.tolist())
        self.A = sp.csc_matrix((data, (ii, jj)), shape=(self.m, self.ns))
        self.AT = self.A.T.tocsr()

    def _column(self, j: int) -> np.ndarray:
        """Dense column j of [A | I]."""
        col = np.zeros(self.m)
        if j < self.ns:
            s, e = self.A.indptr[j], self.A.indptr[j + 1]
            col[self.A.indices[s:e]] = self.A.data[s:e]
        else:
            col[j - self.ns] = 1.0
        return col

    def _ftran(self, j: int) -> np.ndarray:
        if j < self.ns:
            s, e = self.A.indptr[j], self.A.indptr[j + 1]
            return self.Binv[:, self.A.indices[s:e]] @ self.A.data[s:e]
        return self.Binv[:, j - self.ns].copy()

    def _alpha_row(self, rho: np.ndarray) -> np.ndarray:
        return np.concatenate([self.AT @ rho, rho])

    # ------------------------------------------------------------ basis state

    def _init_slack_basis(self):
        nt = self.ns + self.m
        self.basis = np.arange(self.ns, nt, dtype=int)
        self.vstat = np.empty(nt, dtype=np.int8)
        self.vstat[self.ns:] = _BASIC
        self.xval = np.zeros(nt)
        for j in range(self.ns):
            lo, hi, cj = self.lb[j], self.ub[j], self.c[j]
            if lo == hi:
                st, v = _LB, lo
            elif cj >= 0:
                st, v = (_LB, lo) if np.isfinite(lo) else ((_UB, hi) if np.isfinite(hi) else (_FREE, 0.0))
            else:
                st, v = (_UB, hi) if np.isfinite(hi) else ((_LB, lo) if np.isfinite(lo) else (_FREE, 0.0))
            self.vstat[j] = st
            self.xval[j] = v
        self._refactorize()

    def _refactorize(self):
        m = self.m
        B = np.zeros((m, m))
        for pos, j in enumerate(self.basis):
            B[:, pos] = self._column(int(j))
        try:
            self.Binv = np.linalg.inv(B) if m else np.empty((0, 0))
        except np.linalg.LinAlgError as exc:
            raise LpError("basis matrix is singular") from exc
        self._recompute_primal()
        self._recompute_duals()
        self._pivots_since_refactor = 0

    def _recompute_primal(self):
        xn = self.xval.copy()
        xn[self.basis] = 0.0
        r = self.b - self.A @ xn[:self.ns] - xn[self.ns:]
        self.xB = self.Binv @ r if self.m else np.empty(0)

    def _recompute_duals(self):
        cB = self.c[self.basis]
        y = self.Binv.T @ cB if self.m else np.empty(0)
        self.d = np.concatenate([self.c[:self.ns] - self.AT @ y, -y])
        self.d[self.basis] = 0.0

    def _update_binv(self, u: np.ndarray, r: int):
        pr = self.Binv[r] / u[r]
        self.Binv -= np.outer(u, pr)
        self.Binv[r] = pr
        self._pivots_since_refactor += 1
        if self._pivots_since_refactor >= self.refactor_every:
            self._refactorize()

    def _dual_feasible(self) -> bool:
        movable = (self.vstat != _BASIC) & (self.lb != self.ub)
        viol = ((self.vstat == _LB) & movable & (self.d < -DUAL_TOL))
        viol |= ((self.vstat == _UB) & movable & (self.d > DUAL_TOL))
        viol |= ((self.vstat == _FREE) & movable & (np.abs(self.d) > DUAL_TOL))
        return not viol.any()

    # ------------------------------------------------------------ pivoting

    def _dual_simplex(self, max_iter: int) -> str:
        """Reduce primal infeasibility while keeping dual feasibility.

        Returns 'feasible' (now primal feasible, hence optimal for the
        current costs), 'infeasible', or 'iteration-limit'.
        """
        lbB = self.lb[self.basis]
        ubB = self.ub[self.basis]
        degenerate_run = 0
        it = 0
        while True:
            if self.m == 0:
                return "feasible"
            below = lbB - self.xB
            above = self.xB - ubB
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= self.feas_tol:
                return "feasible"
            if it >= max_iter:
                return ITERATION_LIMIT
            it += 1
            self.total_iterations += 1
            increase = below[r] > above[r]

            rho = self.Binv[r]
            alpha = self._alpha_row(rho)
            nb = self.vstat != _BASIC
            movable = nb & (self.lb != self.ub)
            at_lb = movable & ((self.vstat == _LB) | (self.vstat == _FREE))
            at_ub = movable & ((self.vstat == _UB) | (self.vstat == _FREE))
            if increase:
                elig = (at_lb & (alpha < -self.pivot_tol)) | (at_ub & (alpha > self.pivot_tol))
            else:
                elig = (at_lb & (alpha > self.pivot_tol)) | (at_ub & (alpha < -self.pivot_tol))
            if not elig.any():
                return INFEASIBLE
            if degenerate_run >= DEGENERATE_RUN:
                q = int(np.flatnonzero(elig)[0])              # Bland
            else:
                ratios = np.full(alpha.shape, np.inf)
                ratios[elig] = np.abs(self.d[elig]) / np.abs(alpha[elig])
                q = int(np.argmin(ratios))

            u = self._ftran(q)
            if abs(u[r]) < self.pivot_tol:
                self._refactorize()
                lbB = self.lb[self.basis]
                ubB = self.ub[self.basis]
                u = self._ftran(q)
                if abs(u[r]) < self.pivot_tol:
                    return ITERATION_LIMIT
            bound_r = lbB[r] if increase else ubB[r]
            delta_q = (self.xB[r] - bound_r) / u[r]
            degenerate_run = degenerate_run + 1 if abs(delta_q) <= 1e-11 else 0

            leave = int(self.basis[r])
            theta = self.d[q] / u[r]
            self.d -= theta * alpha
            self.d[q] = 0.0
            self.d[leave] = -theta

            self.xB -= delta_q * u
            self.xB[r] = self.xval[q] + delta_q
            self.xval[leave] = bound_r
            self.vstat[leave] = _LB if increase else _UB
            self.vstat[q] = _BASIC
            self.basis[r] = q
            self._update_binv(u, r)
            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]

    def _primal_simplex(self, max_iter: int) -> str:
        """Improve a primal-feasible basis; returns 'optimal', 'unbounded',
        or 'iteration-limit'."""
        degenerate_run = 0
        it = 0
        while True:
            nb = self.vstat != _BASIC
            movable = nb & (self.lb != self.ub)
            down_ok = movable & ((self.vstat == _LB) | (self.vstat == _FREE)) & (self.d < -DUAL_TOL)
            up_ok = movable & ((self.vstat == _UB) | (self.vstat == _FREE)) & (self.d > DUAL_TOL)
            elig = down_ok | up_ok
            if not elig.any():
                return OPTIMAL
            if it >= max_iter:
                return ITERATION_LIMIT
            it += 1
            self.total_iterations += 1
            if degenerate_run >= DEGENERATE_RUN:
                q = int(np.flatnonzero(elig)[0])              # Bland
            else:
                score = np.where(elig, np.abs(self.d), -1.0)
                q = int(np.argmax(score))
            direction = 1.0 if down_ok[q] else -1.0

            u = self._ftran(q)
            du = direction * u
            lbB = self.lb[self.basis]
            ubB = self.ub[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                lim = np.full(self.m, np.inf)
                dec = du > self.pivot_tol
                lim[dec] = (self.xB[dec] - lbB[dec]) / du[dec]
                inc = du < -self.pivot_tol
                lim[inc] = (self.xB[inc] - ubB[inc]) / du[inc]
            lim[~np.isfinite(lim)] = np.inf
            t_basic = float(lim.min()) if self.m else np.inf
            t_own = self.ub[q] - self.lb[q] if self.vstat[q] != _FREE else np.inf
            t = min(t_basic, t_own)
            if not np.isfinite(t):
                return UNBOUNDED
            t = max(t, 0.0)
            degenerate_run = degenerate_run + 1 if t <= 1e-11 else 0

            if t_own <= t_basic:
                # bound flip: no basis change
                self.xB -= t * du
                self.xval[q] = self.ub[q] if self.vstat[q] == _LB else self.lb[q]
                self.vstat[q] = _UB if self.vstat[q] == _LB else _LB
                continue
            cand = np.flatnonzero(lim <= t + 1e-12)
            if degenerate_run >= DEGENERATE_RUN:
                r = int(cand[np.argmin(self.basis[cand])])    # Bland: lowest leaving index
            else:
                r = int(cand[0])
            if abs(u[r]) < self.pivot_tol:
                self._refactorize()
                continue

            rho = self.Binv[r]
            alpha = self._alpha_row(rho)
            leave = int(self.basis[r])
            theta = self.d[q] / u[r]
            self.d -= theta * alpha
            self.d[q] = 0.0
            self.d[leave] = -theta

            self.xB -= t * du
            new_q_val = self.xval[q] + direction * t
            leave_to_lb = du[r] > 0
            self.xval[leave] = lbB[r] if leave_to_lb else ubB[r]
            self.vstat[leave] = _LB if leave_to_lb else _UB
            self.vstat[q] = _BASIC
            self.basis[r] = q
            self.xB[r] = new_q_val
            self._update_binv(u, r)

    # ------------------------------------------------------------ driving

    def _max_iter(self) -> int:
        if self.max_iter_setting is not None:
            return self.max_iter_setting
        return 100 * (self.m + self.ns)

    def optimize(self) -> LpResult:
        """Solve from the current state (cold on first call, warm afterwards)."""
        if self.presolve_infeasible:
            return LpResult(INFEASIBLE, None, None, 0)
        if self._fresh:
            self._init_slack_basis()
            self._fresh = False
        start_iters = self.total_iterations
        budget = self._max_iter()

        for attempt in range(4):
            if self._dual_feasible():
                st = self._dual_simplex(budget - (self.total_iterations - start_iters))
                if st == INFEASIBLE:
                    return LpResult(INFEASIBLE, None, None, self.total_iterations - start_iters)
                if st == ITERATION_LIMIT:
                    return LpResult(ITERATION_LIMIT, None, None, self.total_iterations - start_iters)
            else:
                saved_c = self.c
                self.c = np.zeros_like(saved_c)
                self._recompute_duals()
                st = self._dual_simplex(budget - (self.total_iterations - start_iters))
                self.c = saved_c
                self._recompute_duals()
                if st == INFEASIBLE:
                    return LpResult(INFEASIBLE, None, None, self.total_iterations - start_iters)
                if st == ITERATION_LIMIT:
                    return LpResult(ITERATION_LIMIT, None, None, self.total_iterations - start_iters)
                st = self._primal_simplex(budget - (self.total_iterations - start_iters))
                if st == UNBOUNDED:
                    return LpResult(UNBOUNDED, None, None, self.total_iterations - start_iters)
                if st == ITERATION_LIMIT:
                    return LpResult(ITERATION_LIMIT, None, None, self.total_iterations - start_iters)
            # accept only with a drift-free certificate against the true data
            if self._certify():
                return self._result(self.total_iterations - start_iters)
            self._refactorize()
            if self._primal_feasible_now() and self._dual_feasible():
                return self._result(self.total_iterations - start_iters)
        return LpResult(ITERATION_LIMIT, None, None, self.total_iterations - start_iters)

    def _primal_feasible_now(self) -> bool:
        if self.m == 0:
            return True
        lbB = self.lb[self.basis]
        ubB = self.ub[self.basis]
        return bool((self.xB >= lbB - self.feas_tol).all() and (self.xB <= ubB + self.feas_tol).all())

    def _certify(self) -> bool:
        """Verify optimality against the true row data, independent of Binv drift.

        Primal: the maintained point satisfies bounds and A x + s = b.
        Dual: y read off the slack reduced costs reproduces the structural
        reduced costs, and the signs are dual feasible.
        """
        if not self._primal_feasible_now() or not self._dual_feasible():
            return False
        x = self.full_point_reduced()
        if (x < self.lb[:self.ns] - self.feas_tol).any() or (x > self.ub[:self.ns] + self.feas_tol).any():
            return False
        s_vals = self.xval[self.ns:self.ns + self.m].copy()
        slack_pos = np.flatnonzero(self.basis >= self.ns)
        s_vals[self.basis[slack_pos] - self.ns] = self.xB[slack_pos]
        scale = max(1.0, float(np.abs(self.b).max()) if self.m else 1.0)
        if self.m:
            resid = self.A @ x + s_vals - self.b
            if np.abs(resid).max() > self.feas_tol * scale:
                return False
            y = -self.d[self.ns:self.ns + self.m]
            dual_resid = self.c[:self.ns] - self.AT @ y - self.d[:self.ns]
            cscale = max(1.0, float(np.abs(self.c).max()))
            if dual_resid.size and np.abs(dual_resid).max() > self.feas_tol * cscale:
                return False
        return True

    def _result(self, iterations: int) -> LpResult:
        x = self.full_primal()
        obj = float(self.problem.objective @ x)
        return LpResult(OPTIMAL, x, obj, iterations)

    def full_primal(self) -> np.ndarray:
        """Current point mapped back to the original variable space."""
        xr = self.xval[:self.ns].copy()
        struct_basic = self.basis < self.ns
        xr[self.basis[struct_basic]] = self.xB[struct_basic]
        x = self.fixed_values.copy()
        x[self.keep] = xr
        return x

    # ------------------------------------------------------------ mutation

    def set_bounds(self, var: int, lo: float, hi: float):
        """Change the bounds of one original variable (kept by presolve)."""
        j = int(self.col_map[var])
        if j < 0:
            if lo <= self.fixed_values[var] <= hi:
                return
            raise LpError(f"variable {var} was eliminated at value {self.fixed_values[var]}, "
                          f"cannot re-bound to [{lo}, {hi}]")
        if lo > hi:
            raise LpError(f"variable {var}: crossing bounds [{lo}, {hi}]")
        self.lb[j] = lo
        self.ub[j] = hi
        if self._fresh:
            return
        if self.vstat[j] == _BASIC:
            return   # value may now violate; dual simplex will repair
        if self.vstat[j] == _LB or (self.vstat[j] == _FREE and np.isfinite(lo)):
            new_val = lo if np.isfinite(lo) else 0.0
            self.vstat[j] = _LB if np.isfinite(lo) else _FREE
        else:
            new_val = hi if np.isfinite(hi) else 0.0
            self.vstat[j] = _UB if np.isfinite(hi) else _FREE
        delta = new_val - self.xval[j]
        if delta != 0.0:
            self.xB -= delta * self._ftran(j)
            self.xval[j] = new_val

    def add_rows(self, rows) -> list:
        """Append cut rows (original index space); returns internal row ids."""
        old_m = self.m
        new_i, new_c, ids = [], [], []
        for row in rows:
            idx = np.array(row.indices, dtype=int)
            coef = np.array(row.coeffs, dtype=float)
            fixed_mask = self.col_map[idx] < 0
            rhs = row.rhs - float(coef[fixed_mask] @ self.fixed_values[idx[fixed_mask]])
            idx = self.col_map[idx[~fixed_mask]]
            coef = coef[~fixed_mask]
            if len(idx) == 0:
                raise LpError(f"cut row {row.tag} became empty after substitution")
            order = np.argsort(idx)
            new_i.append(idx[order])
            new_c.append(coef[order])
            self.senses.append(row.sense)
            self.b = np.append(self.b, rhs)
            ids.append(old_m + len(new_i) - 1)
        k = len(new_i)
        if k == 0:
            return []
        point = None if self._fresh else self.full_point_reduced()
        self.m = old_m + k
        data, ii, jj = [], [], []
        for r, (idx, coef) in enumerate(zip(new_i, new_c)):
            ii.extend([r] * len(idx))
            jj.extend(idx.tolist())
            data.extend(coef.tolist())
        extra = sp.csc_matrix((data, (ii, jj)), shape=(k, self.ns))
        self.A = sp.vstack([self.A.tocsr(), extra.tocsr()]).tocsc()
        self.AT = self.A.T.tocsr()

        new_lb = np.empty(k)
        new_ub = np.empty(k)
        for r in range(k):
            new_lb[r], new_ub[r] = self._slack_bounds(self.senses[old_m + r])
        self.lb = np.concatenate([self.lb, new_lb])
        self.ub = np.concatenate([self.ub, new_ub])
        self.c = np.concatenate([self.c, np.zeros(k)])
        if self._fresh:
            return ids

        # extend basis with the new slacks; block-triangular inverse update
        self.d = np.concatenate([self.d, np.zeros(k)])
        self.xval = np.concatenate([self.xval, np.zeros(k)])
        slack_vals = self.b[old_m:] - extra @ point
        C = np.zeros((k, old_m))
        struct_pos = np.flatnonzero(self.basis < self.ns)
        if struct_pos.size:
            C[:, struct_pos] = extra[:, self.basis[struct_pos]].toarray()
        if old_m:
            self.Binv = np.block([
                [self.Binv, np.zeros((old_m, k))],
                [-(C @ self.Binv), np.eye(k)],
            ])
        else:
            self.Binv = np.eye(k)
        self.basis = np.concatenate([self.basis, np.arange(self.ns + old_m, self.ns + self.m)])
        self.vstat = np.concatenate([self.vstat, np.full(k, _BASIC, dtype=np.int8)])
        self.xB = np.concatenate([self.xB, slack_vals])
        return ids

    def full_point_reduced(self) -> np.ndarray:
        """Current structural point in reduced-column space."""
        xr = self.xval[:self.ns].copy()
        struct_basic = self.basis < self.ns
        xr[self.basis[struct_basic]] = self.xB[struct_basic]
        return xr

    def change_rhs(self, row_id: int, new_rhs: float):
        """Change one row's right-hand side (used to shelve/unshelve cuts)."""
        delta = new_rhs - self.b[row_id]
        if delta == 0.0:
            return
        self.b[row_id] = new_rhs
        if not self._fresh and self.m:
            self.xB += delta * self.Binv[:, row_id]

    def cold_reset(self):
        """Discard the basis; the next optimize() starts from scratch."""
        self._fresh = True
