"""Dense linear programming with a bounded-variable revised simplex.

Problems have the form::

    min  c'x
    s.t. G x <= g
         E x  = e
         lb <= x <= ub

Bounds are handled natively: a nonbasic variable sits at one of its
bounds (or at zero when free), so box constraints never become rows.

Dual convention: with the Lagrangian ``c'x + lam'(Gx - g) + mu'(Ex - e)``
the solver reports ``ineq_duals = lam >= 0`` and ``eq_duals = mu``.
Hence the optimal value moves by ``-lam_i`` per unit increase of ``g_i``
and by ``-mu_i`` per unit increase of ``e_i``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure

__all__ = [
    "LinearProgram",
    "LpSolution",
    "LpStatus",
    "Basis",
    "ToleranceReport",
    "BasisCache",
    "solve",
    "write_mps",
]

_FEAS_TOL = 1e-9  # Harris bound relaxation
_PIVOT_TOL = 1e-9
_DEGENERATE_STEPS = 25  # consecutive degenerate pivots before Bland's rule
_REFACTOR_EVERY = 40


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


def _as_matrix(a, ncols):
    if a is None:
        return np.zeros((0, ncols))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1) if a.size else np.zeros((0, ncols))
    return a


@dataclass
class LinearProgram:
    """Dense LP data. Missing blocks default to empty; bounds to ``[0, inf)``."""

    c: np.ndarray
    G: np.ndarray = None
    g: np.ndarray = None
    E: np.ndarray = None
    e: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.G = _as_matrix(self.G, n)
        self.E = _as_matrix(self.E, n)
        self.g = np.zeros(0) if self.g is None else np.asarray(self.g, dtype=float).ravel()
        self.e = np.zeros(0) if self.e is None else np.asarray(self.e, dtype=float).ravel()
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float).ravel().copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).ravel().copy()
        if self.G.shape != (self.g.size, n):
            raise ValueError(f"G has shape {self.G.shape}, expected ({self.g.size}, {n})")
        if self.E.shape != (self.e.size, n):
            raise ValueError(f"E has shape {self.E.shape}, expected ({self.e.size}, {n})")
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bound vectors must match the number of variables")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("bounds may not exclude every finite value")

    @property
    def n(self):
        return self.c.size

    @property
    def n_ineq(self):
        return self.g.size

    @property
    def n_eq(self):
        return self.e.size


@dataclass
class ToleranceReport:
    primal_residual: float
    dual_residual: float
    gap: float

    def worst(self):
        return max(self.primal_residual, self.dual_residual, self.gap)


@dataclass
class Basis:
    """Simplex basis over the structural and slack columns, reusable as a warm start."""

    basic: np.ndarray
    at_upper: np.ndarray
    binv: np.ndarray = None


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray = None
    objective: float = None
    ineq_duals: np.ndarray = None
    eq_duals: np.ndarray = None
    reduced_costs: np.ndarray = None
    report: ToleranceReport = None
    iterations: int = 0
    basis: Basis = None
    ray: np.ndarray = None

    @property
    def optimal(self):
        return self.status is LpStatus.OPTIMAL


class _Simplex:
    def __init__(self, lp: LinearProgram):
        self.lp = lp
        n, mi, me = lp.n, lp.n_ineq, lp.n_eq
        m = mi + me
        self.n, self.mi, self.me, self.m = n, mi, me, m
        A = np.zeros((m, n + mi))
        A[:mi, :n] = lp.G
        A[:mi, n:] = np.eye(mi)
        A[mi:, :n] = lp.E
        self.A = A
        self.b = np.concatenate([lp.g, lp.e])
        self.lo = np.concatenate([lp.lb, np.zeros(mi)])
        self.hi = np.concatenate([lp.ub, np.full(mi, np.inf)])
        self.cost = np.concatenate([lp.c, np.zeros(mi)])
        self.n0 = n + mi
        cscale = max(1.0, float(np.max(np.abs(lp.c)))) if n else 1.0
        self.dtol = 1e-10 * cscale
        self.iterations = 0
        self.max_iter = 50 * (m + n + mi) + 2000

    # ----------------------------------------------------------------- setup
    def _nonbasic_start(self, ncols):
        lo, hi = self.lo[:ncols], self.hi[:ncols]
        return np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))

    def start_cold(self):
        n, mi, m = self.n, self.mi, self.m
        x = self._nonbasic_start(self.n0)
        x[n:] = 0.0
        r = self.b - self.A[:, :n] @ x[:n]
        basic = np.empty(m, dtype=int)
        art_rows, art_sign = [], []
        for i in range(m):
            if i < mi and r[i] >= 0:
                basic[i] = n + i
                x[n + i] = r[i]
            else:
                art_rows.append(i)
                art_sign.append(1.0 if r[i] >= 0 else -1.0)
        na = len(art_rows)
        art = np.zeros((m, na))
        for k, (i, s) in enumerate(zip(art_rows, art_sign)):
            art[i, k] = s
            basic[i] = self.n0 + k
        self.A = np.hstack([self.A[:, : self.n0], art])
        self.lo = np.concatenate([self.lo[: self.n0], np.zeros(na)])
        self.hi = np.concatenate([self.hi[: self.n0], np.full(na, np.inf)])
        self.cost = self.cost[: self.n0]
        self.x = np.concatenate([x, np.abs(r[art_rows]) if na else np.zeros(0)])
        self.basic = basic
        self.is_basic = np.zeros(self.A.shape[1], dtype=bool)
        self.is_basic[basic] = True
        signs = np.ones(m)
        for k, i in enumerate(art_rows):
            signs[i] = art_sign[k]
        self.binv = np.diag(1.0 / signs)
        self.na = na

    def start_warm(self, basis: Basis):
        """Install a previous basis; return False if it is not primal feasible here."""
        if basis.basic.size != self.m or basis.at_upper.size != self.n0:
            return False
        self.na = 0
        x = self._nonbasic_start(self.n0)
        up = basis.at_upper & np.isfinite(self.hi)
        x[up] = self.hi[up]
        self.basic = basis.basic.copy()
        self.is_basic = np.zeros(self.n0, dtype=bool)
        self.is_basic[self.basic] = True
        if basis.binv is not None and basis.binv.shape == (self.m, self.m):
            self.binv = basis.binv.copy()
        else:
            try:
                self.binv = np.linalg.inv(self.A[:, self.basic])
            except np.linalg.LinAlgError:
                self.binv = None
                return False
        x[self.basic] = 0.0
        x[self.basic] = self.binv @ (self.b - self.A @ x)
        self.x = x
        return self.primal_feasible()

    def primal_feasible(self):
        xb = self.x[self.basic]
        tol = 1e-9 * (1.0 + np.abs(xb))
        return bool(np.all(xb >= self.lo[self.basic] - tol) and np.all(xb <= self.hi[self.basic] + tol))

    def _recompute_basics(self):
        x = self.x
        x[self.basic] = 0.0
        x[self.basic] = self.binv @ (self.b - self.A @ x)

    def make_dual_feasible(self, cost):
        """Move boxed nonbasics to the bound their reduced cost prefers.

        Returns False if some nonbasic variable has a wrong-signed reduced
        cost and no bound to move to.
        """
        y = self.binv.T @ cost[self.basic]
        d = cost - self.A.T @ y
        nb = ~self.is_basic
        lo, hi, x = self.lo, self.hi, self.x
        want_lo = nb & (d > self.dtol)
        want_hi = nb & (d < -self.dtol)
        if np.any(want_lo & ~np.isfinite(lo)) or np.any(want_hi & ~np.isfinite(hi)):
            return False
        x[want_lo] = lo[want_lo]
        x[want_hi] = hi[want_hi]
        self._recompute_basics()
        return True

    def dual_iterate(self, cost):
        """Dual simplex from a dual feasible basis; return 'optimal' or 'infeasible'."""
        A, lo, hi = self.A, self.lo, self.hi
        since_refactor = 0
        while True:
            if self.iterations > self.max_iter:
                raise NumericalFailure("dual simplex iteration limit reached")
            if since_refactor >= _REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0
            x = self.x
            xb = x[self.basic]
            lob, hib = lo[self.basic], hi[self.basic]
            below = lob - xb
            above = xb - hib
            viol = np.maximum(below, above)
            p = int(np.argmax(viol))
            if viol[p] <= _FEAS_TOL * (1.0 + abs(xb[p])):
                return "optimal"
            raise_it = below[p] > above[p]
            y = self.binv.T @ cost[self.basic]
            d = cost - A.T @ y
            row = self.binv[p] @ A
            nb = ~self.is_basic
            free = nb & ~np.isfinite(lo) & ~np.isfinite(hi)
            at_hi = nb & ~free & (x >= hi)
            at_lo = nb & ~free & ~at_hi
            # basic value moves by -row_j * step_j; pick moves that push it toward the violated bound
            sgn = 1.0 if raise_it else -1.0
            elig = (at_lo & (sgn * row < -_PIVOT_TOL)) | (at_hi & (sgn * row > _PIVOT_TOL)) | (free & (np.abs(row) > _PIVOT_TOL))
            elig &= lo < hi
            if not elig.any():
                return "infeasible"
            cand = np.flatnonzero(elig)
            ratios = np.abs(d[cand]) / np.abs(row[cand])
            tmin = ratios.min()
            near = cand[ratios <= tmin + self.dtol / np.abs(row[cand])]
            q = int(near[np.argmax(np.abs(row[near]))])
            alpha = self.binv @ A[:, q]
            leaving = self.basic[p]
            x[leaving] = lob[p] if raise_it else hib[p]
            self.basic[p] = q
            self.is_basic[leaving] = False
            self.is_basic[q] = True
            r = self.binv[p] / alpha[p]
            self.binv -= np.outer(alpha, r)
            self.binv[p] = r
            self.iterations += 1
            since_refactor += 1
            self._recompute_basics()

    # ------------------------------------------------------------- iteration
    def refactor(self):
        try:
            self.binv = np.linalg.inv(self.A[:, self.basic])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis during refactorization") from exc
        x = self.x
        x[self.basic] = 0.0
        x[self.basic] = self.binv @ (self.b - self.A @ x)

    def iterate(self, cost, bland=False):
        """Run primal simplex iterations; return 'optimal' or ('unbounded', ray)."""
        A, lo, hi = self.A, self.lo, self.hi
        degenerate = 0
        since_refactor = 0
        use_bland = bland
        while True:
            if self.iterations > self.max_iter:
                raise NumericalFailure("simplex iteration limit reached")
            if since_refactor >= _REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0
            x = self.x
            y = self.binv.T @ cost[self.basic]
            d = cost - A.T @ y
            d[self.is_basic] = 0.0
            nb = ~self.is_basic
            inc = nb & (x < hi) & (d < -self.dtol)
            dec = nb & (x > lo) & (d > self.dtol)
            score = np.where(inc, -d, 0.0) + np.where(dec, d, 0.0)
            if not score.any():
                return "optimal"
            if use_bland:
                q = int(np.flatnonzero(score)[0])
            else:
                q = int(np.argmax(score))
            direction = 1.0 if inc[q] else -1.0
            alpha = self.binv @ A[:, q]
            delta = -direction * alpha
            xb = x[self.basic]
            lob, hib = lo[self.basic], hi[self.basic]
            down = (delta < -_PIVOT_TOL) & np.isfinite(lob)
            up = (delta > _PIVOT_TOL) & np.isfinite(hib)
            relaxed = np.full(self.m, np.inf)
            exact = np.full(self.m, np.inf)
            if down.any():
                relaxed[down] = (xb[down] - lob[down] + _FEAS_TOL) / -delta[down]
                exact[down] = np.maximum(xb[down] - lob[down], 0.0) / -delta[down]
            if up.any():
                relaxed[up] = (hib[up] - xb[up] + _FEAS_TOL) / delta[up]
                exact[up] = np.maximum(hib[up] - xb[up], 0.0) / delta[up]
            span = hi[q] - lo[q]
            tmax = relaxed.min() if self.m else np.inf
            if not np.isfinite(tmax) and not np.isfinite(span):
                ray = np.zeros(A.shape[1])
                ray[q] = direction
                ray[self.basic] = delta
                return ("unbounded", ray)
            p = -1
            if np.isfinite(tmax):
                cand = np.flatnonzero(exact <= tmax)
                if use_bland:
                    # smallest leaving index among ties keeps Bland's guarantee
                    p = int(cand[np.argmin(self.basic[cand])])
                else:
                    p = int(cand[np.argmax(np.abs(delta[cand]))])
                step = exact[p]
            else:
                step = np.inf
            if span <= step:
                step = span
                p = -1
            self.iterations += 1
            if step <= 1e-12:
                degenerate += 1
                if degenerate > _DEGENERATE_STEPS:
                    use_bland = True
            else:
                degenerate = 0
                use_bland = bland
            x[self.basic] = xb + step * delta
            if p < 0:
                x[q] = hi[q] if direction > 0 else lo[q]
                continue
            leaving = self.basic[p]
            x[q] = x[q] + direction * step
            x[leaving] = lob[p] if delta[p] < 0 else hib[p]
            self.basic[p] = q
            self.is_basic[leaving] = False
            self.is_basic[q] = True
            row = self.binv[p] / alpha[p]
            self.binv -= np.outer(alpha, row)
            self.binv[p] = row
            since_refactor += 1

    def drive_out_artificials(self):
        for p in range(self.m):
            j = self.basic[p]
            if j < self.n0:
                continue
            row = self.binv[p] @ self.A[:, : self.n0]
            row[self.is_basic[: self.n0]] = 0.0
            cand = np.flatnonzero(np.abs(row) > 1e-7)
            if cand.size == 0:
                continue  # redundant row; the artificial stays basic at zero
            q = int(cand[np.argmax(np.abs(row[cand]))])
            alpha = self.binv @ self.A[:, q]
            self.basic[p] = q
            self.is_basic[j] = False
            self.is_basic[q] = True
            self.x[j] = 0.0
            r = self.binv[p] / alpha[p]
            self.binv -= np.outer(alpha, r)
            self.binv[p] = r
        self.refactor()

    # ---------------------------------------------------------------- output
    def duals(self):
        cost = np.concatenate([self.cost, np.zeros(self.A.shape[1] - self.n0)])
        y = self.binv.T @ cost[self.basic]
        d = cost[: self.n0] - self.A[:, : self.n0].T @ y
        return y, d

    def report(self, y, d):
        lp = self.lp
        x = self.x[: self.n]
        viol = [0.0]
        if lp.n_ineq:
            viol.append(float(np.max(lp.G @ x - lp.g, initial=0.0)))
        if lp.n_eq:
            viol.append(float(np.max(np.abs(lp.E @ x - lp.e))))
        viol.append(float(np.max(lp.lb - x, initial=0.0)))
        viol.append(float(np.max(x - lp.ub, initial=0.0)))
        primal = max(viol)
        lo, hi = self.lo[: self.n0], self.hi[: self.n0]
        pos, neg = d > 0, d < 0
        dual_res = 0.0
        bad = (pos & ~np.isfinite(lo)) | (neg & ~np.isfinite(hi))
        if bad.any():
            dual_res = float(np.max(np.abs(d[bad])))
        bound_term = np.where(pos & np.isfinite(lo), d * np.where(np.isfinite(lo), lo, 0.0), 0.0)
        bound_term += np.where(neg & np.isfinite(hi), d * np.where(np.isfinite(hi), hi, 0.0), 0.0)
        pobj = float(lp.c @ x)
        dobj = float(self.b @ y + bound_term.sum())
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        return ToleranceReport(primal, dual_res, gap)


def _phase_one(sx: _Simplex, bland: bool):
    phase1 = np.zeros(sx.A.shape[1])
    phase1[sx.n0 :] = 1.0
    sx.iterate(phase1, bland=bland)
    sx.refactor()
    infeas = float(np.sum(sx.x[sx.n0 :]))
    if infeas > 1e-7 * (1.0 + float(np.max(np.abs(sx.b), initial=0.0))):
        return False
    sx.hi[sx.n0 :] = 0.0
    sx.x[sx.n0 :] = np.clip(sx.x[sx.n0 :], 0.0, 0.0)
    sx.drive_out_artificials()
    return True


def _dual_phase(sx: _Simplex):
    """Try to restore primal feasibility of an installed basis by dual pivots."""
    cost = sx.cost
    if getattr(sx, "binv", None) is None:
        return False
    try:
        if not sx.make_dual_feasible(cost):
            return False
        if sx.dual_iterate(cost) != "optimal":
            return False  # a cold start confirms infeasibility
        sx.refactor()
    except (NumericalFailure, np.linalg.LinAlgError):
        return False
    return sx.primal_feasible()


def _attempt(lp, tol, warm, bland, dual=False):
    sx = _Simplex(lp)
    warmed = warm is not None and sx.start_warm(warm)
    if warm is not None and not warmed and getattr(sx, "basic", None) is not None and dual:
        warmed = _dual_phase(sx)
    if not warmed:
        sx = _Simplex(lp)
        sx.start_cold()
        if sx.na and not _phase_one(sx, bland):
            return LpSolution(LpStatus.INFEASIBLE, iterations=sx.iterations), None
    return _finish(sx, lp, bland)


def _finish(sx: _Simplex, lp, bland):
    """Primal simplex from a feasible basis, then extract the solution."""
    cost = np.concatenate([sx.cost, np.zeros(sx.A.shape[1] - sx.n0)])
    outcome = sx.iterate(cost, bland=bland)
    if outcome != "optimal":
        return LpSolution(LpStatus.UNBOUNDED, ray=outcome[1][: lp.n], iterations=sx.iterations), None
    sx.refactor()
    # drift from refactoring can expose a stale reduced cost; polish once
    outcome = sx.iterate(cost, bland=bland)
    if outcome != "optimal":
        return LpSolution(LpStatus.UNBOUNDED, ray=outcome[1][: lp.n], iterations=sx.iterations), None
    y, d = sx.duals()
    rep = sx.report(y, d)
    basis = None
    if np.all(sx.basic < sx.n0):
        at_upper = np.zeros(sx.n0, dtype=bool)
        nb = ~sx.is_basic[: sx.n0]
        at_upper[nb] = (sx.x[: sx.n0][nb] == sx.hi[: sx.n0][nb]) & np.isfinite(sx.hi[: sx.n0][nb])
        basis = Basis(sx.basic.copy(), at_upper, sx.binv.copy())
    x = sx.x[: lp.n].copy()
    sol = LpSolution(
        LpStatus.OPTIMAL,
        x=x,
        objective=float(lp.c @ x),
        ineq_duals=-y[: lp.n_ineq],
        eq_duals=-y[lp.n_ineq :],
        reduced_costs=d[: lp.n],
        report=rep,
        iterations=sx.iterations,
        basis=basis,
    )
    return sol, rep


def solve(lp: LinearProgram, tol: float = 1e-8, warm_start: Basis = None, dual: bool = True) -> LpSolution:
    """Solve ``lp`` to optimality, infeasibility or unboundedness.

    Parameters
    ----------
    lp : LinearProgram
    tol : float
        Bound on primal residual, dual residual and relative duality gap
        required before an optimal answer is returned.
    warm_start : Basis, optional
        Basis from an earlier solve of an LP with the same matrix shape. If it
        is not primal feasible for ``lp`` it is repaired by dual simplex
        pivots when ``dual`` is set, otherwise discarded.

    Raises
    ------
    NumericalFailure
        If no attempt (default pivoting, then Bland's rule from scratch)
        meets ``tol``.
    """
    attempts = [(None, False), (None, True)]
    if warm_start is not None:
        attempts.insert(0, (warm_start, False))
    worst = None
    for warm, bland in attempts:
        try:
            sol, rep = _attempt(lp, tol, warm, bland, dual)
        except NumericalFailure as exc:
            worst = str(exc)
            continue
        if rep is None or rep.worst() <= tol:
            return sol
        worst = f"tolerance report {rep}"
    raise NumericalFailure(f"LP solve failed after refinement attempts: {worst}")


class BasisCache:
    """Recent optimal bases for a family of LPs sharing matrix and cost structure.

    Only the right-hand side (and bounds) may change between solves. A cached
    basis that stays primal feasible is optimal at once because reduced costs
    do not depend on the right-hand side; otherwise the most recent basis is
    still dual feasible and a few dual simplex pivots finish the solve.
    """

    def __init__(self, size=8):
        self.size = size
        self.bases = []

    def solve(self, lp: LinearProgram, tol: float = 1e-8) -> LpSolution:
        sx = _Simplex(lp)
        for i, basis in enumerate(self.bases):
            if sx.start_warm(basis):
                try:
                    sol, rep = _finish(sx, lp, False)
                except NumericalFailure:
                    break
                if rep is not None and rep.worst() > tol:
                    break
                if sol.optimal and i:
                    self.bases.insert(0, self.bases.pop(i))
                return sol
        # no cached basis is primal feasible: repair the most recent one
        sol = solve(lp, tol, warm_start=self.bases[0] if self.bases else None)
        if sol.optimal and sol.basis is not None:
            self.bases.insert(0, sol.basis)
            del self.bases[self.size :]
        return sol


def _mps_num(v):
    s = f"{v:.12g}"
    return s if len(s) <= 12 else f"{v:.6e}"


def write_mps(lp: LinearProgram, path, name="LP"):
    """Write ``lp`` as a fixed-column MPS file (minimization)."""
    rows = [f"G{i}" for i in range(lp.n_ineq)] + [f"E{i}" for i in range(lp.n_eq)]
    lines = [f"NAME          {name}", "ROWS", " N  COST"]
    lines += [f" L  {r}" for r in rows[: lp.n_ineq]]
    lines += [f" E  {r}" for r in rows[lp.n_ineq :]]
    lines.append("COLUMNS")
    M = np.vstack([lp.G, lp.E]) if rows else np.zeros((0, lp.n))
    for j in range(lp.n):
        col = f"X{j}"
        entries = [("COST", lp.c[j])] if lp.c[j] != 0 else []
        entries += [(rows[i], M[i, j]) for i in np.flatnonzero(M[:, j])]
        if not entries:
            entries = [("COST", 0.0)]
        for r, v in entries:
            lines.append(f"    {col:<8}  {r:<8}  {_mps_num(v):>12}")
    lines.append("RHS")
    rhs = np.concatenate([lp.g, lp.e])
    for i in np.flatnonzero(rhs):
        lines.append(f"    {'RHS':<8}  {rows[i]:<8}  {_mps_num(rhs[i]):>12}")
    lines.append("BOUNDS")
    for j in range(lp.n):
        col = f"X{j}"
        lo, hi = lp.lb[j], lp.ub[j]
        if lo == -np.inf and hi == np.inf:
            lines.append(f" FR BND       {col:<8}")
            continue
        if lo == hi:
            lines.append(f" FX BND       {col:<8}  {_mps_num(lo):>12}")
            continue
        if lo == -np.inf:
            lines.append(f" MI BND       {col:<8}")
        elif lo != 0:
            lines.append(f" LO BND       {col:<8}  {_mps_num(lo):>12}")
        if hi != np.inf:
            lines.append(f" UP BND       {col:<8}  {_mps_num(hi):>12}")
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
