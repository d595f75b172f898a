"""Linear programs with certified optimality.

The problem form is

    min c·v   subject to   A_ub·v <= b_ub,   lo <= v <= hi.

``solve`` delegates the vertex search to a mature simplex/IPM backend
(HiGHS via scipy), then certifies the answer itself: primal feasibility
residuals and a duality-gap bound are recomputed here from the returned
multipliers rather than trusted from the backend, and a result is only
reported "optimal" if the recomputed certificate passes. ``check_solution``
runs the same audit for an arbitrary candidate point and never invokes the
solver, so it stays an independent validation path.

Correctness is defined by the dense semantics of (c, A_ub, b_ub, bounds);
A_ub may be held as a scipy.sparse matrix purely as a storage optimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import SolverError

__all__ = [
    "LinearProgram",
    "LpSolution",
    "CheckReport",
    "solve",
    "check_solution",
    "dump",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


def _as_matrix(a) -> sp.csr_matrix | np.ndarray:
    if sp.issparse(a):
        return a.tocsr()
    return np.asarray(a, dtype=float)


@dataclass(frozen=True)
class LinearProgram:
    """Immutable LP in inequality form; bounds row j is [lo_j, hi_j]."""

    c: np.ndarray
    A_ub: object  # (n_rows, n_vars) ndarray or scipy.sparse matrix
    b_ub: np.ndarray
    bounds: np.ndarray  # (n_vars, 2); +-inf allowed
    n_vars: int = field(init=False)
    n_rows: int = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        a = _as_matrix(self.A_ub)
        b = np.asarray(self.b_ub, dtype=float)
        bounds = np.asarray(self.bounds, dtype=float)
        n_vars = c.shape[0]
        n_rows = a.shape[0]
        if c.ndim != 1:
            raise ValueError("c must be one-dimensional")
        if a.ndim != 2 or a.shape[1] != n_vars:
            raise ValueError(f"A_ub must be (n_rows, {n_vars})")
        if b.shape != (n_rows,):
            raise ValueError("b_ub length must match A_ub rows")
        if bounds.shape != (n_vars, 2):
            raise ValueError("bounds must be (n_vars, 2)")
        data = a.data if sp.issparse(a) else a
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(data)) and np.all(np.isfinite(b))):
            raise ValueError("c, A_ub, b_ub must be finite")
        if np.any(np.isnan(bounds)) or np.any(bounds[:, 0] > bounds[:, 1]):
            raise ValueError("bounds must satisfy lo <= hi")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_ub", a)
        object.__setattr__(self, "b_ub", b)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "n_vars", n_vars)
        object.__setattr__(self, "n_rows", n_rows)

    def dense_A(self) -> np.ndarray:
        a = self.A_ub
        return a.toarray() if sp.issparse(a) else np.array(a)


@dataclass(frozen=True)
class LpSolution:
    """Solver output plus the dual multipliers needed to re-certify it.

    duality_gap_bound is a one-sided bound: objective - (certified lower
    bound on the true optimum), always >= 0 up to arithmetic noise.
    """

    v: np.ndarray
    objective: float
    status: str
    duality_gap_bound: float
    dual_ineq: np.ndarray | None = None  # multipliers for A_ub·v <= b_ub, >= 0
    dual_lower: np.ndarray | None = None  # multipliers for v >= lo, >= 0
    dual_upper: np.ndarray | None = None  # multipliers for v <= hi, >= 0


@dataclass(frozen=True)
class CheckReport:
    """Independent audit of a candidate solution."""

    violations: tuple[str, ...]
    max_primal_violation: float
    duality_gap_bound: float | None
    ok: bool


def _row_scales(lp: LinearProgram) -> np.ndarray:
    """Per-row normalization max(1, |b_i|, max_j |A_ij|)."""
    a = lp.A_ub
    if lp.n_rows == 0:
        return np.ones(0)
    if sp.issparse(a):
        absmax = np.zeros(lp.n_rows)
        abs_a = abs(a)
        row_max = abs_a.max(axis=1)
        absmax = row_max.toarray().ravel() if sp.issparse(row_max) else np.asarray(row_max).ravel()
    else:
        absmax = np.max(np.abs(a), axis=1) if lp.n_vars else np.zeros(lp.n_rows)
    return np.maximum(1.0, np.maximum(np.abs(lp.b_ub), absmax))


def _primal_violations(lp: LinearProgram, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(normalized row violations, normalized bound violations)."""
    if lp.n_rows:
        resid = lp.A_ub @ v - lp.b_ub
        rows = np.maximum(0.0, resid) / _row_scales(lp)
    else:
        rows = np.zeros(0)
    lo, hi = lp.bounds[:, 0], lp.bounds[:, 1]
    scale = np.maximum(1.0, np.maximum(np.abs(np.where(np.isfinite(lo), lo, 0.0)),
                                       np.abs(np.where(np.isfinite(hi), hi, 0.0))))
    below = np.where(np.isfinite(lo), np.maximum(0.0, lo - v), 0.0) / scale
    above = np.where(np.isfinite(hi), np.maximum(0.0, v - hi), 0.0) / scale
    return rows, np.maximum(below, above)


def _certified_gap(
    lp: LinearProgram,
    v: np.ndarray,
    lam: np.ndarray,
    mu_lo: np.ndarray,
    mu_hi: np.ndarray,
) -> float:
    """Duality-gap bound from candidate multipliers, recomputed from scratch.

    Multipliers are clipped to their sign constraints and zeroed on infinite
    bounds; whatever stationarity residual r = c + A^T·lam - mu_lo + mu_hi
    remains is charged to the bound as sum_j |r_j|·box_j, where box_j is the
    largest |v_j| the box allows (|v_j|+1 when the box is unbounded, which
    keeps the bound honest rather than rigorous in that case).
    """
    lo, hi = lp.bounds[:, 0], lp.bounds[:, 1]
    lam = np.maximum(0.0, lam)
    mu_lo = np.where(np.isfinite(lo), np.maximum(0.0, mu_lo), 0.0)
    mu_hi = np.where(np.isfinite(hi), np.maximum(0.0, mu_hi), 0.0)

    if lp.n_rows:
        r = lp.c + lp.A_ub.T @ lam - mu_lo + mu_hi
        dual_obj = -float(lam @ lp.b_ub)
    else:
        r = lp.c - mu_lo + mu_hi
        dual_obj = 0.0
    dual_obj += float(np.sum(np.where(mu_lo > 0, mu_lo * lo, 0.0)))
    dual_obj -= float(np.sum(np.where(mu_hi > 0, mu_hi * hi, 0.0)))

    box = np.where(
        np.isfinite(lo) & np.isfinite(hi),
        np.maximum(np.abs(lo), np.abs(hi)),
        np.abs(v) + 1.0,
    )
    leak = float(np.abs(r) @ box)
    primal_obj = float(lp.c @ v)
    return max(0.0, primal_obj - dual_obj) + leak


def solve(lp: LinearProgram, tol_feas: float = 1e-9, tol_gap: float | None = None) -> LpSolution:
    """Solve to certified optimality.

    tol_feas bounds the normalized primal residuals; tol_gap bounds the
    recomputed duality gap and defaults to 1e-7·(1+|objective|). Infeasible
    and unbounded problems come back as a status, numerical failures raise
    SolverError — never a silent wrong answer.
    """
    a_ub = lp.A_ub if lp.n_rows else None
    b_ub = lp.b_ub if lp.n_rows else None
    res = linprog(
        lp.c,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=lp.bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": min(tol_feas, 1e-9),
            "dual_feasibility_tolerance": min(tol_feas, 1e-9),
        },
    )
    if res.status == 2:
        return LpSolution(v=np.full(lp.n_vars, np.nan), objective=np.nan, status=INFEASIBLE, duality_gap_bound=np.inf)
    if res.status == 3:
        return LpSolution(v=np.full(lp.n_vars, np.nan), objective=-np.inf, status=UNBOUNDED, duality_gap_bound=np.inf)
    if res.status != 0:
        raise SolverError(f"LP backend failed: status={res.status} ({res.message})")

    v = np.asarray(res.x, dtype=float)
    objective = float(lp.c @ v)

    if lp.n_rows:
        lam = np.maximum(0.0, -np.asarray(res.ineqlin.marginals, dtype=float))
    else:
        lam = np.zeros(0)
    mu_lo = np.maximum(0.0, np.asarray(res.lower.marginals, dtype=float))
    mu_hi = np.maximum(0.0, -np.asarray(res.upper.marginals, dtype=float))

    rows, bnds = _primal_violations(lp, v)
    worst = max(rows.max() if rows.size else 0.0, bnds.max() if bnds.size else 0.0)
    if worst > tol_feas:
        raise SolverError(f"backend returned primal-infeasible point (normalized violation {worst:.3e})")

    gap = _certified_gap(lp, v, lam, mu_lo, mu_hi)
    limit = tol_gap if tol_gap is not None else 1e-7 * (1.0 + abs(objective))
    if gap > limit:
        raise SolverError(f"optimality certificate failed: gap bound {gap:.3e} > {limit:.3e}")

    return LpSolution(
        v=v,
        objective=objective,
        status=OPTIMAL,
        duality_gap_bound=gap,
        dual_ineq=lam,
        dual_lower=mu_lo,
        dual_upper=mu_hi,
    )


def check_solution(
    lp: LinearProgram,
    sol: LpSolution,
    tol_feas: float = 1e-9,
    tol_gap: float | None = None,
) -> CheckReport:
    """Audit a candidate point without calling the solver.

    Recomputes primal residuals row by row; when the solution carries dual
    multipliers, also recomputes the duality-gap bound and the complementary
    slackness residuals. Violations are returned as human-readable strings.
    """
    violations: list[str] = []
    v = np.asarray(sol.v, dtype=float)
    if v.shape != (lp.n_vars,):
        return CheckReport(
            violations=(f"solution has shape {v.shape}, expected ({lp.n_vars},)",),
            max_primal_violation=np.inf,
            duality_gap_bound=None,
            ok=False,
        )

    rows, bnds = _primal_violations(lp, v)
    for i in np.flatnonzero(rows > tol_feas):
        violations.append(f"row {i}: violation {rows[i]:.3e}")
    for j in np.flatnonzero(bnds > tol_feas):
        violations.append(f"bound {j}: violation {bnds[j]:.3e}")
    worst = max(rows.max() if rows.size else 0.0, bnds.max() if bnds.size else 0.0)

    gap = None
    if sol.dual_ineq is not None and sol.dual_lower is not None and sol.dual_upper is not None:
        gap = _certified_gap(lp, v, sol.dual_ineq, sol.dual_lower, sol.dual_upper)
        limit = tol_gap if tol_gap is not None else 1e-7 * (1.0 + abs(float(lp.c @ v)))
        if gap > limit:
            violations.append(f"duality gap bound {gap:.3e} > {limit:.3e}")
        if lp.n_rows:
            slack = lp.b_ub - lp.A_ub @ v
            comp = np.abs(sol.dual_ineq * slack) / _row_scales(lp)
            for i in np.flatnonzero(comp > np.sqrt(max(tol_feas, 1e-16))):
                violations.append(f"complementary slackness row {i}: {comp[i]:.3e}")

    return CheckReport(
        violations=tuple(violations),
        max_primal_violation=float(worst),
        duality_gap_bound=gap,
        ok=not violations,
    )


def dump(lp: LinearProgram, stream) -> None:
    """Write the LP in a plain-text format for external cross-checking.

    Format: a comment header, one ``min:`` objective line, one line per
    inequality row (``r<k>: <coef> v<j> ... <= <rhs>``, nonzero
    coefficients only), then one ``<lo> <= v<j> <= <hi>`` line per
    variable. Numbers are repr-exact floats.
    """
    stream.write(f"# lp n_vars={lp.n_vars} n_rows={lp.n_rows}\n")
    terms = " + ".join(f"{float(lp.c[j])!r} v{j}" for j in range(lp.n_vars) if lp.c[j] != 0.0) or "0"
    stream.write(f"min: {terms}\n")
    a = lp.A_ub
    if sp.issparse(a):
        a = a.tocsr()
        for i in range(lp.n_rows):
            sl = slice(a.indptr[i], a.indptr[i + 1])
            row_terms = " + ".join(f"{float(val)!r} v{j}" for j, val in zip(a.indices[sl], a.data[sl]) if val != 0.0) or "0"
            stream.write(f"r{i}: {row_terms} <= {float(lp.b_ub[i])!r}\n")
    else:
        for i in range(lp.n_rows):
            row_terms = " + ".join(f"{float(a[i, j])!r} v{j}" for j in range(lp.n_vars) if a[i, j] != 0.0) or "0"
            stream.write(f"r{i}: {row_terms} <= {float(lp.b_ub[i])!r}\n")
    for j in range(lp.n_vars):
        stream.write(f"{float(lp.bounds[j, 0])!r} <= v{j} <= {float(lp.bounds[j, 1])!r}\n")
