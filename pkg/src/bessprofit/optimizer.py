"""Co-optimized battery dispatch under ToU prices, zero feed-in, and a peak cap.

The dispatch problem minimizes the billed import cost over the horizon.
Per step i the stored-energy change is split into a charge part x_plus_i
and a discharge part x_minus_i (both >= 0); the grid side of the battery
is s_i = x_plus_i/eta_ch − eta_dis·x_minus_i, the billed energy is
theta_i = max(0, z_i + s_i), and import power (z_i + s_i)/h must stay
under the contracted cap. Exports earn nothing. A friction coefficient
eta_fric in (0, 1] worsens the efficiencies *inside the billing
constraint only*, which suppresses low-margin transactions; the physical
SoC dynamics and the peak constraint always use the true efficiencies.

The LP uses variables (x_plus_i, x_minus_i, theta_i, b_i) per step; the
SoC variables b_i carry the recursion b_i = b_{i−1} + x_plus_i − x_minus_i
as banded equality rows, algebraically equivalent to cumulative-sum
bounds. A tiny epsilon penalty on total battery movement breaks the
degeneracy that would otherwise allow cost-free simultaneous
charge+discharge whenever z_i + s_i < 0.

``validate_dispatch`` re-derives every constraint from the returned
arrays with plain numpy and never touches the LP machinery, and
``dp_oracle`` solves small instances exactly by backward dynamic
programming over an SoC grid; together they are the independent checks
of the LP path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import lp as lp_mod
from .battery import BatterySpec
from .errors import InfeasibleDispatchError, SolverError
from .timeseries import PpcLevel, PpcSchedule, ScenarioSeries

__all__ = [
    "DispatchProblem",
    "DispatchSolution",
    "PpcSelection",
    "DpDispatch",
    "build_lp",
    "solve_dispatch",
    "select_ppc",
    "validate_dispatch",
    "dp_oracle",
    "DEFAULT_EPSILON",
]

DEFAULT_EPSILON = 1e-6  # €/kWh tie-break on battery movement
_DUST = 1e-12  # kWh; solver residue below this is treated as zero


@dataclass(frozen=True)
class DispatchProblem:
    """One dispatch instance: scenario, battery, peak cap (kW), friction."""

    scenario: ScenarioSeries
    spec: BatterySpec
    p_max_set: float = np.inf
    eta_fric: float = 1.0

    def __post_init__(self):
        if not (0 < self.eta_fric <= 1):
            raise ValueError("eta_fric must be in (0, 1]")
        if not self.p_max_set >= 0:
            raise ValueError("p_max_set must be >= 0")


@dataclass(frozen=True)
class DispatchSolution:
    """Optimal dispatch, re-expressed with the true (unfrictioned) mapping.

    x_plus/x_minus are per-step charge/discharge energies (kWh), s the
    grid-side storage energy, b the end-of-step SoC, theta the billed
    energy max(0, z + s), and energy_cost = Σ price·theta in €.
    lp_objective retains the raw LP objective (h-scaled billing under
    friction plus the epsilon tie-break) for oracle comparisons;
    billed_cost is that objective with the tie-break removed.
    """

    x_plus: np.ndarray
    x_minus: np.ndarray
    s: np.ndarray
    b: np.ndarray
    theta: np.ndarray
    energy_cost: float
    status: str
    lp_objective: float = np.nan
    billed_cost: float = np.nan
    duality_gap_bound: float = np.nan
    eta_fric: float = 1.0

    @property
    def x(self) -> np.ndarray:
        return self.x_plus - self.x_minus

    def soc_trajectory(self, b_0: float) -> np.ndarray:
        """SoC including the initial state, for cycle counting."""
        return np.concatenate(([b_0], self.b))


def _theta_upper_bounds(prob: DispatchProblem, z: np.ndarray) -> np.ndarray:
    # theta never needs to exceed the largest possible billing RHS, and a
    # finite box makes the LP's optimality certificate rigorous.
    spec = prob.spec
    h = prob.scenario.h
    s_fric_hi = spec.delta_max_kw * h / (spec.eta_ch * prob.eta_fric)
    return np.maximum(0.0, z + s_fric_hi)


def build_lp(
    prob: DispatchProblem,
    epsilon: float = DEFAULT_EPSILON,
    terminal_soc: bool = False,
) -> lp_mod.LinearProgram:
    """Assemble the dispatch LP.

    Variable layout, n = step count: x_plus [0, n), x_minus [n, 2n),
    theta [2n, 3n), b [3n, 4n). Objective Σ price_i·theta_i plus
    epsilon·Σ(x_plus_i + x_minus_i). Rows: billing
    theta_i >= z_i + s_fric_i; peak (z_i + s_i) <= p_max_set·h (skipped
    when the cap is infinite); the SoC recursion as <=/>= pairs. Ramp
    limits and SoC box are variable bounds. With terminal_soc the final
    SoC must end at or above its initial value.
    """
    scenario, spec = prob.scenario, prob.spec
    n, h = scenario.n, scenario.h
    z = scenario.load - scenario.pv

    xp = np.arange(n)
    xm = n + xp
    th = 2 * n + xp
    bb = 3 * n + xp
    n_vars = 4 * n

    c = np.zeros(n_vars)
    c[th] = scenario.price
    c[xp] = epsilon
    c[xm] = epsilon

    bounds = np.empty((n_vars, 2))
    bounds[xp] = [0.0, 0.0]
    bounds[xp, 1] = spec.delta_max_kw * h
    bounds[xm] = [0.0, 0.0]
    bounds[xm, 1] = -spec.delta_min_kw * h
    bounds[th, 0] = 0.0
    bounds[th, 1] = _theta_upper_bounds(prob, z)
    bounds[bb, 0] = spec.b_min
    bounds[bb, 1] = spec.b_max

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    rhs: list[np.ndarray] = []
    row_base = 0

    def add_block(r, cl, dt, b_block):
        nonlocal row_base
        rows.append(np.asarray(r) + row_base)
        cols.append(np.asarray(cl))
        data.append(np.asarray(dt, dtype=float))
        rhs.append(np.asarray(b_block, dtype=float))
        row_base += len(b_block)

    # billing: -theta_i + a_ch·x_plus_i - a_dis·x_minus_i <= -z_i
    a_ch = 1.0 / (spec.eta_ch * prob.eta_fric)
    a_dis = spec.eta_dis * prob.eta_fric
    r = np.repeat(xp, 3)
    add_block(
        r,
        np.column_stack((th, xp, xm)).ravel(),
        np.tile([-1.0, a_ch, -a_dis], n),
        -z,
    )

    # peak cap: x_plus_i/eta_ch - eta_dis·x_minus_i <= p_max_set·h - z_i
    if np.isfinite(prob.p_max_set):
        add_block(
            np.repeat(xp, 2),
            np.column_stack((xp, xm)).ravel(),
            np.tile([1.0 / spec.eta_ch, -spec.eta_dis], n),
            prob.p_max_set * h - z,
        )

    # SoC recursion b_i - b_{i-1} - x_plus_i + x_minus_i = (b_0 if i == 0 else 0),
    # written as a <= pair per step.
    eq_rhs = np.zeros(n)
    eq_rhs[0] = spec.b_0
    ridx: list[int] = []
    cidx: list[int] = []
    vals: list[float] = []
    for i in range(n):
        cs = [bb[i], xp[i], xm[i]]
        vs = [1.0, -1.0, 1.0]
        if i > 0:
            cs.append(bb[i - 1])
            vs.append(-1.0)
        ridx.extend([i] * len(cs))
        cidx.extend(cs)
        vals.extend(vs)
    ridx = np.asarray(ridx)
    cidx = np.asarray(cidx)
    vals = np.asarray(vals, dtype=float)
    add_block(ridx, cidx, vals, eq_rhs)
    add_block(ridx, cidx, -vals, -eq_rhs)

    if terminal_soc:
        add_block([0], [bb[-1]], [-1.0], [-spec.b_0])

    a_ub = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(row_base, n_vars),
    ).tocsr()
    return lp_mod.LinearProgram(c=c, A_ub=a_ub, b_ub=np.concatenate(rhs), bounds=bounds)


def _infeasible_step(prob: DispatchProblem) -> int | None:
    """Step whose peak cap cannot be met even at full discharge, if any."""
    if not np.isfinite(prob.p_max_set):
        return None
    scenario, spec = prob.scenario, prob.spec
    z = scenario.load - scenario.pv
    s_lo = spec.delta_min_kw * scenario.h * spec.eta_dis
    bad = np.flatnonzero(z + s_lo > prob.p_max_set * scenario.h + 1e-9)
    return int(bad[0]) if bad.size else None


def solve_dispatch(
    prob: DispatchProblem,
    epsilon: float = DEFAULT_EPSILON,
    terminal_soc: bool = False,
    tol_feas: float = 1e-9,
    tol_gap: float | None = None,
) -> DispatchSolution:
    """Solve the dispatch LP and re-express the solution with true efficiencies.

    Raises InfeasibleDispatchError (with the violating step index when one
    exists) if the peak cap is unreachable, and SolverError on a backend
    failure. The returned energy_cost uses the true billing
    Σ price·max(0, z + s); it never exceeds the no-battery baseline cost.
    """
    scenario, spec = prob.scenario, prob.spec
    program = build_lp(prob, epsilon=epsilon, terminal_soc=terminal_soc)
    sol = lp_mod.solve(program, tol_feas=tol_feas, tol_gap=tol_gap)
    if sol.status == lp_mod.INFEASIBLE:
        step = _infeasible_step(prob)
        detail = f" at step {step}" if step is not None else ""
        raise InfeasibleDispatchError(
            f"peak cap {prob.p_max_set} kW unreachable{detail}", step=step
        )
    if sol.status != lp_mod.OPTIMAL:
        raise SolverError(f"dispatch solve ended with status {sol.status}")

    n = scenario.n
    x_plus = np.clip(sol.v[0:n], 0.0, None)
    x_minus = np.clip(sol.v[n : 2 * n], 0.0, None)
    x_plus[x_plus < _DUST] = 0.0
    x_minus[x_minus < _DUST] = 0.0

    z = scenario.load - scenario.pv
    s = x_plus / spec.eta_ch - spec.eta_dis * x_minus
    b = spec.b_0 + np.cumsum(x_plus - x_minus)
    theta = np.maximum(0.0, z + s)
    energy_cost = float(np.sum(scenario.price * theta))
    tie_break = epsilon * float(np.sum(sol.v[0:n]) + np.sum(sol.v[n : 2 * n]))

    return DispatchSolution(
        x_plus=x_plus,
        x_minus=x_minus,
        s=s,
        b=b,
        theta=theta,
        energy_cost=energy_cost,
        status=sol.status,
        lp_objective=sol.objective,
        billed_cost=sol.objective - tie_break,
        duality_gap_bound=sol.duality_gap_bound,
        eta_fric=prob.eta_fric,
    )


def validate_dispatch(
    prob: DispatchProblem,
    dispatch: DispatchSolution,
    tol: float = 1e-7,
) -> list[str]:
    """Independent constraint audit of a dispatch; returns violation messages.

    Recomputes, with plain array arithmetic only: the ramp limits, the SoC
    recursion and box, the grid-side mapping, billed-energy non-negativity
    and the true billing inequality, the peak cap, the billing identity
    theta = max(0, z + s) wherever the price is positive, and the reported
    energy cost. The friction-modified billing is intentionally not
    checked: the returned dispatch must stand on the original semantics.
    """
    scenario, spec = prob.scenario, prob.spec
    h = scenario.h
    z = scenario.load - scenario.pv
    out: list[str] = []

    def flag(mask: np.ndarray, label: str, values: np.ndarray):
        idx = np.flatnonzero(mask)
        for i in idx[:5]:
            out.append(f"{label} at step {i}: {values[i]:.3e}")
        if idx.size > 5:
            out.append(f"{label}: {idx.size - 5} more steps")

    xp, xm = dispatch.x_plus, dispatch.x_minus
    flag(xp < -tol, "negative charge energy", xp)
    flag(xm < -tol, "negative discharge energy", xm)
    over_p = xp - spec.delta_max_kw * h
    over_m = xm - (-spec.delta_min_kw * h)
    flag(over_p > tol, "charge ramp exceeded", over_p)
    flag(over_m > tol, "discharge ramp exceeded", over_m)

    b_expect = spec.b_0 + np.cumsum(xp - xm)
    drift = np.abs(dispatch.b - b_expect)
    flag(drift > tol, "SoC recursion drift", drift)
    flag(dispatch.b < spec.b_min - tol, "SoC below minimum", dispatch.b)
    flag(dispatch.b > spec.b_max + tol, "SoC above maximum", dispatch.b)

    s_expect = xp / spec.eta_ch - spec.eta_dis * xm
    s_err = np.abs(dispatch.s - s_expect)
    flag(s_err > tol, "grid-side mapping error", s_err)

    theta = dispatch.theta
    flag(theta < -tol, "negative billed energy", theta)
    billing_gap = (z + dispatch.s) - theta
    flag(billing_gap > tol, "billed energy below net import", billing_gap)
    if np.isfinite(prob.p_max_set):
        peak_kw = (z + dispatch.s) / h
        over = peak_kw - prob.p_max_set
        flag(over > tol, "peak cap exceeded (kW)", over)

    priced = scenario.price > 0
    theta_err = np.abs(theta - np.maximum(0.0, z + dispatch.s))
    flag(priced & (theta_err > tol), "billed energy != max(0, z+s)", theta_err)

    cost = float(np.sum(scenario.price * theta))
    if abs(cost - dispatch.energy_cost) > tol * (1.0 + abs(cost)):
        out.append(f"energy_cost mismatch: reported {dispatch.energy_cost!r}, recomputed {cost!r}")
    return out


@dataclass(frozen=True)
class PpcSelection:
    """Outcome of the peak-contract choice for one battery candidate."""

    level: PpcLevel
    old_level: PpcLevel
    p_max_set: float
    g_pd: float
    dispatch: DispatchSolution


def select_ppc(
    scenario: ScenarioSeries,
    spec: BatterySpec,
    ppc: PpcSchedule,
    old_level_kva: float | None = None,
    eta_fric: float = 1.0,
    epsilon: float = DEFAULT_EPSILON,
    terminal_soc: bool = False,
) -> PpcSelection:
    """Pick the cheapest workable peak-power contract level.

    The candidate threshold is the baseline peak import power plus the
    battery's (negative) discharge power; the chosen level is the smallest
    level at or above that threshold whose dispatch is feasible, never
    above the currently contracted level. The €-gain is the per-day price
    difference times the window's day count, floored at zero. The dispatch
    solved at the chosen cap is returned so callers don't re-solve.
    """
    z = scenario.load - scenario.pv
    peak_kw = float(np.max(z)) / scenario.h
    if old_level_kva is not None:
        old = ppc.level_for(old_level_kva)
    else:
        old = ppc.smallest_covering(peak_kw)
        if old is None:
            raise InfeasibleDispatchError(
                f"baseline peak {peak_kw:.2f} kW exceeds the largest PPC level"
            )

    threshold = peak_kw + spec.delta_min_kw
    candidates = [lv for lv in ppc.levels if lv.kva >= threshold and lv.kva < old.kva]

    chosen: PpcLevel | None = None
    dispatch: DispatchSolution | None = None
    for level in candidates:
        try:
            dispatch = solve_dispatch(
                DispatchProblem(scenario, spec, p_max_set=level.kva, eta_fric=eta_fric),
                epsilon=epsilon,
                terminal_soc=terminal_soc,
            )
        except InfeasibleDispatchError:
            continue
        chosen = level
        break
    if chosen is None:
        chosen = old
        dispatch = solve_dispatch(
            DispatchProblem(scenario, spec, p_max_set=old.kva, eta_fric=eta_fric),
            epsilon=epsilon,
            terminal_soc=terminal_soc,
        )

    g_pd = max(0.0, (old.eur_per_day - chosen.eur_per_day) * scenario.day_count)
    return PpcSelection(
        level=chosen,
        old_level=old,
        p_max_set=chosen.kva,
        g_pd=g_pd,
        dispatch=dispatch,
    )


@dataclass(frozen=True)
class DpDispatch:
    """Exact grid-restricted optimum from the dynamic-programming oracle."""

    cost: float
    x: np.ndarray
    b: np.ndarray  # end-of-step SoC, length n


def dp_oracle(
    prob: DispatchProblem,
    soc_grid_step: float,
    max_steps: int = 50,
    max_grid_points: int = 801,
) -> DpDispatch:
    """Exact optimum of the SoC-grid-restricted dispatch, for tests only.

    Backward induction over a uniform SoC grid anchored at b_min. Stage
    cost mirrors the LP billing objective (price·max(0, z + s_fric))
    without the tie-break term; the peak cap uses the true grid-side
    energy, like the LP. Refuses instances that are too long or grids
    that are too fine, and requires b_0 and b_max on the grid.
    """
    scenario, spec = prob.scenario, prob.spec
    n, h = scenario.n, scenario.h
    if n > max_steps:
        raise ValueError(f"dp_oracle refuses n={n} > {max_steps} steps")
    if soc_grid_step <= 0:
        raise ValueError("soc_grid_step must be > 0")
    span = spec.b_max - spec.b_min
    n_points = int(round(span / soc_grid_step)) + 1
    if n_points > max_grid_points:
        raise ValueError(f"dp_oracle refuses grid of {n_points} points > {max_grid_points}")
    if abs(spec.b_min + (n_points - 1) * soc_grid_step - spec.b_max) > 1e-9:
        raise ValueError("b_max - b_min must be an integer number of grid steps")
    grid = spec.b_min + soc_grid_step * np.arange(n_points)
    start = int(round((spec.b_0 - spec.b_min) / soc_grid_step))
    if not (0 <= start < n_points) or abs(grid[start] - spec.b_0) > 1e-9:
        raise ValueError("b_0 must lie on the SoC grid")

    z = scenario.load - scenario.pv
    price = scenario.price

    # action matrix: x[a, a'] = grid[a'] - grid[a]
    x_mat = grid[None, :] - grid[:, None]
    xp = np.maximum(0.0, x_mat)
    xm = np.maximum(0.0, -x_mat)
    feasible = (xp <= spec.delta_max_kw * h + 1e-12) & (xm <= -spec.delta_min_kw * h + 1e-12)
    s_true = xp / spec.eta_ch - spec.eta_dis * xm
    s_fric = xp / (spec.eta_ch * prob.eta_fric) - spec.eta_dis * prob.eta_fric * xm

    value = np.zeros(n_points)
    choice = np.empty((n, n_points), dtype=np.int32)
    for i in range(n - 1, -1, -1):
        stage = price[i] * np.maximum(0.0, z[i] + s_fric)
        allowed = feasible.copy()
        if np.isfinite(prob.p_max_set):
            allowed &= z[i] + s_true <= prob.p_max_set * h + 1e-12
        total = np.where(allowed, stage + value[None, :], np.inf)
        choice[i] = np.argmin(total, axis=1)
        value = total[np.arange(n_points), choice[i]]

    if not np.isfinite(value[start]):
        step = _infeasible_step(prob)
        raise InfeasibleDispatchError("dp_oracle: no feasible SoC path", step=step)

    x = np.empty(n)
    b = np.empty(n)
    state = start
    for i in range(n):
        nxt = int(choice[i][state])
        x[i] = grid[nxt] - grid[state]
        b[i] = grid[nxt]
        state = nxt
    return DpDispatch(cost=float(value[start]), x=x, b=b)
