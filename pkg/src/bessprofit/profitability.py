"""Per-candidate storage economics: gains, per-cycle profit, payback, verdict.

The pipeline per battery candidate is: solve the dispatch (usually via
the peak-contract selection), price the dispatch against the no-battery
baseline (g_arb), add the contract saving (g_pd), count equivalent
100%-DoD cycles on the SoC trajectory, convert to per-cycle profit net of
the battery's per-cycle cost, and derive the expected payback. A
candidate passes when the per-cycle profit is positive and the payback
beats the calendar life.

``tune_friction`` throttles an over-cycling candidate down to a cycle
budget by searching the friction coefficient; the peak-contract level is
selected once at eta_fric = 1 and held fixed during the search so the
cycle count responds to friction alone.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .battery import BatterySpec, battery_cost
from .cycles import CycleCount, DamageModel, break_even_cycles, count_cycles
from .optimizer import (
    DEFAULT_EPSILON,
    DispatchProblem,
    DispatchSolution,
    PpcSelection,
    select_ppc,
    solve_dispatch,
)
from .timeseries import PpcSchedule, ScenarioSeries, baseline_metrics

__all__ = [
    "ProfitabilityReport",
    "TuningResult",
    "evaluate",
    "evaluate_candidate",
    "tune_friction",
    "rank_candidates",
    "HOURS_PER_YEAR",
]

logger = logging.getLogger(__name__)

HOURS_PER_YEAR = 365.25 * 24.0


@dataclass(frozen=True)
class ProfitabilityReport:
    """Economics of one battery candidate over one scenario window."""

    battery: BatterySpec
    g_arb: float
    g_pd: float
    g_t: float
    n_cyc_100: float
    g_cyc: float
    p_cyc: float
    expb_years: float
    ss: float
    waste: float
    profitable: bool
    eta_fric_used: float
    c_cyc: float
    b_cost: float
    expb_convention: str
    level_kva: float | None = None

    @property
    def name(self) -> str:
        return self.battery.name


def _expected_payback_years(
    b_cost: float,
    g_t: float,
    n_total: int,
    h: float,
    months_12: bool,
) -> float:
    """Payback = battery cost / annualized total gain.

    Calendar-exact: annualized gain = g_t·(hours per year)/(window hours).
    The months-12 convention instead treats a month as 30 days and a year
    as 12 such months, so a 30-day window pays back in B_cost/(12·G_T)
    years; the two conventions differ by the 8766/8640 hour ratio.
    """
    if g_t <= 0:
        return math.inf
    window_hours = n_total * h
    if months_12:
        months = window_hours / 720.0
        annualized = g_t * 12.0 / months
    else:
        annualized = g_t * HOURS_PER_YEAR / window_hours
    return b_cost / annualized


def evaluate(
    scenario: ScenarioSeries,
    spec: BatterySpec,
    dispatch: DispatchSolution,
    ppc_result: PpcSelection | None = None,
    model: DamageModel | None = None,
    months_12: bool = False,
) -> ProfitabilityReport:
    """Score one solved dispatch.

    g_arb is the billing saved versus the no-battery baseline, g_pd the
    peak-contract saving (zero when no contract change was evaluated).
    Self-sufficiency and waste are recomputed on the with-battery net
    load z + s. A non-positive total gain yields an infinite payback and
    an unprofitable verdict.
    """
    if model is None:
        model = DamageModel()
    base = baseline_metrics(scenario)
    cost = battery_cost(spec)

    g_arb = base.energy_cost - dispatch.energy_cost
    g_pd = ppc_result.g_pd if ppc_result is not None else 0.0
    g_t = g_arb + g_pd

    count: CycleCount = count_cycles(dispatch.soc_trajectory(spec.b_0), spec.b_rated, model)
    n_cyc = count.n_cyc_100
    g_cyc = g_t / (n_cyc * spec.b_rated) if n_cyc > 0 else 0.0
    p_cyc = g_cyc - cost.c_cyc

    expb = _expected_payback_years(cost.b_cost, g_t, scenario.n, scenario.h, months_12)

    with_batt = scenario.load - scenario.pv + dispatch.s
    waste = float(np.sum(np.maximum(0.0, -with_batt)))
    grid_import = float(np.sum(np.maximum(0.0, with_batt)))
    total_load = float(np.sum(scenario.load))
    ss = (total_load - grid_import) / total_load

    profitable = p_cyc > 0 and expb < spec.calendar_life_years
    return ProfitabilityReport(
        battery=spec,
        g_arb=g_arb,
        g_pd=g_pd,
        g_t=g_t,
        n_cyc_100=n_cyc,
        g_cyc=g_cyc,
        p_cyc=p_cyc,
        expb_years=expb,
        ss=ss,
        waste=waste,
        profitable=profitable,
        eta_fric_used=dispatch.eta_fric,
        c_cyc=cost.c_cyc,
        b_cost=cost.b_cost,
        expb_convention="months-12" if months_12 else "calendar",
        level_kva=ppc_result.level.kva if ppc_result is not None else None,
    )


def evaluate_candidate(
    scenario: ScenarioSeries,
    spec: BatterySpec,
    ppc: PpcSchedule | None = None,
    old_level_kva: float | None = None,
    model: DamageModel | None = None,
    months_12: bool = False,
    epsilon: float = DEFAULT_EPSILON,
    eta_fric: float = 1.0,
    terminal_soc: bool = False,
) -> tuple[ProfitabilityReport, DispatchSolution, PpcSelection | None]:
    """Full single-candidate pipeline: contract choice, dispatch, scoring."""
    if ppc is not None:
        selection = select_ppc(
            scenario,
            spec,
            ppc,
            old_level_kva=old_level_kva,
            eta_fric=eta_fric,
            epsilon=epsilon,
            terminal_soc=terminal_soc,
        )
        dispatch = selection.dispatch
    else:
        selection = None
        dispatch = solve_dispatch(
            DispatchProblem(scenario, spec, eta_fric=eta_fric),
            epsilon=epsilon,
            terminal_soc=terminal_soc,
        )
    report = evaluate(scenario, spec, dispatch, selection, model, months_12=months_12)
    return report, dispatch, selection


@dataclass(frozen=True)
class TuningResult:
    """Outcome of the friction search for one candidate."""

    eta_fric: float
    report: ProfitabilityReport
    dispatch: DispatchSolution
    untuned_report: ProfitabilityReport
    untuned_dispatch: DispatchSolution
    target_cycles: float
    warning: str | None
    n_solves: int


def _cycles_of(dispatch: DispatchSolution, spec: BatterySpec, model: DamageModel) -> float:
    return count_cycles(dispatch.soc_trajectory(spec.b_0), spec.b_rated, model).n_cyc_100


def tune_friction(
    scenario: ScenarioSeries,
    spec: BatterySpec,
    target_cycles: float | None = None,
    ppc: PpcSchedule | None = None,
    old_level_kva: float | None = None,
    model: DamageModel | None = None,
    months_12: bool = False,
    epsilon: float = DEFAULT_EPSILON,
    eta_min: float = 1e-3,
    cycle_tol: float = 0.5,
    interval_tol: float = 1e-4,
    max_solves: int = 48,
) -> TuningResult:
    """Search eta_fric so the cycle count meets a budget.

    The default budget is the break-even count for the window's day span.
    If the untuned dispatch is already inside the budget the candidate is
    returned unchanged at eta_fric = 1. Otherwise eta_fric is bisected on
    (eta_min, 1]; cycles are assumed non-decreasing in eta_fric, and if a
    sampled pair contradicts that beyond the cycle tolerance the search
    logs it and finishes with a bracket scan instead of pure bisection.
    When even eta_min cannot reach the budget, the boundary result is
    returned with a warning.
    """
    if model is None:
        model = DamageModel()
    if target_cycles is None:
        target_cycles = break_even_cycles(
            spec.cycle_life_100dod, spec.calendar_life_years, horizon_days=scenario.day_count
        )
    if target_cycles <= 0:
        raise ValueError("target_cycles must be > 0")

    # Fix the contract level at eta_fric = 1 so friction only affects billing.
    if ppc is not None:
        selection = select_ppc(scenario, spec, ppc, old_level_kva=old_level_kva, epsilon=epsilon)
        p_max_set = selection.p_max_set
        untuned_dispatch = selection.dispatch
    else:
        selection = None
        p_max_set = math.inf
        untuned_dispatch = solve_dispatch(DispatchProblem(scenario, spec), epsilon=epsilon)
    untuned_report = evaluate(scenario, spec, untuned_dispatch, selection, model, months_12=months_12)
    n_solves = 1

    def result(eta: float, dispatch: DispatchSolution, warning: str | None) -> TuningResult:
        report = evaluate(scenario, spec, dispatch, selection, model, months_12=months_12)
        return TuningResult(
            eta_fric=eta,
            report=report,
            dispatch=dispatch,
            untuned_report=untuned_report,
            untuned_dispatch=untuned_dispatch,
            target_cycles=target_cycles,
            warning=warning,
            n_solves=n_solves,
        )

    cycles_1 = untuned_report.n_cyc_100
    if cycles_1 <= target_cycles + cycle_tol:
        return result(1.0, untuned_dispatch, None)

    def solve_at(eta: float) -> tuple[DispatchSolution, float]:
        nonlocal n_solves
        dispatch = solve_dispatch(
            DispatchProblem(scenario, spec, p_max_set=p_max_set, eta_fric=eta),
            epsilon=epsilon,
        )
        n_solves += 1
        return dispatch, _cycles_of(dispatch, spec, model)

    samples: list[tuple[float, float]] = [(1.0, cycles_1)]
    non_monotone = False

    def record(eta: float, cycles: float):
        nonlocal non_monotone
        samples.append((eta, cycles))
        samples.sort()
        for (e1, c1), (e2, c2) in zip(samples, samples[1:]):
            if c1 > c2 + cycle_tol:
                if not non_monotone:
                    logger.warning(
                        "cycle count not monotone in eta_fric: %.4f->%.2f vs %.4f->%.2f",
                        e1, c1, e2, c2,
                    )
                non_monotone = True

    dispatch_lo, cycles_lo = solve_at(eta_min)
    record(eta_min, cycles_lo)
    if cycles_lo > target_cycles + cycle_tol:
        warning = (
            f"cycle budget {target_cycles:.2f} unreachable: {cycles_lo:.2f} cycles "
            f"at eta_fric = {eta_min}"
        )
        logger.warning(warning)
        return result(eta_min, dispatch_lo, warning)
    if abs(cycles_lo - target_cycles) <= cycle_tol:
        return result(eta_min, dispatch_lo, None)

    lo, hi = eta_min, 1.0
    best: tuple[float, DispatchSolution, float] = (eta_min, dispatch_lo, cycles_lo)
    while hi - lo > interval_tol and n_solves < max_solves:
        mid = 0.5 * (lo + hi)
        dispatch_mid, cycles_mid = solve_at(mid)
        record(mid, cycles_mid)
        if abs(cycles_mid - target_cycles) <= cycle_tol:
            return result(mid, dispatch_mid, None)
        if cycles_mid > target_cycles:
            hi = mid
        else:
            lo = mid
            if cycles_mid > best[2]:
                best = (mid, dispatch_mid, cycles_mid)

    # Bisection ran out without landing inside the tolerance: scan the
    # remaining bracket for the closest under-budget point.
    warning = None
    scan_etas = np.linspace(lo, hi, 7)[1:-1]
    for eta in scan_etas:
        if n_solves >= max_solves:
            break
        dispatch_eta, cycles_eta = solve_at(float(eta))
        record(float(eta), cycles_eta)
        if abs(cycles_eta - target_cycles) <= cycle_tol:
            return result(float(eta), dispatch_eta, None)
        if cycles_eta <= target_cycles and cycles_eta > best[2]:
            best = (float(eta), dispatch_eta, cycles_eta)
    warning = (
        f"bisection finished without meeting |cycles - target| <= {cycle_tol}; "
        f"returning eta_fric = {best[0]:.6f} with {best[2]:.2f} cycles "
        f"(target {target_cycles:.2f})"
    )
    if non_monotone:
        warning += "; cycle count was not monotone in eta_fric"
    logger.warning(warning)
    return result(best[0], best[1], warning)


def rank_candidates(
    reports: list[ProfitabilityReport],
    priority: str = "payback",
) -> list[ProfitabilityReport]:
    """Order candidates for a buying decision.

    Profitable candidates come first; within each group the sort is by
    expected payback ascending (priority "payback") or per-cycle profit
    descending (priority "per_cycle"), with ties broken by smaller
    capacity and then slower ramp.
    """
    if not reports:
        raise ValueError("rank_candidates needs at least one report")
    if priority not in ("payback", "per_cycle"):
        raise ValueError(f"unknown priority {priority!r}")

    def key(report: ProfitabilityReport):
        value = report.expb_years if priority == "payback" else -report.p_cyc
        ramp = max(report.battery.charge_rate_c, report.battery.discharge_rate_c)
        return (not report.profitable, value, report.battery.b_rated, ramp)

    return sorted(reports, key=key)
