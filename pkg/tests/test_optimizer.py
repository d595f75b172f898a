"""Dispatch optimization: LP construction, the DP cross-check, the
independent dispatch validator, and peak-contract selection.

The central guarantee is dual-route: every billed cost the LP reports is
reproduced by a grid-search dynamic program on randomized instances, and
every dispatch is re-audited with plain array arithmetic.
"""

from __future__ import annotations

import numpy as np
import pytest

from bessprofit.battery import make_spec
from bessprofit.errors import InfeasibleDispatchError
from bessprofit.optimizer import (
    DEFAULT_EPSILON,
    DispatchProblem,
    DispatchSolution,
    build_lp,
    dp_oracle,
    select_ppc,
    solve_dispatch,
    validate_dispatch,
)
from bessprofit.timeseries import DEFAULT_PPC_SCHEDULE

from _support import (
    DP_GRID,
    H,
    dp_gap_bound,
    mini_scenario,
    random_dispatch_instance,
)


# ----------------------------------------------------------- LP vs DP


def test_lp_matches_dp_oracle_on_random_instances():
    rng = np.random.default_rng(424242)
    for k in range(24):
        prob = random_dispatch_instance(rng)
        sol = solve_dispatch(prob)
        dp = dp_oracle(prob, DP_GRID)
        bound = dp_gap_bound(prob)
        diff = dp.cost - sol.billed_cost
        # the grid policy is a feasible policy, so it can never beat the LP...
        assert diff >= -1e-7 * (1.0 + abs(dp.cost)), f"instance {k}"
        # ...and must come within the discretization error of it
        assert abs(diff) <= 5.0 * bound, f"instance {k}: {diff} vs {bound}"
        assert not validate_dispatch(prob, sol), f"instance {k}"


def test_dp_policy_is_feasible_for_the_lp():
    # feed the DP's decisions through the solver-free audit
    rng = np.random.default_rng(7)
    for _ in range(5):
        prob = random_dispatch_instance(rng)
        dp = dp_oracle(prob, DP_GRID)
        spec = prob.spec
        xp = np.maximum(dp.x, 0.0)
        xm = np.maximum(-dp.x, 0.0)
        s = xp / spec.eta_ch - spec.eta_dis * xm
        z = prob.scenario.load - prob.scenario.pv
        theta = np.maximum(0.0, z + s)
        dispatch = DispatchSolution(
            x_plus=xp, x_minus=xm, s=s, b=dp.b, theta=theta,
            energy_cost=float(np.sum(prob.scenario.price * theta)),
            status="optimal",
        )
        unfrictioned = DispatchProblem(
            prob.scenario, spec, p_max_set=prob.p_max_set, eta_fric=1.0
        )
        assert not validate_dispatch(unfrictioned, dispatch)


# ------------------------------------------------------- small hand cases


def test_single_step_import_is_billed_as_is():
    scenario = mini_scenario([0.5], [0.2], name="one")
    spec = make_spec("1kwh-1c", 1.0, 1.0, 1.0, soc_init_frac=0.10)
    sol = solve_dispatch(DispatchProblem(scenario, spec))
    assert sol.theta[0] == pytest.approx(0.5, abs=1e-9)
    assert sol.x[0] == pytest.approx(0.0, abs=1e-9)
    assert sol.energy_cost == pytest.approx(0.1, abs=1e-9)


def test_flat_price_empty_battery_stays_idle():
    # round-trip losses plus the movement penalty make any trade strictly
    # worse than doing nothing when prices are flat and the battery is empty
    scenario = mini_scenario(np.full(24, 0.7), np.full(24, 0.16), name="flat")
    spec = make_spec("1kwh-1c", 1.0, 1.0, 1.0, soc_init_frac=0.10)
    sol = solve_dispatch(DispatchProblem(scenario, spec))
    np.testing.assert_allclose(sol.x, 0.0, atol=1e-10)
    assert sol.energy_cost == pytest.approx(24 * 0.7 * 0.16, abs=1e-9)


def test_three_step_surplus_shift():
    # cheap import, free surplus, dear import: charge from the surplus and
    # pre-drain the initial charge at the cheap step to make room
    scenario = mini_scenario([0.5, -0.8, 0.6], [0.1, 0.1, 0.5])
    spec = make_spec("1kwh-1c", 1.0, 1.0, 1.0)
    prob = DispatchProblem(scenario, spec)
    sol = solve_dispatch(prob)
    dp = dp_oracle(prob, DP_GRID)
    assert sol.billed_cost == pytest.approx(0.012, abs=1e-6)
    assert dp.cost == pytest.approx(sol.billed_cost, abs=2.0 * dp_gap_bound(prob))
    assert sol.x_plus[1] > 0.1  # charges from the surplus step
    assert sol.x_minus[2] > 0.1  # discharges at the expensive step
    np.testing.assert_allclose(sol.theta, [0.12, 0.0, 0.0], atol=1e-7)
    assert not validate_dispatch(prob, sol)


def test_zero_capacity_battery_reproduces_baseline():
    scenario = mini_scenario([0.4, -0.2, 0.7, 0.1], [0.2, 0.3, 0.5, 0.1])
    spec = make_spec("pinned", 2.0, 1.0, 1.0,
                     soc_min_frac=0.5, soc_init_frac=0.5, soc_max_frac=0.5)
    sol = solve_dispatch(DispatchProblem(scenario, spec))
    assert np.max(np.abs(sol.s)) <= 1e-9
    assert sol.energy_cost == pytest.approx(0.2 * 0.4 + 0.5 * 0.7 + 0.1 * 0.1, abs=1e-7)


def test_terminal_soc_restores_initial_charge():
    rng = np.random.default_rng(77)
    z = rng.uniform(-0.5, 0.8, 12)
    price = rng.uniform(0.05, 0.5, 12)
    scenario = mini_scenario(z, price, h=0.5, name="term")
    spec = make_spec("1kwh-1c", 1.0, 1.0, 1.0)
    free = solve_dispatch(DispatchProblem(scenario, spec))
    held = solve_dispatch(DispatchProblem(scenario, spec), terminal_soc=True)
    assert held.b[-1] >= spec.b_0 - 1e-9
    assert free.billed_cost <= held.billed_cost + 1e-9  # constraint can only cost


def test_infeasible_peak_reports_first_bad_step():
    load = np.full(12, 1.0)
    load[7] = 5.0
    scenario = mini_scenario(load, np.full(12, 0.2), name="spike")
    spec = make_spec("0.5kwh-0.25c", 0.5, 0.25, 0.25)
    with pytest.raises(InfeasibleDispatchError) as exc_info:
        solve_dispatch(DispatchProblem(scenario, spec, p_max_set=3.0))
    assert exc_info.value.step == 7
    assert "step 7" in str(exc_info.value)


def test_value_of_storage_is_monotone_in_the_box():
    # a battery whose ramp and SoC box contain another's can never do worse
    rng = np.random.default_rng(31)
    z = rng.uniform(-0.5, 0.8, 16)
    price = rng.uniform(0.05, 0.5, 16)
    scenario = mini_scenario(z, price, h=0.5, name="rand16")
    small = make_spec("inner", 1.0, 1.0, 1.0)
    big = make_spec("outer", 2.0, 2.0, 2.0, soc_min_frac=0.05, soc_init_frac=0.25)
    assert small.b_0 == big.b_0  # same starting energy, wider feasible set
    sol_small = solve_dispatch(DispatchProblem(scenario, small))
    sol_big = solve_dispatch(DispatchProblem(scenario, big))
    assert sol_big.billed_cost <= sol_small.billed_cost + 1e-7


# ---------------------------------------------------------------- friction


def test_friction_tightens_billing_coefficients():
    scenario = mini_scenario([0.5, -0.4, 0.3], [0.2, 0.2, 0.2])
    spec = make_spec("f", 1.0, 1.0, 1.0)
    n = scenario.n

    def billing_coeffs(eta_fric):
        lp = build_lp(DispatchProblem(scenario, spec, eta_fric=eta_fric), DEFAULT_EPSILON)
        a = lp.dense_A()
        coeffs = {}
        for i in range(n):
            rows = np.flatnonzero(a[:, 2 * n + i] == -1.0)  # rows lower-bounding theta_i
            (row,) = rows
            coeffs[i] = (a[row, i], a[row, n + i])  # (charge, discharge) coefficients
        return coeffs

    plain = billing_coeffs(1.0)
    tight = billing_coeffs(0.8)
    for i in range(n):
        assert plain[i][0] == pytest.approx(1.0 / 0.95, abs=1e-12)
        assert plain[i][1] == pytest.approx(-0.95, abs=1e-12)
        assert tight[i][0] == pytest.approx(1.0 / (0.95 * 0.8), abs=1e-12)
        assert tight[i][1] == pytest.approx(-0.95 * 0.8, abs=1e-12)


@pytest.mark.parametrize("eta_fric", [0.8, 0.5])
def test_frictioned_dispatch_is_feasible_and_never_cheaper(eta_fric):
    rng = np.random.default_rng(63)
    z = rng.uniform(-0.6, 0.8, 20)
    price = rng.uniform(0.05, 0.5, 20)
    scenario = mini_scenario(z, price, h=0.5, name="fric")
    spec = make_spec("1kwh-1c", 1.0, 1.0, 1.0)
    plain = solve_dispatch(DispatchProblem(scenario, spec))
    throttled = solve_dispatch(DispatchProblem(scenario, spec, eta_fric=eta_fric))
    # the returned dispatch always stands on the true (unfrictioned) semantics
    assert not validate_dispatch(DispatchProblem(scenario, spec), throttled)
    assert throttled.energy_cost >= plain.energy_cost - 1e-9
    assert throttled.eta_fric == eta_fric


def test_deeper_friction_moves_less_energy():
    rng = np.random.default_rng(64)
    z = rng.uniform(-0.6, 0.8, 24)
    price = np.tile([0.05, 0.45], 12)
    scenario = mini_scenario(z, price, h=0.5, name="fric2")
    spec = make_spec("1kwh-1c", 1.0, 1.0, 1.0)
    moved = [
        float(np.sum(solve_dispatch(DispatchProblem(scenario, spec, eta_fric=e)).x_plus))
        for e in (1.0, 0.6, 0.2)
    ]
    assert moved[0] >= moved[1] - 1e-9 >= moved[2] - 2e-9


# ---------------------------------------------------------------- validator


def _solved_small():
    scenario = mini_scenario([0.5, -0.8, 0.6, 0.2], [0.1, 0.1, 0.5, 0.2])
    spec = make_spec("1kwh-1c", 1.0, 1.0, 1.0)
    prob = DispatchProblem(scenario, spec)
    return prob, solve_dispatch(prob)


def _replace(dispatch: DispatchSolution, **changes) -> DispatchSolution:
    fields = dict(
        x_plus=dispatch.x_plus.copy(), x_minus=dispatch.x_minus.copy(),
        s=dispatch.s.copy(), b=dispatch.b.copy(), theta=dispatch.theta.copy(),
        energy_cost=dispatch.energy_cost, status=dispatch.status,
    )
    fields.update(changes)
    return DispatchSolution(**fields)


def test_validator_passes_solver_output():
    prob, sol = _solved_small()
    assert validate_dispatch(prob, sol) == []


def test_validator_catches_soc_drift():
    prob, sol = _solved_small()
    b = sol.b.copy()
    b[0] += 0.05
    bad = validate_dispatch(prob, _replace(sol, b=b))
    assert any("SoC recursion drift" in msg for msg in bad)


def test_validator_catches_box_escape():
    prob, sol = _solved_small()
    xp = sol.x_plus.copy()
    xp[0] += 2.0 * prob.spec.delta_max_kw * prob.scenario.h
    bad = validate_dispatch(prob, _replace(sol, x_plus=xp))
    assert any("charge ramp exceeded" in msg for msg in bad)
    assert any("SoC recursion drift" in msg for msg in bad)


def test_validator_catches_mapping_error():
    prob, sol = _solved_small()
    s = sol.s.copy()
    s[1] += 0.01
    bad = validate_dispatch(prob, _replace(sol, s=s))
    assert any("grid-side mapping" in msg for msg in bad)


def test_validator_catches_underbilling():
    prob, sol = _solved_small()
    theta = sol.theta.copy()
    theta[0] -= 0.05  # bill less than the net import at a priced step
    bad = validate_dispatch(prob, _replace(sol, theta=theta))
    assert any("below net import" in msg for msg in bad)


def test_validator_catches_overbilling_at_priced_steps():
    prob, sol = _solved_small()
    theta = sol.theta.copy()
    theta[2] += 0.05
    bad = validate_dispatch(prob, _replace(sol, theta=theta))
    assert any("max(0, z+s)" in msg for msg in bad)


def test_validator_catches_peak_violation():
    scenario = mini_scenario([0.5, 0.5, 0.5], [0.2, 0.2, 0.2])
    spec = make_spec("1kwh-1c", 1.0, 1.0, 1.0, soc_init_frac=0.10)
    prob = DispatchProblem(scenario, spec, p_max_set=0.4)
    sol = solve_dispatch(DispatchProblem(scenario, spec))  # solved without the cap
    bad = validate_dispatch(prob, sol)
    assert any("peak cap exceeded" in msg for msg in bad)


def test_validator_catches_cost_mismatch():
    prob, sol = _solved_small()
    bad = validate_dispatch(prob, _replace(sol, energy_cost=sol.energy_cost + 1.0))
    assert any("energy_cost mismatch" in msg for msg in bad)


def test_validator_checks_negative_entries():
    prob, sol = _solved_small()
    xm = sol.x_minus.copy()
    xm[0] = -0.01
    bad = validate_dispatch(prob, _replace(sol, x_minus=xm))
    assert any("negative discharge" in msg for msg in bad)


# ------------------------------------------------------------ problem guards


def test_dispatch_problem_validation():
    scenario = mini_scenario([0.5], [0.2])
    spec = make_spec("g", 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        DispatchProblem(scenario, spec, eta_fric=0.0)
    with pytest.raises(ValueError):
        DispatchProblem(scenario, spec, eta_fric=1.5)
    with pytest.raises(ValueError):
        DispatchProblem(scenario, spec, p_max_set=-1.0)


def test_dp_oracle_refuses_oversized_problems():
    scenario = mini_scenario(np.full(60, 0.1), np.full(60, 0.2))
    spec = make_spec("g", 1.0, 1.0, 1.0)
    with pytest.raises(ValueError, match="steps"):
        dp_oracle(DispatchProblem(scenario, spec), DP_GRID)
    small = mini_scenario([0.1, 0.2], [0.2, 0.2])
    with pytest.raises(ValueError, match="grid"):
        dp_oracle(DispatchProblem(small, spec), 1e-5)
    off_grid = make_spec("og", 1.0, 1.0, 1.0, soc_init_frac=0.3141)
    with pytest.raises(ValueError, match="grid"):
        dp_oracle(DispatchProblem(small, off_grid), DP_GRID)


# ------------------------------------------------------- contract selection


def _needle_scenario(n_days: int = 30, needle_kw: float = 5.8):
    n = n_days * 24
    load = np.full(n, 0.8)
    for d in range(n_days):
        load[d * 24 + 19] = needle_kw
    return mini_scenario(load, np.full(n, 0.2), name="needle")


def test_select_ppc_steps_down_two_levels():
    scenario = _needle_scenario()
    spec = make_spec("2kwh-1c", 2.0, 1.0, 1.0)
    res = select_ppc(scenario, spec, DEFAULT_PPC_SCHEDULE)
    assert res.old_level.kva == 6.90  # smallest level covering the 5.8 kW peak
    assert res.level.kva == 4.60  # 2 kW of discharge moves the needle below 4.6
    assert res.p_max_set == 4.60
    # thirty days of the 6.90 -> 4.60 daily price difference
    assert res.g_pd == pytest.approx(30 * (0.3080 - 0.2132), abs=1e-9)
    assert res.g_pd == pytest.approx(2.844, abs=1e-9)
    assert not validate_dispatch(
        DispatchProblem(scenario, spec, p_max_set=res.level.kva), res.dispatch
    )


def test_select_ppc_without_discharge_keeps_old_level():
    scenario = _needle_scenario()
    spec = make_spec("nodis", 2.0, 1.0, 0.0)
    res = select_ppc(scenario, spec, DEFAULT_PPC_SCHEDULE)
    assert res.level.kva == res.old_level.kva == 6.90
    assert res.g_pd == 0.0


def test_select_ppc_single_fine_needle():
    # one five-minute 6.2 kW needle: a 1C 2 kWh battery absorbs it entirely
    n = 288
    load_w = np.full(n, 500.0)
    load_w[200] = 6200.0
    z = load_w * H / 1000.0
    scenario = mini_scenario(z, np.full(n, 0.2), h=H, name="fine")
    spec = make_spec("2kwh-1c", 2.0, 1.0, 1.0)
    res = select_ppc(scenario, spec, DEFAULT_PPC_SCHEDULE)
    assert res.old_level.kva == 6.90
    assert res.level.kva == 4.60
    assert res.g_pd == pytest.approx((0.3080 - 0.2132) * scenario.day_count, abs=1e-9)


def test_select_ppc_respects_explicit_old_level():
    scenario = _needle_scenario()
    spec = make_spec("2kwh-1c", 2.0, 1.0, 1.0)
    res = select_ppc(scenario, spec, DEFAULT_PPC_SCHEDULE, old_level_kva=10.35)
    assert res.old_level.kva == 10.35
    assert res.level.kva == 4.60
    assert res.g_pd == pytest.approx(30 * (0.4532 - 0.2132), abs=1e-9)


def test_select_ppc_forced_low_cap_is_infeasible():
    scenario = _needle_scenario()
    spec = make_spec("1kwh-0.25c", 1.0, 0.25, 0.25)
    with pytest.raises(InfeasibleDispatchError):
        select_ppc(scenario, spec, DEFAULT_PPC_SCHEDULE, old_level_kva=3.45)


def test_select_ppc_never_raises_the_contract():
    # baseline peak 0.8 kW: the old level already is the cheapest feasible one
    scenario = mini_scenario(np.full(48, 0.8), np.full(48, 0.2), name="flatload")
    spec = make_spec("5kwh-2c", 5.0, 2.0, 2.0)
    res = select_ppc(scenario, spec, DEFAULT_PPC_SCHEDULE)
    assert res.old_level.kva == 3.45
    assert res.level.kva == 3.45
    assert res.g_pd == 0.0


# --------------------------------------------------------- panel regressions


def test_panel_contract_choices(panel):
    # threshold = baseline peak minus the battery's discharge power; the
    # chosen level is the cheapest feasible one at or above that threshold
    assert panel[("c1", "1kwh-0.25c")].selection.level.kva == 5.75
    assert panel[("c1", "2kwh-1c")].selection.level.kva == 4.60
    assert panel[("c1", "5kwh-1c")].selection.level.kva == 3.45
    assert panel[("c2", "1kwh-0.25c")].selection.level.kva == 4.60  # no drop possible
    assert panel[("c2", "2kwh-1c")].selection.level.kva == 3.45
    assert panel[("c3", "1kwh-0.25c")].selection.level.kva == 17.25
    assert panel[("c4", "1kwh-1c")].selection.level.kva == 5.75


def test_panel_old_levels_cover_baseline_peaks(panel, scenarios):
    from bessprofit.timeseries import peak_import_kw

    for (case, _), entry in panel.items():
        peak = peak_import_kw(scenarios[case])
        assert entry.selection.old_level.kva >= peak
        assert entry.selection.level.kva <= entry.selection.old_level.kva
        assert entry.selection.g_pd >= 0.0


def test_panel_dispatches_respect_chosen_caps(panel):
    for (case, name), entry in panel.items():
        z = entry.scenario.load - entry.scenario.pv
        peak_kw = float(np.max((z + entry.dispatch.s) / entry.scenario.h))
        assert peak_kw <= entry.selection.level.kva + 1e-6, (case, name)
