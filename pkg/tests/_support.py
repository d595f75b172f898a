"""Shared builders for the test suite.

Everything here is deterministic: fixture-backed scenarios priced by the
shipped tariff, a seeded noisy-price series used by the friction-tuning
tests, and a seeded generator of small dispatch instances for
cross-validating the LP against the dynamic-programming oracle.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np

from bessprofit.battery import make_spec
from bessprofit.fixtures import fixture_arrays
from bessprofit.optimizer import DispatchProblem
from bessprofit.timeseries import DEFAULT_TOU_TARIFF, ScenarioSeries

H = 1.0 / 12.0  # fixture sample spacing, hours

# SoC grid used whenever the dynamic-programming oracle is the reference
DP_GRID = 0.01


def scenario_from_fixture(name: str) -> ScenarioSeries:
    """Synthetic month as the CLI would load it: W -> kWh, tariff prices."""
    start, load_w, pv_w = fixture_arrays(name)
    load = load_w * H / 1000.0
    pv = pv_w * H / 1000.0
    times = [start + i * timedelta(hours=H) for i in range(len(load))]
    price = DEFAULT_TOU_TARIFF.prices(times)
    return ScenarioSeries(
        start_time=start, h=H, load=load, pv=pv, price=price, name=name
    )


def mini_scenario(z, price, h: float = 1.0, name: str = "mini") -> ScenarioSeries:
    """Tiny scenario from a signed net-load vector (positive = import)."""
    z = np.asarray(z, dtype=float)
    return ScenarioSeries(
        start_time=datetime(2019, 6, 1),
        h=h,
        load=np.maximum(z, 0.0),
        pv=np.maximum(-z, 0.0),
        price=np.asarray(price, dtype=float),
        name=name,
    )


def noisy_price_slice(days: int = 10, seed: int = 7) -> ScenarioSeries:
    """First `days` of the c1 fixture with a seeded AR(1) price series.

    The flat-ish shipped tariff offers no arbitrage margin, so the tuning
    tests need a price series with genuine spread; the AR(1) noise keeps
    cheap and dear hours clustered the way real markets do.
    """
    start, load_w, pv_w = fixture_arrays("c1")
    n = days * 288
    load = load_w[:n] * H / 1000.0
    pv = pv_w[:n] * H / 1000.0
    rng = np.random.default_rng(seed)
    rho = 0.97
    gain = np.sqrt(1.0 - rho * rho)
    acc = 0.0
    noise = np.empty(n)
    for i in range(n):
        acc = rho * acc + gain * rng.standard_normal()
        noise[i] = acc
    price = np.clip(0.25 + 0.12 * noise, 0.02, None)
    return ScenarioSeries(
        start_time=start, h=H, load=load, pv=pv, price=price, name="c1noisy"
    )


def random_dispatch_instance(rng: np.random.Generator) -> DispatchProblem:
    """Small random dispatch problem whose SoC box lands on the DP grid."""
    n = int(rng.integers(2, 25))
    h = float(rng.choice([1.0 / 12.0, 0.25, 0.5]))
    b_rated = float(rng.choice([0.5, 1.0, 2.0]))
    rate = float(rng.choice([0.25, 1.0, 2.0]))
    spec = make_spec(f"r{n}", b_rated, rate, rate)
    z = rng.uniform(-0.4, 0.6, n) * b_rated
    load = np.maximum(z, 0.0)
    pv = np.maximum(-z, 0.0)
    price = rng.uniform(0.0, 0.5, n)
    eta_fric = float(rng.choice([1.0, 1.0, 0.8, 0.5]))
    if rng.random() < 0.3:
        s_lo = spec.delta_min_kw * h * spec.eta_dis
        cap = float(np.max(z + s_lo) / h) + float(rng.uniform(0.05, 0.6))
        p_max = max(cap, 0.0)
    else:
        p_max = np.inf
    scenario = ScenarioSeries(
        start_time=datetime(2019, 6, 1),
        h=h,
        load=load,
        pv=pv,
        price=price,
        name=f"rand{n}",
    )
    return DispatchProblem(scenario, spec, p_max_set=p_max, eta_fric=eta_fric)


def dp_gap_bound(prob: DispatchProblem, grid: float = DP_GRID) -> float:
    """Discretization error scale: grid step times the charge-side price mass.

    Rounding every stored-energy decision to the SoC grid perturbs each
    step's billed energy by at most grid/(eta_ch*eta_fric), so the cost gap
    between the continuous optimum and the grid optimum is bounded by a
    small multiple of this quantity.
    """
    a_ch = 1.0 / (prob.spec.eta_ch * prob.eta_fric)
    return grid * float(np.sum(prob.scenario.price)) * a_ch
