"""Battery dispatch optimization and storage profitability screening.

Computes optimal battery dispatch for prosumers under time-of-use prices,
zero feed-in, and peak-power contracts, then scores battery candidates by
profit per equivalent full cycle and expected payback, with an optional
friction mechanism that throttles low-margin cycling to a cycle budget.
"""

from .battery import (
    BatteryCost,
    BatterySpec,
    StorageStep,
    battery_cost,
    default_catalog,
    grid_side_energy,
    load_catalog,
    make_spec,
    ramp_cost_formula,
    s_bounds,
)
from .cycles import CycleCount, DamageModel, break_even_cycles, count_cycles
from .errors import (
    ConfigError,
    DegenerateScenarioError,
    InfeasibleDispatchError,
    RampLimitError,
    ScenarioError,
    SolverError,
)
from .optimizer import (
    DispatchProblem,
    DispatchSolution,
    PpcSelection,
    build_lp,
    dp_oracle,
    select_ppc,
    solve_dispatch,
    validate_dispatch,
)
from .profitability import (
    ProfitabilityReport,
    TuningResult,
    evaluate,
    evaluate_candidate,
    rank_candidates,
    tune_friction,
)
from .timeseries import (
    DEFAULT_FLAT_PRICE,
    DEFAULT_PPC_SCHEDULE,
    DEFAULT_TOU_TARIFF,
    BaselineMetrics,
    NetLoad,
    PpcLevel,
    PpcSchedule,
    ScenarioSeries,
    TariffPeriod,
    TariffSchedule,
    baseline_metrics,
    load_ppc,
    load_scenario,
    load_tariff,
    net_load,
    peak_import_kw,
)

__version__ = "0.1.0"
