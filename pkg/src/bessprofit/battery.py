"""Battery electrical and cost model.

Energies are kWh. A battery is rated "xC-yC": it charges fully in 1/x
hours and discharges fully in 1/y hours, so the power limits are
delta_max = x·b_rated kW (charging) and delta_min = −y·b_rated kW
(discharging). Charging stores eta_ch of what the grid side supplies;
discharging delivers eta_dis of what storage releases.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, RampLimitError

__all__ = [
    "BatterySpec",
    "StorageStep",
    "BatteryCost",
    "grid_side_energy",
    "s_bounds",
    "battery_cost",
    "ramp_cost_formula",
    "make_spec",
    "default_catalog",
    "load_catalog",
    "DEFAULT_CYCLE_LIFE_100DOD",
    "DEFAULT_CALENDAR_LIFE_YEARS",
]

DEFAULT_CYCLE_LIFE_100DOD = 4000
DEFAULT_CALENDAR_LIFE_YEARS = 7.0
DEFAULT_ETA_CH = 0.95
DEFAULT_ETA_DIS = 0.95

# Default per-kWh costs by ramp class max(x, y): (battery €/kWh, inverter €/kWh).
_COSTS_BY_RAMP_CLASS = {
    0.25: (400.0, 25.0),
    1.0: (600.0, 100.0),
    2.0: (700.0, 200.0),
}


@dataclass(frozen=True)
class BatterySpec:
    """Electrical limits, lifetime, and cost breakdown of one battery candidate."""

    b_rated: float
    b_min: float
    b_max: float
    b_0: float
    eta_ch: float
    eta_dis: float
    charge_rate_c: float
    discharge_rate_c: float
    cycle_life_100dod: float = DEFAULT_CYCLE_LIFE_100DOD
    calendar_life_years: float = DEFAULT_CALENDAR_LIFE_YEARS
    cost_per_kwh: float = 0.0
    inverter_cost_per_kwh: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.b_rated <= 0:
            raise ConfigError("b_rated must be > 0")
        if not (0 <= self.b_min <= self.b_0 <= self.b_max <= self.b_rated):
            raise ConfigError("need 0 <= b_min <= b_0 <= b_max <= b_rated")
        for label, eta in (("eta_ch", self.eta_ch), ("eta_dis", self.eta_dis)):
            if not (0 < eta <= 1):
                raise ConfigError(f"{label} must be in (0, 1]")
        if self.charge_rate_c < 0 or self.discharge_rate_c < 0:
            raise ConfigError("C-rates must be >= 0")
        if self.cycle_life_100dod <= 0:
            raise ConfigError("cycle_life_100dod must be > 0")
        if self.calendar_life_years <= 0:
            raise ConfigError("calendar_life_years must be > 0")
        if self.cost_per_kwh < 0 or self.inverter_cost_per_kwh < 0:
            raise ConfigError("costs must be >= 0")

    @property
    def delta_max_kw(self) -> float:
        """Maximum charging power in kW."""
        return self.charge_rate_c * self.b_rated

    @property
    def delta_min_kw(self) -> float:
        """Maximum discharging power in kW, expressed as a negative number."""
        return -self.discharge_rate_c * self.b_rated


@dataclass(frozen=True)
class StorageStep:
    """One step of battery activity: stored-energy change x and grid-side energy s."""

    x: float
    s: float

    @classmethod
    def from_energy_change(cls, x: float, spec: BatterySpec) -> "StorageStep":
        return cls(x=x, s=grid_side_energy(x, spec))


@dataclass(frozen=True)
class BatteryCost:
    """Per-kWh purchase cost, per-cycle cost, and total candidate cost."""

    total_per_kwh: float
    c_cyc: float
    b_cost: float


def grid_side_energy(x: float, spec: BatterySpec, h: float | None = None) -> float:
    """Grid-side energy of a stored-energy change x.

    Charging (x > 0) draws x/eta_ch from the grid side; discharging
    (x < 0) delivers eta_dis·|x|. When h is given, x is checked against
    the ramp limits delta_min·h <= x <= delta_max·h.
    """
    if h is not None:
        lo, hi = spec.delta_min_kw * h, spec.delta_max_kw * h
        if not (lo - 1e-12 <= x <= hi + 1e-12):
            raise RampLimitError(f"x={x} kWh outside ramp bounds [{lo}, {hi}] for h={h}")
    if x >= 0:
        return x / spec.eta_ch
    return spec.eta_dis * x


def s_bounds(spec: BatterySpec, h: float) -> tuple[float, float]:
    """Range of the grid-side storage energy per step implied by the ramp limits."""
    return spec.delta_min_kw * h * spec.eta_dis, spec.delta_max_kw * h / spec.eta_ch


def battery_cost(spec: BatterySpec) -> BatteryCost:
    """Cost summary: €/kWh total, € per 100%-DoD cycle per kWh, and € for the unit."""
    total = spec.cost_per_kwh + spec.inverter_cost_per_kwh
    return BatteryCost(
        total_per_kwh=total,
        c_cyc=total / spec.cycle_life_100dod,
        b_cost=total * spec.b_rated,
    )


def ramp_cost_formula(charge_rate_c: float, discharge_rate_c: float) -> float:
    """Alternative closed-form cost in €/kWh: 300 + 0.25·max(x, y)·100.

    Documented alternative only; it does not reproduce the default catalog
    costs (e.g. it yields 306.25 €/kWh for a 0.25C-0.25C unit versus the
    default 425 €/kWh) and is never used unless explicitly requested.
    """
    return 300.0 + 0.25 * max(charge_rate_c, discharge_rate_c) * 100.0


def make_spec(
    name: str,
    b_rated: float,
    charge_rate_c: float,
    discharge_rate_c: float,
    *,
    soc_min_frac: float = 0.10,
    soc_init_frac: float = 0.50,
    soc_max_frac: float = 1.00,
    eta_ch: float = DEFAULT_ETA_CH,
    eta_dis: float = DEFAULT_ETA_DIS,
    cycle_life_100dod: float = DEFAULT_CYCLE_LIFE_100DOD,
    calendar_life_years: float = DEFAULT_CALENDAR_LIFE_YEARS,
    cost_per_kwh: float | None = None,
    inverter_cost_per_kwh: float | None = None,
) -> BatterySpec:
    """Build a BatterySpec with SoC fractions and ramp-class default costs."""
    if cost_per_kwh is None or inverter_cost_per_kwh is None:
        ramp_class = max(charge_rate_c, discharge_rate_c)
        defaults = _COSTS_BY_RAMP_CLASS.get(ramp_class)
        if defaults is None:
            raise ConfigError(
                f"no default costs for ramp class {ramp_class}C; "
                "give cost_per_kwh and inverter_cost_per_kwh explicitly"
            )
        cost_per_kwh = defaults[0] if cost_per_kwh is None else cost_per_kwh
        inverter_cost_per_kwh = defaults[1] if inverter_cost_per_kwh is None else inverter_cost_per_kwh
    return BatterySpec(
        b_rated=b_rated,
        b_min=soc_min_frac * b_rated,
        b_max=soc_max_frac * b_rated,
        b_0=soc_init_frac * b_rated,
        eta_ch=eta_ch,
        eta_dis=eta_dis,
        charge_rate_c=charge_rate_c,
        discharge_rate_c=discharge_rate_c,
        cycle_life_100dod=cycle_life_100dod,
        calendar_life_years=calendar_life_years,
        cost_per_kwh=cost_per_kwh,
        inverter_cost_per_kwh=inverter_cost_per_kwh,
        name=name,
    )


def _rate_label(rate: float) -> str:
    return f"{rate:g}c"


def default_catalog() -> tuple[BatterySpec, ...]:
    """The nine default candidates: {1, 2, 5} kWh × {0.25C, 1C, 2C} symmetric ramps."""
    specs = []
    for b_rated in (1.0, 2.0, 5.0):
        for rate in (0.25, 1.0, 2.0):
            name = f"{b_rated:g}kwh-{_rate_label(rate)}"
            specs.append(make_spec(name, b_rated, rate, rate))
    return tuple(specs)


def load_catalog(path: str | Path) -> tuple[BatterySpec, ...]:
    """Read a battery catalog: {"batteries": [{name, b_rated_kwh, ...}, ...]}.

    Per-entry optional keys (defaults in parentheses): soc_min_frac (0.10),
    soc_init_frac (0.50), soc_max_frac (1.00), eta_ch (0.95), eta_dis (0.95),
    cycle_life_100dod (4000), calendar_life_years (7), cost_per_kwh and
    inverter_cost_per_kwh (by ramp class when omitted).
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read catalog file {path}: {exc}") from exc
    entries = raw.get("batteries") if isinstance(raw, dict) else None
    if not entries:
        raise ConfigError(f"catalog file {path} has no 'batteries' entries")
    specs = []
    seen: set[str] = set()
    for entry in entries:
        try:
            name = str(entry["name"])
            spec = make_spec(
                name,
                float(entry["b_rated_kwh"]),
                float(entry["charge_rate_c"]),
                float(entry["discharge_rate_c"]),
                soc_min_frac=float(entry.get("soc_min_frac", 0.10)),
                soc_init_frac=float(entry.get("soc_init_frac", 0.50)),
                soc_max_frac=float(entry.get("soc_max_frac", 1.00)),
                eta_ch=float(entry.get("eta_ch", DEFAULT_ETA_CH)),
                eta_dis=float(entry.get("eta_dis", DEFAULT_ETA_DIS)),
                cycle_life_100dod=float(entry.get("cycle_life_100dod", DEFAULT_CYCLE_LIFE_100DOD)),
                calendar_life_years=float(entry.get("calendar_life_years", DEFAULT_CALENDAR_LIFE_YEARS)),
                cost_per_kwh=float(entry["cost_per_kwh"]) if "cost_per_kwh" in entry else None,
                inverter_cost_per_kwh=(
                    float(entry["inverter_cost_per_kwh"]) if "inverter_cost_per_kwh" in entry else None
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad catalog entry {entry!r}: {exc}") from exc
        if name in seen:
            raise ConfigError(f"duplicate battery name {name!r} in catalog")
        seen.add(name)
        specs.append(spec)
    return tuple(specs)


def catalog_by_name(catalog: tuple[BatterySpec, ...]) -> dict[str, BatterySpec]:
    return {spec.name: spec for spec in catalog}
