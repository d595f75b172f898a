"""Scenario ingestion and baseline (no-battery) metrics.

A scenario is a pair of aligned load/PV measurement series at a uniform
step length, priced by a time-of-use tariff. Measurements arrive as
instantaneous power in W and are converted to per-step energies in kWh.
Peak-power contract (PPC) levels are expressed in kVA and compared
against kW assuming unity power factor.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateScenarioError, ScenarioError

__all__ = [
    "TariffPeriod",
    "TariffSchedule",
    "PpcLevel",
    "PpcSchedule",
    "ScenarioSeries",
    "NetLoad",
    "BaselineMetrics",
    "DEFAULT_TOU_TARIFF",
    "DEFAULT_FLAT_PRICE",
    "DEFAULT_PPC_SCHEDULE",
    "load_tariff",
    "load_ppc",
    "load_scenario",
    "net_load",
    "baseline_metrics",
    "peak_import_kw",
]

MINUTES_PER_DAY = 1440


def _parse_daily_minute(text: str) -> int:
    """Parse 'HH:MM' into a minute-of-day; '24:00' is accepted as end of day."""
    parts = text.strip().split(":")
    if len(parts) != 2:
        raise ConfigError(f"bad time of day {text!r}, expected HH:MM")
    try:
        hour, minute = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ConfigError(f"bad time of day {text!r}, expected HH:MM") from exc
    if not (0 <= minute < 60) or not (0 <= hour <= 24) or (hour == 24 and minute != 0):
        raise ConfigError(f"time of day {text!r} out of range")
    return hour * 60 + minute


@dataclass(frozen=True)
class TariffPeriod:
    """Half-open daily window [start_minute, end_minute) with a fixed price.

    A period with end_minute <= start_minute wraps across midnight.
    """

    start_minute: int
    end_minute: int
    price: float


@dataclass(frozen=True)
class TariffSchedule:
    """Time-of-use buy prices; minutes not covered by a period use fallback_price."""

    periods: tuple[TariffPeriod, ...]
    fallback_price: float

    def __post_init__(self):
        if self.fallback_price < 0:
            raise ConfigError("fallback_price must be >= 0")
        table = np.full(MINUTES_PER_DAY, self.fallback_price, dtype=float)
        claimed = np.zeros(MINUTES_PER_DAY, dtype=bool)
        for period in self.periods:
            if period.price < 0:
                raise ConfigError("tariff prices must be >= 0")
            if not (0 <= period.start_minute < MINUTES_PER_DAY):
                raise ConfigError(f"period start {period.start_minute} out of range")
            if not (0 <= period.end_minute <= MINUTES_PER_DAY):
                raise ConfigError(f"period end {period.end_minute} out of range")
            if period.end_minute == period.start_minute:
                raise ConfigError("tariff period must not be empty")
            if period.end_minute > period.start_minute:
                span = range(period.start_minute, period.end_minute)
            else:
                # wraps past midnight
                span = list(range(period.start_minute, MINUTES_PER_DAY)) + list(range(0, period.end_minute))
            for m in span:
                if claimed[m]:
                    raise ConfigError(f"tariff periods overlap at minute {m}")
                claimed[m] = True
                table[m] = period.price
        table.flags.writeable = False
        object.__setattr__(self, "_minute_prices", table)

    def price_at(self, when: datetime) -> float:
        return float(self._minute_prices[when.hour * 60 + when.minute])

    def prices(self, times: list[datetime]) -> np.ndarray:
        minutes = np.fromiter((t.hour * 60 + t.minute for t in times), dtype=int, count=len(times))
        return self._minute_prices[minutes]


@dataclass(frozen=True)
class PpcLevel:
    """One peak-power contract level: power ceiling and daily price."""

    kva: float
    eur_per_day: float


@dataclass(frozen=True)
class PpcSchedule:
    """Ordered PPC levels, strictly increasing in both ceiling and price."""

    levels: tuple[PpcLevel, ...]

    def __post_init__(self):
        if not self.levels:
            raise ConfigError("PPC schedule needs at least one level")
        prev_kva, prev_cost = -np.inf, -np.inf
        for level in self.levels:
            if level.kva <= 0 or level.eur_per_day < 0:
                raise ConfigError("PPC levels must have positive kVA and non-negative cost")
            if level.kva <= prev_kva or level.eur_per_day <= prev_cost:
                raise ConfigError("PPC levels must be strictly increasing in kVA and cost")
            prev_kva, prev_cost = level.kva, level.eur_per_day

    def smallest_covering(self, kw: float) -> PpcLevel | None:
        """Smallest level whose ceiling is >= kw, or None if all are below."""
        for level in self.levels:
            if level.kva >= kw:
                return level
        return None

    def at_or_above(self, kw: float) -> tuple[PpcLevel, ...]:
        return tuple(level for level in self.levels if level.kva >= kw)

    def level_for(self, kva: float, tol: float = 1e-9) -> PpcLevel:
        for level in self.levels:
            if abs(level.kva - kva) <= tol:
                return level
        raise ConfigError(f"no PPC level with ceiling {kva} kVA")


# Madeira-style 8-level peak-power-contract table (kVA ceiling, €/day).
DEFAULT_PPC_SCHEDULE = PpcSchedule(
    (
        PpcLevel(3.45, 0.1643),
        PpcLevel(4.60, 0.2132),
        PpcLevel(5.75, 0.2590),
        PpcLevel(6.90, 0.3080),
        PpcLevel(10.35, 0.4532),
        PpcLevel(13.80, 0.5981),
        PpcLevel(17.25, 0.7436),
        PpcLevel(20.70, 0.8892),
    )
)

# Documented default two-period tariff: peak 08:00-22:00, off-peak otherwise.
# The ratio 0.20/0.185 sits below the round-trip loss factor 1/(0.95*0.95),
# so pure grid arbitrage never pays under the default battery efficiencies;
# storage value then comes from surplus self-consumption and peak shaving.
# Steeper schedules are fully supported via tariff config files.
DEFAULT_TOU_TARIFF = TariffSchedule(
    periods=(TariffPeriod(start_minute=8 * 60, end_minute=22 * 60, price=0.20),),
    fallback_price=0.185,
)

# Flat reference price used for simple savings comparisons.
DEFAULT_FLAT_PRICE = 0.16


def load_tariff(path: str | Path) -> TariffSchedule:
    """Read a tariff config: {"periods": [{"start","end","price"}...], "fallback_price": x}."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read tariff file {path}: {exc}") from exc
    if not isinstance(raw, dict) or "fallback_price" not in raw:
        raise ConfigError(f"tariff file {path} must be an object with 'fallback_price'")
    periods = []
    for entry in raw.get("periods", []):
        try:
            periods.append(
                TariffPeriod(
                    start_minute=_parse_daily_minute(entry["start"]),
                    end_minute=_parse_daily_minute(entry["end"]),
                    price=float(entry["price"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad tariff period entry {entry!r}") from exc
    return TariffSchedule(periods=tuple(periods), fallback_price=float(raw["fallback_price"]))


def load_ppc(path: str | Path) -> PpcSchedule:
    """Read a PPC config: {"levels": [{"kva": x, "eur_per_day": y}, ...]}."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read PPC file {path}: {exc}") from exc
    try:
        levels = tuple(PpcLevel(kva=float(e["kva"]), eur_per_day=float(e["eur_per_day"])) for e in raw["levels"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad PPC file {path}") from exc
    return PpcSchedule(levels=levels)


@dataclass(frozen=True)
class ScenarioSeries:
    """Aligned per-step energy series over a uniform-step horizon.

    load, pv are per-step energies in kWh; price is the buy price in €/kWh
    applying to that step. h is the step length in hours, n the step count.
    """

    start_time: datetime
    h: float
    load: np.ndarray
    pv: np.ndarray
    price: np.ndarray
    n: int = -1  # inferred from load when omitted
    name: str = ""

    def __post_init__(self):
        if self.h <= 0:
            raise ScenarioError("step length h must be > 0")
        if self.n < 0:
            object.__setattr__(self, "n", len(np.asarray(self.load)))
        if self.n < 1:
            raise ScenarioError("scenario needs at least one step")
        for label, arr in (("load", self.load), ("pv", self.pv), ("price", self.price)):
            arr = np.array(arr, dtype=float)
            if arr.shape != (self.n,):
                raise ScenarioError(f"{label} must have shape ({self.n},)")
            if not np.all(np.isfinite(arr)):
                raise ScenarioError(f"{label} contains non-finite values")
            if np.any(arr < 0):
                raise ScenarioError(f"{label} contains negative values")
            arr.flags.writeable = False
            object.__setattr__(self, label, arr)

    @property
    def total_hours(self) -> float:
        return self.h * self.n

    @property
    def day_count(self) -> float:
        """Length of the window in days; drives €/day PPC accounting."""
        return self.total_hours / 24.0

    def step_times(self) -> list[datetime]:
        step = timedelta(hours=self.h)
        return [self.start_time + i * step for i in range(self.n)]


@dataclass(frozen=True)
class NetLoad:
    """Per-step net energy z_i = load_i - pv_i in kWh; negative means surplus."""

    z: np.ndarray


@dataclass(frozen=True)
class BaselineMetrics:
    """No-battery metrics: self-sufficiency, wasted surplus, and import cost."""

    ss: float
    waste: float
    energy_cost: float


def net_load(s: ScenarioSeries) -> NetLoad:
    z = s.load - s.pv
    z.flags.writeable = False
    return NetLoad(z=z)


def baseline_metrics(s: ScenarioSeries) -> BaselineMetrics:
    """Metrics of the scenario without storage.

    waste is the surplus PV energy (exports earn nothing and are lost),
    self-sufficiency the share of consumption not imported, energy_cost the
    per-step-priced cost of all imports.
    """
    z = s.load - s.pv
    waste = float(np.sum(np.maximum(0.0, -z)))
    grid_import = float(np.sum(np.maximum(0.0, z)))
    total_load = float(np.sum(s.load))
    if total_load == 0.0:
        raise DegenerateScenarioError("total load is zero; self-sufficiency undefined")
    ss = (total_load - grid_import) / total_load
    energy_cost = float(np.sum(s.price * np.maximum(0.0, z)))
    return BaselineMetrics(ss=ss, waste=waste, energy_cost=energy_cost)


def peak_import_kw(s: ScenarioSeries) -> float:
    """Peak net-load power max_i(z_i/h) over the window, in kW."""
    z = s.load - s.pv
    return float(np.max(z)) / s.h


def _open_csv(csv_source) -> io.TextIOBase:
    if hasattr(csv_source, "read"):
        return csv_source
    return open(csv_source, "r", encoding="utf-8", newline="")


def load_scenario(
    csv_source,
    h: float | None = None,
    tariff: TariffSchedule | None = None,
    name: str | None = None,
) -> ScenarioSeries:
    """Load a measurement CSV with header ``timestamp,load_w,pv_w``.

    Rows carry instantaneous power in W at uniform spacing; per-step energy
    is power·h/1000 kWh. When h (hours) is given it must match the file
    spacing; otherwise the spacing is inferred. Prices come from the tariff
    (default: the shipped two-period schedule) by time of day.

    Raises ScenarioError on duplicate/backward timestamps, gaps, non-uniform
    spacing, negative or non-finite measurements, or a malformed header.
    """
    if tariff is None:
        tariff = DEFAULT_TOU_TARIFF
    if name is None:
        name = Path(csv_source).stem if not hasattr(csv_source, "read") else ""

    times: list[datetime] = []
    load_w: list[float] = []
    pv_w: list[float] = []

    stream = _open_csv(csv_source)
    try:
        reader = csv.reader(stream)
        # leading '#' lines are generator provenance, not data
        header = None
        lineno = 0
        for row in reader:
            lineno += 1
            if not row or row[0].lstrip().startswith("#"):
                continue
            header = row
            break
        if header is None or [c.strip().lower() for c in header] != ["timestamp", "load_w", "pv_w"]:
            raise ScenarioError("expected CSV header 'timestamp,load_w,pv_w'")
        for row in reader:
            lineno += 1
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 3:
                raise ScenarioError(f"line {lineno}: expected 3 columns, got {len(row)}")
            try:
                stamp = datetime.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise ScenarioError(f"line {lineno}: bad timestamp {row[0]!r}") from exc
            try:
                lw, pw = float(row[1]), float(row[2])
            except ValueError as exc:
                raise ScenarioError(f"line {lineno}: bad power value") from exc
            if not (np.isfinite(lw) and np.isfinite(pw)):
                raise ScenarioError(f"line {lineno}: non-finite measurement")
            if lw < 0 or pw < 0:
                raise ScenarioError(f"line {lineno}: negative measurement")
            times.append(stamp)
            load_w.append(lw)
            pv_w.append(pw)
    finally:
        if stream is not csv_source:
            stream.close()

    if len(times) < 2:
        raise ScenarioError("scenario needs at least two rows to establish spacing")

    spacing = times[1] - times[0]
    for i in range(1, len(times)):
        delta = times[i] - times[i - 1]
        lineno = i + 2
        if delta == timedelta(0):
            raise ScenarioError(f"line {lineno}: duplicate timestamp {times[i].isoformat()}")
        if delta < timedelta(0):
            raise ScenarioError(f"line {lineno}: timestamps not increasing")
        if delta != spacing:
            kind = "gap in measurements" if delta > spacing else "non-uniform spacing"
            raise ScenarioError(f"line {lineno}: {kind} ({delta} vs expected {spacing})")

    h_file = spacing.total_seconds() / 3600.0
    if h is not None and abs(h - h_file) > 1e-9:
        raise ScenarioError(f"requested step {h * 60:.6g} min does not match file spacing {h_file * 60:.6g} min")

    h_eff = h_file
    load_kwh = np.asarray(load_w, dtype=float) * h_eff / 1000.0
    pv_kwh = np.asarray(pv_w, dtype=float) * h_eff / 1000.0
    price = tariff.prices(times)
    return ScenarioSeries(
        start_time=times[0],
        h=h_eff,
        load=load_kwh,
        pv=pv_kwh,
        price=np.asarray(price, dtype=float),
        n=len(times),
        name=name,
    )
