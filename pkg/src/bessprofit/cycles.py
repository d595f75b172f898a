"""Equivalent 100%-DoD cycle counting on an SoC trajectory.

Cycles are extracted from the normalized SoC signal with the standard
four-point rainflow method: matched full cycles weigh 1.0, the residual
half-cycles weigh 0.5, and each extracted range d contributes
weight·damage(d) with damage(d) = d**kp. With the default kp = 1 the
count reduces exactly to charge throughput / (2·capacity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "DamageModel",
    "CycleCount",
    "count_cycles",
    "break_even_cycles",
    "write_cycles_csv",
]


@dataclass(frozen=True)
class DamageModel:
    """Damage exponent for equivalent-cycle weighting: damage(d) = d**kp."""

    kp: float = 1.0

    def __post_init__(self):
        if self.kp < 1:
            raise ConfigError("damage exponent kp must be >= 1")

    def damage(self, dod: float) -> float:
        return dod**self.kp


@dataclass(frozen=True)
class CycleCount:
    """Extracted cycles as (DoD fraction, weight) pairs and their damage total."""

    half_cycles: tuple[tuple[float, float], ...]
    n_cyc_100: float


def _turning_points(u: np.ndarray) -> np.ndarray:
    """Collapse plateaus and monotone runs, keeping endpoints.

    Preserves the total variation of the signal, which is what the
    throughput identity relies on.
    """
    if u.size <= 1:
        return u
    # drop consecutive duplicates
    keep = np.concatenate(([True], np.diff(u) != 0.0))
    u = u[keep]
    if u.size <= 2:
        return u
    d = np.diff(u)
    interior = d[:-1] * d[1:] < 0  # sign change -> local extremum
    mask = np.concatenate(([True], interior, [True]))
    return u[mask]


def count_cycles(b, b_rated: float, model: DamageModel | None = None) -> CycleCount:
    """Count equivalent 100%-DoD cycles of an SoC series b (kWh).

    The series must stay within [0, b_rated]; a constant series counts
    zero cycles. Full cycles found by the four-point rule carry weight
    1.0; the residual alternating tail contributes one 0.5-weighted half
    cycle per adjacent range.
    """
    if model is None:
        model = DamageModel()
    if b_rated <= 0:
        raise ValueError("b_rated must be > 0")
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ValueError("SoC series must be one-dimensional")
    if b.size and (np.min(b) < -1e-9 * max(1.0, b_rated) or np.max(b) > b_rated * (1 + 1e-9) + 1e-12):
        raise ValueError("SoC series leaves [0, b_rated]")

    u = np.clip(b / b_rated, 0.0, 1.0)
    points = _turning_points(u)

    ranges_full: list[float] = []
    stack: list[float] = []
    for value in points:
        stack.append(float(value))
        while len(stack) >= 4:
            r_left = abs(stack[-3] - stack[-4])
            r_inner = abs(stack[-2] - stack[-3])
            r_right = abs(stack[-1] - stack[-2])
            if r_inner <= r_left and r_inner <= r_right:
                ranges_full.append(r_inner)
                del stack[-3:-1]
            else:
                break

    pairs: list[tuple[float, float]] = [(r, 1.0) for r in ranges_full if r > 0.0]
    for left, right in zip(stack, stack[1:]):
        r = abs(right - left)
        if r > 0.0:
            pairs.append((r, 0.5))

    total = float(sum(weight * model.damage(r) for r, weight in pairs))
    return CycleCount(half_cycles=tuple(pairs), n_cyc_100=total)


def break_even_cycles(
    cycle_life: float,
    calendar_life_years: float,
    horizon_days: float | None = None,
    *,
    months: float | None = None,
) -> float:
    """Cycle budget for a horizon so cycling and calendar aging expire together.

    Give the horizon either in days (cycle_life·days/(years·365.25)) or in
    months under the 1-month = 1/12-year convention
    (cycle_life·months/(12·years)). Exactly one of the two must be set.
    """
    if cycle_life <= 0 or calendar_life_years <= 0:
        raise ValueError("cycle_life and calendar_life_years must be > 0")
    if (horizon_days is None) == (months is None):
        raise ValueError("give exactly one of horizon_days or months")
    if months is not None:
        if months <= 0:
            raise ValueError("months must be > 0")
        return cycle_life * months / (12.0 * calendar_life_years)
    if horizon_days <= 0:
        raise ValueError("horizon_days must be > 0")
    return cycle_life * horizon_days / (calendar_life_years * 365.25)


def write_cycles_csv(count: CycleCount, stream) -> None:
    """Audit export: one row per extracted cycle (DoD fraction, weight)."""
    stream.write("dod_fraction,weight\n")
    for dod, weight in count.half_cycles:
        stream.write(f"{dod:.9f},{weight:.1f}\n")
