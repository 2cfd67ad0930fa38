"""Compound-growth projection of fleet carbon and performance per carbon."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

CYCLES_PER_YEAR = 2  # Top500 publishes in June and November.
DENNARD_DOUBLING_YEARS = 1.5


class InsufficientHistory(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class NonPositiveCarbon(ValueError):
    pass


@dataclass(frozen=True)
class GrowthModel:
    base_year: int
    base_value_mt: float
    annual_rate: float
    horizon_years: int

    def __post_init__(self) -> None:
        if not self.annual_rate > -1:
            raise ValueError(f"annual_rate must exceed -1, got {self.annual_rate}")
        if self.horizon_years < 0:
            raise ValueError("horizon_years must be non-negative")

    def value_at(self, year: float) -> float:
        return self.base_value_mt * (1.0 + self.annual_rate) ** (year - self.base_year)


def project(model: GrowthModel) -> list[tuple[int, float]]:
    """Yearly values from the base year through the horizon, inclusive."""
    years = range(model.base_year, model.base_year + model.horizon_years + 1)
    return [(year, model.value_at(year)) for year in years]


def annualize(per_cycle: float, cycles_per_year: int = CYCLES_PER_YEAR) -> float:
    return (1.0 + per_cycle) ** cycles_per_year - 1.0


def _loglinear_rate(cycles: Sequence[float], values: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.asarray(cycles, float), np.log(np.asarray(values, float)), 1)
    return math.expm1(slope)


def derive_rates(history, cycles_per_year: int = CYCLES_PER_YEAR, method: str = "geometric") -> tuple[float, float]:
    """Annual (operational, embodied) growth from list-over-list totals.

    ``history`` holds ``(cycle, op_total, emb_total)`` triples with
    consecutive cycle indices. ``method`` is ``"geometric"`` (mean growth per
    cycle from endpoints) or ``"loglinear"`` (least-squares fit of log totals).
    """
    rows = sorted(history)
    if len(rows) < 2:
        raise InsufficientHistory(f"need at least 2 cycles, got {len(rows)}")
    cycles = [r[0] for r in rows]
    rates = []
    for column in (1, 2):
        values = [r[column] for r in rows]
        if any(v <= 0 for v in values):
            raise ValueError("history totals must be positive")
        if method == "geometric":
            span = cycles[-1] - cycles[0]
            if span <= 0:
                raise InsufficientHistory("history spans no cycles")
            per_cycle = (values[-1] / values[0]) ** (1.0 / span) - 1.0
        elif method == "loglinear":
            per_cycle = _loglinear_rate(cycles, values)
        else:
            raise ValueError(f"unknown method {method!r}")
        rates.append(annualize(per_cycle, cycles_per_year))
    return rates[0], rates[1]


@dataclass(frozen=True)
class PerfPerCarbon:
    years: tuple[float, ...]
    ratio: tuple[float, ...]
    slope_per_year: float
    dennard: tuple[float, ...]


def perf_per_carbon(years: Sequence[float], perf_pflops: Sequence[float], carbon_kmt: Sequence[float]) -> PerfPerCarbon:
    """PFlop/s per thousand MT CO2e by year, its linear trend, and a Dennard reference.

    The reference line starts at the first ratio and doubles every 1.5 years.
    """
    if not (len(years) == len(perf_pflops) == len(carbon_kmt)):
        raise LengthMismatch(
            f"series lengths differ: years={len(years)}, perf={len(perf_pflops)}, carbon={len(carbon_kmt)}"
        )
    if not years:
        raise LengthMismatch("series are empty")
    if any(c <= 0 for c in carbon_kmt):
        raise NonPositiveCarbon("carbon totals must be positive")
    ratio = [p / c for p, c in zip(perf_pflops, carbon_kmt)]
    slope = float(np.polyfit(np.asarray(years, float), np.asarray(ratio), 1)[0]) if len(years) > 1 else 0.0
    y0 = years[0]
    dennard = [ratio[0] * 2.0 ** ((y - y0) / DENNARD_DOUBLING_YEARS) for y in years]
    return PerfPerCarbon(tuple(years), tuple(ratio), slope, tuple(dennard))
