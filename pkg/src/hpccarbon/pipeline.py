"""Run the estimation stages over a whole fleet."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .catalog import CarbonFactorTable, DeviceCatalog
from .domain import Estimate, Kind, SystemRecord
from .embodied import embodied_carbon
from .fleet import interpolate_missing
from .operational import operational_carbon

ESTIMATORS = {Kind.OPERATIONAL: operational_carbon, Kind.EMBODIED: embodied_carbon}


def estimate_fleet(
    records: Sequence[SystemRecord],
    kind: Kind,
    factors: CarbonFactorTable,
    catalog: DeviceCatalog,
    workers: Optional[int] = None,
) -> list[Estimate]:
    """One estimate per record, in rank order regardless of ``workers``."""
    estimator = ESTIMATORS[kind]
    ordered = sorted(records, key=lambda r: r.rank)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda r: estimator(r, factors, catalog), ordered))
    return [estimator(r, factors, catalog) for r in ordered]


@dataclass(frozen=True)
class StageResults:
    """Estimates for one kind at each data stage: Top500 only, +public, +interpolated."""

    kind: Kind
    baseline: list[Estimate]
    public: Optional[list[Estimate]] = None
    interpolated: Optional[list[Estimate]] = None


def run_stages(
    baseline: Sequence[SystemRecord],
    overlaid: Optional[Sequence[SystemRecord]],
    kind: Kind,
    factors: CarbonFactorTable,
    catalog: DeviceCatalog,
    interpolate: bool = True,
    workers: Optional[int] = None,
) -> StageResults:
    base = estimate_fleet(baseline, kind, factors, catalog, workers)
    public = None if overlaid is None else estimate_fleet(overlaid, kind, factors, catalog, workers)
    filled = None
    if interpolate:
        filled = interpolate_missing(public if public is not None else base)
    return StageResults(kind, base, public, filled)
