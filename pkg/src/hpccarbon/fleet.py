"""Fleet-level analytics over per-system estimates.

Coverage by rank bucket, gap filling from rank neighbors, totals and
averages with real-world equivalences, and scenario-to-scenario deltas.
"""

from __future__ import annotations

import bisect
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence

from .catalog import CarbonFactorTable
from .domain import KG_PER_MT, Estimate, Kind, Method, Scenario

PEERS_PER_SIDE = 5


class OverlappingBuckets(ValueError):
    pass


class InsufficientPeers(ValueError):
    pass


class RankMismatch(ValueError):
    pass


def default_buckets(n: int = 500) -> list[tuple[int, int]]:
    """1-25, 26-50, 51-75, 76-100, then blocks of 50, clipped to ``n``."""
    edges = [(1, 25), (26, 50), (51, 75), (76, 100)]
    start = 101
    while start <= max(n, 100):
        edges.append((start, start + 49))
        start += 50
    out = []
    for lo, hi in edges:
        if lo > n:
            break
        out.append((lo, min(hi, n)))
    return out


@dataclass(frozen=True)
class BucketCoverage:
    first_rank: int
    last_rank: int
    estimable: int
    total: int

    @property
    def label(self) -> str:
        return f"{self.first_rank}-{self.last_rank}"


@dataclass(frozen=True)
class CoverageReport:
    scenario: Scenario
    kind: Kind
    estimable_count: int
    total_count: int
    per_bucket: tuple[BucketCoverage, ...]

    @property
    def fraction(self) -> float:
        return self.estimable_count / self.total_count if self.total_count else 0.0

    def __str__(self) -> str:
        return f"{self.estimable_count}/{self.total_count} ({100 * self.fraction:.1f}%)"


def _single(values: set, what: str):
    if len(values) > 1:
        raise ValueError(f"estimates mix {what}: {sorted(v.value for v in values)}")
    return next(iter(values)) if values else None


def coverage(estimates: Sequence[Estimate], buckets: Optional[Sequence[tuple[int, int]]] = None) -> CoverageReport:
    if buckets is None:
        buckets = default_buckets(max((e.rank for e in estimates), default=0))
    ordered = sorted(buckets)
    for (lo_a, hi_a), (lo_b, _) in zip(ordered, ordered[1:]):
        if lo_b <= hi_a:
            raise OverlappingBuckets(f"bucket {lo_b}- overlaps {lo_a}-{hi_a}")
    if any(lo > hi for lo, hi in ordered):
        raise ValueError("bucket bounds must satisfy first <= last")
    starts = [lo for lo, _ in ordered]
    est = [0] * len(ordered)
    tot = [0] * len(ordered)
    for e in estimates:
        i = bisect.bisect_right(starts, e.rank) - 1
        if i < 0 or e.rank > ordered[i][1]:
            raise ValueError(f"rank {e.rank} falls outside every bucket")
        tot[i] += 1
        est[i] += e.estimable
    per_bucket = tuple(BucketCoverage(lo, hi, est[i], tot[i]) for i, (lo, hi) in enumerate(ordered))
    return CoverageReport(
        scenario=_single({e.scenario for e in estimates}, "scenarios") or Scenario.BASELINE,
        kind=_single({e.kind for e in estimates}, "kinds") or Kind.OPERATIONAL,
        estimable_count=sum(est),
        total_count=len(estimates),
        per_bucket=per_bucket,
    )


def select_peers(gap_rank: int, estimable_ranks: Sequence[int], per_side: int = PEERS_PER_SIDE) -> list[int]:
    """Ranks of the peers used to fill ``gap_rank``.

    Up to ``per_side`` nearest estimable ranks above and below; a side that
    runs out hands its shortfall to the other side. ``estimable_ranks`` must
    be sorted ascending.
    """
    split = bisect.bisect_left(estimable_ranks, gap_rank)
    above = estimable_ranks[max(0, split - per_side):split]
    below = estimable_ranks[split:split + per_side]
    short = 2 * per_side - len(above) - len(below)
    if short > 0:
        if len(above) < per_side:
            below = estimable_ranks[split:split + per_side + short]
        else:
            above = estimable_ranks[max(0, split - per_side - short):split]
    return [*above, *below]


def interpolate_missing(estimates: Sequence[Estimate], per_side: int = PEERS_PER_SIDE) -> list[Estimate]:
    """Fill each NotEstimable system with the mean of its nearest estimable rank peers."""
    ordered = sorted(estimates, key=lambda e: e.rank)
    known = [e for e in ordered if e.estimable]
    if len(known) < 2 * per_side:
        raise InsufficientPeers(f"need {2 * per_side} estimable systems, have {len(known)}")
    ranks = [e.rank for e in known]
    value = {e.rank: e.value_kg for e in known}
    out = []
    for e in ordered:
        if e.estimable:
            out.append(e)
            continue
        peers = select_peers(e.rank, ranks, per_side)
        peer_values = [value[r] for r in peers]
        # Clamp away last-ulp rounding so the mean stays inside the peer range.
        mean = min(max(math.fsum(peer_values) / len(peers), min(peer_values)), max(peer_values))
        note = f"interpolated from ranks {peers[0]}-{peers[-1]} ({len(peers)} peers)"
        out.append(replace(e, method=Method.INTERPOLATED, value_kg=mean, breakdown=None, warnings=(note,)))
    return out


@dataclass(frozen=True)
class Equivalences:
    vehicles: float
    miles: float


def equivalences(total_mt: float, factors: CarbonFactorTable) -> Equivalences:
    """Gasoline-vehicle years and vehicle miles matching ``total_mt`` of CO2e."""
    return Equivalences(
        vehicles=total_mt / (factors.vehicle_kg_per_year / KG_PER_MT),
        miles=total_mt * 1e6 / factors.grams_per_mile,
    )


@dataclass(frozen=True)
class FleetAssessment:
    scenario: Scenario
    kind: Kind
    total_mt_co2e: float
    average_mt_co2e: float
    estimated_count: int
    total_count: int
    method_counts: Mapping[Method, int]
    equivalences: Equivalences


def aggregate(estimates: Sequence[Estimate], factors: CarbonFactorTable) -> FleetAssessment:
    # Rank order fixes the summation order; fsum makes it exact anyway.
    ordered = sorted(estimates, key=lambda e: e.rank)
    values = [e.value_kg for e in ordered if e.value_kg is not None]
    total_mt = math.fsum(values) / KG_PER_MT
    average = total_mt / len(values) if values else 0.0
    counts = Counter(e.method for e in ordered)
    return FleetAssessment(
        scenario=_single({e.scenario for e in ordered}, "scenarios") or Scenario.BASELINE,
        kind=_single({e.kind for e in ordered}, "kinds") or Kind.OPERATIONAL,
        total_mt_co2e=total_mt,
        average_mt_co2e=average,
        estimated_count=len(values),
        total_count=len(ordered),
        method_counts=dict(sorted(counts.items(), key=lambda kv: kv[0].value)),
        equivalences=equivalences(total_mt, factors),
    )


@dataclass(frozen=True)
class SystemDelta:
    rank: int
    before_kg: Optional[float]
    after_kg: Optional[float]
    delta_kg: float
    newly_estimable: bool = False
    lost: bool = False


@dataclass(frozen=True)
class ScenarioDelta:
    kind: Kind
    from_scenario: Scenario
    to_scenario: Scenario
    systems: tuple[SystemDelta, ...]
    total_before_kg: float
    total_after_kg: float

    @property
    def total_delta_kg(self) -> float:
        return math.fsum(s.delta_kg for s in self.systems)

    @property
    def total_delta_mt(self) -> float:
        return self.total_delta_kg / KG_PER_MT

    @property
    def percent_change(self) -> float:
        if self.total_before_kg == 0:
            return math.inf if self.total_delta_kg else 0.0
        return 100.0 * self.total_delta_kg / self.total_before_kg

    @property
    def newly_estimable(self) -> int:
        return sum(s.newly_estimable for s in self.systems)


def scenario_delta(a: Sequence[Estimate], b: Sequence[Estimate]) -> ScenarioDelta:
    """Per-system and total change going from scenario ``a`` to scenario ``b``."""
    before = {e.rank: e for e in a}
    after = {e.rank: e for e in b}
    if len(before) != len(a) or len(after) != len(b):
        raise RankMismatch("duplicate ranks in an estimate list")
    if before.keys() != after.keys():
        only_a = sorted(before.keys() - after.keys())[:5]
        only_b = sorted(after.keys() - before.keys())[:5]
        raise RankMismatch(f"rank sets differ (only in first: {only_a}, only in second: {only_b})")
    kinds = {e.kind for e in (*a, *b)}
    systems = []
    for rank in sorted(before):
        x, y = before[rank].value_kg, after[rank].value_kg
        systems.append(SystemDelta(
            rank=rank, before_kg=x, after_kg=y,
            delta_kg=(y or 0.0) - (x or 0.0),
            newly_estimable=x is None and y is not None,
            lost=x is not None and y is None,
        ))
    return ScenarioDelta(
        kind=_single(kinds, "kinds") or Kind.OPERATIONAL,
        from_scenario=_single({e.scenario for e in a}, "scenarios") or Scenario.BASELINE,
        to_scenario=_single({e.scenario for e in b}, "scenarios") or Scenario.BASELINE,
        systems=tuple(systems),
        total_before_kg=math.fsum(e.value_kg for e in a if e.value_kg is not None),
        total_after_kg=math.fsum(e.value_kg for e in b if e.value_kg is not None),
    )
