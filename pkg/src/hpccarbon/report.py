"""Report assembly: per-system tables, fleet summaries and plot-ready series.

Everything here is pure. Functions return header/row tables or JSON-ready
dicts; serialization is deterministic (rank order, fixed two-decimal MT
values) so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Iterable, Mapping, Optional, Sequence

from .catalog import CarbonFactorTable
from .domain import KG_PER_MT, METRIC_FIELDS, Estimate, Kind, Scenario, SystemRecord
from .fleet import CoverageReport, FleetAssessment, ScenarioDelta
from .pipeline import StageResults
from .projection import GrowthModel, PerfPerCarbon, project

STAGES = ("top500", "public", "interpolated")
UNIT = "MT CO2e"

Table = tuple[list[str], list[list[str]]]


def fmt_mt(value_mt: Optional[float]) -> str:
    return "" if value_mt is None else f"{value_mt:.2f}"


def _mt(estimate: Optional[Estimate]) -> Optional[float]:
    if estimate is None or estimate.value_kg is None:
        return None
    return estimate.value_kg / KG_PER_MT


def _stage_lists(results: StageResults) -> dict[str, Optional[list[Estimate]]]:
    return {"top500": results.baseline, "public": results.public, "interpolated": results.interpolated}


def _cell(estimate: Optional[Estimate], amortize_years: Optional[float] = None) -> dict:
    if estimate is None:
        cell = {"value_mt": None, "method": None, "scenario": None}
    else:
        value = _mt(estimate)
        cell = {
            "value_mt": None if value is None else round(value, 2),
            "method": estimate.method.value,
            "scenario": estimate.scenario.value,
        }
    if amortize_years is not None:
        value = cell["value_mt"]
        cell["value_mt_per_year"] = None if value is None else round(_mt(estimate) / amortize_years, 2)
    return cell


def estimate_records(
    records: Sequence[SystemRecord],
    results: Mapping[Kind, StageResults],
    amortize_years: Optional[float] = None,
) -> list[dict]:
    """One structured row per system: each kind's three stages plus merged warnings.

    Stages that were not run are present with every field null.
    ``amortize_years`` adds a per-year column to embodied cells.
    """
    by_stage = {
        kind: {stage: ({e.rank: e for e in ests} if ests is not None else None) for stage, ests in _stage_lists(r).items()}
        for kind, r in results.items()
    }
    rows = []
    for record in sorted(records, key=lambda r: r.rank):
        row = {"rank": record.rank, "name": record.name}
        warnings: list[str] = []
        for kind in results:
            per_stage = {}
            for stage in STAGES:
                lookup = by_stage[kind][stage]
                est = lookup.get(record.rank) if lookup is not None else None
                years = amortize_years if kind is Kind.EMBODIED else None
                per_stage[stage] = _cell(est, years)
                for w in est.warnings if est is not None else ():
                    tagged = f"{kind.value.lower()}/{stage}: {w}"
                    if tagged not in warnings:
                        warnings.append(tagged)
            row[kind.value.lower()] = per_stage
        row["warnings"] = warnings
        rows.append(row)
    return rows


def estimate_table(rows: Sequence[dict], kinds: Iterable[Kind], amortize: bool = False) -> Table:
    kinds = list(kinds)
    header = ["rank", "name"]
    for kind in kinds:
        k = kind.value.lower()
        for stage in STAGES:
            header += [f"{k}_{stage}_mt", f"{k}_{stage}_method", f"{k}_{stage}_scenario"]
            if amortize and kind is Kind.EMBODIED:
                header.append(f"{k}_{stage}_mt_per_year")
    header.append("warnings")
    body = []
    for row in rows:
        line = [str(row["rank"]), row["name"]]
        for kind in kinds:
            for stage in STAGES:
                cell = row[kind.value.lower()][stage]
                line += [fmt_mt(cell["value_mt"]), cell["method"] or "", cell["scenario"] or ""]
                if amortize and kind is Kind.EMBODIED:
                    line.append(fmt_mt(cell.get("value_mt_per_year")))
        line.append("; ".join(row["warnings"]))
        body.append(line)
    return header, body


def report_meta(factors: CarbonFactorTable, **extra) -> dict:
    meta = {
        "unit": UNIT,
        "pue_default": factors.pue,
        "pue_note": "PUE multiplies every operational tier; site overrides apply where configured",
        "default_utilization": factors.default_utilization,
        "hours_per_year": factors.hours_per_year,
    }
    meta.update(extra)
    return meta


def coverage_table(reports: Sequence[CoverageReport]) -> Table:
    header = ["kind", "scenario", "bucket", "first_rank", "last_rank", "estimable", "total", "fraction"]
    body = []
    for rep in reports:
        for b in rep.per_bucket:
            frac = b.estimable / b.total if b.total else 0.0
            body.append([
                rep.kind.value, rep.scenario.value, b.label, str(b.first_rank), str(b.last_rank),
                str(b.estimable), str(b.total), f"{frac:.4f}",
            ])
        body.append([
            rep.kind.value, rep.scenario.value, "all", "", "", str(rep.estimable_count),
            str(rep.total_count), f"{rep.fraction:.4f}",
        ])
    return header, body


def coverage_json(reports: Sequence[CoverageReport]) -> list[dict]:
    return [
        {
            "kind": rep.kind.value,
            "scenario": rep.scenario.value,
            "estimable": rep.estimable_count,
            "total": rep.total_count,
            "summary": str(rep),
            "buckets": [
                {"bucket": b.label, "estimable": b.estimable, "total": b.total} for b in rep.per_bucket
            ],
        }
        for rep in reports
    ]


def completeness_table(columns: Mapping[str, Mapping[str, int]], total: int) -> Table:
    """Absent counts per metric, one column per scenario label."""
    labels = list(columns)
    header = ["metric", *(f"absent_{label}" for label in labels), "total"]
    body = [[metric, *(str(columns[label][metric]) for label in labels), str(total)] for metric in METRIC_FIELDS]
    return header, body


def _method_mix(assessment: FleetAssessment) -> str:
    return ";".join(f"{m.value}={n}" for m, n in assessment.method_counts.items())


def totals_table(assessments: Sequence[tuple[str, FleetAssessment]]) -> Table:
    header = [
        "kind", "stage", "scenario", "total_mt", "average_mt", "estimated", "systems",
        "vehicles", "miles", "methods",
    ]
    body = []
    for stage, a in assessments:
        body.append([
            a.kind.value, stage, a.scenario.value, fmt_mt(a.total_mt_co2e), fmt_mt(a.average_mt_co2e),
            str(a.estimated_count), str(a.total_count), f"{a.equivalences.vehicles:.0f}",
            f"{a.equivalences.miles:.0f}", _method_mix(a),
        ])
    return header, body


def totals_json(assessments: Sequence[tuple[str, FleetAssessment]]) -> list[dict]:
    return [
        {
            "kind": a.kind.value,
            "stage": stage,
            "scenario": a.scenario.value,
            "total_mt": round(a.total_mt_co2e, 2),
            "average_mt": round(a.average_mt_co2e, 2),
            "estimated": a.estimated_count,
            "systems": a.total_count,
            "vehicles": round(a.equivalences.vehicles),
            "miles": round(a.equivalences.miles),
            "methods": {m.value: n for m, n in a.method_counts.items()},
        }
        for stage, a in assessments
    ]


def delta_table(
    deltas: Sequence[ScenarioDelta],
    before: Mapping[Kind, Sequence[Estimate]],
    after: Mapping[Kind, Sequence[Estimate]],
    names: Mapping[int, str],
) -> Table:
    header = [
        "rank", "name", "kind", "before_mt", "before_method", "before_scenario",
        "after_mt", "after_method", "after_scenario", "delta_mt", "newly_estimable",
    ]
    body = []
    for d in deltas:
        b = {e.rank: e for e in before[d.kind]}
        a = {e.rank: e for e in after[d.kind]}
        for s in d.systems:
            eb, ea = b[s.rank], a[s.rank]
            body.append([
                str(s.rank), names.get(s.rank, ""), d.kind.value,
                fmt_mt(_mt(eb)), eb.method.value, eb.scenario.value,
                fmt_mt(_mt(ea)), ea.method.value, ea.scenario.value,
                fmt_mt(s.delta_kg / KG_PER_MT), "yes" if s.newly_estimable else "no",
            ])
    return header, body


def delta_summary(deltas: Sequence[ScenarioDelta]) -> list[dict]:
    return [
        {
            "kind": d.kind.value,
            "from_scenario": d.from_scenario.value,
            "to_scenario": d.to_scenario.value,
            "before_mt": round(d.total_before_kg / KG_PER_MT, 2),
            "after_mt": round(d.total_after_kg / KG_PER_MT, 2),
            "delta_mt": round(d.total_delta_mt, 2),
            "percent_change": round(d.percent_change, 4),
            "newly_estimable": d.newly_estimable,
        }
        for d in deltas
    ]


def projection_table(models: Sequence[tuple[str, GrowthModel]], first_year: Optional[int] = None) -> Table:
    """Projected values per (kind label, model), from ``first_year`` through each horizon."""
    header = ["year", "kind", "value_mt", "method", "annual_rate", "base_year", "multiple_of_base"]
    body = []
    for kind, model in models:
        for year, value in project(model):
            if first_year is not None and year < first_year:
                continue
            body.append([
                str(year), kind, fmt_mt(value), "CompoundGrowth", f"{model.annual_rate:.6f}",
                str(model.base_year), f"{value / model.base_value_mt:.4f}",
            ])
    return header, body


def perf_table(ppc: PerfPerCarbon, perf: Sequence[float], carbon: Sequence[float]) -> Table:
    header = ["year", "perf_pflops", "carbon_kmt", "pflops_per_kmt", "dennard_pflops_per_kmt", "method"]
    body = [
        [f"{y:g}", f"{p:.3f}", f"{c:.3f}", f"{r:.4f}", f"{d:.4f}", "LinearTrend"]
        for y, p, c, r, d in zip(ppc.years, perf, carbon, ppc.ratio, ppc.dennard)
    ]
    return header, body


def to_csv(table: Table, delimiter: str = ",") -> str:
    header, body = table
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(body)
    return buf.getvalue()


def to_json(data) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def to_text(table: Table, max_width: int = 48) -> str:
    """Fixed-width human-readable rendering; long cells are truncated."""
    header, body = table
    rows = [[c if len(c) <= max_width else c[: max_width - 3] + "..." for c in r] for r in [header, *body]]
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def scenario_label(scenario: Scenario) -> str:
    return "baseline" if scenario is Scenario.BASELINE else "overlay"
