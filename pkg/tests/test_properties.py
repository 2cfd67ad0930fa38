import dataclasses
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from hpccarbon import report
from hpccarbon.domain import METRIC_FIELDS, Kind, MemoryType, Provenance, Scenario, classify
from hpccarbon.embodied import embodied_carbon
from hpccarbon.fleet import aggregate, interpolate_missing, scenario_delta, select_peers
from hpccarbon.operational import operational_carbon
from hpccarbon.pipeline import run_stages
from helpers import catalog, configured, estimate, factors, record

positive = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False, allow_infinity=False)
scale = st.floats(min_value=0.01, max_value=100.0)
counts = st.integers(min_value=1, max_value=10_000)

CASCADE = {
    "reported_power_kw": positive,
    "annual_energy_kwh": positive,
    "configuration": st.tuples(counts, counts, counts),
}


@st.composite
def op_records(draw):
    tier = draw(st.sampled_from(sorted(CASCADE)))
    value = draw(CASCADE[tier])
    util = draw(st.floats(min_value=0.05, max_value=1.0))
    if tier == "configuration":
        nodes, cpus, gpus = value
        return configured(nodes=nodes, cpus=cpus, gpus=gpus, utilization=util)
    return record(utilization=util, **{tier: value})


@st.composite
def emb_records(draw):
    nodes, cpus, gpus = draw(counts), draw(counts), draw(counts)
    mem = draw(st.none() | positive)
    return configured(
        nodes=nodes, cpus=cpus, gpus=gpus,
        memory_capacity_gb=mem,
        memory_type=draw(st.sampled_from(list(MemoryType))) if mem is not None else None,
        ssd_capacity_gb=draw(st.none() | positive),
        operation_year=draw(st.none() | st.integers(2005, 2025)),
    )


@given(emb_records(), st.floats(min_value=0, max_value=500))
def test_breakdown_sums_to_value(rec, overhead):
    est = embodied_carbon(rec, factors(node_overhead_kg=overhead), catalog())
    assert math.isclose(sum(est.breakdown.values()), est.value_kg, rel_tol=1e-9)


@given(op_records())
def test_operational_breakdown_sums_to_value(rec):
    est = operational_carbon(rec, factors(), catalog())
    if est.breakdown:
        assert math.isclose(sum(est.breakdown.values()), est.value_kg, rel_tol=1e-9)


@given(op_records(), scale)
def test_linear_in_aci(rec, k):
    base = operational_carbon(rec, factors(), catalog()).value_kg
    scaled = operational_carbon(rec, factors(aci_g_per_kwh={"R": 400.0 * k, "Q": 100.0}), catalog()).value_kg
    assert math.isclose(scaled, k * base, rel_tol=1e-12)
    doubled = operational_carbon(rec, factors(aci_g_per_kwh={"R": 800.0, "Q": 100.0}), catalog()).value_kg
    assert doubled == 2 * base


@given(op_records(), st.floats(min_value=1.0, max_value=3.0))
def test_linear_in_pue(rec, pue):
    base = operational_carbon(rec, factors(pue=1.0), catalog()).value_kg
    assert math.isclose(operational_carbon(rec, factors(pue=pue), catalog()).value_kg, pue * base, rel_tol=1e-12)


@given(op_records(), st.floats(min_value=0.05, max_value=1.0))
def test_linear_in_utilization_and_power(rec, k):
    est = operational_carbon(rec, factors(), catalog())
    if rec.annual_energy_kwh is not None:
        return  # measured energy already embeds utilization
    util = dataclasses.replace(rec, utilization=rec.utilization * k)
    assert math.isclose(operational_carbon(util, factors(), catalog()).value_kg, k * est.value_kg, rel_tol=1e-12)
    if rec.reported_power_kw is not None:
        more = dataclasses.replace(rec, reported_power_kw=rec.reported_power_kw / k)
        assert math.isclose(
            operational_carbon(more, factors(), catalog()).value_kg, est.value_kg / k, rel_tol=1e-12
        )


@given(op_records(), positive)
def test_measured_energy_never_not_estimable(rec, kwh):
    est = operational_carbon(rec.with_fields(Provenance.PUBLIC, annual_energy_kwh=kwh), factors(), catalog())
    assert est.method.value == "MeasuredEnergy" and est.value_kg is not None


FIELD_VALUES = {
    "operation_year": st.integers(2005, 2025),
    "num_nodes": counts,
    "num_gpus": counts,
    "num_cpus": counts,
    "memory_capacity_gb": positive,
    "memory_type": st.sampled_from(list(MemoryType)),
    "ssd_capacity_gb": positive,
    "utilization": st.floats(min_value=0.01, max_value=1.0),
    "annual_energy_kwh": positive,
    "reported_power_kw": positive,
}


@st.composite
def partial_records(draw):
    present = draw(st.sets(st.sampled_from(sorted(FIELD_VALUES))))
    fields = {name: draw(FIELD_VALUES[name]) for name in present}
    if draw(st.booleans()):
        fields["accelerator_model"] = "GPU-A"
    return record(**fields)


@given(partial_records(), st.sampled_from(sorted(FIELD_VALUES)), st.data(), st.booleans())
def test_monotone_information_gain(rec, name, data, devices):
    if getattr(rec, name) is not None:
        return
    richer = rec.with_fields(Provenance.PUBLIC, **{name: data.draw(FIELD_VALUES[name])})
    before, after = classify(rec, devices), classify(richer, devices)
    for flag in (*METRIC_FIELDS.values(), "operational_estimable", "embodied_estimable"):
        assert getattr(after, flag) >= getattr(before, flag)
    for kind_est in (operational_carbon, embodied_carbon):
        if kind_est(rec, factors(), catalog()).estimable:
            assert kind_est(richer, factors(), catalog()).estimable


@given(emb_records(), st.sampled_from(["num_nodes", "num_cpus", "num_gpus", "memory_capacity_gb", "ssd_capacity_gb"]),
       st.floats(min_value=1.0, max_value=10.0))
def test_embodied_monotone_in_counts(rec, name, k):
    current = getattr(rec, name)
    if current is None:
        return
    grown = current * k if isinstance(current, float) else math.ceil(current * k)
    bigger = dataclasses.replace(rec, total_cores=10**6, **{name: grown})
    f = factors(node_overhead_kg=10.0)
    assert embodied_carbon(bigger, f, catalog()).value_kg >= embodied_carbon(rec, f, catalog()).value_kg


fleets = st.lists(st.none() | st.floats(min_value=0, max_value=1e9), min_size=10, max_size=60).filter(
    lambda v: sum(x is not None for x in v) >= 10
)


def _ests(values):
    return [estimate(r, v) for r, v in enumerate(values, 1)]


@given(fleets)
def test_interpolated_within_peer_bounds(values):
    ests = _ests(values)
    out = interpolate_missing(ests)
    known = [e.rank for e in ests if e.estimable]
    by_rank = {e.rank: e.value_kg for e in ests}
    for before, after in zip(ests, out):
        if before.estimable:
            assert after == before
        else:
            peers = [by_rank[r] for r in select_peers(before.rank, known)]
            assert min(peers) <= after.value_kg <= max(peers)


@given(fleets, st.randoms())
def test_aggregate_identity_and_permutation(values, rnd):
    ests = _ests(values)
    a = aggregate(ests, factors())
    shuffled = list(ests)
    rnd.shuffle(shuffled)
    b = aggregate(shuffled, factors())
    assert math.isclose(a.total_mt_co2e, b.total_mt_co2e, rel_tol=1e-9)
    expected = math.fsum(v for v in values if v is not None) / 1000
    assert math.isclose(a.total_mt_co2e, expected, rel_tol=1e-9, abs_tol=1e-12)
    assert math.isclose(a.average_mt_co2e * a.estimated_count, a.total_mt_co2e, rel_tol=1e-9, abs_tol=1e-12)


@given(fleets, st.lists(st.floats(min_value=0.5, max_value=2.0), min_size=60, max_size=60))
def test_delta_matches_per_system_difference(values, factors_):
    a = _ests(values)
    b = _ests([None if v is None else v * f for v, f in zip(values, factors_)])
    d = scenario_delta(a, b)
    for s, ea, eb in zip(d.systems, a, b):
        assert s.delta_kg == (eb.value_kg or 0.0) - (ea.value_kg or 0.0)
    assert math.isclose(d.total_delta_kg, math.fsum(s.delta_kg for s in d.systems), rel_tol=1e-9, abs_tol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.lists(op_records(), min_size=10, max_size=30), st.randoms())
def test_report_rerun_is_byte_identical(recs, rnd):
    fleet = [dataclasses.replace(r, rank=i, name=f"s{i}") for i, r in enumerate(recs, 1)]
    overlaid = [dataclasses.replace(r, scenario=Scenario.BASELINE_PLUS_PUBLIC) for r in fleet]

    def render(records):
        results = {
            k: run_stages(records, overlaid, k, factors(), catalog(), interpolate=k is Kind.OPERATIONAL)
            for k in (Kind.OPERATIONAL, Kind.EMBODIED)
        }
        rows = report.estimate_records(records, results)
        table = report.estimate_table(rows, results)
        return report.to_csv(table), report.to_json(rows)

    first = render(fleet)
    shuffled = list(fleet)
    rnd.shuffle(shuffled)
    assert render(fleet) == first
    assert render(shuffled) == first


def test_embodied_count_grows_with_overlay(reference_fleet, reference_public, shipped_factors, shipped_catalog):
    base = run_stages(reference_fleet, reference_public, Kind.EMBODIED, shipped_factors, shipped_catalog, interpolate=False)
    before = {e.rank for e in base.baseline if e.estimable}
    after = {e.rank for e in base.public if e.estimable}
    assert before <= after
