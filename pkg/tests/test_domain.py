import dataclasses

import pytest

from hpccarbon.domain import (
    METRIC_FIELDS,
    Estimate,
    Kind,
    MemoryType,
    Method,
    Provenance,
    RecordError,
    Scenario,
    classify,
)
from helpers import configured, record


def test_provenance_defaults_follow_presence():
    r = record(reported_power_kw=500.0)
    assert r.provenance("reported_power_kw") is Provenance.TOP500
    assert r.provenance("num_nodes") is Provenance.ABSENT
    for name in METRIC_FIELDS.values():
        assert name in r.field_provenance


def test_provenance_must_agree_with_presence():
    with pytest.raises(RecordError):
        record(num_nodes=4, field_provenance={"num_nodes": Provenance.ABSENT})
    with pytest.raises(RecordError):
        record(field_provenance={"num_nodes": Provenance.PUBLIC})


@pytest.mark.parametrize("fields", [
    dict(rmax_tflops=200.0, rpeak_tflops=100.0),
    dict(num_cpus=20_000, total_cores=10_000),
    dict(utilization=1.5),
    dict(reported_power_kw=-1.0),
    dict(num_nodes=0),
    dict(memory_capacity_gb=0.0),
    dict(rank=0),
])
def test_record_invariants(fields):
    with pytest.raises(RecordError):
        record(**fields)


def test_records_are_immutable():
    r = record()
    with pytest.raises(dataclasses.FrozenInstanceError):
        r.rank = 2
    with pytest.raises(TypeError):
        r.field_provenance["num_nodes"] = Provenance.PUBLIC


def test_with_fields_records_public_provenance():
    r = record().with_fields(Provenance.PUBLIC, num_nodes=8)
    assert r.num_nodes == 8
    assert r.provenance("num_nodes") is Provenance.PUBLIC
    assert r.provenance("num_cpus") is Provenance.ABSENT


def test_memory_type_parse():
    assert MemoryType.parse("hbm2e") is MemoryType.HBM2E
    assert MemoryType.parse(" DDR5 ") is MemoryType.DDR5
    assert MemoryType.parse("LPDDR5X") is MemoryType.OTHER


def test_estimate_invariants():
    with pytest.raises(ValueError):
        Estimate(1, Kind.OPERATIONAL, Method.NOT_ESTIMABLE, Scenario.BASELINE, value_kg=1.0)
    with pytest.raises(ValueError):
        Estimate(1, Kind.OPERATIONAL, Method.REPORTED_POWER, Scenario.BASELINE, value_kg=-1.0)
    with pytest.raises(ValueError):
        Estimate(1, Kind.OPERATIONAL, Method.REPORTED_POWER, Scenario.BASELINE, value_kg=1.0, breakdown={"memory": 1.0})
    with pytest.raises(ValueError):
        Estimate(1, Kind.EMBODIED, Method.COMPONENT_MODEL, Scenario.BASELINE, value_kg=1.0)
    with pytest.raises(ValueError):
        Estimate(1, Kind.EMBODIED, Method.COMPONENT_MODEL, Scenario.BASELINE, value_kg=3.0, breakdown={"memory": 1.0})
    ok = Estimate(1, Kind.EMBODIED, Method.COMPONENT_MODEL, Scenario.BASELINE, value_kg=3.0,
                  breakdown={"memory": 1.0, "ssd": 2.0})
    assert ok.value_mt == pytest.approx(0.003)


def test_classify_power_only_is_operational_only():
    flags = classify(record(reported_power_kw=1200.0), catalog_has_devices=True)
    assert flags.operational_estimable
    assert not flags.embodied_estimable


def test_classify_fully_specified_record():
    r = configured(
        operation_year=2022, memory_capacity_gb=1000.0, memory_type=MemoryType.DDR5,
        ssd_capacity_gb=10.0, utilization=0.7, annual_energy_kwh=1e6,
    )
    flags = classify(r, catalog_has_devices=True)
    assert all(getattr(flags, name) for name in METRIC_FIELDS.values())
    assert flags.operational_estimable and flags.embodied_estimable


def test_classify_nothing_to_go_on():
    flags = classify(record(operation_year=2020), catalog_has_devices=True)
    assert not flags.operational_estimable
    assert not flags.embodied_estimable


def test_classify_counts_need_resolvable_devices():
    flags = classify(configured(), catalog_has_devices=False)
    assert not flags.operational_estimable
    assert not flags.embodied_estimable


def test_accelerated_record_needs_gpu_count():
    r = record(num_nodes=4, num_cpus=8, accelerator_model="GPU-A")
    assert not classify(r, True).embodied_estimable
    assert classify(record(num_nodes=4, num_cpus=8), True).embodied_estimable
