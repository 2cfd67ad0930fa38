"""Core value types shared by every stage of the carbon pipeline.

Units are fixed fleet-wide: power in kW, energy in kWh, carbon in kg CO2e
internally and MT CO2e (1 MT = 1000 kg) in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Optional

KG_PER_MT = 1000.0
HOURS_PER_YEAR = 8760.0


class Provenance(str, Enum):
    TOP500 = "Top500Org"
    PUBLIC = "PublicOverlay"
    ABSENT = "Absent"


class Scenario(str, Enum):
    BASELINE = "Baseline"
    BASELINE_PLUS_PUBLIC = "BaselinePlusPublic"


class Kind(str, Enum):
    OPERATIONAL = "Operational"
    EMBODIED = "Embodied"


class Method(str, Enum):
    MEASURED_ENERGY = "MeasuredEnergy"
    REPORTED_POWER = "ReportedPower"
    DERIVED_POWER = "DerivedPower"
    COMPONENT_MODEL = "ComponentModel"
    PROXY_ACCELERATOR = "ProxyAccelerator"
    INTERPOLATED = "Interpolated"
    NOT_ESTIMABLE = "NotEstimable"


class MemoryType(str, Enum):
    DDR3 = "DDR3"
    DDR4 = "DDR4"
    DDR5 = "DDR5"
    HBM2 = "HBM2"
    HBM2E = "HBM2e"
    HBM3 = "HBM3"
    OTHER = "Other"

    @classmethod
    def parse(cls, text: str) -> "MemoryType":
        key = text.strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        return cls.OTHER


# The nine data metrics a carbon model needs beyond the Top500 ranking
# attributes, in reporting order, mapped to their SystemRecord field.
METRIC_FIELDS: dict[str, str] = {
    "Operation Year": "operation_year",
    "# of Compute Nodes": "num_nodes",
    "# of GPUs": "num_gpus",
    "# of CPUs": "num_cpus",
    "Memory Capacity": "memory_capacity_gb",
    "Memory Type": "memory_type",
    "SSD Capacity": "ssd_capacity_gb",
    "System Util (opt.)": "utilization",
    "Annual Power Consumed (opt.)": "annual_energy_kwh",
}

# Optional fields whose presence is tracked per record. Superset of the
# nine metrics: reported power and the accelerator model can also arrive
# from public overlays.
TRACKED_FIELDS: tuple[str, ...] = (
    *METRIC_FIELDS.values(),
    "reported_power_kw",
    "accelerator_model",
)

# Required identity/structure fields; always Top500Org-sourced unless an
# overlay refines them.
STRUCTURAL_FIELDS: tuple[str, ...] = ("name", "site", "region", "processor_model")


class RecordError(ValueError):
    """A SystemRecord violates one of its invariants."""


@dataclass(frozen=True)
class SystemRecord:
    rank: int
    name: str
    site: str
    region: str
    rmax_tflops: float
    rpeak_tflops: float
    total_cores: int
    processor_model: str
    operation_year: Optional[int] = None
    accelerator_model: Optional[str] = None
    reported_power_kw: Optional[float] = None
    num_nodes: Optional[int] = None
    num_gpus: Optional[int] = None
    num_cpus: Optional[int] = None
    memory_capacity_gb: Optional[float] = None
    memory_type: Optional[MemoryType] = None
    ssd_capacity_gb: Optional[float] = None
    utilization: Optional[float] = None
    annual_energy_kwh: Optional[float] = None
    field_provenance: Mapping[str, Provenance] = field(default_factory=dict)
    scenario: Scenario = Scenario.BASELINE

    def __post_init__(self) -> None:
        prov = dict(self.field_provenance)
        for name in TRACKED_FIELDS:
            present = getattr(self, name) is not None
            if name not in prov:
                prov[name] = Provenance.TOP500 if present else Provenance.ABSENT
            elif (prov[name] is Provenance.ABSENT) == present:
                raise RecordError(
                    f"rank {self.rank}: provenance of {name!r} is {prov[name].value} "
                    f"but the field is {'present' if present else 'absent'}"
                )
        for name in STRUCTURAL_FIELDS:
            prov.setdefault(name, Provenance.TOP500)
        object.__setattr__(self, "field_provenance", MappingProxyType(prov))
        self._validate()

    def _validate(self) -> None:
        if self.rank < 1:
            raise RecordError(f"rank must be positive, got {self.rank}")
        if self.rmax_tflops < 0 or self.rpeak_tflops < 0:
            raise RecordError(f"rank {self.rank}: Rmax/Rpeak must be non-negative")
        if self.rmax_tflops > self.rpeak_tflops:
            raise RecordError(
                f"rank {self.rank}: Rmax {self.rmax_tflops} exceeds Rpeak {self.rpeak_tflops}"
            )
        if self.total_cores < 1:
            raise RecordError(f"rank {self.rank}: total_cores must be positive")
        if self.num_cpus is not None:
            if self.num_cpus < 1:
                raise RecordError(f"rank {self.rank}: num_cpus must be positive")
            if self.num_cpus > self.total_cores:
                raise RecordError(f"rank {self.rank}: num_cpus exceeds total_cores")
        if self.num_nodes is not None and self.num_nodes < 1:
            raise RecordError(f"rank {self.rank}: num_nodes must be positive")
        if self.num_gpus is not None and self.num_gpus < 0:
            raise RecordError(f"rank {self.rank}: num_gpus must be non-negative")
        if self.reported_power_kw is not None and self.reported_power_kw < 0:
            raise RecordError(f"rank {self.rank}: reported_power_kw must be non-negative")
        if self.memory_capacity_gb is not None and self.memory_capacity_gb <= 0:
            raise RecordError(f"rank {self.rank}: memory_capacity_gb must be positive")
        if self.ssd_capacity_gb is not None and self.ssd_capacity_gb < 0:
            raise RecordError(f"rank {self.rank}: ssd_capacity_gb must be non-negative")
        if self.annual_energy_kwh is not None and self.annual_energy_kwh < 0:
            raise RecordError(f"rank {self.rank}: annual_energy_kwh must be non-negative")
        if self.utilization is not None and not 0.0 <= self.utilization <= 1.0:
            raise RecordError(f"rank {self.rank}: utilization must lie in [0, 1]")

    def provenance(self, name: str) -> Provenance:
        return self.field_provenance[name]

    def with_fields(self, provenance: Provenance, **values) -> "SystemRecord":
        """Return a copy with ``values`` set and their provenance recorded."""
        prov = dict(self.field_provenance)
        for name, value in values.items():
            prov[name] = Provenance.ABSENT if value is None else provenance
        return replace(self, field_provenance=prov, **values)


RECORD_FIELD_NAMES: tuple[str, ...] = tuple(
    f.name for f in fields(SystemRecord) if f.name not in ("field_provenance", "scenario")
)


@dataclass(frozen=True)
class Estimate:
    """A carbon value for one system; ``value_kg`` is None iff not estimable."""

    rank: int
    kind: Kind
    method: Method
    scenario: Scenario
    value_kg: Optional[float] = None
    breakdown: Optional[Mapping[str, float]] = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.method is Method.NOT_ESTIMABLE:
            if self.value_kg is not None:
                raise ValueError("a NotEstimable estimate carries no value")
        elif self.value_kg is None or not self.value_kg >= 0:
            raise ValueError(f"estimate value must be >= 0, got {self.value_kg}")
        if self.kind is Kind.OPERATIONAL and self.breakdown is not None:
            raise ValueError("operational estimates have no component breakdown")
        if (
            self.kind is Kind.EMBODIED
            and self.method is Method.COMPONENT_MODEL
            and self.breakdown is None
        ):
            raise ValueError("component-model estimates must carry a breakdown")
        if self.breakdown is not None:
            object.__setattr__(self, "breakdown", MappingProxyType(dict(self.breakdown)))
            total = math.fsum(self.breakdown.values())
            if not math.isclose(total, self.value_kg, rel_tol=1e-9, abs_tol=1e-9):
                raise ValueError(f"breakdown sums to {total}, value is {self.value_kg}")

    @property
    def estimable(self) -> bool:
        return self.method is not Method.NOT_ESTIMABLE

    @property
    def value_mt(self) -> Optional[float]:
        return None if self.value_kg is None else self.value_kg / KG_PER_MT

    @classmethod
    def not_estimable(
        cls, rank: int, kind: Kind, scenario: Scenario, warnings=()
    ) -> "Estimate":
        return cls(rank, kind, Method.NOT_ESTIMABLE, scenario, warnings=tuple(warnings))


@dataclass(frozen=True)
class MetricPresence:
    operation_year: bool
    num_nodes: bool
    num_gpus: bool
    num_cpus: bool
    memory_capacity_gb: bool
    memory_type: bool
    ssd_capacity_gb: bool
    utilization: bool
    annual_energy_kwh: bool
    operational_estimable: bool
    embodied_estimable: bool


def has_configuration(record: SystemRecord) -> bool:
    """Node, CPU and (for accelerated systems) GPU counts are all known."""
    if record.num_nodes is None or record.num_cpus is None:
        return False
    return record.accelerator_model is None or record.num_gpus is not None


def classify(record: SystemRecord, catalog_has_devices: bool) -> MetricPresence:
    """Flag which metrics a record carries and which estimates it supports.

    ``catalog_has_devices`` says whether the record's processor (and
    accelerator, directly or through the proxy) resolve to catalog specs.
    """
    flags = {name: getattr(record, name) is not None for name in METRIC_FIELDS.values()}
    derivable = has_configuration(record) and catalog_has_devices
    operational = (
        record.annual_energy_kwh is not None
        or record.reported_power_kw is not None
        or derivable
    )
    return MetricPresence(
        **flags, operational_estimable=operational, embodied_estimable=derivable
    )
