"""Lifetime embodied carbon from system configuration.

Per-component model: logic dies by area and process node, memory and SSD
by capacity, plus a fixed per-node overhead for boards, chassis and PSUs.
"""

from __future__ import annotations

import math

from .catalog import CarbonFactorTable, DeviceCatalog, DeviceNotFound, DeviceSpec, resolve_devices
from .domain import Estimate, Kind, Method, SystemRecord, has_configuration

COMPONENTS = ("cpu_dies", "accelerator_dies", "memory", "ssd", "node_overhead")


def die_kg(spec: DeviceSpec, count: int, year, factors: CarbonFactorTable) -> float:
    node = spec.process_node or factors.node_for_year(year)
    return count * spec.die_area_mm2 * factors.die_factor(node)


def embodied_carbon(
    record: SystemRecord, factors: CarbonFactorTable, catalog: DeviceCatalog
) -> Estimate:
    if not has_configuration(record):
        return Estimate.not_estimable(
            record.rank, Kind.EMBODIED, record.scenario,
            ["missing node, CPU or GPU counts"],
        )
    try:
        devices = resolve_devices(record, catalog, factors)
    except (DeviceNotFound, ValueError) as exc:
        return Estimate.not_estimable(
            record.rank, Kind.EMBODIED, record.scenario,
            [f"device not in catalog: {exc}"],
        )

    warnings = list(devices.warnings)
    year = record.operation_year
    breakdown = dict.fromkeys(COMPONENTS, 0.0)
    breakdown["cpu_dies"] = die_kg(devices.cpu, record.num_cpus, year, factors)
    if devices.accelerator is not None:
        breakdown["accelerator_dies"] = die_kg(devices.accelerator, record.num_gpus, year, factors)

    if record.memory_capacity_gb is not None:
        breakdown["memory"] = record.memory_capacity_gb * factors.memory_factor(record.memory_type)
    else:
        warnings.append("memory capacity unknown; memory component counted as 0")
    if record.ssd_capacity_gb is not None:
        breakdown["ssd"] = record.ssd_capacity_gb * factors.ssd_kg_per_gb
    else:
        warnings.append("SSD capacity unknown; SSD component counted as 0")
    breakdown["node_overhead"] = record.num_nodes * factors.node_overhead_kg

    method = Method.PROXY_ACCELERATOR if devices.proxied else Method.COMPONENT_MODEL
    return Estimate(
        record.rank, Kind.EMBODIED, method, record.scenario,
        value_kg=math.fsum(breakdown.values()), breakdown=breakdown,
        warnings=tuple(warnings),
    )


def amortized_kg_per_year(estimate: Estimate, factors: CarbonFactorTable):
    """Embodied carbon spread evenly over the configured lifetime."""
    if estimate.value_kg is None:
        return None
    return estimate.value_kg / factors.lifetime_years
