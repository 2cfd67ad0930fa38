"""Annual operational carbon from a three-tier evidence cascade.

Tiers, first satisfiable wins:

1. measured annual energy,
2. reported system power x utilization x hours,
3. power derived from device TDPs x counts x utilization x hours.

Tier 3 ignores memory and storage draw, so it is a floor rather than a
central estimate.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

from .catalog import CarbonFactorTable, DeviceCatalog, DeviceNotFound, aci_for, resolve_devices
from .domain import Estimate, Kind, Method, SystemRecord, has_configuration


class AnnualEnergy(NamedTuple):
    kwh: Optional[float]
    method: Method
    warnings: tuple[str, ...] = ()


def utilization_for(record: SystemRecord, factors: CarbonFactorTable) -> float:
    if record.utilization is not None:
        return record.utilization
    return factors.default_utilization


def derived_power_kw(record: SystemRecord, catalog: DeviceCatalog, factors: CarbonFactorTable):
    """Sum of device TDPs in kW, or None when counts or devices are missing."""
    if not has_configuration(record):
        return None, ()
    try:
        devices = resolve_devices(record, catalog, factors)
    except (DeviceNotFound, ValueError):
        return None, ()
    watts = record.num_cpus * devices.cpu.tdp_w
    if devices.accelerator is not None:
        watts += record.num_gpus * devices.accelerator.tdp_w
    return watts / 1000.0, devices.warnings


def annual_energy_kwh(
    record: SystemRecord, factors: CarbonFactorTable, catalog: DeviceCatalog
) -> AnnualEnergy:
    if record.annual_energy_kwh is not None:
        return AnnualEnergy(record.annual_energy_kwh, Method.MEASURED_ENERGY)
    hours = factors.hours_per_year
    util = utilization_for(record, factors)
    if record.reported_power_kw is not None:
        return AnnualEnergy(record.reported_power_kw * util * hours, Method.REPORTED_POWER)
    power_kw, warnings = derived_power_kw(record, catalog, factors)
    if power_kw is not None:
        return AnnualEnergy(power_kw * util * hours, Method.DERIVED_POWER, warnings)
    return AnnualEnergy(None, Method.NOT_ESTIMABLE)


def operational_carbon(
    record: SystemRecord, factors: CarbonFactorTable, catalog: DeviceCatalog
) -> Estimate:
    """One year of operational carbon for ``record``, in kg CO2e."""
    energy = annual_energy_kwh(record, factors, catalog)
    if energy.kwh is None:
        return Estimate.not_estimable(
            record.rank, Kind.OPERATIONAL, record.scenario,
            ["no measured energy, reported power, or node/GPU counts"],
        )
    aci, fallback = aci_for(record.region, factors)
    warnings = energy.warnings + ((fallback,) if fallback else ())
    value = energy.kwh * factors.pue_for(record.site) * aci / 1000.0
    return Estimate(
        record.rank, Kind.OPERATIONAL, energy.method, record.scenario,
        value_kg=value, warnings=warnings,
    )
