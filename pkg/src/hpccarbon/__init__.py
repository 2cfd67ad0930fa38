"""Operational and embodied carbon estimates for fleets of HPC systems."""

from .catalog import CarbonFactorTable, DeviceCatalog, load_catalog, load_factors
from .domain import Estimate, Kind, Method, Provenance, Scenario, SystemRecord
from .embodied import embodied_carbon
from .fleet import aggregate, coverage, interpolate_missing, scenario_delta
from .ingest import apply_overlay, parse_fleet, parse_overlay
from .operational import operational_carbon
from .projection import GrowthModel, derive_rates, perf_per_carbon, project

__version__ = "0.1.0"

__all__ = [
    "CarbonFactorTable", "DeviceCatalog", "Estimate", "GrowthModel", "Kind", "Method",
    "Provenance", "Scenario", "SystemRecord", "aggregate", "apply_overlay", "coverage",
    "derive_rates", "embodied_carbon", "interpolate_missing", "load_catalog", "load_factors",
    "operational_carbon", "parse_fleet", "parse_overlay", "perf_per_carbon", "project",
    "scenario_delta",
]
