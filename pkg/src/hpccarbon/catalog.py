"""Device catalog and carbon-factor tables.

Both ship as editable YAML next to this module and are loaded at runtime;
operators patch factors by editing data, never code.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Optional, Union

from .domain import MemoryType
from .yamlio import Located, SchemaError, check_schema_version, load, require_mapping, require_number

SCHEMA_VERSION = 1
FACTORS_ENV = "HPCCARBON_FACTORS"
CATALOG_ENV = "HPCCARBON_CATALOG"

PROCESS_NODES = ("N3", "N5", "N7", "N10", "N14", "N16", "N22", "N28", "Other")


class DeviceKind(str, Enum):
    CPU = "CPU"
    ACCELERATOR = "Accelerator"


class DeviceNotFound(LookupError):
    """No catalog entry matches a processor or accelerator string."""


class ProxyUnconfigured(LookupError):
    """The factor table names no proxy accelerator."""


PROXY_WARNING = (
    "accelerator {model!r} not in catalog; approximated by mainstream GPU {proxy!r} "
    "(systematic underestimate of silicon area)"
)


@dataclass(frozen=True)
class DeviceSpec:
    model_id: str
    kind: DeviceKind
    tdp_w: float
    die_area_mm2: float
    process_node: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.tdp_w > 0:
            raise ValueError(f"{self.model_id}: tdp_w must be positive")
        if not self.die_area_mm2 > 0:
            raise ValueError(f"{self.model_id}: die_area_mm2 must be positive")
        if self.process_node is not None and self.process_node not in PROCESS_NODES:
            raise ValueError(f"{self.model_id}: unknown process node {self.process_node!r}")


@dataclass(frozen=True)
class CarbonFactorTable:
    aci_g_per_kwh: Mapping[str, float]
    aci_global_default: float
    die_kg_per_mm2: Mapping[str, float]
    memory_kg_per_gb: Mapping[MemoryType, float]
    ssd_kg_per_gb: float
    node_overhead_kg: float
    pue: float = 1.20
    default_utilization: float = 0.80
    vehicle_kg_per_year: float = 4280.0
    grams_per_mile: float = 394.4
    region_aliases: Mapping[str, str] = field(default_factory=dict)
    pue_by_site: Mapping[str, float] = field(default_factory=dict)
    # (first year, process node) pairs, newest first.
    process_node_by_year: tuple[tuple[int, str], ...] = ((0, "Other"),)
    proxy: Optional[DeviceSpec] = None
    lifetime_years: float = 5.0
    hours_per_year: float = 8760.0

    def __post_init__(self) -> None:
        for name, table in (("aci_g_per_kwh", self.aci_g_per_kwh), ("die_kg_per_mm2", self.die_kg_per_mm2)):
            for key, value in table.items():
                if not value > 0:
                    raise ValueError(f"{name}[{key}] must be positive")
        for key, value in self.memory_kg_per_gb.items():
            if not value > 0:
                raise ValueError(f"memory_kg_per_gb[{key}] must be positive")
        if MemoryType.OTHER not in self.memory_kg_per_gb:
            raise ValueError("memory_kg_per_gb needs an 'Other' fallback")
        if "Other" not in self.die_kg_per_mm2:
            raise ValueError("die_kg_per_mm2 needs an 'Other' fallback")
        for name in ("aci_global_default", "ssd_kg_per_gb", "vehicle_kg_per_year", "grams_per_mile", "lifetime_years"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.node_overhead_kg < 0:
            raise ValueError("node_overhead_kg must be non-negative")
        if not self.pue >= 1.0 or any(not v >= 1.0 for v in self.pue_by_site.values()):
            raise ValueError("PUE must be >= 1")
        if not 0.0 <= self.default_utilization <= 1.0:
            raise ValueError("default_utilization must lie in [0, 1]")
        if self.hours_per_year < 0:
            raise ValueError("hours_per_year must be non-negative")
        for attr in ("aci_g_per_kwh", "die_kg_per_mm2", "memory_kg_per_gb", "region_aliases", "pue_by_site"):
            object.__setattr__(self, attr, MappingProxyType(dict(getattr(self, attr))))
        ordered = tuple(sorted(self.process_node_by_year, key=lambda p: -p[0]))
        object.__setattr__(self, "process_node_by_year", ordered)

    def canonical_region(self, region: str) -> str:
        return self.region_aliases.get(region, region)

    def pue_for(self, site: str) -> float:
        return self.pue_by_site.get(site, self.pue)

    def node_for_year(self, year: Optional[int]) -> str:
        if year is None:
            return "Other"
        for first_year, node in self.process_node_by_year:
            if year >= first_year:
                return node
        return "Other"

    def die_factor(self, node: Optional[str]) -> float:
        return self.die_kg_per_mm2.get(node or "Other", self.die_kg_per_mm2["Other"])

    def memory_factor(self, memory_type: Optional[MemoryType]) -> float:
        key = memory_type or MemoryType.OTHER
        return self.memory_kg_per_gb.get(key, self.memory_kg_per_gb[MemoryType.OTHER])


def aci_for(region: str, factors: CarbonFactorTable) -> tuple[float, Optional[str]]:
    """Grid carbon intensity (g CO2e/kWh) for ``region`` and a fallback warning, if any."""
    key = factors.canonical_region(region)
    if key in factors.aci_g_per_kwh:
        return factors.aci_g_per_kwh[key], None
    return factors.aci_global_default, (
        f"region {region!r} has no carbon intensity; used global default "
        f"{factors.aci_global_default:g} g/kWh"
    )


def proxy_accelerator(factors: CarbonFactorTable) -> DeviceSpec:
    if factors.proxy is None:
        raise ProxyUnconfigured("factor table configures no proxy accelerator")
    return factors.proxy


_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class RewriteRule:
    pattern: re.Pattern
    replacement: str


class DeviceCatalog:
    """Model-string normalization plus canonical device specs."""

    def __init__(self, devices, rules=()):
        self.rules: tuple[RewriteRule, ...] = tuple(rules)
        self.devices: dict[str, DeviceSpec] = {}
        self._index: dict[str, str] = {}
        for spec, aliases in devices:
            if spec.model_id in self.devices:
                raise ValueError(f"duplicate device {spec.model_id!r}")
            self.devices[spec.model_id] = spec
            for name in (spec.model_id, *aliases):
                key = self.normalize(name)
                owner = self._index.setdefault(key, spec.model_id)
                if owner != spec.model_id:
                    raise ValueError(f"alias {name!r} maps to both {owner!r} and {spec.model_id!r}")

    def normalize(self, raw: str) -> str:
        # Rules run to a fixpoint so normalization is idempotent.
        text = _WHITESPACE.sub(" ", raw.casefold()).strip()
        for _ in range(16):
            before = text
            for rule in self.rules:
                text = rule.pattern.sub(rule.replacement, text)
            text = _WHITESPACE.sub(" ", text).strip()
            if text == before:
                break
        return text

    def lookup(self, raw_model: str) -> DeviceSpec:
        if not raw_model or not raw_model.strip():
            raise ValueError("device model string is empty")
        key = self.normalize(raw_model)
        try:
            return self.devices[self._index[key]]
        except KeyError:
            raise DeviceNotFound(raw_model) from None

    def __contains__(self, raw_model: str) -> bool:
        try:
            self.lookup(raw_model)
        except (DeviceNotFound, ValueError):
            return False
        return True

    def __len__(self) -> int:
        return len(self.devices)


def lookup_device(raw_model: str, catalog: DeviceCatalog) -> DeviceSpec:
    return catalog.lookup(raw_model)


# --- loading -----------------------------------------------------------------

def _mapping_of_numbers(data: dict, key: str, loc: Located, prefix=()) -> dict:
    keypath = prefix + (key,)
    table = require_mapping(data.get(key), loc, keypath)
    for name in table:
        # Unquoted YES/NO/ON/OFF load as booleans; a region code like NO must be quoted.
        if not isinstance(name, str):
            raise loc.error(keypath + (name,), f"key {name!r} is not a string (quote it)")
    return {name: require_number(table, name, loc, keypath, minimum=0.0, strict=True) for name in table}


def _device_from(data: dict, loc: Located, keypath) -> DeviceSpec:
    require_mapping(data, loc, keypath)
    model_id = data.get("model_id")
    if not isinstance(model_id, str) or not model_id.strip():
        raise loc.error(keypath, "device needs a non-empty 'model_id'")
    try:
        kind = DeviceKind(data.get("kind", "Accelerator"))
    except ValueError:
        raise loc.error(keypath + ("kind",), f"kind must be CPU or Accelerator, got {data.get('kind')!r}") from None
    node = data.get("process_node")
    if node is not None and str(node) not in PROCESS_NODES:
        raise loc.error(keypath + ("process_node",), f"unknown process node {node!r}; expected one of {', '.join(PROCESS_NODES)}")
    return DeviceSpec(
        model_id=model_id,
        kind=kind,
        tdp_w=require_number(data, "tdp_w", loc, keypath, minimum=0.0, strict=True),
        die_area_mm2=require_number(data, "die_area_mm2", loc, keypath, minimum=0.0, strict=True),
        process_node=None if node is None else str(node),
    )


def parse_factors(data, loc: Located) -> CarbonFactorTable:
    data = require_mapping(data, loc)
    check_schema_version(data, loc, SCHEMA_VERSION)

    aci = require_mapping(data.get("aci_g_per_kwh"), loc, ("aci_g_per_kwh",))
    default = require_number(aci, "global_default", loc, ("aci_g_per_kwh",), minimum=0.0, strict=True)
    regions = _mapping_of_numbers(aci, "regions", loc, ("aci_g_per_kwh",))

    memory = {}
    for name, value in _mapping_of_numbers(data, "memory_kg_per_gb", loc).items():
        mtype = MemoryType.parse(name)
        if mtype is MemoryType.OTHER and name.lower() != "other":
            raise loc.error(("memory_kg_per_gb", name), f"unknown memory type {name!r}")
        memory[mtype] = value
    if MemoryType.OTHER not in memory:
        raise loc.error(("memory_kg_per_gb",), "memory_kg_per_gb needs an 'Other' fallback entry")

    die = _mapping_of_numbers(data, "die_kg_per_mm2", loc)
    for node in die:
        if node not in PROCESS_NODES:
            raise loc.error(("die_kg_per_mm2", node), f"unknown process node {node!r}")
    if "Other" not in die:
        raise loc.error(("die_kg_per_mm2",), "die_kg_per_mm2 needs an 'Other' fallback entry")

    by_year = []
    for i, entry in enumerate(data.get("process_node_by_year") or []):
        kp = ("process_node_by_year", i)
        require_mapping(entry, loc, kp)
        node = entry.get("node")
        if node not in PROCESS_NODES:
            raise loc.error(kp, f"unknown process node {node!r}")
        by_year.append((int(require_number(entry, "from_year", loc, kp, minimum=0)), node))

    proxy = None
    if data.get("proxy_accelerator") is not None:
        proxy = _device_from(data["proxy_accelerator"], loc, ("proxy_accelerator",))

    equiv = require_mapping(data.get("equivalences"), loc, ("equivalences",))
    aliases = data.get("region_aliases") or {}
    require_mapping(aliases, loc, ("region_aliases",))
    for name, code in aliases.items():
        if not isinstance(name, str) or not isinstance(code, str):
            raise loc.error(("region_aliases", name), f"alias {name!r}: {code!r} must map a string to a string (quote codes like NO)")
    pue_sites = data.get("pue_by_site") or {}
    require_mapping(pue_sites, loc, ("pue_by_site",))

    try:
        return CarbonFactorTable(
            aci_g_per_kwh=regions,
            aci_global_default=default,
            die_kg_per_mm2=die,
            memory_kg_per_gb=memory,
            ssd_kg_per_gb=require_number(data, "ssd_kg_per_gb", loc, minimum=0.0, strict=True),
            node_overhead_kg=require_number(data, "node_overhead_kg", loc, minimum=0.0),
            pue=require_number(data, "pue", loc, minimum=1.0),
            default_utilization=require_number(data, "default_utilization", loc, minimum=0.0, maximum=1.0),
            vehicle_kg_per_year=require_number(equiv, "vehicle_kg_per_year", loc, ("equivalences",), minimum=0.0, strict=True),
            grams_per_mile=require_number(equiv, "grams_per_mile", loc, ("equivalences",), minimum=0.0, strict=True),
            region_aliases={str(k): str(v) for k, v in aliases.items()},
            pue_by_site={str(k): require_number(pue_sites, k, loc, ("pue_by_site",), minimum=1.0) for k in pue_sites},
            process_node_by_year=tuple(by_year) or ((0, "Other"),),
            proxy=proxy,
            lifetime_years=require_number(data, "lifetime_years", loc, minimum=0.0, strict=True) if "lifetime_years" in data else 5.0,
        )
    except SchemaError:
        raise
    except ValueError as exc:
        raise loc.error((), str(exc)) from None


def parse_catalog(data, loc: Located) -> DeviceCatalog:
    data = require_mapping(data, loc)
    check_schema_version(data, loc, SCHEMA_VERSION)
    rules = []
    for i, entry in enumerate(data.get("normalization") or []):
        kp = ("normalization", i)
        require_mapping(entry, loc, kp)
        try:
            pattern = re.compile(entry["pattern"])
        except KeyError:
            raise loc.error(kp, "rewrite rule needs 'pattern'") from None
        except re.error as exc:
            raise loc.error(kp + ("pattern",), f"bad regular expression: {exc}") from None
        rules.append(RewriteRule(pattern, str(entry.get("replace", ""))))
    devices = []
    entries = data.get("devices")
    if not isinstance(entries, list):
        raise loc.error(("devices",), "'devices' must be a list")
    for i, entry in enumerate(entries):
        spec = _device_from(entry, loc, ("devices", i))
        aliases = entry.get("aliases") or []
        if not isinstance(aliases, list) or not all(isinstance(a, str) for a in aliases):
            raise loc.error(("devices", i, "aliases"), "aliases must be a list of strings")
        devices.append((spec, aliases))
    try:
        return DeviceCatalog(devices, rules)
    except ValueError as exc:
        raise loc.error(("devices",), str(exc)) from None


def _default_path(env: str, filename: str) -> Path:
    override = os.environ.get(env)
    if override:
        return Path(override)
    return Path(str(resources.files("hpccarbon") / "data" / filename))


def load_factors(path: Union[str, Path, None] = None) -> CarbonFactorTable:
    data, loc = load(path or _default_path(FACTORS_ENV, "factors.yaml"))
    return parse_factors(data, loc)


def load_catalog(path: Union[str, Path, None] = None) -> DeviceCatalog:
    data, loc = load(path or _default_path(CATALOG_ENV, "catalog.yaml"))
    return parse_catalog(data, loc)


__all__ = [
    "CarbonFactorTable", "DeviceCatalog", "DeviceKind", "DeviceNotFound", "DeviceSpec",
    "PROXY_WARNING", "ProxyUnconfigured", "SchemaError", "aci_for", "load_catalog",
    "load_factors", "lookup_device", "proxy_accelerator",
]


@dataclass(frozen=True)
class ResolvedDevices:
    cpu: DeviceSpec
    accelerator: Optional[DeviceSpec]
    proxied: bool = False
    warnings: tuple[str, ...] = ()


def resolve_devices(record, catalog: DeviceCatalog, factors: CarbonFactorTable) -> ResolvedDevices:
    """Resolve a record's processor and accelerator to specs.

    Unknown accelerators fall back to the configured proxy GPU. Raises
    ``DeviceNotFound`` for an unknown processor, or for an unknown
    accelerator when no proxy is configured.
    """
    cpu = catalog.lookup(record.processor_model)
    if not record.accelerator_model:
        return ResolvedDevices(cpu, None)
    try:
        return ResolvedDevices(cpu, catalog.lookup(record.accelerator_model))
    except DeviceNotFound:
        try:
            proxy = proxy_accelerator(factors)
        except ProxyUnconfigured:
            raise DeviceNotFound(record.accelerator_model) from None
    note = PROXY_WARNING.format(model=record.accelerator_model, proxy=proxy.model_id)
    return ResolvedDevices(cpu, proxy, proxied=True, warnings=(note,))


def devices_resolvable(record, catalog: DeviceCatalog, factors: CarbonFactorTable) -> bool:
    try:
        resolve_devices(record, catalog, factors)
    except (DeviceNotFound, ValueError):
        return False
    return True
