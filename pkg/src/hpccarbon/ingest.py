"""Fleet and overlay ingestion.

The fleet file is delimiter-separated text using top500.org export column
names, extended with optional columns for the configuration metrics the
export lacks (see ``FLEET_COLUMNS``). Overlays are YAML patch lists that
fill individual fields from other public sources.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .domain import (
    METRIC_FIELDS,
    STRUCTURAL_FIELDS,
    TRACKED_FIELDS,
    MemoryType,
    Provenance,
    RecordError,
    Scenario,
    SystemRecord,
)
from .yamlio import SchemaError, check_schema_version, load, loads, require_mapping

log = logging.getLogger(__name__)

OVERLAY_SCHEMA_VERSION = 1


class InputError(ValueError):
    """Bad fleet or overlay input, located by file and line."""

    def __init__(self, reason: str, path: Optional[str] = None, line: Optional[int] = None):
        self.reason = reason
        self.path = path
        self.line = line
        where = ":".join(str(p) for p in (path, line) if p is not None)
        super().__init__(f"{where}: {reason}" if where else reason)


class MalformedRow(InputError):
    pass


class DuplicateRank(InputError):
    pass


class UnresolvedPatch(InputError):
    pass


class AmbiguousMatch(InputError):
    pass


# (column header, record field, type). Types: int, float, str, "memory".
FLEET_COLUMNS: tuple[tuple[str, str, object], ...] = (
    ("Rank", "rank", int),
    ("Name", "name", str),
    ("Site", "site", str),
    ("Country", "country", str),
    ("Region", "region", str),
    ("Year", "operation_year", int),
    ("Total Cores", "total_cores", int),
    ("Rmax [TFlop/s]", "rmax_tflops", float),
    ("Rpeak [TFlop/s]", "rpeak_tflops", float),
    ("Power (kW)", "reported_power_kw", float),
    ("Processor", "processor_model", str),
    ("Accelerator/Co-Processor", "accelerator_model", str),
    ("Compute Nodes", "num_nodes", int),
    ("GPUs", "num_gpus", int),
    ("CPUs", "num_cpus", int),
    ("Memory Capacity (GB)", "memory_capacity_gb", float),
    ("Memory Type", "memory_type", "memory"),
    ("SSD Capacity (GB)", "ssd_capacity_gb", float),
    ("System Utilization", "utilization", float),
    ("Annual Energy (kWh)", "annual_energy_kwh", float),
)
REQUIRED_COLUMNS = (
    "Rank", "Name", "Site", "Country", "Total Cores", "Rmax [TFlop/s]",
    "Rpeak [TFlop/s]", "Processor",
)
# Top500 export columns used only to derive the CPU count when "CPUs" is blank.
DERIVATION_COLUMNS = ("Cores per Socket", "Accelerator/Co-Processor Cores")
HEADER = tuple(col for col, _, _ in FLEET_COLUMNS)

_COLUMN_FIELD = {col: (name, kind) for col, name, kind in FLEET_COLUMNS}


def _convert(text: str, kind, column: str, path, line):
    try:
        if kind is int:
            value = float(text)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        if kind == "memory":
            return MemoryType.parse(text)
        return text
    except ValueError:
        raise MalformedRow(f"column {column!r}: expected a number, got {text!r}", path, line) from None


def _derive_cpus(row: Mapping[str, str], total_cores: int) -> Optional[int]:
    per_socket = (row.get("Cores per Socket") or "").strip()
    if not per_socket:
        return None
    accel = (row.get("Accelerator/Co-Processor Cores") or "").strip()
    try:
        cpu_cores = total_cores - (int(float(accel)) if accel else 0)
        sockets = cpu_cores / float(per_socket)
    except (ValueError, ZeroDivisionError):
        return None
    return max(1, round(sockets)) if sockets > 0 else None


def _record_from_row(row: Mapping[str, str], path, line: int) -> SystemRecord:
    values: dict = {}
    for column, (name, kind) in _COLUMN_FIELD.items():
        text = (row.get(column) or "").strip()
        if text:
            values[name] = _convert(text, kind, column, path, line)
    for column in REQUIRED_COLUMNS:
        if _COLUMN_FIELD[column][0] not in values:
            raise MalformedRow(f"column {column!r} is blank", path, line)
    if values.get("reported_power_kw") == 0:
        raise MalformedRow("'Power (kW)' is 0; leave it blank when unknown", path, line)
    if "num_cpus" not in values:
        derived = _derive_cpus(row, values["total_cores"])
        if derived is not None:
            values["num_cpus"] = derived
    country = values.pop("country")
    values.setdefault("region", country)
    try:
        return SystemRecord(**values)
    except (RecordError, TypeError) as exc:
        raise MalformedRow(str(exc), path, line) from None


def parse_fleet_text(text: str, path: Union[str, Path, None] = None, delimiter: Optional[str] = None) -> list[SystemRecord]:
    path = None if path is None else str(path)
    if delimiter is None:
        delimiter = "\t" if path and path.endswith((".tsv", ".tab")) else ","
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MalformedRow("file is empty; expected a header row", path, 1) from None
    missing = [col for col in REQUIRED_COLUMNS if col not in header]
    if missing:
        raise MalformedRow(f"header lacks required columns: {', '.join(missing)}", path, 1)
    known = set(HEADER) | set(DERIVATION_COLUMNS)
    unknown = [h for h in header if h and h not in known]
    if unknown:
        log.warning("%s: ignoring unknown columns: %s", path or "<fleet>", ", ".join(unknown))

    records: dict[int, SystemRecord] = {}
    for cells in reader:
        line = reader.line_num
        if not any(c.strip() for c in cells):
            continue
        if len(cells) != len(header):
            raise MalformedRow(f"expected {len(header)} fields, found {len(cells)}", path, line)
        record = _record_from_row(dict(zip(header, cells)), path, line)
        if record.rank in records:
            raise DuplicateRank(f"rank {record.rank} appears more than once", path, line)
        records[record.rank] = record
    return [records[rank] for rank in sorted(records)]


def parse_fleet(path: Union[str, Path], delimiter: Optional[str] = None) -> list[SystemRecord]:
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise InputError(f"cannot read fleet file: {exc.strerror}", str(path)) from exc
    return parse_fleet_text(text, path, delimiter)


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, MemoryType):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_fleet(records: Iterable[SystemRecord], delimiter: str = ",") -> str:
    """Inverse of ``parse_fleet_text`` for Top500-sourced records."""
    out = io.StringIO()
    writer = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    writer.writerow(HEADER)
    for record in records:
        row = []
        for _, name, _ in FLEET_COLUMNS:
            row.append(_format(record.region if name == "country" else getattr(record, name)))
        writer.writerow(row)
    return out.getvalue()


def write_fleet(records: Iterable[SystemRecord], path: Union[str, Path], delimiter: str = ",") -> None:
    Path(path).write_text(serialize_fleet(records, delimiter), encoding="utf-8")


# --- overlays -----------------------------------------------------------------

PATCHABLE_FIELDS = tuple(f for f in (*TRACKED_FIELDS, *STRUCTURAL_FIELDS) if f != "name")
_FIELD_KIND = {name: kind for _, name, kind in FLEET_COLUMNS}


@dataclass(frozen=True)
class OverlayPatch:
    values: Mapping[str, object]
    rank: Optional[int] = None
    name: Optional[str] = None
    source_note: str = ""
    override: bool = False
    line: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("an overlay patch must set at least one field")
        if self.rank is None and self.name is None:
            raise ValueError("an overlay patch needs a rank or a name to match")
        bad = [k for k in self.values if k not in PATCHABLE_FIELDS]
        if bad:
            raise ValueError(f"fields not patchable: {', '.join(bad)}")

    @property
    def match_key(self) -> str:
        return f"rank {self.rank}" if self.rank is not None else f"name {self.name!r}"


def _coerce_patch_value(name: str, value, loc, keypath):
    kind = _FIELD_KIND.get(name, str)
    if value is None:
        raise loc.error(keypath, f"{name!r} cannot be null")
    if kind == "memory":
        if not isinstance(value, str):
            raise loc.error(keypath, f"{name!r} must be a string")
        return MemoryType.parse(value)
    if kind is str:
        if not isinstance(value, str) or not value.strip():
            raise loc.error(keypath, f"{name!r} must be a non-empty string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise loc.error(keypath, f"{name!r} must be a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise loc.error(keypath, f"{name!r} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def parse_overlay_data(data, loc) -> list[OverlayPatch]:
    data = require_mapping(data, loc)
    check_schema_version(data, loc, OVERLAY_SCHEMA_VERSION)
    entries = data.get("patches")
    if entries is None:
        entries = []
    if not isinstance(entries, list):
        raise loc.error(("patches",), "'patches' must be a list")
    patches = []
    for i, entry in enumerate(entries):
        kp = ("patches", i)
        require_mapping(entry, loc, kp)
        unknown = set(entry) - {"rank", "name", "source", "override", "set"}
        if unknown:
            raise loc.error(kp, f"unknown patch keys: {', '.join(sorted(map(str, unknown)))}")
        rank = entry.get("rank")
        if rank is not None and (isinstance(rank, bool) or not isinstance(rank, int)):
            raise loc.error(kp + ("rank",), f"rank must be an integer, got {rank!r}")
        fields_ = require_mapping(entry.get("set"), loc, kp + ("set",))
        values = {}
        for name, value in fields_.items():
            if name not in PATCHABLE_FIELDS:
                raise loc.error(kp + ("set", name), f"field {name!r} cannot be patched")
            values[name] = _coerce_patch_value(name, value, loc, kp + ("set", name))
        try:
            patches.append(OverlayPatch(
                values=values, rank=rank, name=entry.get("name"),
                source_note=str(entry.get("source", "")),
                override=bool(entry.get("override", False)),
                line=loc.line(kp),
            ))
        except ValueError as exc:
            raise loc.error(kp, str(exc)) from None
    return patches


def parse_overlay(path: Union[str, Path]) -> list[OverlayPatch]:
    try:
        data, loc = load(path)
        return parse_overlay_data(data, loc)
    except SchemaError as exc:
        raise InputError(exc.reason, exc.path, exc.line) from None


def parse_overlay_text(text: str, path: str = "<overlay>") -> list[OverlayPatch]:
    try:
        data, loc = loads(text, path)
        return parse_overlay_data(data, loc)
    except SchemaError as exc:
        raise InputError(exc.reason, exc.path, exc.line) from None


def _resolve(patch: OverlayPatch, by_rank: dict, by_name: dict) -> int:
    if patch.rank is not None:
        if patch.rank not in by_rank:
            raise UnresolvedPatch(f"no system with rank {patch.rank}", line=patch.line)
        return patch.rank
    ranks = by_name.get(patch.name, [])
    if not ranks:
        raise UnresolvedPatch(f"no system named {patch.name!r}", line=patch.line)
    if len(ranks) > 1:
        raise AmbiguousMatch(f"name {patch.name!r} matches ranks {ranks}", line=patch.line)
    return ranks[0]


def apply_overlay(records: Sequence[SystemRecord], patches: Iterable[OverlayPatch]) -> list[SystemRecord]:
    """Fill fields from public-info patches; the result is the BaselinePlusPublic fleet.

    Top500-sourced values are kept unless a patch sets ``override``.
    """
    by_rank = {r.rank: r for r in records}
    by_name: dict[str, list[int]] = {}
    for r in records:
        by_name.setdefault(r.name, []).append(r.rank)

    updated = dict(by_rank)
    for patch in patches:
        rank = _resolve(patch, by_rank, by_name)
        record = updated[rank]
        values = {}
        for name, value in patch.values.items():
            if record.provenance(name) is Provenance.TOP500 and not patch.override:
                log.warning("%s: keeping Top500 value of %s (patch has no override)", patch.match_key, name)
                continue
            values[name] = value
        if values:
            updated[rank] = record.with_fields(Provenance.PUBLIC, **values)
    out = []
    for rank in sorted(updated):
        record = updated[rank]
        out.append(replace(record, scenario=Scenario.BASELINE_PLUS_PUBLIC))
    return out


def completeness_summary(records: Iterable[SystemRecord]) -> dict[str, int]:
    """Count, per metric, the records where that metric is absent."""
    counts = dict.fromkeys(METRIC_FIELDS, 0)
    for record in records:
        for label, name in METRIC_FIELDS.items():
            if record.provenance(name) is Provenance.ABSENT:
                counts[label] += 1
    return counts
