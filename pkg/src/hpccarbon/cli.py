"""Command-line interface.

Subcommands: estimate, coverage, summary, delta, project, validate.
Exit codes: 0 success, 1 input error (reported as file:line), 2 configuration
error. Settings resolve as flags > config file > environment > built-in
defaults; ``--verbose`` prints the resolved values and where each came from.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, report
from .catalog import CATALOG_ENV, FACTORS_ENV, load_catalog, load_factors
from .domain import Kind, Scenario
from .fleet import InsufficientPeers, aggregate, coverage, interpolate_missing, scenario_delta
from .ingest import InputError, apply_overlay, completeness_summary, parse_fleet, parse_overlay
from .pipeline import estimate_fleet, run_stages
from .projection import GrowthModel, InsufficientHistory, derive_rates, perf_per_carbon
from .yamlio import SchemaError, load as load_yaml

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2

REFERENCE_DIR = Path(__file__).parent / "data" / "reference"
REFERENCE = {
    "fleet": REFERENCE_DIR / "top500_fixture.csv",
    "overlay": REFERENCE_DIR / "public_overlay.yaml",
    "history": REFERENCE_DIR / "list_history.csv",
    "perf": REFERENCE_DIR / "perf_carbon.csv",
}
KIND_CHOICES = {"operational": (Kind.OPERATIONAL,), "embodied": (Kind.EMBODIED,), "both": (Kind.OPERATIONAL, Kind.EMBODIED)}
CONFIG_KEYS = ("factors", "catalog", "overlay", "workers", "scenario", "kind", "out", "format")
PATH_KEYS = {"factors", "catalog", "overlay", "out", "fleet", "history", "perf"}

log = logging.getLogger("hpccarbon")


class ConfigError(Exception):
    pass


@dataclass
class Settings:
    values: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    def set(self, key, value, source):
        self.values[key] = value
        self.sources[key] = source

    def get(self, key, default=None):
        return self.values.get(key, default)

    def describe(self) -> str:
        return "\n".join(f"  {k} = {self.values[k]} ({self.sources[k]})" for k in sorted(self.values))


def _read_config(path: Optional[str]) -> tuple[dict, Optional[Path]]:
    if not path:
        return {}, None
    try:
        data, loc = load_yaml(path)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    except SchemaError as exc:
        raise ConfigError(str(exc)) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: config must be a mapping")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"{path}:{loc.line((unknown[0],))}: unknown config key {unknown[0]!r}")
    return data, Path(path).resolve().parent


def resolve_settings(args: argparse.Namespace, keys: Sequence[str], defaults: dict) -> Settings:
    config, config_dir = _read_config(getattr(args, "config", None))
    env = {"factors": os.environ.get(FACTORS_ENV), "catalog": os.environ.get(CATALOG_ENV)}
    use_reference = getattr(args, "reference", False)
    settings = Settings()
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            settings.set(key, flag, "flag")
        elif key in config:
            value = config[key]
            if key in PATH_KEYS and config_dir is not None:
                value = str(config_dir / value)
            settings.set(key, value, "config")
        elif env.get(key):
            settings.set(key, env[key], "environment")
        elif use_reference and key in REFERENCE:
            settings.set(key, str(REFERENCE[key]), "reference fixture")
        elif key in defaults:
            settings.set(key, defaults[key], "default")
    return settings


def _load_tables(settings: Settings):
    try:
        factors = load_factors(settings.get("factors"))
        catalog = load_catalog(settings.get("catalog"))
    except SchemaError as exc:
        raise ConfigError(str(exc)) from exc
    except OSError as exc:
        raise ConfigError(f"{exc.filename}: {exc.strerror}") from exc
    return factors, catalog


def _load_fleet(settings: Settings, scenario: Scenario):
    fleet_path = settings.get("fleet")
    if not fleet_path:
        raise ConfigError("no fleet file given (pass a path or --reference)")
    records = parse_fleet(fleet_path)
    overlay_path = settings.get("overlay")
    if scenario is Scenario.BASELINE_PLUS_PUBLIC:
        if not overlay_path:
            raise ConfigError("--scenario overlay needs an overlay file (--overlay)")
        patches = parse_overlay(overlay_path)
        try:
            public = apply_overlay(records, patches)
        except InputError as exc:
            if exc.path is None:
                raise type(exc)(exc.reason, overlay_path, exc.line) from exc
            raise
        return records, public
    return records, None


def _scenario(settings: Settings) -> Scenario:
    value = settings.get("scenario")
    if value is None:
        value = "overlay" if settings.get("overlay") else "baseline"
        settings.set("scenario", value, "derived")
    if value not in ("baseline", "overlay"):
        raise ConfigError(f"scenario must be baseline or overlay, got {value!r}")
    return Scenario.BASELINE if value == "baseline" else Scenario.BASELINE_PLUS_PUBLIC


def _kinds(settings: Settings) -> tuple[Kind, ...]:
    value = settings.get("kind", "both")
    if value not in KIND_CHOICES:
        raise ConfigError(f"kind must be one of {', '.join(KIND_CHOICES)}, got {value!r}")
    return KIND_CHOICES[value]


def _workers(settings: Settings) -> Optional[int]:
    value = settings.get("workers")
    if value is None:
        return None
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"workers must be an integer, got {value!r}") from None
    if n < 1:
        raise ConfigError("workers must be at least 1")
    return n


def _emit(out_dir: Optional[str], files: dict[str, str], stdout_text: str) -> None:
    if out_dir:
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (target / name).write_text(text, encoding="utf-8")
            log.info("wrote %s", target / name)
    sys.stdout.write(stdout_text)


def _fleet_settings(args, extra_defaults=None) -> Settings:
    defaults = {"kind": "both", "format": "text"}
    defaults.update(extra_defaults or {})
    settings = resolve_settings(args, ("fleet", *CONFIG_KEYS), defaults)
    _scenario(settings)
    if args.verbose:
        print("settings (flags > config file > environment > defaults):\n" + settings.describe(), file=sys.stderr)
    return settings


def cmd_estimate(args) -> int:
    settings = _fleet_settings(args, {"format": "csv"})
    scenario, kinds, workers = _scenario(settings), _kinds(settings), _workers(settings)
    factors, catalog = _load_tables(settings)
    baseline, public = _load_fleet(settings, scenario)
    interpolate = public is not None and not args.no_interpolate
    results = {
        kind: run_stages(baseline, public, kind, factors, catalog, interpolate=interpolate, workers=workers)
        for kind in kinds
    }
    years = factors.lifetime_years if args.amortize else None
    rows = report.estimate_records(baseline, results, amortize_years=years)
    table = report.estimate_table(rows, kinds, amortize=args.amortize)
    flagged = sum(1 for r in rows if r["warnings"])
    if flagged:
        log.warning("%d of %d systems carry estimate warnings (see the warnings column)", flagged, len(rows))
    meta = report.report_meta(factors, scenario=scenario.value, interpolated=interpolate)
    if args.amortize:
        meta["lifetime_years"] = factors.lifetime_years
    json_text = report.to_json({"meta": meta, "systems": rows})
    csv_text = report.to_csv(table, delimiter=args.delimiter)
    fmt = settings.get("format")
    stdout = {"csv": csv_text, "json": json_text, "text": report.to_text(table)}.get(fmt)
    if stdout is None:
        raise ConfigError(f"format must be csv, json or text, got {fmt!r}")
    _emit(settings.get("out"), {"estimate.csv": csv_text, "estimate.json": json_text}, stdout)
    return EXIT_OK


def _estimates_by_scenario(settings, kinds, factors, catalog):
    scenario = _scenario(settings)
    baseline, public = _load_fleet(settings, scenario)
    workers = _workers(settings)
    fleets = [(Scenario.BASELINE, baseline)]
    if public is not None:
        fleets.append((Scenario.BASELINE_PLUS_PUBLIC, public))
    return baseline, public, {
        (kind, sc): estimate_fleet(records, kind, factors, catalog, workers) for kind in kinds for sc, records in fleets
    }


def cmd_coverage(args) -> int:
    settings = _fleet_settings(args)
    kinds = _kinds(settings)
    factors, catalog = _load_tables(settings)
    _, _, estimates = _estimates_by_scenario(settings, kinds, factors, catalog)
    reports = [coverage(ests) for ests in estimates.values()]
    table = report.coverage_table(reports)
    json_text = report.to_json({"meta": report.report_meta(factors), "coverage": report.coverage_json(reports)})
    lines = "".join(f"{r.kind.value} {r.scenario.value}: {r}\n" for r in reports)
    stdout = json_text if settings.get("format") == "json" else report.to_text(table) + "\n" + lines
    _emit(settings.get("out"), {"coverage.csv": report.to_csv(table), "coverage.json": json_text}, stdout)
    return EXIT_OK


def cmd_summary(args) -> int:
    settings = _fleet_settings(args)
    kinds = _kinds(settings)
    factors, catalog = _load_tables(settings)
    baseline, public, estimates = _estimates_by_scenario(settings, kinds, factors, catalog)
    columns = {"baseline": completeness_summary(baseline)}
    if public is not None:
        columns["overlay"] = completeness_summary(public)
    completeness = report.completeness_table(columns, len(baseline))
    assessments = []
    for kind in kinds:
        assessments.append(("top500", aggregate(estimates[(kind, Scenario.BASELINE)], factors)))
        if public is not None:
            pub = estimates[(kind, Scenario.BASELINE_PLUS_PUBLIC)]
            assessments.append(("public", aggregate(pub, factors)))
            if not args.no_interpolate:
                assessments.append(("interpolated", aggregate(interpolate_missing(pub), factors)))
    totals = report.totals_table(assessments)
    json_text = report.to_json({
        "meta": report.report_meta(factors),
        "completeness": {label: dict(counts) for label, counts in columns.items()},
        "totals": report.totals_json(assessments),
    })
    text = report.to_text(completeness) + "\n" + report.to_text(totals, max_width=80)
    stdout = json_text if settings.get("format") == "json" else text
    files = {
        "completeness.csv": report.to_csv(completeness),
        "totals.csv": report.to_csv(totals),
        "summary.json": json_text,
    }
    _emit(settings.get("out"), files, stdout)
    return EXIT_OK


def cmd_delta(args) -> int:
    settings = _fleet_settings(args)
    kinds = _kinds(settings)
    factors, catalog = _load_tables(settings)
    workers = _workers(settings)
    baseline = parse_fleet(settings.get("fleet") or _missing_fleet())
    if args.against:
        after_records = parse_fleet(args.against)
    else:
        _, after_records = _load_fleet(settings, Scenario.BASELINE_PLUS_PUBLIC)
    before = {k: estimate_fleet(baseline, k, factors, catalog, workers) for k in kinds}
    after = {k: estimate_fleet(after_records, k, factors, catalog, workers) for k in kinds}
    deltas = [scenario_delta(before[k], after[k]) for k in kinds]
    names = {r.rank: r.name for r in baseline}
    table = report.delta_table(deltas, before, after, names)
    summary = report.delta_summary(deltas)
    json_text = report.to_json({"meta": report.report_meta(factors), "totals": summary})
    lines = "".join(
        f"{s['kind']} {s['from_scenario']} -> {s['to_scenario']}: {s['delta_mt']:+.2f} MT CO2e "
        f"({s['percent_change']:+.2f}%), newly estimable {s['newly_estimable']}\n"
        for s in summary
    )
    changed = [row for row in table[1] if row[9] not in ("0.00", "-0.00")]
    stdout = json_text if settings.get("format") == "json" else report.to_text((table[0], changed)) + "\n" + lines
    _emit(settings.get("out"), {"delta.csv": report.to_csv(table), "delta.json": json_text}, stdout)
    return EXIT_OK


def _missing_fleet():
    raise ConfigError("no fleet file given (pass a path or --reference)")


def _read_series(path: str, columns: Sequence[str]) -> list[list[float]]:
    """Numeric columns from a delimited file, with file:line errors."""
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(exc.strerror or str(exc), path) from exc
    with handle:
        reader = csv.DictReader(handle)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise InputError(f"missing column(s) {', '.join(missing)}", path, 1)
        out = [[] for _ in columns]
        for row in reader:
            for i, c in enumerate(columns):
                try:
                    out[i].append(float(row[c]))
                except (TypeError, ValueError):
                    raise InputError(f"column {c!r}: not a number: {row[c]!r}", path, reader.line_num) from None
    return out


def cmd_project(args) -> int:
    settings = resolve_settings(args, ("history", "perf", "out", "format"), {"format": "text"})
    if args.verbose:
        print("settings (flags > config file > environment > defaults):\n" + settings.describe(), file=sys.stderr)
    models = []
    rates = None
    history = settings.get("history")
    if history:
        cycles, op, emb = _read_series(history, ("cycle", "operational_mt", "embodied_mt"))
        try:
            rates = derive_rates(list(zip(cycles, op, emb)), method=args.method)
        except InsufficientHistory as exc:
            raise InputError(str(exc), history) from exc
        log.info("derived annual rates: operational %.4f, embodied %.4f", *rates)
    wants_growth = args.base is not None or args.rate is not None or history
    if wants_growth:
        if args.start is None or args.end is None:
            raise ConfigError("--from and --to are required for a projection")
        if args.end < args.start:
            raise ConfigError("--to must not precede --from")
        horizon = args.end - args.start
        if args.base is not None or args.rate is not None:
            if args.base is None or (args.rate is None and rates is None):
                raise ConfigError("--base needs --rate (or --history to derive one)")
            rate = args.rate if args.rate is not None else rates[0 if args.kind != "embodied" else 1]
            models.append((args.kind, GrowthModel(args.start, args.base, rate, horizon)))
        else:
            models.append(("operational", GrowthModel(args.start, op[-1], rates[0], horizon)))
            models.append(("embodied", GrowthModel(args.start, emb[-1], rates[1], horizon)))
    files, text = {}, ""
    payload = {"meta": {"unit": report.UNIT}}
    if models:
        table = report.projection_table(models, first_year=args.start + 1)
        files["projection.csv"] = report.to_csv(table)
        payload["projection"] = [dict(zip(table[0], row)) for row in table[1]]
        if rates is not None:
            payload["derived_rates"] = {"operational": rates[0], "embodied": rates[1], "method": args.method}
        text += report.to_text(table)
    perf_path = settings.get("perf")
    if perf_path:
        years, perf, carbon = _read_series(perf_path, ("year", "rmax_pflops", args.perf_carbon_column))
        ppc = perf_per_carbon(years, perf, carbon)
        table = report.perf_table(ppc, perf, carbon)
        files["perf_per_carbon.csv"] = report.to_csv(table)
        payload["perf_per_carbon"] = {"slope_pflops_per_kmt_per_year": round(ppc.slope_per_year, 6)}
        text += ("\n" if text else "") + report.to_text(table)
        text += f"trend: {ppc.slope_per_year:+.3f} PFlop/s per kMT CO2e per year\n"
    if not files:
        raise ConfigError("nothing to project: give --base/--rate, --history or --perf")
    json_text = report.to_json(payload)
    files["projection.json"] = json_text
    _emit(settings.get("out"), files, json_text if settings.get("format") == "json" else text)
    return EXIT_OK


def _detect_type(path: str) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".csv", ".tsv", ".txt"):
        return "fleet"
    data, _ = load_yaml(path)
    if isinstance(data, dict):
        if "patches" in data:
            return "overlay"
        if "devices" in data:
            return "catalog"
    return "factors"


def cmd_validate(args) -> int:
    status = EXIT_OK
    for path in args.files:
        try:
            kind = args.type or _detect_type(path)
            if kind == "fleet":
                detail = f"{len(parse_fleet(path))} systems"
            elif kind == "overlay":
                detail = f"{len(parse_overlay(path))} patches"
            elif kind == "catalog":
                detail = f"{len(load_catalog(path).devices)} devices"
            else:
                load_factors(path)
                detail = "factor table"
            print(f"ok: {path} ({kind}, {detail})")
        except (InputError, SchemaError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            status = EXIT_INPUT
        except OSError as exc:
            print(f"error: {path}: {exc.strerror or exc}", file=sys.stderr)
            status = EXIT_INPUT
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file of default settings")
    common.add_argument("--factors", help=f"carbon factor table (default: ${FACTORS_ENV} or bundled)")
    common.add_argument("--catalog", help=f"device catalog (default: ${CATALOG_ENV} or bundled)")
    common.add_argument("--out", help="directory for report and series files")
    common.add_argument("--format", choices=("csv", "json", "text"), help="stdout format")
    common.add_argument("-v", "--verbose", action="store_true", help="print resolved settings and progress")

    fleet = argparse.ArgumentParser(add_help=False)
    fleet.add_argument("fleet", nargs="?", help="fleet file (Top500-style export)")
    fleet.add_argument("--reference", action="store_true", help="use the bundled reference fleet and overlay")
    fleet.add_argument("--overlay", help="public-info overlay file")
    fleet.add_argument("--scenario", choices=("baseline", "overlay"), help="data scenario (default: overlay if given)")
    fleet.add_argument("--kind", choices=tuple(KIND_CHOICES), help="carbon kind (default: both)")
    fleet.add_argument("--workers", type=int, help="estimate records on a thread pool")

    parser = argparse.ArgumentParser(prog="hpccarbon", description="Carbon footprint estimates for HPC fleets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common, fleet], help="per-system carbon table")
    p.add_argument("--no-interpolate", action="store_true", help="leave gaps unfilled")
    p.add_argument("--amortize", action="store_true", help="add embodied per-year columns (lifetime from factors)")
    p.add_argument("--delimiter", default=",", help="CSV delimiter (default ',')")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("coverage", parents=[common, fleet], help="estimable systems by rank bucket")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("summary", parents=[common, fleet], help="metric completeness and fleet totals")
    p.add_argument("--no-interpolate", action="store_true", help="skip the interpolated totals")
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("delta", parents=[common, fleet], help="per-system change between scenarios")
    p.add_argument("--against", help="compare the fleet with a second fleet file instead of its overlay")
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("project", parents=[common], help="compound-growth projection and performance per carbon")
    p.add_argument("--reference", action="store_true", help="use the bundled history and perf series")
    p.add_argument("--base", type=float, help="base-year total in MT CO2e")
    p.add_argument("--rate", type=float, help="annual growth rate as a fraction (0.103 = 10.3%%)")
    p.add_argument("--from", dest="start", type=int, help="base year")
    p.add_argument("--to", dest="end", type=int, help="last projected year")
    p.add_argument("--kind", default="operational", choices=("operational", "embodied"), help="label for --base")
    p.add_argument("--history", help="list-over-list totals (cycle,operational_mt,embodied_mt)")
    p.add_argument("--method", default="geometric", choices=("geometric", "loglinear"), help="rate derivation")
    p.add_argument("--perf", help="series file with year, rmax_pflops and carbon columns")
    p.add_argument("--perf-carbon-column", default="operational_kmt", help="carbon column in --perf")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("validate", help="check fleet, overlay, factor or catalog files")
    p.add_argument("files", nargs="+")
    p.add_argument("--type", choices=("fleet", "overlay", "factors", "catalog"), help="skip auto-detection")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, SchemaError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        # Downstream reader closed early (e.g. piped into head).
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except InsufficientPeers as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        where = exc.filename or ""
        print(f"input error: {where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
