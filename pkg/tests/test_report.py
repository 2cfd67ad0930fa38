import dataclasses
import json

from hpccarbon import report
from hpccarbon.domain import Kind, Provenance, Scenario
from hpccarbon.pipeline import run_stages
from hpccarbon.projection import GrowthModel
from helpers import catalog, factors, record


def _fleet(n=12):
    return [record(r, name=f"s{r}", reported_power_kw=None if r == 3 else 100.0 * r) for r in range(1, n + 1)]


def test_fmt_mt_two_decimals():
    assert report.fmt_mt(3363.84) == "3363.84"
    assert report.fmt_mt(1 / 3) == "0.33"
    assert report.fmt_mt(None) == ""


def test_unrun_stages_are_null():
    fleet = _fleet()
    results = {Kind.OPERATIONAL: run_stages(fleet, None, Kind.OPERATIONAL, factors(), catalog(), interpolate=False)}
    rows = report.estimate_records(fleet, results)
    assert rows[0]["operational"]["public"] == {"value_mt": None, "method": None, "scenario": None}
    assert rows[0]["operational"]["top500"]["value_mt"] == 336.38


def test_interpolated_cells_and_warnings():
    fleet = _fleet()
    public = [
        dataclasses.replace(r.with_fields(Provenance.PUBLIC, utilization=0.5), scenario=Scenario.BASELINE_PLUS_PUBLIC)
        for r in fleet
    ]
    results = {Kind.OPERATIONAL: run_stages(fleet, public, Kind.OPERATIONAL, factors(), catalog())}
    rows = report.estimate_records(fleet, results)
    gap = rows[2]["operational"]
    assert gap["interpolated"]["method"] == "Interpolated"
    assert gap["public"]["value_mt"] is None
    assert any(w.startswith("operational/interpolated:") for w in rows[2]["warnings"])
    header, body = report.estimate_table(rows, [Kind.OPERATIONAL])
    assert header[2:5] == ["operational_top500_mt", "operational_top500_method", "operational_top500_scenario"]
    assert all(len(line) == len(header) for line in body)


def test_amortized_column():
    fleet = [record(1, num_nodes=1, num_cpus=1)]
    results = {Kind.EMBODIED: run_stages(fleet, None, Kind.EMBODIED, factors(), catalog(), interpolate=False)}
    rows = report.estimate_records(fleet, results, amortize_years=5)
    assert rows[0]["embodied"]["top500"]["value_mt_per_year"] == 0.01
    header, _ = report.estimate_table(rows, [Kind.EMBODIED], amortize=True)
    assert "embodied_top500_mt_per_year" in header


def test_serializers():
    table = (["a", "b"], [["1", "x" * 60]])
    assert report.to_csv(table, ";") == "a;b\n1;" + "x" * 60 + "\n"
    text = report.to_text(table)
    assert "..." in text and text.endswith("\n")
    assert report.to_json({"b": 1}) == '{\n  "b": 1\n}\n'


def test_projection_table_from_first_year():
    table = report.projection_table([("operational", GrowthModel(2024, 100.0, 0.1, 2))], first_year=2025)
    assert [row[0] for row in table[1]] == ["2025", "2026"]
    assert table[1][-1][2] == "121.00" and table[1][-1][-1] == "1.2100"


def test_meta_mentions_pue():
    meta = report.report_meta(factors(), scenario="Baseline")
    assert meta["pue_default"] == 1.2 and "PUE" in meta["pue_note"]
    json.dumps(meta)
