import json

import numpy as np
import pytest

from laneavl.errors import ScenarioError
from laneavl.lane_map import load_network
from laneavl.outputs import MATCH_FIELDS, emit_outputs, read_rows_csv
from laneavl.scenario import parse_scenario
from laneavl.simulation import ROW_FIELDS, RunReport, row_aggregates, run_scenario

from conftest import scenario_data


@pytest.fixture(scope="module")
def short_report():
    return run_scenario(parse_scenario(scenario_data(duration_s=300)))


def test_deterministic_bytes(make_scenario):
    sc = make_scenario(duration_s=90)
    assert run_scenario(sc).to_bytes() == run_scenario(sc).to_bytes()
    other = run_scenario(sc.model_copy(update={"seed": 4}))
    assert other.to_bytes() != run_scenario(sc).to_bytes()


def test_epoch_conservation(short_report):
    agg = short_report.aggregates
    m = 10
    assert agg["epochs"] == 300
    assert agg["warmup"] == m - 1
    assert agg["matched"] + agg["unmatched"] + agg["warmup"] == 300
    assert [r.status for r in short_report.rows[:m - 1]] == ["warmup"] * (m - 1)


def test_latency_accounting(short_report):
    delays = {e.delay_s for e in short_report.link}
    tx_max = max(e.size_bytes for e in short_report.link) * 8 / 20000
    corrected = [r for r in short_report.rows if r.corrected]
    assert corrected
    for r in corrected:
        assert r.latency_s in delays
        assert 5.0 <= r.latency_s <= 10.0 + tx_max
    # The first correction is sent at t=0 and cannot arrive before 5 s.
    assert not any(r.corrected for r in short_report.rows if r.t_s < 5.0)


def test_accuracy_definition(short_report):
    agg = short_report.aggregates
    matched = [r for r in short_report.rows if r.status == "matched"]
    assert agg["lane_accuracy_pct"] == pytest.approx(100.0 * sum(r.correct for r in matched) / len(matched))
    assert agg["rms_horizontal_m"] >= 0
    assert agg["corrections_sent"] == 10


def test_zero_error_run_is_exact(make_scenario):
    sc = make_scenario(duration_s=120, errors={"iono_delay_ns": 0.0, "receiver_noise_sigma_m": 0.0},
                       vehicle={"lane_changes": []})
    agg = run_scenario(sc).aggregates
    assert agg["lane_accuracy_pct"] == 100.0
    assert agg["rms_horizontal_m"] < 1e-6


def test_dgps_lowers_error(make_scenario):
    sc = make_scenario(duration_s=600)
    on = run_scenario(sc).aggregates
    off = run_scenario(sc.model_copy(update={"dgps": sc.dgps.model_copy(update={"enabled": False})})).aggregates
    assert off["corrected_epochs"] == 0 and off["corrections_sent"] == 0
    assert on["rms_horizontal_m"] < off["rms_horizontal_m"]


def test_lossy_channel(make_scenario):
    rep = run_scenario(make_scenario(duration_s=300, channel={"loss_probability": 1.0}))
    assert rep.aggregates["corrections_lost"] == rep.aggregates["corrections_sent"] == 10
    assert rep.aggregates["corrected_epochs"] == 0


def test_invalid_scenario_refused(make_scenario):
    with pytest.raises(ScenarioError):
        run_scenario(make_scenario(matcher={"m": 1}))


def test_outputs_round_trip(short_report, tmp_path, make_scenario):
    net, _ = load_network(make_scenario().network_path)
    paths = emit_outputs(short_report, tmp_path / "out", net)
    rows = read_rows_csv(paths["epochs"])
    assert rows == short_report.rows
    assert row_aggregates(rows) == row_aggregates(short_report.rows)
    summary = json.loads(paths["summary"].read_text())
    assert summary["lane_accuracy_pct"] == short_report.aggregates["lane_accuracy_pct"]
    lines = paths["matches"].read_text().splitlines()
    assert lines[0].split(",") == MATCH_FIELDS
    assert len(lines) - 1 == short_report.aggregates["matched"]
    geo = json.loads(paths["geometry"].read_text())
    assert [t["name"] for t in geo["tracks"]] == ["truth", "estimate"]
    assert len(geo["tracks"][0]["points"]) == 300
    back, _ = load_network(paths["geometry"])
    assert back == net


def test_empty_report_gives_header_only(tmp_path):
    paths = emit_outputs(RunReport("empty", 0, True), tmp_path)
    assert paths["epochs"].read_text() == ",".join(ROW_FIELDS) + "\n"
    assert paths["matches"].read_text() == ",".join(MATCH_FIELDS) + "\n"
    assert json.loads(paths["summary"].read_text())["epochs"] == 0


def test_unwritable_output(short_report, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_outputs(short_report, blocker / "sub")


def test_fix_points_track_rows(short_report):
    assert len(short_report.fix_points) == len(short_report.rows)
    errs = [r.error_m for r in short_report.rows if r.error_m is not None]
    assert np.isfinite(errs).all()
