"""Result files for a finished run."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .lane_map import LaneNetwork, save_network
from .simulation import ROW_FIELDS, EpochRow, RunReport

MATCH_FIELDS = ["t_s", "matched_lane", "truth_lane", "correct", "near_change"]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(name: str, text: str):
    if text == "":
        return None
    kind = EpochRow.__dataclass_fields__[name].type
    if "bool" in kind:
        return text == "True"
    if "float" in kind:
        return float(text)
    if kind == "int":
        return int(text)
    return text


def write_rows_csv(rows, path, columns=ROW_FIELDS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(getattr(r, c)) for c in columns])


def read_rows_csv(path) -> list[EpochRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [EpochRow(**{k: _parse_cell(k, v) for k, v in rec.items()}) for rec in reader]


def emit_outputs(report: RunReport, out_dir, network: LaneNetwork | None = None) -> dict:
    """Write the run's files into ``out_dir`` and return their paths by role.

    ``epochs.csv`` has one row per fix epoch, ``matches.csv`` only the matched
    ones, ``summary.json`` the aggregates and ``geometry.json`` the network
    with truth and estimated tracks appended.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = {
        "epochs": out / "epochs.csv",
        "matches": out / "matches.csv",
        "summary": out / "summary.json",
    }
    write_rows_csv(report.rows, paths["epochs"])
    write_rows_csv([r for r in report.rows if r.status == "matched"], paths["matches"], MATCH_FIELDS)
    paths["summary"].write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    if network is not None:
        times = [r.t_s for r in report.rows]
        tracks = [
            {"name": "truth", "t_s": times,
             "points": [[r.truth_x_km, r.truth_y_km] for r in report.rows]},
            {"name": "estimate", "t_s": times,
             "points": [None if r.fix_x_km is None else [r.fix_x_km, r.fix_y_km] for r in report.rows]},
        ]
        paths["geometry"] = out / "geometry.json"
        save_network(network, paths["geometry"], tracks)
    return paths
