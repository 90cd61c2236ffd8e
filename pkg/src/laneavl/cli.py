"""Command-line entry point: ``laneavl {run,validate,gen-network,codes}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import LaneAvlError, ScenarioError, SchemaError
from .lane_map import load_network, parse_document, save_network
from .netgen import NetworkSpec, generate_network
from .outputs import emit_outputs
from .scenario import read_scenario, validate_scenario
from .signal_codes import generate_ca_code
from .simulation import run_scenario


def _cmd_run(args) -> int:
    sc = read_scenario(args.scenario)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.no_dgps:
        updates["dgps"] = sc.dgps.model_copy(update={"enabled": False})
    sc = sc.model_copy(update=updates)
    network, _ = load_network(sc.network_path) if sc.network_path.is_file() else (None, None)
    report = run_scenario(sc, network)
    out = Path(args.out) if args.out else Path("out") / sc.name
    paths = emit_outputs(report, out, network)
    agg = report.aggregates
    for key in ("epochs", "matched", "lane_accuracy_pct", "lane_accuracy_outside_changes_pct",
                "rms_horizontal_uncorrected_m", "rms_horizontal_corrected_m", "mean_latency_s",
                "corrections_lost"):
        print(f"{key}: {agg[key]}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _cmd_validate(args) -> int:
    sc = read_scenario(args.scenario)
    diags = validate_scenario(sc)
    for d in diags:
        print(d)
    errors = [d for d in diags if d.level == "error"]
    print("ok" if not errors else f"{len(errors)} error(s)")
    return 1 if errors else 0


def _network_spec(text: str) -> NetworkSpec:
    """A YAML/JSON file, or inline ``key=value`` pairs separated by commas."""
    path = Path(text)
    if path.is_file():
        data = parse_document(path.read_text(), str(path))
    else:
        data = {}
        for part in filter(None, text.split(",")):
            key, sep, value = part.partition("=")
            if not sep:
                raise SchemaError(f"expected key=value, got {part!r}", path=key)
            data[key.strip()] = value.strip()
    return NetworkSpec.model_validate(data)


def _cmd_gen_network(args) -> int:
    network = generate_network(_network_spec(args.spec))
    save_network(network, args.out)
    print(f"wrote {len(network)} lanes to {args.out}")
    return 0


def _cmd_codes(args) -> int:
    code = generate_ca_code(args.prn)
    chips = "".join(str(int(c)) for c in code.chips)
    if args.format == "json":
        print(json.dumps({"prn": args.prn, "length": len(chips), "chips": chips}))
    else:
        first10 = int(chips[:10], 2)
        print(f"PRN {args.prn}: {len(chips)} chips, first 10 chips (octal) {first10:04o}")
        for i in range(0, len(chips), 64):
            print(chips[i:i + 64])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="laneavl", description="Lane-level vehicle location simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write result files")
    run.add_argument("scenario")
    run.add_argument("--out", help="output directory (default out/<scenario name>)")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--no-dgps", action="store_true", help="disable differential corrections")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("scenario")
    val.set_defaults(func=_cmd_validate)

    gen = sub.add_parser("gen-network", help="write a synthetic parallel-lane network")
    gen.add_argument("spec", help="spec file, or inline pairs such as kind=straight,lanes=4")
    gen.add_argument("out")
    gen.set_defaults(func=_cmd_gen_network)

    codes = sub.add_parser("codes", help="print a C/A code")
    codes.add_argument("--prn", type=int, required=True)
    codes.add_argument("--format", choices=("text", "json"), default="text")
    codes.set_defaults(func=_cmd_codes)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (LaneAvlError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
