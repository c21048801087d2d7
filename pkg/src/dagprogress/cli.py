"""Command-line entry point: run, sweep, dump-dag, explain-event."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .dag import DagError, EventId, SnapshotError, UnknownEvent, dump_snapshot, load_snapshot
from .latency import DatasetError
from .metrics import frame_progress, root_progress
from .simulator import (
    ConfigError,
    SimConfig,
    Simulation,
    load_config,
    run_experiment,
    to_csv,
    to_json,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_UNKNOWN_EVENT = 4

# flag dest -> SimConfig field
OVERRIDES = {
    "nodes": "nodes",
    "seed": "seed",
    "duration_ms": "duration_ms",
    "timing": "timing",
    "selection": "selection",
    "max_parents": "max_parents",
    "threshold": "threshold",
    "min_interval_ms": "min_interval_ms",
    "stakes": "stakes",
    "latency": "latency",
    "latency_ms": "latency_ms",
    "latency_csv": "latency_csv",
    "jitter_ms": "jitter_ms",
    "city_seed": "city_seed",
}


def _add_sim_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat TOML config file")
    p.add_argument("--nodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration-ms", type=float)
    p.add_argument("--timing", choices=("qi", "rk"))
    p.add_argument("--selection", choices=("qi", "rk"))
    p.add_argument("--max-parents", type=int)
    p.add_argument("--threshold", help="fraction such as 1/3 or 0.5")
    p.add_argument("--min-interval-ms", type=float)
    p.add_argument("--stakes", choices=("equal", "loguniform"))
    p.add_argument("--latency", choices=("constant", "uniform", "csv"))
    p.add_argument("--latency-ms", type=float)
    p.add_argument("--latency-csv", help="city latency CSV (default: bundled 30-city table)")
    p.add_argument("--jitter-ms", type=float)
    p.add_argument("--city-seed", type=int)
    p.add_argument("--output", "-o", type=Path, help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dagprogress", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one simulation and write its metrics report")
    _add_sim_options(run)
    run.add_argument("--format", choices=("csv", "json"), default="csv")

    sweep = sub.add_parser("sweep", help="seed-paired runs over timing x selection combinations")
    _add_sim_options(sweep)
    sweep.add_argument("--combos", default="qi-qi,qi-rk,rk-qi,rk-rk",
                       help="comma-separated timing-selection pairs")
    sweep.add_argument("--reps", type=int, default=1)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--format", choices=("csv", "json"), default="csv")

    dump = sub.add_parser("dump-dag", help="simulate and dump one node's DAG snapshot")
    _add_sim_options(dump)
    dump.add_argument("--node", type=int, help="whose DAG to dump (default: observer)")

    explain = sub.add_parser("explain-event", help="root-knowledge breakdown of one event")
    explain.add_argument("snapshot", type=Path)
    explain.add_argument("event_id")
    explain.add_argument("--format", choices=("text", "json"), default="text")
    explain.add_argument("--output", "-o", type=Path)
    return parser


def resolve_config(args: argparse.Namespace) -> SimConfig:
    config = load_config(args.config) if args.config else SimConfig()
    changes = {}
    for dest, fieldname in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            changes[fieldname] = value
    try:
        return config.replace(**changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_combos(text: str) -> list[tuple[str, str]]:
    combos = []
    for item in text.split(","):
        parts = item.strip().split("-")
        if len(parts) != 2 or any(p not in ("qi", "rk") for p in parts):
            raise ConfigError(f"bad combo {item!r}; expected e.g. rk-qi")
        combos.append((parts[0], parts[1]))
    if len(set(combos)) != len(combos):
        raise ConfigError("duplicate combos")
    return combos


def _write(args: argparse.Namespace, text: str) -> None:
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text, encoding="utf-8")


def cmd_run(args: argparse.Namespace) -> int:
    report = Simulation(resolve_config(args)).run()
    _write(args, to_csv(report) if args.format == "csv" else to_json(report))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    base = resolve_config(args)
    configs = [base.replace(timing=t, selection=s, name=f"{t}-{s}") for t, s in parse_combos(args.combos)]
    report = run_experiment(configs, args.reps, workers=args.workers)
    _write(args, to_csv(report) if args.format == "csv" else to_json(report))
    return EXIT_OK


def cmd_dump(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    node = config.observer if args.node is None else args.node
    if not 0 <= node < config.nodes:
        raise ConfigError(f"--node must lie in [0, {config.nodes})")
    sim = Simulation(config)
    sim.run()
    _write(args, dump_snapshot(sim.stores[node]))
    return EXIT_OK


def explain(store, event_id: EventId) -> dict:
    e = store.get(event_id)
    report = root_progress(store, e)
    out = {
        "event": str(e.id),
        "creator": e.creator,
        "seq": e.seq,
        "frame": e.frame,
        "is_root": e.is_root,
        "highest_before": [
            {"node": i, "seq": s, "fork": f} for i, (s, f) in enumerate(zip(e.hb.seqs, e.hb.forks))
        ],
        "progress": report.to_dict(),
    }
    if e.frame > 1:
        out["previous_frame_progress"] = frame_progress(store, e, e.frame - 1).to_dict()
    return out


def _format_progress(title: str, d: dict) -> list[str]:
    lines = [f"{title} (frame {d['frame']}): {len(d['columns'])} root(s) in subgraph"]
    for c in d["columns"]:
        counted = " ".join(str(x) for x in c["counted"])
        lines.append(f"  root {c['root']:>8}  counted [{counted}]  sum {c['sum']}")
    lines.append(f"  raw sum {d['raw_sum']}")
    lines.append(f"  k = {d['k']} ({d['k_float']:.6f})")
    return lines


def format_explain(d: dict) -> str:
    lines = [
        f"event {d['event']}",
        f"creator {d['creator']}  seq {d['seq']}  frame {d['frame']}  root {'yes' if d['is_root'] else 'no'}",
        "highest-before " + " ".join(
            f"{h['node']}:{h['seq']}{'!' if h['fork'] else ''}" for h in d["highest_before"]),
    ]
    if "previous_frame_progress" in d:
        lines += _format_progress("previous frame", d["previous_frame_progress"])
    lines += _format_progress("root knowledge", d["progress"])
    return "\n".join(lines) + "\n"


def cmd_explain(args: argparse.Namespace) -> int:
    try:
        text = args.snapshot.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read snapshot {args.snapshot}: {exc.strerror}") from None
    store = load_snapshot(text)
    try:
        eid = EventId.parse(args.event_id)
    except ValueError:
        raise UnknownEvent(f"malformed event id {args.event_id!r}") from None
    d = explain(store, eid)
    _write(args, format_explain(d) if args.format == "text" else json.dumps(d, indent=2) + "\n")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "dump-dag": cmd_dump, "explain-event": cmd_explain}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnknownEvent as exc:
        print(f"unknown event: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_EVENT
    except (DatasetError, SnapshotError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except DagError as exc:
        print(f"dag error: {exc}", file=sys.stderr)
        return EXIT_DATASET


if __name__ == "__main__":
    sys.exit(main())
