"""Deterministic discrete-event simulation of emitting nodes over a latency model."""

from __future__ import annotations

import csv
import dataclasses
import heapq
import io
import itertools
import json
import math
import random
import statistics
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .dag import DagStore, EventId, EventProto, ValidatorSet
from .emission import EmissionStrategy, Metric, emit_plan, plan_emission
from .latency import LatencyModel, bundled_cities, load_latency_csv

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(Exception):
    pass


STAKE_DISTRIBUTIONS = ("equal", "loguniform")
LATENCY_SOURCES = ("constant", "uniform", "csv")
METRICS = tuple(m.value for m in Metric)


@dataclass(frozen=True)
class SimConfig:
    nodes: int = 10
    seed: int = 1
    duration_ms: float = 10_000.0
    stakes: str = "loguniform"
    stake_min: int = 1
    stake_max: int = 100
    timing: str = "rk"
    selection: str = "rk"
    max_parents: int = 3
    threshold: str = "1/3"
    min_interval_ms: float = 20.0
    require_progress: bool = True
    latency: str = "constant"
    latency_ms: float = 100.0
    latency_min_ms: float = 20.0
    latency_max_ms: float = 300.0
    latency_csv: str = ""
    city_seed: int | None = None
    jitter_ms: float = 0.0
    observer: int = 0
    name: str = ""

    def __post_init__(self) -> None:
        if self.nodes < 1:
            raise ConfigError("nodes must be >= 1")
        if not self.duration_ms > 0:
            raise ConfigError("duration_ms must be > 0")
        if self.stakes not in STAKE_DISTRIBUTIONS:
            raise ConfigError(f"stakes must be one of {', '.join(STAKE_DISTRIBUTIONS)}")
        for key in ("timing", "selection"):
            if getattr(self, key) not in METRICS:
                raise ConfigError(f"{key} must be one of {', '.join(METRICS)}")
        if self.latency not in LATENCY_SOURCES:
            raise ConfigError(f"latency must be one of {', '.join(LATENCY_SOURCES)}")
        if not 0 <= self.observer < self.nodes:
            raise ConfigError("observer must be a valid node index")
        if self.jitter_ms < 0:
            raise ConfigError("jitter_ms must be >= 0")
        try:
            self.strategy()
            Fraction(self.threshold)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def config_id(self) -> str:
        return self.name or f"{self.timing}-{self.selection}"

    def strategy(self) -> EmissionStrategy:
        return EmissionStrategy(
            timing=Metric(self.timing),
            selection=Metric(self.selection),
            max_parents=self.max_parents,
            threshold=Fraction(self.threshold),
            min_interval_ms=self.min_interval_ms,
            require_progress=self.require_progress,
        )

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SimConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, value, cls.__dataclass_fields__[key].type)
        return cls(**kwargs)

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)


def _coerce(key: str, value: Any, annotation: str) -> Any:
    if annotation == "int | None":
        if value is None:
            return None
        annotation = "int"
    if annotation == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be a boolean")
        return value
    if annotation == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if annotation == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(value)
    if key == "threshold" and isinstance(value, (int, float)) and not isinstance(value, bool):
        return str(Fraction(value).limit_denominator(10_000))
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string")
    return value


def load_config(path: str | Path) -> SimConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid config file {path}: {exc}") from None
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"config must be flat; section {key!r} not allowed")
    return SimConfig.from_mapping(data)


def sample_stakes(n: int, seed: int, distribution: str = "loguniform",
                  low: int = 1, high: int = 100) -> ValidatorSet:
    if n < 1:
        raise ValueError("n must be >= 1")
    if distribution == "equal":
        return ValidatorSet.equal(n)
    if distribution != "loguniform":
        raise ValueError(f"unknown stake distribution {distribution!r}")
    if low < 1 or high < low:
        raise ValueError("InvalidRange: need 1 <= min <= max")
    rng = random.Random(f"{seed}:stakes")
    lo, hi = math.log(low), math.log(high)
    return ValidatorSet(tuple(max(1, round(math.exp(rng.uniform(lo, hi)))) for _ in range(n)))


def build_latency(config: SimConfig) -> LatencyModel:
    n = config.nodes
    if config.latency == "constant":
        return LatencyModel.constant(n, config.latency_ms, config.jitter_ms)
    if config.latency == "uniform":
        return LatencyModel.uniform(n, config.latency_min_ms, config.latency_max_ms,
                                    config.seed, config.jitter_ms)
    table = load_latency_csv(config.latency_csv) if config.latency_csv else bundled_cities()
    city_seed = config.seed if config.city_seed is None else config.city_seed
    model = table.assign(n, city_seed)
    return dataclasses.replace(model, jitter_ms=config.jitter_ms)


@dataclass(frozen=True)
class EmissionRecord:
    event: EventId
    time: float
    value: Any
    baseline: Any


@dataclass(frozen=True)
class MetricsReport:
    config_id: str
    seed: int
    total_events: int
    frames_advanced: int
    frames_per_event: float
    frames_per_second: float
    events_per_second: float
    config: dict = field(default_factory=dict, compare=False)

    def row(self) -> dict[str, Any]:
        return {
            "kind": "run",
            "config_id": self.config_id,
            "seed": self.seed,
            "total_events": self.total_events,
            "frames_advanced": self.frames_advanced,
            "frames_per_event": self.frames_per_event,
            "frames_per_second": self.frames_per_second,
            "events_per_second": self.events_per_second,
        }

    def to_dict(self) -> dict[str, Any]:
        d = self.row()
        del d["kind"]
        d["config"] = self.config
        return d


class Simulation:
    """One run: every node owns a DagStore and reacts to event arrivals.

    Events are broadcast directly to every peer. A node re-evaluates its
    emission rule after each delivery (all arrivals at one node sharing a
    timestamp) and once more when the rate limit following its own emission
    expires. Arrivals whose parents are missing wait in a per-node buffer.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self.validators = sample_stakes(config.nodes, config.seed, config.stakes,
                                        config.stake_min, config.stake_max)
        self.latency = build_latency(config)
        self.strategy = config.strategy()
        n = config.nodes
        index: dict = {}
        memo: dict = {}
        self.stores = [DagStore(self.validators, index=index, memo=memo) for _ in range(n)]
        self.buffers: list[dict[EventId, EventProto]] = [{} for _ in range(n)]
        self.last_emit: list[float | None] = [None] * n
        self.emissions: list[EmissionRecord] = []
        self.now = 0.0
        self._queue: list[tuple[float, int, int, EventProto | None]] = []
        self._tick = itertools.count()
        self._jitter = random.Random(f"{config.seed}:jitter")
        self._done = False

    def run(self) -> MetricsReport:
        if not self._done:
            for v in range(self.config.nodes):
                self._consider(v, 0.0)
            queue = self._queue
            while queue:
                time, dst, _, proto = heapq.heappop(queue)
                self.now = time
                wake = self._deliver(dst, proto)
                # simultaneous arrivals at one node form a single delivery
                while queue and queue[0][0] == time and queue[0][1] == dst:
                    wake |= self._deliver(dst, heapq.heappop(queue)[3])
                if wake and time <= self.config.duration_ms:
                    self._consider(dst, time)
            self._done = True
        return self.report()

    def _deliver(self, dst: int, proto: EventProto | None) -> bool:
        if proto is None:  # self-wakeup after an own emission
            return True
        store, buf = self.stores[dst], self.buffers[dst]
        if proto.id in store or proto.id in buf:
            return False
        buf[proto.id] = proto
        inserted = False
        progress = True
        while progress and buf:
            progress = False
            for eid, p in list(buf.items()):
                if all(q in store for q in p.parents):
                    store.insert(p)
                    del buf[eid]
                    inserted = progress = True
        return inserted

    def _consider(self, v: int, now: float) -> None:
        store = self.stores[v]
        plan = plan_emission(store, v, self.strategy, now, self.last_emit[v])
        if plan is None:
            return
        event = emit_plan(store, plan, now)
        self.last_emit[v] = now
        self.emissions.append(EmissionRecord(event.id, now, plan.value, plan.baseline))
        proto = event.proto()
        for dst in range(self.config.nodes):
            if dst != v:
                arrival = now + self.latency.delay(v, dst, self._jitter)
                heapq.heappush(self._queue, (arrival, dst, next(self._tick), proto))
        wake = now + self.strategy.min_interval_ms
        if wake <= self.config.duration_ms:
            heapq.heappush(self._queue, (wake, v, next(self._tick), None))

    def report(self) -> MetricsReport:
        cfg = self.config
        observer = self.stores[cfg.observer]
        frames = max(observer.max_frame - 1, 0)
        total = len(self.emissions)
        seconds = cfg.duration_ms / 1000.0
        return MetricsReport(
            config_id=cfg.config_id,
            seed=cfg.seed,
            total_events=total,
            frames_advanced=frames,
            frames_per_event=frames / total if total else 0.0,
            frames_per_second=frames / seconds,
            events_per_second=total / seconds,
            config=cfg.to_dict(),
        )


def run_simulation(config: SimConfig) -> MetricsReport:
    return Simulation(config).run()


@dataclass(frozen=True)
class Summary:
    config_id: str
    runs: int
    total_events: float
    frames_advanced: float
    frames_per_event: float
    frames_per_second: float
    events_per_second: float
    frames_per_event_std: float
    frames_per_second_std: float
    events_per_second_std: float

    def row(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        runs = d.pop("runs")
        return {"kind": "summary", "seed": None, **d, "runs": runs}

    @classmethod
    def of(cls, config_id: str, reports: Sequence[MetricsReport]) -> "Summary":
        def mean(attr: str) -> float:
            return float(statistics.fmean(getattr(r, attr) for r in reports))

        def std(attr: str) -> float:
            if len(reports) < 2:
                return 0.0
            return float(statistics.stdev(getattr(r, attr) for r in reports))

        return cls(config_id, len(reports), mean("total_events"), mean("frames_advanced"),
                   mean("frames_per_event"), mean("frames_per_second"), mean("events_per_second"),
                   std("frames_per_event"), std("frames_per_second"), std("events_per_second"))


@dataclass
class ExperimentReport:
    runs: list[MetricsReport]
    summaries: list[Summary]

    def by_config(self, config_id: str) -> list[MetricsReport]:
        return [r for r in self.runs if r.config_id == config_id]

    def to_dict(self) -> dict[str, Any]:
        return {
            "runs": [r.to_dict() for r in self.runs],
            "summaries": [dataclasses.asdict(s) for s in self.summaries],
        }


def _run_one(config: SimConfig) -> MetricsReport:
    return Simulation(config).run()


def experiment_configs(configs: Sequence[SimConfig], repetitions: int) -> list[SimConfig]:
    """Per-run configs; run index r uses seed + r so configs sharing a seed stay paired."""
    out = []
    for cfg in configs:
        for r in range(repetitions):
            city = None if cfg.city_seed is None else cfg.city_seed + r
            out.append(cfg.replace(seed=cfg.seed + r, city_seed=city))
    return out


def run_experiment(configs: Sequence[SimConfig], repetitions: int, workers: int = 1) -> ExperimentReport:
    if not configs:
        raise ConfigError("at least one config is required")
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    ids = [c.config_id for c in configs]
    if len(set(ids)) != len(ids):
        raise ConfigError("config ids must be distinct")
    jobs = experiment_configs(configs, repetitions)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    summaries = [Summary.of(cid, [r for r in runs if r.config_id == cid]) for cid in ids]
    return ExperimentReport(runs, summaries)


# -- report serialization ------------------------------------------------

CSV_COLUMNS = (
    "kind", "config_id", "seed", "total_events", "frames_advanced",
    "frames_per_event", "frames_per_second", "events_per_second",
    "frames_per_event_std", "frames_per_second_std", "events_per_second_std", "runs",
)


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(column: str, text: str) -> Any:
    if text == "":
        return None
    if column in ("kind", "config_id"):
        return text
    if any(ch in text for ch in ".eEn"):
        return float(text)
    return int(text)


def rows_to_csv(rows: Iterable[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def csv_to_rows(text: str) -> list[dict[str, Any]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError("unexpected report header")
    return [{c: _parse_cell(c, v) for c, v in zip(header, row)} for row in reader]


def report_rows(report: MetricsReport | ExperimentReport) -> list[dict[str, Any]]:
    if isinstance(report, MetricsReport):
        return [report.row()]
    return [r.row() for r in report.runs] + [s.row() for s in report.summaries]


def to_csv(report: MetricsReport | ExperimentReport) -> str:
    return rows_to_csv(report_rows(report))


def to_json(report: MetricsReport | ExperimentReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
