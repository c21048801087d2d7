"""Pairwise latency models: city CSV datasets and synthetic generators."""

from __future__ import annotations

import csv
import io
import logging
import math
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

log = logging.getLogger(__name__)

CSV_HEADER = ("city_a", "city_b", "latency_ms")


class DatasetError(Exception):
    """Latency dataset could not be read or is inconsistent."""


class ParseError(DatasetError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MissingPair(DatasetError):
    pass


class NegativeLatency(DatasetError):
    pass


@dataclass(frozen=True)
class CityLatencies:
    """Symmetric city-to-city latency table."""

    cities: tuple[str, ...]
    table: dict[tuple[str, str], float]

    def delay(self, a: str, b: str) -> float:
        if a == b:
            return 0.0
        try:
            return self.table[(a, b)]
        except KeyError:
            raise MissingPair(f"no latency for {a}-{b}") from None

    def assign(self, n: int, seed: int) -> "LatencyModel":
        """Place ``n`` nodes in cities uniformly at random and build the node matrix."""
        rng = random.Random(f"{seed}:cities")
        placement = [rng.choice(self.cities) for _ in range(n)]
        matrix = tuple(tuple(self.delay(a, b) for b in placement) for a in placement)
        return LatencyModel(matrix, source="csv", cities=tuple(placement))


@dataclass(frozen=True)
class LatencyModel:
    matrix: tuple[tuple[float, ...], ...]
    source: str = "constant"
    jitter_ms: float = 0.0
    cities: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        for i, row in enumerate(self.matrix):
            if row[i] != 0:
                raise ValueError("self-latency must be 0")
            if any(d < 0 for d in row):
                raise NegativeLatency("latencies must be >= 0")

    @property
    def n(self) -> int:
        return len(self.matrix)

    def delay(self, src: int, dst: int, rng: random.Random | None = None) -> float:
        d = self.matrix[src][dst]
        if src != dst and self.jitter_ms and rng is not None:
            d = max(0.0, d + rng.uniform(-self.jitter_ms, self.jitter_ms))
        return d

    @property
    def max_delay(self) -> float:
        return max(max(row) for row in self.matrix) + self.jitter_ms

    @classmethod
    def constant(cls, n: int, latency_ms: float, jitter_ms: float = 0.0) -> "LatencyModel":
        if latency_ms < 0:
            raise NegativeLatency("latency must be >= 0")
        matrix = tuple(tuple(0.0 if i == j else float(latency_ms) for j in range(n)) for i in range(n))
        return cls(matrix, "constant", jitter_ms)

    @classmethod
    def uniform(cls, n: int, low: float, high: float, seed: int, jitter_ms: float = 0.0) -> "LatencyModel":
        if low < 0 or high < low:
            raise ValueError("need 0 <= low <= high")
        rng = random.Random(f"{seed}:latency")
        rows = [[0.0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                rows[i][j] = rows[j][i] = round(rng.uniform(low, high), 3)
        return cls(tuple(tuple(r) for r in rows), "uniform", jitter_ms)


def parse_latency_csv(text: str) -> CityLatencies:
    table: dict[tuple[str, str], float] = {}
    cities: dict[str, None] = {}
    header_seen = False
    reader = csv.reader(io.StringIO(text))
    for lineno, row in enumerate(reader, 1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if not header_seen:
            if tuple(cells) != CSV_HEADER:
                raise ParseError(f"expected header {','.join(CSV_HEADER)}", lineno)
            header_seen = True
            continue
        if len(cells) != 3 or not cells[0] or not cells[1]:
            raise ParseError("expected city_a,city_b,latency_ms", lineno)
        a, b, raw = cells
        try:
            ms = float(raw)
        except ValueError:
            raise ParseError(f"bad latency {raw!r}", lineno) from None
        if not math.isfinite(ms):
            raise ParseError(f"bad latency {raw!r}", lineno)
        if ms < 0:
            raise NegativeLatency(f"line {lineno}: negative latency {ms}")
        cities.setdefault(a)
        cities.setdefault(b)
        if a == b:
            continue
        prev = table.get((a, b))
        if prev is not None and prev != ms:
            log.warning("conflicting latency for %s-%s (%s vs %s); using max", a, b, prev, ms)
            ms = max(prev, ms)
        table[(a, b)] = table[(b, a)] = ms
    if not header_seen:
        raise ParseError("missing header", 1)
    names = tuple(cities)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if (a, b) not in table:
                raise MissingPair(f"no latency for {a}-{b}")
    return CityLatencies(names, table)


def load_latency_csv(path: str | Path) -> CityLatencies:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read latency dataset {path}: {exc.strerror}") from None
    return parse_latency_csv(text)


def bundled_cities() -> CityLatencies:
    """The shipped synthetic 30-city table (latencies in [20, 300] ms)."""
    text = resources.files("dagprogress").joinpath("data/cities30.csv").read_text(encoding="utf-8")
    return parse_latency_csv(text)
