import logging
import random

import pytest

from dagprogress.latency import (
    CityLatencies,
    DatasetError,
    LatencyModel,
    MissingPair,
    NegativeLatency,
    ParseError,
    bundled_cities,
    load_latency_csv,
    parse_latency_csv,
)

HEADER = "city_a,city_b,latency_ms\n"


def test_two_cities_symmetric():
    cities = parse_latency_csv(HEADER + "A,B,50\n")
    assert cities.delay("A", "B") == cities.delay("B", "A") == 50
    assert cities.delay("A", "A") == 0


def test_conflicting_entries_take_max(caplog):
    with caplog.at_level(logging.WARNING):
        cities = parse_latency_csv(HEADER + "A,B,50\nB,A,70\n")
    assert cities.delay("A", "B") == cities.delay("B", "A") == 70
    assert "conflicting" in caplog.text


def test_triangle_resolves_every_ordered_pair():
    cities = parse_latency_csv(HEADER + "# comment\nA,B,10\nB,C,20\n\nC,A,30\n")
    assert cities.cities == ("A", "B", "C")
    pairs = [(a, b) for a in "ABC" for b in "ABC" if a != b]
    assert sorted(cities.delay(a, b) for a, b in pairs) == [10, 10, 20, 20, 30, 30]


@pytest.mark.parametrize("text, line", [
    ("A,B,50\n", 1),
    (HEADER + "A,B\n", 2),
    (HEADER + "A,B,fast\n", 2),
    (HEADER + "A,B,nan\n", 2),
    (HEADER + "A,B,1\n,C,3\n", 3),
    ("", 1),
])
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_latency_csv(text)
    assert info.value.line == line


def test_missing_pair():
    with pytest.raises(MissingPair):
        parse_latency_csv(HEADER + "A,B,10\nB,C,20\n")


def test_negative_latency():
    with pytest.raises(NegativeLatency):
        parse_latency_csv(HEADER + "A,B,-1\n")


def test_unreadable_file(tmp_path):
    with pytest.raises(DatasetError, match="nope.csv"):
        load_latency_csv(tmp_path / "nope.csv")


def test_bundled_table():
    cities = bundled_cities()
    assert len(cities.cities) == 30
    values = set(cities.table.values())
    assert min(values) >= 20 and max(values) <= 300


def test_city_assignment_is_seeded():
    cities = bundled_cities()
    a, b = cities.assign(8, seed=5), cities.assign(8, seed=5)
    assert a == b
    assert a.cities != cities.assign(8, seed=6).cities
    for i in range(8):
        assert a.matrix[i][i] == 0
        for j in range(8):
            assert a.matrix[i][j] == a.matrix[j][i]


def test_constant_and_uniform_models():
    m = LatencyModel.constant(3, 100)
    assert m.delay(0, 1) == 100 and m.delay(1, 1) == 0
    u = LatencyModel.uniform(5, 20, 300, seed=3)
    assert u == LatencyModel.uniform(5, 20, 300, seed=3)
    off = [u.matrix[i][j] for i in range(5) for j in range(5) if i != j]
    assert all(20 <= d <= 300 for d in off)


def test_jitter_stays_in_band():
    m = LatencyModel.constant(2, 100, jitter_ms=10)
    rng = random.Random(0)
    samples = [m.delay(0, 1, rng) for _ in range(200)]
    assert all(90 <= d <= 110 for d in samples)
    assert len(set(samples)) > 1
    assert m.delay(0, 0, rng) == 0


def test_unknown_city_pair():
    cities = CityLatencies(("A", "B"), {("A", "B"): 1.0, ("B", "A"): 1.0})
    with pytest.raises(MissingPair):
        cities.delay("A", "Z")
