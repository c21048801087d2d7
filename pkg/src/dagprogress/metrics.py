"""DAG progress metrics: Root Knowledge (k) and Quorum Indexer (h)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .dag import DagError, DagStore, Event, EventId, EventProto

# provisional nonce for events that are evaluated but never inserted
HYPOTHETICAL_NONCE = -1


class NoSelfEvent(DagError):
    """QI is undefined before a node has emitted its first event."""


@dataclass(frozen=True)
class HypotheticalEvent:
    creator: int
    self_parent: EventId | None
    other_parents: tuple[EventId, ...] = ()

    def proto(self, store: DagStore) -> EventProto:
        seq = 1 if self.self_parent is None else store.get(self.self_parent).seq + 1
        eid = EventId(self.creator, seq, HYPOTHETICAL_NONCE)
        return EventProto(eid, self.self_parent, tuple(self.other_parents))


EventLike = Union[Event, EventId, HypotheticalEvent]


def realize(store: DagStore, e: EventLike, *, with_frame: bool = True) -> Event:
    """Return an indexed event: stored events as-is, hypothetical ones drafted."""
    if isinstance(e, HypotheticalEvent):
        return store.draft(e.proto(store), with_frame=with_frame)
    return store.get(e)


@dataclass(frozen=True)
class RootKnowledgeColumn:
    root: EventId
    counted: tuple[bool, ...]

    @property
    def total(self) -> int:
        return sum(self.counted)

    def stake(self, stakes: Sequence[int]) -> int:
        return sum(s for s, ok in zip(stakes, self.counted) if ok)


@dataclass(frozen=True)
class ProgressReport:
    k: Fraction
    raw_sum: int
    columns: tuple[RootKnowledgeColumn, ...]
    frame: int

    @property
    def key(self) -> tuple[int, Fraction]:
        """Ordering key: a later frame always counts as more progress."""
        return self.frame, self.k

    def to_dict(self) -> dict:
        return {
            "frame": self.frame,
            "k": f"{self.k.numerator}/{self.k.denominator}",
            "k_float": float(self.k),
            "raw_sum": self.raw_sum,
            "columns": [
                {"root": str(c.root), "counted": [int(x) for x in c.counted], "sum": c.total}
                for c in self.columns
            ],
        }


def forkless_cause_progress(store: DagStore, e: EventLike, r: EventId | Event) -> RootKnowledgeColumn:
    """One column of the root knowledge matrix: which nodes know root ``r`` in ``e``'s subgraph."""
    event = realize(store, e)
    rid = r.id if isinstance(r, Event) else r
    root = event if rid == event.id else store.get(rid)
    return RootKnowledgeColumn(root.id, tuple(store.observers_of(root, event)))


def root_progress(store: DagStore, e: EventLike) -> ProgressReport:
    """Root knowledge of ``e`` over the roots of its own frame, summed column by column."""
    event = realize(store, e)
    return frame_progress(store, event, event.frame)


def frame_progress(store: DagStore, e: EventLike, frame: int) -> ProgressReport:
    """Root knowledge of ``e`` restricted to the roots of ``frame``; K is never built."""
    event = realize(store, e)
    cacheable = event.id in store
    if cacheable:
        hit = store.memo.get(("rk", event.id, frame))
        if hit is not None:
            return hit
    roots = [r for r in store.roots(frame) if store.observes(event, r)]
    if event.is_root and event.frame == frame and event.id not in store:
        roots.append(event)
    columns = []
    s = 0
    for r in roots:
        col = RootKnowledgeColumn(r.id, tuple(store.observers_of(r, event)))
        s += col.total
        columns.append(col)
    n = store.n
    report = ProgressReport(Fraction(s, n * n), s, tuple(columns), frame)
    if cacheable:
        store.memo[("rk", event.id, frame)] = report
    return report


@dataclass(frozen=True)
class QiComponents:
    median: tuple[int, ...]
    current_self: tuple[int, ...]
    new_self: tuple[int, ...]


def weighted_median(values: Sequence[int], weights: Sequence[int]) -> int:
    """Lowest value at which cumulative weight (ascending order) reaches half the total."""
    total = sum(weights)
    acc = 0
    for value, _, w in sorted(zip(values, range(len(values)), weights)):
        acc += w
        if 2 * acc >= total:
            return value
    raise ValueError("empty input")


def _medians(store: DagStore) -> tuple[int, ...]:
    heads = store.heads()
    key = ("qi-median", tuple(h.id if h else None for h in heads))
    hit = store.memo.get(key)
    if hit is None:
        n = store.n
        stakes = store.validators.stakes
        rows = [h.hb.seqs if h is not None else (0,) * n for h in heads]
        hit = tuple(weighted_median([row[i] for row in rows], stakes) for i in range(n))
        store.memo[key] = hit
    return hit


def qi_components(store: DagStore, v: int, candidate: EventLike) -> QiComponents:
    head = store.head(v)
    if head is None:
        raise NoSelfEvent(f"node {v} has no event yet")
    cand = realize(store, candidate, with_frame=False)
    if cand.creator != v or cand.self_parent != head.id:
        raise ValueError("candidate must extend the node's current head")
    return QiComponents(_medians(store), head.hb.seqs, cand.hb.seqs)


def progress_fraction(median: int, current: int, new: int) -> Fraction:
    """Piecewise-linear progress of one node entry, in [0, 1]."""
    if new <= current:
        return Fraction(0)
    if median <= current:
        return Fraction(1)
    return min(Fraction(new - current, median - current), Fraction(1))


def qi_from_components(comp: QiComponents, stakes: Sequence[int]) -> Fraction:
    """Stake-weighted sum of per-node progress fractions, exact."""
    terms = []
    for w, m, c, nw in zip(stakes, comp.median, comp.current_self, comp.new_self):
        if nw <= c:
            continue
        if m <= c or nw >= m:
            terms.append((w, 1))
        else:
            terms.append((w * (nw - c), m - c))
    if not terms:
        return Fraction(0)
    den = math.lcm(*(d for _, d in terms))
    num = sum(x * (den // d) for x, d in terms)
    return Fraction(num, den * sum(stakes))


def qi_metric(store: DagStore, v: int, candidate: EventLike) -> Fraction:
    return qi_from_components(qi_components(store, v, candidate), store.validators.stakes)
