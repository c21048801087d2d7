"""Event timing and parent selection driven by a DAG progress metric."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

from .dag import DagStore, Event, EventId, EventProto
from .metrics import (
    HypotheticalEvent,
    NoSelfEvent,
    qi_metric,
    root_progress,
)


class Metric(str, enum.Enum):
    QI = "qi"
    RK = "rk"


@dataclass(frozen=True)
class EmissionStrategy:
    timing: Metric = Metric.RK
    selection: Metric = Metric.RK
    max_parents: int = 3
    threshold: Fraction = Fraction(1, 3)
    min_interval_ms: float = 0.0
    require_progress: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "timing", Metric(self.timing))
        object.__setattr__(self, "selection", Metric(self.selection))
        object.__setattr__(self, "threshold", Fraction(self.threshold))
        if self.max_parents < 1:
            raise ValueError("max_parents must be >= 1")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        if self.min_interval_ms < 0:
            raise ValueError("min_interval_ms must be >= 0")

    @property
    def label(self) -> str:
        return f"{self.timing.value}-{self.selection.value}"


@dataclass(frozen=True)
class TimingDecision:
    emit: bool
    t: int
    stake_ahead: int
    stake_behind: int


@dataclass(frozen=True)
class EmissionPlan:
    """Outcome of one emission evaluation.

    ``value`` is the selection metric of the planned event and ``baseline``
    what it is compared against by the progress gate.
    """

    node: int
    self_parent: EventId | None
    other_parents: tuple[EventId, ...]
    value: Any
    baseline: Any


def selection_value(store: DagStore, v: int, hypo: HypotheticalEvent, metric: Metric) -> Any:
    if metric is Metric.RK:
        return root_progress(store, hypo).key
    return qi_metric(store, v, hypo)


def head_value(store: DagStore, event: Event, metric: Metric) -> Any:
    """Per-head scalar compared by the timing metric."""
    if metric is Metric.RK:
        return root_progress(store, event).key
    return event.qi


def _candidates(store: DagStore, v: int) -> list[Event]:
    head = store.head(v)
    out = []
    for i, h in enumerate(store.heads()):
        if i == v or h is None:
            continue
        if head is not None and store.observes(head, h):
            continue
        out.append(h)
    return out


def rank_candidate_parents(store: DagStore, v: int, strategy: EmissionStrategy) -> list[EventId]:
    head = store.head(v)
    if head is None:
        return []
    scored = []
    for c in _candidates(store, v):
        val = selection_value(store, v, HypotheticalEvent(v, head.id, (c.id,)), strategy.selection)
        scored.append((val, c.creator, c.id))
    scored.sort(key=lambda x: x[1])
    scored.sort(key=lambda x: x[0], reverse=True)
    return [eid for _, _, eid in scored]


def _greedy(store: DagStore, v: int, strategy: EmissionStrategy) -> EmissionPlan:
    head = store.head(v)
    if head is None:
        return EmissionPlan(v, None, (), None, None)
    metric = strategy.selection
    chosen: list[EventId] = []
    current = selection_value(store, v, HypotheticalEvent(v, head.id), metric)
    # QI is relative to the emitting node, so its baseline is the no-new-parents event
    baseline = head_value(store, head, metric) if metric is Metric.RK else current
    remaining = _candidates(store, v)
    while remaining and len(chosen) + 1 < strategy.max_parents:
        best = None
        for c in remaining:
            val = selection_value(store, v, HypotheticalEvent(v, head.id, tuple(chosen) + (c.id,)), metric)
            # strict > keeps the lowest creator on ties; candidates come in creator order
            if best is None or val > best[0]:
                best = (val, c)
        if not best[0] > current:
            break
        current = best[0]
        chosen.append(best[1].id)
        remaining.remove(best[1])
    return EmissionPlan(v, head.id, tuple(chosen), current, baseline)


def select_parents(store: DagStore, v: int, strategy: EmissionStrategy) -> list[EventId]:
    """Greedy parent set: self-parent first, then other-parents in acceptance order."""
    plan = _greedy(store, v, strategy)
    if plan.self_parent is None:
        return []
    return [plan.self_parent, *plan.other_parents]


def rank_stakes(values: Sequence[Any], stakes: Sequence[int], v: int,
                threshold: Fraction) -> TimingDecision:
    """Stake strictly ahead (t) and stake ranked ahead in the node ordering.

    ``values`` holds each node's head metric, None for nodes without a head.
    The ordering sorts heads by metric, descending, with ties going to the
    lower NodeId. A node may emit once the stake ranked ahead of it reaches
    ``threshold`` of the other nodes' stake, so the last-ranked node always can.
    """
    mine = values[v]
    t = ahead = 0
    for i, other in enumerate(values):
        if i == v or other is None:
            continue
        if other > mine:
            t += stakes[i]
            ahead += stakes[i]
        elif other == mine and i < v:
            ahead += stakes[i]
    rest = sum(stakes) - stakes[v]
    return TimingDecision(ahead > 0 and ahead >= threshold * rest, t, ahead, rest - ahead)


def timing_decision(store: DagStore, v: int, strategy: EmissionStrategy) -> TimingDecision:
    if store.head(v) is None:
        raise NoSelfEvent(f"node {v} has no event yet")
    values = [None if h is None else head_value(store, h, strategy.timing) for h in store.heads()]
    return rank_stakes(values, store.validators.stakes, v, strategy.threshold)


def timing_metric(store: DagStore, v: int, strategy: EmissionStrategy) -> int:
    return timing_decision(store, v, strategy).t


def plan_emission(store: DagStore, v: int, strategy: EmissionStrategy,
                  now: float, last_emit: float | None) -> EmissionPlan | None:
    """Full emission check; returns the parent plan when the node should emit."""
    if store.head(v) is None:
        return EmissionPlan(v, None, (), None, None)
    if not timing_decision(store, v, strategy).emit:
        return None
    if last_emit is not None and now - last_emit < strategy.min_interval_ms:
        return None
    plan = _greedy(store, v, strategy)
    if strategy.require_progress and not plan.value > plan.baseline:
        return None
    return plan


def should_emit(store: DagStore, v: int, strategy: EmissionStrategy,
                now: float, last_emit: float | None) -> bool:
    return plan_emission(store, v, strategy, now, last_emit) is not None


def emit_plan(store: DagStore, plan: EmissionPlan, now: float) -> Event:
    """Create the planned event and insert it into the creator's own store."""
    v = plan.node
    if plan.self_parent is None:
        seq = 1
    else:
        seq = store.get(plan.self_parent).seq + 1
    nonce = 0
    while EventId(v, seq, nonce) in store:
        nonce += 1
    eid = EventId(v, seq, nonce)
    qi = Fraction(0)
    if plan.self_parent is not None:
        qi = qi_metric(store, v, HypotheticalEvent(v, plan.self_parent, plan.other_parents))
    proto = EventProto(eid, plan.self_parent, plan.other_parents, now, qi)
    return store.insert(proto)


def build_event(store: DagStore, v: int, strategy: EmissionStrategy, now: float) -> Event:
    plan = _greedy(store, v, strategy)
    return emit_plan(store, plan, now)
