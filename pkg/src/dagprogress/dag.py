"""Event DAG storage, HighestBefore causality index, forkless-cause and frames."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple, Sequence, Union


class DagError(Exception):
    """Base class for DAG insertion and query errors."""


class MissingParent(DagError):
    pass


class InvalidSeq(DagError):
    pass


class InvalidParents(DagError):
    pass


class DuplicateId(DagError):
    pass


class UnknownEvent(DagError, LookupError):
    pass


class SnapshotError(DagError):
    """Raised when a snapshot line cannot be parsed or replayed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EventId(NamedTuple):
    """Unique event identifier; ``nonce`` separates forked events in one slot."""

    creator: int
    seq: int
    nonce: int = 0

    def __str__(self) -> str:
        if self.nonce:
            return f"{self.creator}:{self.seq}:{self.nonce}"
        return f"{self.creator}:{self.seq}"

    @classmethod
    def parse(cls, text: str) -> "EventId":
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"malformed event id {text!r}")
        return cls(*(int(p) for p in parts))


@dataclass(frozen=True)
class ValidatorSet:
    """Node stakes plus the derived total stake and BFT quorum."""

    stakes: tuple[int, ...]
    total: int = field(init=False)
    quorum: int = field(init=False)

    def __post_init__(self) -> None:
        stakes = tuple(int(s) for s in self.stakes)
        if not stakes:
            raise ValueError("validator set must contain at least one node")
        if any(s < 1 for s in stakes):
            raise ValueError("all stakes must be >= 1")
        total = sum(stakes)
        object.__setattr__(self, "stakes", stakes)
        object.__setattr__(self, "total", total)
        # smallest integer strictly greater than 2W/3
        object.__setattr__(self, "quorum", 2 * total // 3 + 1)

    @classmethod
    def equal(cls, n: int) -> "ValidatorSet":
        return cls((1,) * n)

    def __len__(self) -> int:
        return len(self.stakes)

    def stake_of(self, nodes: Iterable[int]) -> int:
        return sum(self.stakes[i] for i in nodes)


@dataclass(frozen=True)
class HighestBefore:
    """Per-node highest sequence number seen in an event's subgraph.

    ``tops`` holds the id of that highest event, which is what lets merges
    detect two incomparable events of one creator.
    """

    seqs: tuple[int, ...]
    tops: tuple[Union[EventId, None], ...]
    forks: tuple[bool, ...]

    def __getitem__(self, node: int) -> tuple[int, bool]:
        return self.seqs[node], self.forks[node]

    def __len__(self) -> int:
        return len(self.seqs)


@dataclass(frozen=True)
class EventProto:
    """An event as created and transmitted, before local indexing."""

    id: EventId
    self_parent: EventId | None = None
    other_parents: tuple[EventId, ...] = ()
    creation_time: float = 0.0
    qi: Fraction = Fraction(0)

    @property
    def creator(self) -> int:
        return self.id.creator

    @property
    def seq(self) -> int:
        return self.id.seq

    @property
    def parents(self) -> tuple[EventId, ...]:
        if self.self_parent is None:
            return self.other_parents
        return (self.self_parent,) + self.other_parents


@dataclass(frozen=True, eq=False)
class Event(EventProto):
    """A stored (or drafted) event with its frame, root flag and index."""

    frame: int = 0
    is_root: bool = False
    hb: HighestBefore = None  # type: ignore[assignment]

    def proto(self) -> EventProto:
        return EventProto(self.id, self.self_parent, self.other_parents,
                          self.creation_time, self.qi)

    @property
    def is_leaf(self) -> bool:
        return self.self_parent is None


EventRef = Union[EventId, Event]


class DagStore:
    """Append-only local DAG view of one node.

    Events are immutable once inserted; ``memo`` is a scratch cache for
    derived per-event values (safe because stored events never change).

    An event's index, frame and root flag depend only on its ancestry, so
    stores that see the same events (the nodes of one simulation) may pass a
    common ``index`` and ``memo`` to avoid recomputing them.
    """

    def __init__(self, validators: ValidatorSet, *, index: dict | None = None,
                 memo: dict | None = None):
        self.validators = validators
        self.memo: dict = {} if memo is None else memo
        self._index: dict[EventId, Event] | None = index
        self._events: dict[EventId, Event] = {}
        self._order: list[EventId] = []
        self._slots: dict[tuple[int, int], list[EventId]] = {}
        # slots holding more than one event, i.e. forks
        self._shared_slots: set[tuple[int, int]] = set()
        self._roots: dict[int, list[EventId]] = {}
        self._heads: list[EventId | None] = [None] * len(validators)

    @property
    def n(self) -> int:
        return len(self.validators)

    def __len__(self) -> int:
        return len(self._events)

    def __contains__(self, eid: object) -> bool:
        return eid in self._events

    def __iter__(self) -> Iterator[Event]:
        return (self._events[eid] for eid in self._order)

    def get(self, ref: EventRef) -> Event:
        if isinstance(ref, Event):
            return ref
        try:
            return self._events[ref]
        except KeyError:
            raise UnknownEvent(f"unknown event {ref}") from None

    def head(self, node: int) -> Event | None:
        eid = self._heads[node]
        return None if eid is None else self._events[eid]

    def heads(self) -> list[Event | None]:
        return [self.head(i) for i in range(self.n)]

    def roots(self, frame: int) -> list[Event]:
        return [self._events[eid] for eid in self._roots.get(frame, ())]

    @property
    def max_frame(self) -> int:
        return max(self._roots, default=0)

    def slot(self, creator: int, seq: int) -> list[Event]:
        return [self._events[eid] for eid in self._slots.get((creator, seq), ())]

    # -- insertion -----------------------------------------------------

    def draft(self, proto: EventProto, *, with_frame: bool = True) -> Event:
        """Index ``proto`` against the store without inserting it."""
        for pid in proto.parents:
            if pid not in self._events:
                raise MissingParent(f"{proto.id}: parent {pid} not in store")
        self._check_parents(proto)
        hb = self._merge(proto)
        event = Event(proto.id, proto.self_parent, tuple(proto.other_parents),
                      proto.creation_time, proto.qi, hb=hb)
        if with_frame:
            frame, is_root = self.assign_frame(event)
            object.__setattr__(event, "frame", frame)
            object.__setattr__(event, "is_root", is_root)
        return event

    def insert(self, proto: EventProto) -> Event:
        if proto.id in self._events:
            raise DuplicateId(f"event {proto.id} already stored")
        event = None
        if self._index is not None:
            event = self._index.get(proto.id)
            if event is not None and event.parents == proto.parents \
                    and all(p in self._events for p in proto.parents):
                pass
            else:
                event = None
        if event is None:
            event = self.draft(proto)
            if self._index is not None:
                self._index[event.id] = event
        eid = event.id
        self._events[eid] = event
        self._order.append(eid)
        slot = self._slots.setdefault((eid.creator, eid.seq), [])
        slot.append(eid)
        if len(slot) > 1:
            self._shared_slots.add((eid.creator, eid.seq))
        if event.is_root:
            self._roots.setdefault(event.frame, []).append(eid)
        self._heads[eid.creator] = eid
        return event

    def _check_parents(self, proto: EventProto) -> None:
        creator, seq = proto.creator, proto.seq
        if not 0 <= creator < self.n:
            raise InvalidParents(f"{proto.id}: creator {creator} outside validator set")
        if proto.self_parent is None:
            if seq != 1:
                raise InvalidSeq(f"{proto.id}: seq {seq} without self-parent")
        else:
            sp = self._events[proto.self_parent]
            if sp.creator != creator:
                raise InvalidParents(f"{proto.id}: self-parent {sp.id} has another creator")
            if seq != sp.seq + 1:
                raise InvalidSeq(f"{proto.id}: seq must be {sp.seq + 1}")
        creators = [p.creator for p in proto.other_parents]
        if creator in creators or len(set(creators)) != len(creators):
            raise InvalidParents(f"{proto.id}: other-parents need distinct foreign creators")

    def _slot_unique(self, creator: int, seq: int, extra: EventProto | None) -> bool:
        slot = (creator, seq)
        if slot in self._shared_slots:
            return False
        if extra is not None and slot in self._slots:
            eid = extra.id
            return not (eid[0] == creator and eid[1] == seq and eid not in self._events)
        return True

    def _chain_at(self, event: EventProto, seq: int) -> EventProto:
        while event.seq > seq:
            event = self._events[event.self_parent]
        return event

    def _resolve(self, eid: EventId, extra: EventProto | None) -> EventProto:
        if extra is not None and eid == extra.id:
            return extra
        return self._events[eid]

    def _merge(self, proto: EventProto) -> HighestBefore:
        parents = [self._events[p] for p in proto.parents]
        n = self.n
        seqs = [0] * n
        tops: list[EventId | None] = [None] * n
        forks = [False] * n
        for p in parents:
            phb = p.hb
            for i in range(n):
                s = phb.seqs[i]
                if phb.forks[i]:
                    forks[i] = True
                if s == 0:
                    continue
                top = phb.tops[i]
                cur = tops[i]
                if cur is None:
                    seqs[i], tops[i] = s, top
                    continue
                if cur == top:
                    continue
                if s > seqs[i]:
                    if not forks[i] and not self._comparable(cur, top, proto):
                        forks[i] = True
                    seqs[i], tops[i] = s, top
                elif not forks[i] and not self._comparable(top, cur, proto):
                    forks[i] = True
        c = proto.creator
        cur = tops[c]
        if cur is not None and not forks[c] and (
                seqs[c] >= proto.seq or not self._comparable(cur, proto.id, proto)):
            # a parent already holds an event of ours at or above this slot
            forks[c] = True
        if proto.seq >= seqs[c]:
            seqs[c], tops[c] = proto.seq, proto.id
        return HighestBefore(tuple(seqs), tuple(tops), tuple(forks))

    def _comparable(self, low: EventId, high: EventId, extra: EventProto | None) -> bool:
        """True if ``low`` lies on the self-parent chain of ``high`` (seq(low) <= seq(high))."""
        if low.seq == high.seq:
            return low == high
        if low.seq > high.seq:
            low, high = high, low
        if self._slot_unique(low.creator, low.seq, extra):
            return True
        return self._chain_at(self._resolve(high, extra), low.seq).id == low

    # -- queries ---------------------------------------------------------

    def _top(self, e: Event, node: int) -> EventProto | None:
        tid = e.hb.tops[node]
        if tid is None:
            return None
        return e if tid == e.id else self._events[tid]

    def _sees(self, a: Event, b: EventProto) -> bool:
        bid = b.id
        if a.id == bid:
            return True
        c, s = bid[0], bid[1]
        hb = a.hb
        if hb.seqs[c] < s:
            return False
        if hb.forks[c]:
            return self._search(a, bid)
        if self._slot_unique(c, s, a):
            return True
        return self._chain_at(self._resolve(hb.tops[c], a), s).id == bid

    def _search(self, a: EventProto, target: EventId) -> bool:
        stack = list(a.parents)
        seen = set(stack)
        while stack:
            eid = stack.pop()
            if eid == target:
                return True
            for p in self._events[eid].parents:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return False

    def observes(self, a: EventRef, b: EventRef) -> bool:
        """True iff ``b`` is in the subgraph of ``a`` (reflexive)."""
        return self._sees(self.get(a), self.get(b))

    def forked(self, e: EventRef, node: int) -> bool:
        return self.get(e).hb.forks[node]

    def observers_of(self, r: EventRef, e: EventRef) -> list[bool]:
        """Nodes having a fork-free event inside ``e``'s subgraph that observes ``r``."""
        r, e = self.get(r), self.get(e)
        forks = e.hb.forks
        if forks[r.creator] or not self._sees(e, r):
            return [False] * self.n
        out = []
        for i in range(self.n):
            if forks[i] or e.hb.seqs[i] == 0:
                out.append(False)
            else:
                out.append(self._sees(self._top(e, i), r))
        return out

    def forkless_cause(self, r: EventRef, e: EventRef) -> bool:
        seen_by = self.observers_of(r, e)
        stakes = self.validators.stakes
        stake = sum(stakes[i] for i, ok in enumerate(seen_by) if ok)
        return stake >= self.validators.quorum

    def assign_frame(self, e: Event) -> tuple[int, bool]:
        """Frame and root flag: a root is the first event of its creator in a frame."""
        parents = [self._events[p] for p in e.parents]
        if not parents:
            return 1, True
        f = max(p.frame for p in parents)
        sp_frame = 0 if e.self_parent is None else self._events[e.self_parent].frame
        stakes = self.validators.stakes
        counted: set[int] = set()
        stake = 0
        for r in self.roots(f):
            if r.creator in counted or not self._sees(e, r):
                continue
            if self.forkless_cause(r, e):
                counted.add(r.creator)
                stake += stakes[r.creator]
                if stake >= self.validators.quorum:
                    return f + 1, True
        return f, f != sp_frame


def dump_snapshot(store: DagStore) -> str:
    """Serialize ``store`` as line-oriented text in insertion (topological) order."""
    lines = ["# stakes " + " ".join(str(s) for s in store.validators.stakes)]
    for e in store:
        sp = str(e.self_parent) if e.self_parent is not None else "-"
        fields = [str(e.id), str(e.creator), str(e.seq), sp]
        fields += [str(p) for p in e.other_parents]
        fields += [str(e.frame), "1" if e.is_root else "0"]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def load_snapshot(text: str, validators: ValidatorSet | None = None) -> DagStore:
    """Replay a snapshot into a fresh store, checking recorded frames and roots."""
    rows: list[tuple[int, EventProto, int, bool]] = []
    stakes: Sequence[int] | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            words = line[1:].split()
            if words and words[0] == "stakes":
                try:
                    stakes = [int(w) for w in words[1:]]
                except ValueError:
                    raise SnapshotError("bad stakes header", lineno) from None
            continue
        parts = line.split()
        if len(parts) < 6:
            raise SnapshotError("expected at least 6 fields", lineno)
        try:
            eid = EventId.parse(parts[0])
            creator, seq = int(parts[1]), int(parts[2])
            sp = None if parts[3] == "-" else EventId.parse(parts[3])
            others = tuple(EventId.parse(p) for p in parts[4:-2])
            frame = int(parts[-2])
            if parts[-1] not in ("0", "1"):
                raise ValueError("isRoot must be 0 or 1")
            is_root = parts[-1] == "1"
        except ValueError as exc:
            raise SnapshotError(str(exc), lineno) from None
        if (creator, seq) != (eid.creator, eid.seq):
            raise SnapshotError(f"creator/seq disagree with id {eid}", lineno)
        rows.append((lineno, EventProto(eid, sp, others), frame, is_root))
    if validators is None:
        if stakes is None:
            n = 1 + max((p.creator for _, p, _, _ in rows), default=0)
            for _, p, _, _ in rows:
                n = max(n, 1 + max((q.creator for q in p.parents), default=0))
            stakes = [1] * n
        validators = ValidatorSet(tuple(stakes))
    store = DagStore(validators)
    for lineno, proto, frame, is_root in rows:
        try:
            event = store.insert(proto)
        except DagError as exc:
            raise SnapshotError(str(exc), lineno) from None
        if (event.frame, event.is_root) != (frame, is_root):
            raise SnapshotError(
                f"{proto.id}: recorded frame {frame}/{int(is_root)} but computed "
                f"{event.frame}/{int(event.is_root)}", lineno)
    return store
