"""Join semi-lattice states for grow-only counters and sets.

Every CRDT here is available in three flavours that share one lattice:

* full-state updates (``*_full``) return the whole updated state,
* delta mutators (``*_delta``) return a small state-typed fragment,
* refined mutators (``*_refined``) return a non-state message that
  ``*_op_to_state`` turns back into a fragment.

States are immutable and canonical, so ``==`` is semantic equality.
"""
from __future__ import annotations

import random
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, NamedTuple, Optional, Sequence

MAX_COUNT = 2**63 - 1

Op = tuple


class UnknownReplicaError(LookupError):
    pass


class ReplicaId(int):
    """Zero-based replica index that prints as ``r1``, ``r2``, ..."""

    def __repr__(self) -> str:
        return f"r{int(self) + 1}"

    __str__ = __repr__


class GCounterState(Mapping):
    """Partial map replica -> count. Absent keys mean zero; zeros are never stored."""

    __slots__ = ("_entries", "_hash")

    def __init__(self, entries: Mapping | Iterable = ()):
        entries = dict(entries)
        for key, count in entries.items():
            if not isinstance(count, int) or isinstance(count, bool) or count < 0:
                raise ValueError(f"count for {key!r} must be a non-negative int, got {count!r}")
            if count > MAX_COUNT:
                raise OverflowError(f"count for {key!r} exceeds 64-bit range")
        self._entries = {k: v for k, v in entries.items() if v}
        self._hash = None

    def __getitem__(self, key):
        return self._entries[key]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._entries.items()))
        return self._hash

    def __repr__(self) -> str:
        return render(self)


class CounterDelta(NamedTuple):
    """Refined counter message: ``replica``'s entry is now ``count``."""

    replica: Hashable
    count: int


class Side(NamedTuple):
    """Refined message of a composed CRDT, tagged with the component it targets."""

    side: int  # 0 = left, 1 = right
    message: Any


def _checked_succ(count: int) -> int:
    if count >= MAX_COUNT:
        raise OverflowError("count overflow")
    return count + 1


def _check_member(who, replicas) -> None:
    if replicas is not None and who not in replicas:
        raise UnknownReplicaError(f"unknown replica {who!r}")


# -- G-Counter ---------------------------------------------------------------

def gcounter_join(a: Mapping, b: Mapping) -> GCounterState:
    # present beats absent; both absent stays absent
    merged = dict(a)
    for key, count in b.items():
        mine = merged.get(key)
        merged[key] = count if mine is None else max(mine, count)
    return GCounterState(merged)


def gcounter_query(s: Mapping) -> int:
    return sum(s.values())


def gcounter_inc_full(who, s: Mapping, replicas=None) -> GCounterState:
    _check_member(who, replicas)
    updated = dict(s)
    updated[who] = _checked_succ(s.get(who, 0))
    return GCounterState(updated)


def gcounter_inc_delta(who, s: Mapping, replicas=None) -> GCounterState:
    _check_member(who, replicas)
    return GCounterState({who: _checked_succ(s.get(who, 0))})


def gcounter_inc_refined(who, s: Mapping, replicas=None) -> CounterDelta:
    _check_member(who, replicas)
    return CounterDelta(who, _checked_succ(s.get(who, 0)))


def counter_op_to_state(msg: CounterDelta) -> GCounterState:
    who, count = msg
    return GCounterState({who: count})


# -- G-Set -------------------------------------------------------------------

def gset_join(a: frozenset, b: frozenset) -> frozenset:
    return frozenset(a) | frozenset(b)


def gset_insert_full(x, s: frozenset) -> frozenset:
    return frozenset(s) | {x}


def gset_insert_delta(x, s: frozenset = frozenset()) -> frozenset:
    return frozenset((x,))


def gset_insert_refined(x, s: frozenset = frozenset()):
    return x


def gset_op_to_state(x) -> frozenset:
    return frozenset((x,))


# -- generic lattice helpers -------------------------------------------------

def join_any(a, b):
    """Join two states of the same shape, dispatching on their type."""
    if isinstance(a, Mapping):
        return gcounter_join(a, b)
    if isinstance(a, (set, frozenset)):
        return gset_join(a, b)
    if isinstance(a, tuple) and len(a) == 2:
        return (join_any(a[0], b[0]), join_any(a[1], b[1]))
    raise TypeError(f"no lattice join for {type(a).__name__}")


def leq(a, b, join: Optional[Callable] = None) -> bool:
    """Lattice order: ``a`` is below ``b`` iff joining ``a`` into ``b`` changes nothing."""
    join = join or join_any
    return join(a, b) == b


def render(value) -> str:
    """Deterministic single-line representation used in transcripts and reports."""
    if isinstance(value, GCounterState):
        keys = sorted(value, key=_sort_key)
        return "{" + ",".join(f"{render(k)}:{value[k]}" for k in keys) + "}"
    if isinstance(value, CounterDelta):
        return f"({render(value.replica)},{value.count})"
    if isinstance(value, Side):
        return f"{'LR'[value.side]}:{render(value.message)}"
    if isinstance(value, (set, frozenset)):
        return "{" + ",".join(sorted(render(v) for v in value)) + "}"
    if isinstance(value, tuple):
        return "(" + ",".join(render(v) for v in value) + ")"
    return str(value)


def _sort_key(x):
    # ints (and ReplicaIds) numerically, everything else by text
    return (0, x, "") if isinstance(x, int) else (1, 0, str(x))


# -- CRDT instances ----------------------------------------------------------

@dataclass(frozen=True)
class LatticeCRDT:
    """A delta-state CRDT: one lattice plus full, delta and refined mutators.

    ``update``/``delta``/``refine`` take ``(state, origin, op)`` where ``op`` is a
    tuple such as ``("inc",)`` or ``("add", "x")``. ``expand`` maps a refined
    message back to a state-typed fragment.
    """

    name: str
    bottom: Any
    join: Callable[[Any, Any], Any]
    query: Callable[[Any], Any]
    update: Callable[[Any, Any, Op], Any]
    delta: Callable[[Any, Any, Op], Any]
    refine: Callable[[Any, Any, Op], Any]
    expand: Callable[[Any], Any]
    arbitrary: Callable[[random.Random, Sequence], Any]
    arbitrary_op: Callable[[random.Random], Op]
    op_names: tuple = field(default=())

    def leq(self, a, b) -> bool:
        return self.join(a, b) == b

    def fold(self, states: Iterable):
        acc = self.bottom
        for s in states:
            acc = self.join(acc, s)
        return acc


def _expect(op: Op, *names: str) -> None:
    if not op or op[0] not in names:
        raise ValueError(f"unsupported operation {op!r}; expected one of {names}")


DEFAULT_ALPHABET = ("a", "b", "c", "d", "e")


def gcounter(replicas: Optional[Iterable] = None) -> LatticeCRDT:
    members = frozenset(replicas) if replicas is not None else None

    def update(s, who, op):
        _expect(op, "inc")
        return gcounter_inc_full(who, s, members)

    def delta(s, who, op):
        _expect(op, "inc")
        return gcounter_inc_delta(who, s, members)

    def refine(s, who, op):
        _expect(op, "inc")
        return gcounter_inc_refined(who, s, members)

    def arbitrary(rng, ids):
        return GCounterState({i: rng.randint(1, 5) for i in ids if rng.random() < 0.6})

    return LatticeCRDT(
        name="gcounter",
        bottom=GCounterState(),
        join=gcounter_join,
        query=gcounter_query,
        update=update,
        delta=delta,
        refine=refine,
        expand=counter_op_to_state,
        arbitrary=arbitrary,
        arbitrary_op=lambda rng: ("inc",),
        op_names=("inc",),
    )


def gset(alphabet: Sequence = DEFAULT_ALPHABET) -> LatticeCRDT:
    alphabet = tuple(alphabet)

    def update(s, who, op):
        _expect(op, "add")
        return gset_insert_full(op[1], s)

    def delta(s, who, op):
        _expect(op, "add")
        return gset_insert_delta(op[1], s)

    def refine(s, who, op):
        _expect(op, "add")
        return gset_insert_refined(op[1], s)

    def arbitrary(rng, ids):
        return frozenset(x for x in alphabet if rng.random() < 0.4)

    return LatticeCRDT(
        name="gset",
        bottom=frozenset(),
        join=gset_join,
        query=frozenset,
        update=update,
        delta=delta,
        refine=refine,
        expand=gset_op_to_state,
        arbitrary=arbitrary,
        arbitrary_op=lambda rng: ("add", rng.choice(alphabet)),
        op_names=("add",),
    )


def pair_compose(
    left: LatticeCRDT,
    right: LatticeCRDT,
    route: Callable[[Op], tuple[int, Op]],
    query: Callable[[Any], Any],
    name: str = "pair",
    op_names: tuple = (),
    arbitrary_op: Optional[Callable[[random.Random], Op]] = None,
) -> LatticeCRDT:
    """Product of two CRDTs.

    ``route`` maps an outer operation to ``(side, inner_op)``; the delta of an
    update on one side pairs the inner fragment with the other side's bottom.
    """
    parts = (left, right)

    def join(a, b):
        return (left.join(a[0], b[0]), right.join(a[1], b[1]))

    def update(s, who, op):
        side, inner = route(op)
        new = parts[side].update(s[side], who, inner)
        return (new, s[1]) if side == 0 else (s[0], new)

    def delta(s, who, op):
        side, inner = route(op)
        d = parts[side].delta(s[side], who, inner)
        return (d, right.bottom) if side == 0 else (left.bottom, d)

    def refine(s, who, op):
        side, inner = route(op)
        return Side(side, parts[side].refine(s[side], who, inner))

    def expand(msg: Side):
        d = parts[msg.side].expand(msg.message)
        return (d, right.bottom) if msg.side == 0 else (left.bottom, d)

    def arbitrary(rng, ids):
        return (left.arbitrary(rng, ids), right.arbitrary(rng, ids))

    if arbitrary_op is None:
        def arbitrary_op(rng):
            return left.arbitrary_op(rng)

    return LatticeCRDT(
        name=name,
        bottom=(left.bottom, right.bottom),
        join=join,
        query=query,
        update=update,
        delta=delta,
        refine=refine,
        expand=expand,
        arbitrary=arbitrary,
        arbitrary_op=arbitrary_op,
        op_names=op_names,
    )


def pncounter(replicas: Optional[Iterable] = None) -> LatticeCRDT:
    def route(op):
        _expect(op, "inc", "dec")
        return (0 if op[0] == "inc" else 1), ("inc",)

    return pair_compose(
        gcounter(replicas),
        gcounter(replicas),
        route=route,
        query=lambda s: gcounter_query(s[0]) - gcounter_query(s[1]),
        name="pncounter",
        op_names=("inc", "dec"),
        arbitrary_op=lambda rng: (rng.choice(("inc", "dec")),),
    )


def twopset(alphabet: Sequence = DEFAULT_ALPHABET) -> LatticeCRDT:
    alphabet = tuple(alphabet)

    def route(op):
        _expect(op, "add", "remove")
        return (0 if op[0] == "add" else 1), ("add", op[1])

    return pair_compose(
        gset(alphabet),
        gset(alphabet),
        route=route,
        query=lambda s: frozenset(s[0] - s[1]),
        name="twopset",
        op_names=("add", "remove"),
        arbitrary_op=lambda rng: (rng.choice(("add", "remove")), rng.choice(alphabet)),
    )


def twopset_contains(s, x) -> bool:
    added, removed = s
    return x in added and x not in removed


KINDS = {
    "gcounter": gcounter,
    "gset": gset,
    "pncounter": pncounter,
    "twopset": twopset,
}


def make_kind(name: str, replicas: Optional[Iterable] = None) -> LatticeCRDT:
    if name not in KINDS:
        raise ValueError(f"unknown crdt {name!r}; expected one of {sorted(KINDS)}")
    if name in ("gcounter", "pncounter"):
        return KINDS[name](replicas)
    return KINDS[name]()
