"""Delta-group anti-entropy with delta intervals and a causal merge guard.

A node applies each local delta to its state and to a pending delta group.
On every sync tick it flips a coin: heads ships the full state, tails ships
the group as an interval ``[a, b)`` of its own delta sequence numbers. The
group is flushed either way.

Receivers track, per origin, how far into that origin's delta sequence they
have joined (``known``). With the guard on, an interval starting beyond that
point would leave a gap and is rejected (or buffered until the gap closes).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

from .lattice import LatticeCRDT, render


class MalformedInterval(ValueError):
    pass


@dataclass(frozen=True)
class FullState:
    value: Any
    clock: tuple = ()  # sorted (origin, next-seq) pairs the sender has joined
    covers: frozenset = frozenset()

    def __str__(self) -> str:
        return f"FULLSTATE {render(self.value)}"


@dataclass(frozen=True)
class DeltaInterval:
    origin: Any
    a: int
    b: int
    value: Any

    def __post_init__(self):
        if self.a >= self.b:
            raise MalformedInterval(f"interval [{self.a}, {self.b}) is empty or inverted")

    @property
    def covers(self) -> frozenset:
        return frozenset((self.origin, k) for k in range(self.a, self.b))

    def __str__(self) -> str:
        return f"INTERVAL {self.origin} {self.a} {self.b} {render(self.value)}"


@dataclass
class DeltaGroup:
    pending: Any
    since: Optional[int] = None

    @property
    def empty(self) -> bool:
        return self.since is None

    def add(self, delta, seq: int, join: Callable) -> None:
        self.pending = join(self.pending, delta)
        if self.since is None:
            self.since = seq


def causal_merge_guard(state, interval: DeltaInterval, known: dict, join: Callable):
    """Join ``interval`` into ``state`` only if nothing before ``interval.a`` is missing.

    Returns ``(accepted, new_state)`` and advances ``known[origin]`` on accept.
    Re-delivered or overlapping intervals are accepted; the join absorbs them.
    """
    if interval.a >= interval.b:
        raise MalformedInterval(f"interval [{interval.a}, {interval.b}) is empty or inverted")
    have = known.get(interval.origin, 0)
    if have < interval.a:
        return False, state
    known[interval.origin] = max(have, interval.b)
    return True, join(state, interval.value)


class AntiEntropyNode:
    def __init__(
        self,
        crdt: LatticeCRDT,
        ident,
        guard: bool = True,
        buffer: bool = False,
        force_empty: bool = False,
    ):
        self.crdt = crdt
        self.ident = ident
        self.guard = guard
        self.buffer = buffer
        self.force_empty = force_empty
        self.state = crdt.bottom
        self.group = DeltaGroup(crdt.bottom)
        self.seq = 0
        self.known: dict = {ident: 0}
        self.incorporated: set = set()
        self.buffered: list[DeltaInterval] = []
        self.rejected = 0

    def query(self):
        return self.crdt.query(self.state)

    def on_local_update(self, op: tuple):
        delta = self.crdt.delta(self.state, self.ident, op)
        self.state = self.crdt.join(self.state, delta)
        self.group.add(delta, self.seq, self.crdt.join)
        self.incorporated.add((self.ident, self.seq))
        self.seq += 1
        self.known[self.ident] = self.seq
        return delta

    def periodic_sync(self, coin: int):
        """Payload to broadcast for this tick (``None`` when an empty group is suppressed)."""
        if coin == 0:
            payload = FullState(
                self.state, tuple(sorted(self.known.items())), frozenset(self.incorporated)
            )
        elif self.group.empty:
            payload = None
            if self.force_empty:
                # an empty interval is not well-formed; ship bottom as a full-state no-op
                payload = FullState(self.crdt.bottom, (), frozenset())
        else:
            payload = DeltaInterval(self.ident, self.group.since, self.seq, self.group.pending)
        self.group = DeltaGroup(self.crdt.bottom)
        return payload

    def receive(self, payload, origin=None) -> bool:
        if isinstance(payload, FullState):
            self.state = self.crdt.join(self.state, payload.value)
            for who, upto in payload.clock:
                self.known[who] = max(self.known.get(who, 0), upto)
            self.incorporated |= payload.covers
            self._retry_buffered()
            return True
        if isinstance(payload, DeltaInterval):
            if self._apply(payload):
                self._retry_buffered()
                return True
            self.rejected += 1
            if self.buffer:
                self.buffered.append(payload)
            return False
        raise TypeError(f"unexpected anti-entropy payload {payload!r}")

    def _apply(self, interval: DeltaInterval) -> bool:
        if self.guard:
            ok, self.state = causal_merge_guard(self.state, interval, self.known, self.crdt.join)
            if not ok:
                return False
        else:
            self.state = self.crdt.join(self.state, interval.value)
            self.known[interval.origin] = max(self.known.get(interval.origin, 0), interval.b)
        self.incorporated |= interval.covers
        return True

    def _retry_buffered(self) -> None:
        progress = True
        while progress and self.buffered:
            progress = False
            for interval in sorted(self.buffered, key=lambda iv: (str(iv.origin), iv.a)):
                if self.known.get(interval.origin, 0) >= interval.a:
                    self.buffered.remove(interval)
                    self._apply(interval)
                    progress = True
                    break
