"""Deterministic discrete-event network of replicas.

The network may drop, delay, reorder and duplicate messages. Every replica
keeps a history of ``Broadcast`` and ``Deliver`` events; a broadcast is
delivered to its own origin immediately, so a local update is visible at once.

Randomness comes from :class:`PortableRNG`, a thin layer over Python's
Mersenne Twister (MT19937) that only ever calls ``random()``. That call is
reproducible across platforms and Python versions for a given integer seed.
"""
from __future__ import annotations

import heapq
import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Protocol

from .lattice import ReplicaId, render
from .reductions import DeliveryMode, EffectUndefined


class NonTermination(RuntimeError):
    """The run exceeded ``max_events`` before reaching quiescence."""


class PortableRNG:
    """Seeded MT19937 stream. Integers are derived from ``random()`` by scaling."""

    algorithm = "MT19937 via random.Random(seed).random()"

    def __init__(self, seed: int):
        self._rng = random.Random(int(seed))

    def random(self) -> float:
        return self._rng.random()

    def randint(self, lo: int, hi: int) -> int:
        return min(hi, lo + int(self._rng.random() * (hi - lo + 1)))

    def bit(self) -> int:
        return 1 if self._rng.random() < 0.5 else 0


@dataclass(frozen=True)
class NetworkConfig:
    drop_probability: float = 0.0
    duplicate_probability: float = 0.0
    max_duplicates: int = 2
    delay_min: int = 1
    delay_max: int = 1
    reorder: bool = False
    mode: DeliveryMode = DeliveryMode.RELAXED
    seed: int = 0
    fairness: bool = False
    max_events: int = 100_000
    # (origin, target, nth broadcast of origin, 1-based): first transmission is lost
    drop_rules: tuple = ()
    # no automatic remote envelopes; an external driver calls deliver_now
    scripted: bool = False

    def __post_init__(self):
        for name in ("drop_probability", "duplicate_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.max_duplicates < 1:
            raise ValueError("max_duplicates must be >= 1")
        if not 0 <= self.delay_min <= self.delay_max:
            raise ValueError(f"bad delay range [{self.delay_min}, {self.delay_max}]")
        if self.max_events < 1:
            raise ValueError("max_events must be >= 1")
        if self.mode is DeliveryMode.CAUSAL_AT_MOST_ONCE and self.duplicate_probability > 0:
            raise ValueError("causal at-most-once delivery requires duplicate_probability = 0")
        if not -(2**63) <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class Envelope:
    msg_id: int
    payload: Any
    origin: ReplicaId
    target: ReplicaId
    dup_index: int
    deliver_at: int
    clock: Optional[tuple] = None
    covers: frozenset = frozenset()


@dataclass(frozen=True)
class Event:
    kind: str  # "Broadcast" | "Deliver"
    time: int
    replica: ReplicaId
    envelope: Envelope
    accepted: bool = True


@dataclass(frozen=True)
class DeliveryRecord:
    time: int
    envelope: Envelope
    outcome: str  # delivered | rejected | suppressed | held | crashed | skipped


class Replica(Protocol):
    state: Any

    def receive(self, payload, origin) -> bool: ...

    def query(self) -> Any: ...


def vector_clock_tag(origin: int, clock: Iterable[int]) -> tuple:
    """Timestamp for the next broadcast of ``origin`` given its delivered-count vector."""
    tag = list(clock)
    tag[origin] += 1
    return tuple(tag)


def causally_ready(tag: tuple, origin: int, delivered: list) -> bool:
    if tag[origin] != delivered[origin] + 1:
        return False
    return all(t <= d for k, (t, d) in enumerate(zip(tag, delivered)) if k != origin)


def format_event(ev: Event) -> str:
    env = ev.envelope
    return f"{ev.time} {ev.replica} {ev.kind} m{env.msg_id} {env.dup_index} {render(env.payload)}"


class Simulator:
    def __init__(self, replicas: list, config: NetworkConfig = NetworkConfig()):
        self.ids = [ReplicaId(i) for i in range(len(replicas))]
        self.replicas = dict(zip(self.ids, replicas))
        self.config = config
        self.rng = PortableRNG(config.seed)
        self.now = 0
        self.events = 0
        self.transcript: list[Event] = []
        self.histories: dict[ReplicaId, list[Event]] = {i: [] for i in self.ids}
        self.broadcasts: dict[int, Envelope] = {}
        self.crashed: set = set()
        self.delivered: dict[ReplicaId, set] = {i: set() for i in self.ids}
        self._queue: list = []
        self._seq = 0
        self._next_msg = 1
        self._next_dup = defaultdict(int)
        self._sent_by = defaultdict(int)
        self._channel_last: dict = {}
        self._clock = {i: [0] * len(self.ids) for i in self.ids}
        self._holdback: dict[ReplicaId, list[Envelope]] = {i: [] for i in self.ids}

    @property
    def causal(self) -> bool:
        return self.config.mode is DeliveryMode.CAUSAL_AT_MOST_ONCE

    @property
    def live(self) -> list:
        return [i for i in self.ids if i not in self.crashed]

    def pending(self) -> int:
        return len(self._queue)

    def next_time(self) -> Optional[int]:
        return self._queue[0][0] if self._queue else None

    def _replica_id(self, r) -> ReplicaId:
        if r not in self.replicas:
            raise KeyError(f"unknown replica {r!r}")
        return ReplicaId(r)

    # -- sending ---------------------------------------------------------------

    def broadcast(self, origin, payload, covers: Optional[frozenset] = None) -> int:
        origin = self._replica_id(origin)
        if origin in self.crashed:
            raise RuntimeError(f"{origin} has crashed and cannot broadcast")
        msg_id = self._next_msg
        self._next_msg += 1
        self._sent_by[origin] += 1
        nth = self._sent_by[origin]
        clock = vector_clock_tag(origin, self._clock[origin]) if self.causal else None
        if covers is None:
            covers = frozenset((msg_id,))
        record = Envelope(msg_id, payload, origin, origin, 0, self.now, clock, covers)
        self.broadcasts[msg_id] = record
        self._log(Event("Broadcast", self.now, origin, record))
        self._next_dup[(msg_id, origin)] = 1
        self._deliver(record)
        for target in self.ids:
            if target == origin or target in self.crashed:
                continue
            if (int(origin), int(target), nth) in self.config.drop_rules or self.config.scripted:
                continue
            for _ in range(self._copies()):
                self._schedule(record, target)
        return msg_id

    def _copies(self) -> int:
        cfg = self.config
        if self.rng.random() < cfg.drop_probability:
            return 0
        if cfg.max_duplicates > 1 and self.rng.random() < cfg.duplicate_probability:
            return self.rng.randint(2, cfg.max_duplicates)
        return 1

    def _schedule(self, record: Envelope, target: ReplicaId) -> None:
        cfg = self.config
        at = self.now + self.rng.randint(cfg.delay_min, cfg.delay_max)
        channel = (record.origin, target)
        if not cfg.reorder:
            at = max(at, self._channel_last.get(channel, 0))
            self._channel_last[channel] = at
        key = (record.msg_id, target)
        dup = self._next_dup[key]
        self._next_dup[key] += 1
        env = Envelope(record.msg_id, record.payload, record.origin, target, dup, at, record.clock, record.covers)
        self._seq += 1
        heapq.heappush(self._queue, (at, env.msg_id, dup, int(target), self._seq, env))

    # -- receiving -------------------------------------------------------------

    def step(self) -> Optional[DeliveryRecord]:
        if not self._queue:
            return None
        self.events += 1
        if self.events > self.config.max_events:
            raise NonTermination(f"exceeded max_events={self.config.max_events}")
        at, *_, env = heapq.heappop(self._queue)
        self.now = max(self.now, at)
        return self._arrive(env)

    def deliver_now(self, msg_id: int, target) -> DeliveryRecord:
        """Hand one more copy of ``msg_id`` to ``target`` right away (scripted adversary)."""
        target = self._replica_id(target)
        record = self.broadcasts[msg_id]
        key = (msg_id, target)
        dup = self._next_dup[key]
        self._next_dup[key] += 1
        env = Envelope(msg_id, record.payload, record.origin, target, dup, self.now, record.clock, record.covers)
        self.events += 1
        return self._arrive(env)

    def _arrive(self, env: Envelope) -> DeliveryRecord:
        target = env.target
        if target in self.crashed:
            return DeliveryRecord(self.now, env, "skipped")
        if self.causal:
            if env.msg_id in self.delivered[target] or any(
                h.msg_id == env.msg_id for h in self._holdback[target]
            ):
                return DeliveryRecord(self.now, env, "suppressed")
            if not causally_ready(env.clock, env.origin, self._clock[target]):
                self._holdback[target].append(env)
                return DeliveryRecord(self.now, env, "held")
        outcome = self._deliver(env)
        if self.causal:
            self._flush_holdback(target)
        return DeliveryRecord(self.now, env, outcome)

    def _flush_holdback(self, target: ReplicaId) -> None:
        progress = True
        while progress and target not in self.crashed:
            progress = False
            for env in sorted(self._holdback[target], key=lambda e: (e.msg_id, e.dup_index)):
                if causally_ready(env.clock, env.origin, self._clock[target]):
                    self._holdback[target].remove(env)
                    self._deliver(env)
                    progress = True
                    break

    def _deliver(self, env: Envelope) -> str:
        target = env.target
        replica = self.replicas[target]
        try:
            accepted = bool(replica.receive(env.payload, env.origin))
            outcome = "delivered" if accepted else "rejected"
        except EffectUndefined:
            self.crashed.add(target)
            accepted, outcome = False, "crashed"
        self._log(Event("Deliver", self.now, target, env, accepted))
        self.delivered[target].add(env.msg_id)
        if self.causal:
            self._clock[target][env.origin] = max(self._clock[target][env.origin], env.clock[env.origin])
        return outcome

    def _log(self, ev: Event) -> None:
        self.transcript.append(ev)
        self.histories[ev.replica].append(ev)

    # -- retransmission --------------------------------------------------------

    def missing(self) -> list[tuple[int, ReplicaId]]:
        """(msg-id, replica) pairs where a live replica has not yet delivered a broadcast."""
        out = []
        for msg_id in sorted(self.broadcasts):
            for target in self.live:
                if msg_id in self.delivered[target]:
                    continue
                if any(h.msg_id == msg_id for h in self._holdback[target]):
                    continue
                out.append((msg_id, target))
        return out

    def reoffer(self) -> int:
        """Retransmit every undelivered broadcast once through the lossy network."""
        scheduled = 0
        for msg_id, target in self.missing():
            for _ in range(self._copies()):
                self._schedule(self.broadcasts[msg_id], target)
                scheduled += 1
        return scheduled

    def drain(self) -> None:
        while self.step() is not None:
            pass

    def transcript_text(self) -> str:
        return "".join(format_event(ev) + "\n" for ev in self.transcript)

    def states(self) -> dict:
        return {i: self.replicas[i].state for i in self.ids}


def run_to_quiescence(sim: Simulator, fairness: Optional[bool] = None) -> dict:
    """Deliver until nothing is in flight.

    With fairness, undelivered broadcasts are re-offered (and may be lost or
    duplicated again) until every live replica has delivered each of them.
    Raises :class:`NonTermination` past ``max_events``.
    """
    fair = sim.config.fairness if fairness is None else fairness
    while True:
        sim.drain()
        if not fair or not sim.missing():
            return sim.histories
        sim.reoffer()
        sim.events += 1
        if sim.events > sim.config.max_events:
            raise NonTermination(f"exceeded max_events={sim.config.max_events}")
