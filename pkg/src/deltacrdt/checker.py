"""SEC verdicts over recorded histories, a bounded exhaustive oracle, and lattice-law checks."""
from __future__ import annotations

import hashlib
import itertools
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .lattice import LatticeCRDT, ReplicaId, make_kind, render
from .netsim import NetworkConfig, Simulator
from .reductions import DeliveryMode, make_machine

PASS, FAIL, NA = "pass", "fail", "n/a"


class MalformedHistory(ValueError):
    pass


class BoundsExceeded(ValueError):
    pass


# -- verdicts ----------------------------------------------------------------

@dataclass
class Counterexample:
    replicas: tuple
    delivered: frozenset
    states: tuple
    queries: tuple
    duplicates: dict = field(default_factory=dict)  # (replica, msg-id) -> copies delivered

    def lines(self) -> list[str]:
        a, b = self.replicas
        out = [
            f"  replicas: {a} {b}",
            f"  delivered: {_render_ids(self.delivered)}",
            f"  {a}: state={render(self.states[0])} query={render(self.queries[0])}",
            f"  {b}: state={render(self.states[1])} query={render(self.queries[1])}",
        ]
        for (who, msg), n in sorted(self.duplicates.items(), key=lambda kv: (int(kv[0][0]), str(kv[0][1]))):
            out.append(f"  duplicated: {_render_id(msg)} delivered {n}x at {who}")
        return out


@dataclass
class Verdict:
    strong_convergence: str = PASS
    eventual_delivery: str = NA
    counterexample: Optional[Counterexample] = None
    missing: list = field(default_factory=list)  # (replica, update-id)
    details: dict = field(default_factory=dict)  # replica -> (digest, query)
    terminated: bool = True
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.terminated and self.strong_convergence != FAIL and self.eventual_delivery != FAIL

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1

    def report(self) -> str:
        lines = [
            f"strong_convergence: {self.strong_convergence}",
            f"eventual_delivery: {self.eventual_delivery}",
        ]
        if not self.terminated:
            lines.append(f"termination: fail ({self.note})")
        if self.counterexample is not None:
            lines.append("counterexample:")
            lines.extend(self.counterexample.lines())
        if self.missing:
            lines.append("missing:")
            lines.extend(f"  {who} lacks {_render_id(u)}" for who, u in self.missing)
        if self.details:
            lines.append("replicas:")
            for who in sorted(self.details):
                digest, query = self.details[who]
                lines.append(f"  {who}: delivered={digest} query={render(query)}")
        return "\n".join(lines) + "\n"


def _render_id(u) -> str:
    if isinstance(u, int):
        return f"m{u}"
    if isinstance(u, tuple):
        return f"{u[0]}#{u[1]}"
    return str(u)


def _render_ids(ids) -> str:
    return "{" + ",".join(sorted((_render_id(u) for u in ids), key=_natural)) + "}"


def _natural(text: str):
    head = text.rstrip("0123456789")
    tail = text[len(head):]
    return (head, int(tail) if tail else -1)


def digest(ids) -> str:
    return hashlib.sha256(_render_ids(ids).encode()).hexdigest()[:12]


# -- locale checks -----------------------------------------------------------

def check_locale(histories: dict, mode: DeliveryMode = DeliveryMode.RELAXED) -> None:
    """Raise :class:`MalformedHistory` unless every delivery has a cause and broadcasts are delivered locally."""
    broadcast = {}
    for who, events in histories.items():
        for ev in events:
            if ev.kind == "Broadcast":
                broadcast[ev.envelope.msg_id] = who
    for who, events in histories.items():
        seen_broadcast = set()
        delivered = Counter()
        for ev in events:
            msg = ev.envelope.msg_id
            if ev.kind == "Broadcast":
                seen_broadcast.add(msg)
            elif ev.kind == "Deliver":
                if msg not in broadcast:
                    raise MalformedHistory(f"{who} delivered m{msg} that nobody broadcast")
                delivered[msg] += 1
            else:
                raise MalformedHistory(f"unknown event kind {ev.kind!r}")
        local = {ev.envelope.msg_id for ev in events if ev.kind == "Deliver" and ev.envelope.origin == who}
        for msg in seen_broadcast:
            if msg not in local:
                raise MalformedHistory(f"{who} broadcast m{msg} but never delivered it locally")
            first_b = next(k for k, ev in enumerate(events) if ev.kind == "Broadcast" and ev.envelope.msg_id == msg)
            first_d = next(
                k for k, ev in enumerate(events)
                if ev.kind == "Deliver" and ev.envelope.msg_id == msg
            )
            if first_d < first_b:
                raise MalformedHistory(f"{who} delivered m{msg} before broadcasting it")
        if mode is DeliveryMode.CAUSAL_AT_MOST_ONCE:
            repeated = [m for m, n in delivered.items() if n > 1]
            if repeated:
                raise MalformedHistory(f"{who} delivered m{repeated[0]} more than once under at-most-once delivery")


def delivered_sets(histories: dict) -> dict:
    """Update ids each replica has joined, duplicates collapsed."""
    out = {}
    for who, events in histories.items():
        acc = set()
        for ev in events:
            if ev.kind == "Deliver" and ev.accepted:
                acc |= ev.envelope.covers
        out[who] = frozenset(acc)
    return out


def _duplicates(histories: dict, who) -> dict:
    counts = Counter(ev.envelope.msg_id for ev in histories.get(who, ()) if ev.kind == "Deliver")
    return {(who, m): n for m, n in counts.items() if n > 1}


def strong_convergence_check(
    histories: dict,
    final_states: dict,
    query: Callable = lambda s: s,
    crashed=(),
    delivered: Optional[dict] = None,
    mode: DeliveryMode = DeliveryMode.RELAXED,
) -> Verdict:
    """Any two live replicas that joined the same set of updates must hold equal states."""
    check_locale(histories, mode)
    sets = delivered if delivered is not None else delivered_sets(histories)
    live = sorted(w for w in final_states if w not in set(crashed))
    verdict = Verdict(details={w: (digest(sets.get(w, frozenset())), query(final_states[w])) for w in live})
    for a, b in itertools.combinations(live, 2):
        da, db = sets.get(a, frozenset()), sets.get(b, frozenset())
        if da == db and final_states[a] != final_states[b]:
            verdict.strong_convergence = FAIL
            dups = {**_duplicates(histories, a), **_duplicates(histories, b)}
            verdict.counterexample = Counterexample(
                (a, b), da, (final_states[a], final_states[b]),
                (query(final_states[a]), query(final_states[b])), dups,
            )
            break
    return verdict


def eventual_delivery_check(
    histories: dict,
    live: Optional[Sequence] = None,
    delivered: Optional[dict] = None,
    universe: Optional[frozenset] = None,
) -> tuple[str, list]:
    """``(status, missing)``: every update broadcast anywhere reached every live replica."""
    sets = delivered if delivered is not None else delivered_sets(histories)
    if universe is None:
        universe = frozenset().union(
            *(ev.envelope.covers for events in histories.values() for ev in events if ev.kind == "Broadcast")
        )
    live = sorted(histories) if live is None else sorted(live)
    missing = [
        (who, u)
        for who in live
        for u in sorted(universe - sets.get(who, frozenset()), key=lambda u: _natural(_render_id(u)))
    ]
    return (FAIL if missing else PASS), missing


# -- exhaustive oracle -------------------------------------------------------

ORACLE_OPS = {
    "gcounter": (("inc",),),
    "gset": (("add", "a"), ("add", "b")),
    "pncounter": (("inc",), ("dec",)),
    "twopset": (("add", "a"), ("remove", "a")),
}


@dataclass
class OracleReport:
    passed: bool
    schedules: int
    configurations: int
    crdt: str
    style: str
    replicas: int
    ops: int
    max_dup: int
    failing_schedule: Optional[list] = None
    failing_index: Optional[int] = None
    counterexample: str = ""

    def text(self) -> str:
        lines = [
            f"oracle: {self.crdt} style={self.style} replicas={self.replicas} ops={self.ops} max_dup={self.max_dup}",
            f"result: {PASS if self.passed else FAIL}",
            f"configurations: {self.configurations}",
        ]
        if self.passed:
            lines.append(f"schedules: {self.schedules}")
        else:
            lines.append(f"failing_index: {self.failing_index}")
            lines.append("failing_schedule: " + " ".join(format_step(s) for s in self.failing_schedule))
            lines.append(self.counterexample)
        return "\n".join(lines) + "\n"


def format_step(step) -> str:
    if step[0] == "op":
        _, who, op = step
        return f"{ReplicaId(who)}:{'/'.join(map(str, op))}"
    _, k, target = step
    return f"m{k + 1}->{ReplicaId(target)}"


class _Violation(Exception):
    def __init__(self, path, detail):
        self.path = path
        self.detail = detail


class _Oracle:
    """Explicit-state search over every interleaving of client operations and message copies.

    A step is ``("op", replica, op)`` or ``("deliver", k, target)``: hand one
    more copy of the k-th message to ``target``, allowed while fewer than
    ``max_dup`` copies have arrived there. A schedule may stop once every
    operation has run and every message reached every replica at least once.
    Order: stopping first, then ops by (replica, op), then deliveries by
    (message, target). Schedule indices follow that order and are replayable.
    """

    def __init__(self, crdt: str, style: str, n: int, ops: int, max_dup: int):
        kind = make_kind(crdt, [ReplicaId(i) for i in range(n)])
        machine = make_machine(kind, style)
        self.initial_state = machine.initial
        self.prepare, self.effect = machine.prepare_fn, machine.effect_fn
        self.n, self.ops, self.max_dup = n, ops, max_dup
        self.op_steps = [("op", who, op) for who in range(n) for op in ORACLE_OPS[crdt]]
        # native op-based machines with single copies get causal at-most-once delivery
        self.causal = style == "op" and max_dup == 1
        self.memo: dict = {}

    def initial(self):
        # (ops done, replica states, messages as (origin, payload, deps, copies-per-target))
        return (0, (self.initial_state,) * self.n, ())

    def delivered(self, cfg, who) -> frozenset:
        return frozenset(k for k, m in enumerate(cfg[2]) if m[3][who] > 0)

    def complete(self, cfg) -> bool:
        done, _, msgs = cfg
        return done == self.ops and all(c > 0 for m in msgs for c in m[3])

    def successors(self, cfg):
        done, states, msgs = cfg
        if done < self.ops:
            yield from self.op_steps
        for k, (origin, payload, deps, copies) in enumerate(msgs):
            for target in range(self.n):
                if copies[target] < self.max_dup:
                    if self.causal and not deps <= self.delivered(cfg, target):
                        continue
                    yield ("deliver", k, target)

    def apply(self, cfg, step):
        done, states, msgs = cfg
        if step[0] == "op":
            _, who, op = step
            payload = self.prepare(states[who], ReplicaId(who), op)
            state = self._effect(payload, states[who])
            copies = tuple(self.max_dup if t == who else 0 for t in range(self.n))
            msg = (who, payload, self.delivered(cfg, who), copies)
            return (done + 1, _replace(states, who, state), msgs + (msg,))
        _, k, target = step
        origin, payload, deps, copies = msgs[k]
        state = self._effect(payload, states[target])
        msg = (origin, payload, deps, _replace(copies, target, copies[target] + 1))
        return (done, _replace(states, target, state), _replace(msgs, k, msg))

    def _effect(self, payload, state):
        new = self.effect(payload, state)
        if new is None:
            raise RuntimeError("effect undefined inside the oracle")
        return new

    def violation(self, cfg) -> Optional[str]:
        states = cfg[1]
        for a, b in itertools.combinations(range(self.n), 2):
            if states[a] != states[b]:
                da = self.delivered(cfg, a)
                if da == self.delivered(cfg, b):
                    return (
                        f"{ReplicaId(a)} and {ReplicaId(b)} delivered "
                        f"{{{','.join(f'm{k + 1}' for k in sorted(da))}}} "
                        f"but hold {render(states[a])} vs {render(states[b])}"
                    )
        return None

    def count(self, cfg, path) -> int:
        if cfg in self.memo:
            return self.memo[cfg]
        bad = self.violation(cfg)
        if bad:
            raise _Violation(list(path), bad)
        total = 1 if self.complete(cfg) else 0
        for step in self.successors(cfg):
            path.append(step)
            total += self.count(self.apply(cfg, step), path)
            path.pop()
        self.memo[cfg] = total
        return total

    def first_completion(self, cfg) -> list:
        steps = []
        while not self.complete(cfg):
            step = next(iter(self.successors(cfg)))
            steps.append(step)
            cfg = self.apply(cfg, step)
        return steps

    def index_of(self, path) -> int:
        """Number of complete schedules that sort before the first completion of ``path``."""
        cfg, index = self.initial(), 0
        for step in path:
            index += 1 if self.complete(cfg) else 0
            for sibling in self.successors(cfg):
                if sibling == step:
                    break
                index += self.count(self.apply(cfg, sibling), [])
            cfg = self.apply(cfg, step)
        return index

    def final(self, path):
        cfg = self.initial()
        for step in path:
            cfg = self.apply(cfg, step)
        return cfg


def _replace(t: tuple, i: int, value) -> tuple:
    return t[:i] + (value,) + t[i + 1:]


def brute_force_oracle(
    crdt: str, n_replicas: int, ops: int, max_dup: int, style: str = "delta"
) -> OracleReport:
    """Check strong convergence in every reachable configuration of a bounded run.

    A complete schedule runs exactly ``ops`` operations, placed at every replica
    in every order; prefixes with fewer are checked along the way. Each message reaches
    each other replica between 1 and ``max_dup`` times (exactly once, causally
    ordered, for the native op-based style with ``max_dup=1``).
    """
    if not 1 <= n_replicas <= 3 or not 0 <= ops <= 4 or not 1 <= max_dup <= 2:
        raise BoundsExceeded("oracle bounds: replicas 1..3, ops 0..4, max-dup 1..2")
    if crdt not in ORACLE_OPS:
        raise ValueError(f"unknown crdt {crdt!r}")
    oracle = _Oracle(crdt, style, n_replicas, ops, max_dup)
    report = OracleReport(True, 0, 0, crdt, style, n_replicas, ops, max_dup)
    try:
        report.schedules = oracle.count(oracle.initial(), [])
        report.configurations = len(oracle.memo)
        return report
    except _Violation as v:
        # every sibling before the failing path was fully explored without a violation
        schedule = v.path + oracle.first_completion(oracle.final(v.path))
        report.passed = False
        report.configurations = len(oracle.memo)
        report.failing_schedule = schedule
        report.failing_index = oracle.index_of(v.path)
        report.counterexample = "violation: " + v.detail
        return report


def iter_schedules(crdt: str, n_replicas: int, ops: int, max_dup: int, style: str = "delta"):
    """Yield ``(schedule, final_states)`` for every complete schedule, in oracle order."""
    oracle = _Oracle(crdt, style, n_replicas, ops, max_dup)

    def walk(cfg, path):
        if oracle.complete(cfg):
            yield path, cfg[1]
        for step in oracle.successors(cfg):
            yield from walk(oracle.apply(cfg, step), path + [step])

    yield from walk(oracle.initial(), [])


def replay_schedule(crdt: str, n_replicas: int, schedule, style: str = "delta") -> tuple:
    """Drive the network simulator with an oracle schedule; returns final replica states."""
    ids = [ReplicaId(i) for i in range(n_replicas)]
    kind = make_kind(crdt, ids)
    machines = [make_machine(kind, style).fresh() for _ in ids]
    sim = Simulator(machines, NetworkConfig(scripted=True, max_events=10**9))
    for step in schedule:
        if step[0] == "op":
            _, who, op = step
            sim.broadcast(who, machines[who].prepare(ReplicaId(who), op))
        else:
            _, k, target = step
            sim.deliver_now(k + 1, target)
    return tuple(m.state for m in machines)


# -- lattice laws ------------------------------------------------------------

@dataclass
class LawReport:
    crdt: str
    trials: int
    seed: int
    failures: list = field(default_factory=list)  # (law, witnesses)

    @property
    def passed(self) -> bool:
        return not self.failures

    def text(self) -> str:
        lines = [f"laws: {self.crdt} trials={self.trials} seed={self.seed}", f"result: {PASS if self.passed else FAIL}"]
        for law, witnesses in self.failures[:5]:
            lines.append(f"  {law}: " + " ".join(render(w) for w in witnesses))
        return "\n".join(lines) + "\n"


def lattice_law_suite(crdt, trials: int = 1000, seed: int = 0, replicas: int = 3) -> LawReport:
    """Randomised commutativity, associativity, idempotency, inflation and delta/full agreement."""
    ids = [ReplicaId(i) for i in range(replicas)]
    kind: LatticeCRDT = make_kind(crdt, ids) if isinstance(crdt, str) else crdt
    rng = random.Random(seed)
    report = LawReport(kind.name, trials, seed)
    join = kind.join

    def fail(law, *witnesses):
        report.failures.append((law, witnesses))

    for _ in range(trials):
        a, b, c = (kind.arbitrary(rng, ids) for _ in range(3))
        if join(a, b) != join(b, a):
            fail("commutativity", a, b)
        if join(a, join(b, c)) != join(join(a, b), c):
            fail("associativity", a, b, c)
        if join(join(a, b), b) != join(a, b) or join(a, a) != a:
            fail("idempotency", a, b)
        who = rng.choice(ids)
        op = kind.arbitrary_op(rng)
        full = kind.update(a, who, op)
        if not kind.leq(a, full):
            fail("inflation", a, full)
        if join(a, kind.delta(a, who, op)) != full:
            fail("delta-equivalence", a, full)
    return report
