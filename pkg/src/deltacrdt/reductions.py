"""Op-based views of state-based and delta-state CRDTs.

``phi_state_to_op`` ships the fully updated state and applies it with a join.
``phi_delta_to_op`` ships a delta fragment (state-typed or refined) and applies
it with a pseudo-join. Both accept any delivery order and any number of copies.

The native op-based counter and set are kept only to show what goes wrong
when an op-based design meets a duplicating network.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Any, Callable, Mapping, Optional

from .lattice import (
    MAX_COUNT,
    CounterDelta,
    GCounterState,
    LatticeCRDT,
    counter_op_to_state,
    gcounter_join,
    leq,
)


class DeliveryMode(enum.Enum):
    RELAXED = "relaxed"
    CAUSAL_AT_MOST_ONCE = "causal"


class EffectUndefined(RuntimeError):
    """The partial effect function returned no state: the replica crashed."""


class UnsafeDeliveryError(ValueError):
    pass


class UndefinedDifference(ValueError):
    pass


class PreconditionViolation(ValueError):
    pass


@dataclass
class OpMachine:
    """One replica of an op-based CRDT.

    ``prepare_fn(state, origin, op)`` builds the message for a local update;
    ``effect_fn(message, state)`` applies a delivered message and may return
    ``None`` (crash).
    """

    family: str
    initial: Any
    prepare_fn: Callable[[Any, Any, tuple], Any]
    effect_fn: Callable[[Any, Any], Optional[Any]]
    query_fn: Callable[[Any], Any]
    delivery_mode: DeliveryMode = DeliveryMode.RELAXED
    state: Any = None

    def __post_init__(self):
        if self.state is None:
            self.state = self.initial

    def fresh(self) -> "OpMachine":
        return replace(self, state=self.initial)

    def prepare(self, origin, op: tuple):
        return self.prepare_fn(self.state, origin, op)

    def effect(self, message) -> Any:
        new = self.effect_fn(message, self.state)
        if new is None:
            raise EffectUndefined(f"{self.family}: effect undefined for {message!r}")
        self.state = new
        return new

    def receive(self, message, origin=None) -> bool:
        self.effect(message)
        return True

    def query(self):
        return self.query_fn(self.state)


def phi_state_to_op(crdt: LatticeCRDT) -> OpMachine:
    return OpMachine(
        family=f"state:{crdt.name}",
        initial=crdt.bottom,
        prepare_fn=crdt.update,
        effect_fn=lambda msg, s: crdt.join(s, msg),
        query_fn=crdt.query,
        delivery_mode=DeliveryMode.RELAXED,
    )


def phi_delta_to_op(crdt: LatticeCRDT, encoding: str = "state") -> OpMachine:
    """Wrap ``crdt`` so messages are its delta fragments.

    ``encoding="state"`` sends state-typed fragments; ``"refined"`` sends the
    compact message (``(replica, count)`` for counters, the bare element for
    sets) and expands it on receipt. Stale fragments are absorbed by the join,
    so a late ``(i, n)`` never lowers entry ``i``.
    """
    if encoding == "state":
        prepare, to_state = crdt.delta, (lambda m: m)
    elif encoding == "refined":
        prepare, to_state = crdt.refine, crdt.expand
    else:
        raise ValueError(f"unknown delta encoding {encoding!r}")
    return OpMachine(
        family=f"delta-{encoding}:{crdt.name}",
        initial=crdt.bottom,
        prepare_fn=prepare,
        effect_fn=lambda msg, s: crdt.join(s, to_state(msg)),
        query_fn=crdt.query,
        delivery_mode=DeliveryMode.RELAXED,
    )


# -- fragment extraction / recovery ------------------------------------------

def t_gset(s1: frozenset, s2: frozenset) -> frozenset:
    if not s1 <= s2:
        raise PreconditionViolation(f"{sorted(s1)} is not below {sorted(s2)}")
    return frozenset(s2 - s1)


def u_gset(s: frozenset, t: frozenset) -> frozenset:
    return frozenset(s) | t


def t_gcounter(s1: Mapping, s2: Mapping) -> CounterDelta:
    if not leq(s1, s2, gcounter_join):
        raise PreconditionViolation(f"{s1!r} is not below {s2!r}")
    differing = [i for i in set(s1) | set(s2) if s1.get(i, 0) != s2.get(i, 0)]
    if not differing:
        raise UndefinedDifference("no fragment between equal states")
    i = min(differing)
    return CounterDelta(i, s2.get(i, 0))


def u_gcounter(s: Mapping, t: CounterDelta) -> GCounterState:
    return gcounter_join(s, counter_op_to_state(t))


# -- native op-based machines ------------------------------------------------

def _succ(n: int, _msg=None) -> int:
    if n >= MAX_COUNT:
        raise OverflowError("count overflow")
    return n + 1


def native_op_gcounter() -> OpMachine:
    """Scalar counter that adds one per delivered ``inc``; needs at-most-once delivery."""
    def prepare(s, origin, op):
        if op[0] != "inc":
            raise ValueError(f"unsupported operation {op!r}")
        return "inc"

    return OpMachine(
        family="op:gcounter",
        initial=0,
        prepare_fn=prepare,
        effect_fn=lambda msg, s: _succ(s),
        query_fn=lambda s: s,
        delivery_mode=DeliveryMode.CAUSAL_AT_MOST_ONCE,
    )


def native_op_gset() -> OpMachine:
    def prepare(s, origin, op):
        if op[0] != "add":
            raise ValueError(f"unsupported operation {op!r}")
        return ("ins", op[1])

    return OpMachine(
        family="op:gset",
        initial=frozenset(),
        prepare_fn=prepare,
        effect_fn=lambda msg, s: s | {msg[1]},
        query_fn=frozenset,
        delivery_mode=DeliveryMode.CAUSAL_AT_MOST_ONCE,
    )


NATIVE_OP = {"gcounter": native_op_gcounter, "gset": native_op_gset}


def check_delivery(machine: OpMachine, mode: DeliveryMode, unsafe: bool = False) -> None:
    """Refuse to run a machine that needs causal at-most-once delivery on a relaxed network."""
    if (
        machine.delivery_mode is DeliveryMode.CAUSAL_AT_MOST_ONCE
        and mode is DeliveryMode.RELAXED
        and not unsafe
    ):
        raise UnsafeDeliveryError(
            f"{machine.family} requires causal at-most-once delivery; "
            "a relaxed network may duplicate messages. Set unsafe to run it anyway."
        )


def make_machine(crdt: LatticeCRDT, style: str) -> OpMachine:
    if style == "state":
        return phi_state_to_op(crdt)
    if style == "delta":
        return phi_delta_to_op(crdt, "state")
    if style == "delta-refined":
        return phi_delta_to_op(crdt, "refined")
    if style == "op":
        if crdt.name not in NATIVE_OP:
            raise ValueError(f"no native op-based {crdt.name}")
        return NATIVE_OP[crdt.name]()
    raise ValueError(f"unknown style {style!r}")
