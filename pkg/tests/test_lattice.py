import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from deltacrdt.lattice import (
    MAX_COUNT,
    CounterDelta,
    GCounterState,
    ReplicaId,
    Side,
    UnknownReplicaError,
    counter_op_to_state,
    gcounter_inc_delta,
    gcounter_inc_full,
    gcounter_inc_refined,
    gcounter_join,
    gcounter_query,
    gset_insert_delta,
    gset_insert_full,
    gset_join,
    leq,
    make_kind,
    render,
    twopset_contains,
)

from oracles import Ref, normalize

r1, r2, r3 = ReplicaId(0), ReplicaId(1), ReplicaId(2)
IDS = (r1, r2, r3)

counters = st.dictionaries(st.sampled_from(IDS), st.integers(0, 6)).map(GCounterState)
sets = st.frozensets(st.sampled_from("abcde"))


def G(**kw):
    names = {"r1": r1, "r2": r2, "r3": r3}
    return GCounterState({names[k]: v for k, v in kw.items()})


# -- G-Counter ------------------------------------------------------------------

def test_worked_merge():
    assert gcounter_join(G(r1=1, r3=2), G(r2=1, r3=3)) == G(r1=1, r2=1, r3=3)
    assert gcounter_query(G(r1=1, r2=1, r3=3)) == 5


def test_counter_small_values():
    assert gcounter_join(G(), G()) == G()
    assert gcounter_query(G()) == 0
    assert gcounter_query(G(r1=7)) == 7
    assert gcounter_inc_full(r1, G()) == G(r1=1)
    assert gcounter_inc_full(r1, G(r1=1, r3=2)) == G(r1=2, r3=2)
    assert gcounter_inc_full(r2, G(r1=5)) == G(r1=5, r2=1)
    assert gcounter_inc_delta(r1, G(r1=1, r3=2)) == G(r1=2)
    assert gcounter_inc_delta(r1, G()) == G(r1=1)
    assert gcounter_inc_refined(r1, G(r1=3)) == CounterDelta(r1, 4)
    assert gcounter_inc_refined(r1, G()) == CounterDelta(r1, 1)
    assert counter_op_to_state(CounterDelta(r1, 4)) == G(r1=4)


def test_counter_absent_equals_zero():
    assert GCounterState({r1: 0, r2: 3}) == G(r2=3)
    assert hash(GCounterState({r1: 0})) == hash(G())


def test_counter_rejects_negative_and_overflow():
    with pytest.raises(ValueError):
        GCounterState({r1: -1})
    with pytest.raises(OverflowError):
        gcounter_inc_full(r1, GCounterState({r1: MAX_COUNT}))


def test_unknown_replica_rejected():
    with pytest.raises(UnknownReplicaError):
        gcounter_inc_full(ReplicaId(7), G(), replicas=IDS)


def test_leq_examples():
    assert leq(G(), G(r1=3))
    assert not leq(G(r1=2), G(r1=1))


@given(counters)
def test_counter_join_idempotent(s):
    assert gcounter_join(s, s) == s


@given(counters, counters)
def test_counter_join_matches_reference(a, b):
    assert normalize(gcounter_join(a, b)) == Ref("gcounter").join(normalize(a), normalize(b))


@given(counters, counters)
def test_leq_join(a, b):
    assert leq(a, gcounter_join(a, b))


@given(counters, st.sampled_from(IDS))
def test_counter_delta_join_equals_full(s, who):
    assert gcounter_join(s, gcounter_inc_delta(who, s)) == gcounter_inc_full(who, s)
    assert gcounter_join(s, counter_op_to_state(gcounter_inc_refined(who, s))) == gcounter_inc_full(who, s)


# -- G-Set ----------------------------------------------------------------------

def test_set_small_values():
    assert gset_join(frozenset("x"), frozenset("y")) == frozenset("xy")
    assert gset_join(frozenset(), frozenset("ab")) == frozenset("ab")
    assert gset_join(frozenset("x"), frozenset("x")) == frozenset("x")
    assert gset_insert_delta("a", frozenset("b")) == frozenset("a")
    assert gset_join(frozenset("b"), frozenset("a")) == frozenset("ab")
    assert gset_insert_full("a", frozenset()) == frozenset("a")
    assert gset_insert_full("a", frozenset("a")) == frozenset("a")
    assert gset_insert_full("b", frozenset("a")) == frozenset("ab")


@given(sets, st.sampled_from("abcde"))
def test_set_delta_join_equals_full(s, x):
    assert gset_join(s, gset_insert_delta(x, s)) == gset_insert_full(x, s)


# -- composed kinds ---------------------------------------------------------------

def test_pncounter_inc_then_dec():
    pn = make_kind("pncounter", IDS)
    s = pn.update(pn.bottom, r1, ("inc",))
    s = pn.update(s, r1, ("dec",))
    assert pn.query(s) == 0


def test_pncounter_delta_has_empty_other_side():
    pn = make_kind("pncounter", IDS)
    assert pn.delta(pn.bottom, r1, ("inc",)) == (G(r1=1), G())
    assert pn.delta(pn.bottom, r1, ("dec",)) == (G(), G(r1=1))
    assert pn.refine(pn.bottom, r1, ("dec",)) == Side(1, CounterDelta(r1, 1))


def test_twopset_remove_wins_in_every_order():
    tp = make_kind("twopset")
    ops = [("add", "x"), ("remove", "x"), ("add", "x")]
    deltas = []
    s = tp.bottom
    for op in ops:
        d = tp.delta(s, r1, op)
        s = tp.join(s, d)
        deltas.append(d)
    for order in itertools.permutations(deltas):
        assert not twopset_contains(tp.fold(order), "x")
    assert tp.query(s) == frozenset()


@pytest.mark.parametrize("kind", ["gcounter", "gset", "pncounter", "twopset"])
def test_random_states_agree_with_reference(kind):
    crdt, ref = make_kind(kind, IDS), Ref(kind)
    rng = random.Random(1)
    for _ in range(300):
        a, b = crdt.arbitrary(rng, IDS), crdt.arbitrary(rng, IDS)
        assert normalize(crdt.join(a, b)) == ref.join(normalize(a), normalize(b))
        who, op = rng.choice(IDS), crdt.arbitrary_op(rng)
        assert normalize(crdt.update(a, who, op)) == ref.update(normalize(a), who, op)
        assert normalize(crdt.delta(a, who, op)) == ref.delta(normalize(a), who, op)
        assert crdt.query(a) == ref.query(normalize(a))
        assert crdt.leq(crdt.bottom, a)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.sampled_from(IDS), st.sampled_from(["inc", "dec"])), max_size=8))
def test_pncounter_query_counts_ops(ops):
    pn = make_kind("pncounter", IDS)
    s = pn.bottom
    for who, name in ops:
        s = pn.update(s, who, (name,))
    assert pn.query(s) == sum(1 if name == "inc" else -1 for _, name in ops)


def test_render_is_stable():
    assert render(G(r3=3, r1=1, r2=1)) == "{r1:1,r2:1,r3:3}"
    assert render(frozenset("ba")) == "{a,b}"
    assert repr(r1) == "r1"


def test_unknown_operation_rejected():
    with pytest.raises(ValueError):
        make_kind("gcounter").update(G(), r1, ("dec",))
    with pytest.raises(ValueError):
        make_kind("nope")
