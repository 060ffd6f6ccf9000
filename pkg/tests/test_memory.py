"""Primitive-operation semantics, event bookkeeping, and allocation rules."""

import pytest

from rmrsim.errors import CapacityError, ConfigError
from rmrsim.memory import (
    Memory,
    NIL,
    OpKind,
    cas,
    fai,
    fas,
    last_writer,
    ll,
    read,
    sc,
    tas,
    write,
)


def apply(mem, proc, request, seq=0, call_id=0):
    op, loc = request
    return mem.apply(proc, op, loc, seq=seq, call_id=call_id)


def test_alloc_basic():
    mem = Memory(3)
    flag = mem.alloc("flag", home=1, init=0)
    assert flag.home == 1
    assert mem.value(flag) == 0


def test_alloc_per_process_home():
    mem = Memory(3)
    notify = mem.alloc("notify[2]", home=2, init=0)
    assert notify.home == 2


def test_alloc_duplicate_name_rejected():
    mem = Memory(2)
    mem.alloc("s", home=1)
    with pytest.raises(ConfigError):
        mem.alloc("s", home=2)


def test_alloc_invalid_home_rejected():
    mem = Memory(2)
    with pytest.raises(ConfigError):
        mem.alloc("x", home=3)
    with pytest.raises(ConfigError):
        mem.alloc("y", home=0)


def test_write_event_fields():
    mem = Memory(2)
    b = mem.alloc("b", home=1, init=0)
    ev = apply(mem, 1, write(b, 1))
    assert ev.value_written == 1
    assert ev.value_read is None
    assert ev.outcome is True
    assert mem.value(b) == 1


def test_failed_cas_reads_but_does_not_write():
    mem = Memory(2)
    x = mem.alloc("x", home=1, init=3)
    ev = apply(mem, 2, cas(x, expected=0, value=5))
    assert ev.outcome is False
    assert ev.value_read == 3
    assert ev.value_written is None
    assert mem.value(x) == 3


def test_successful_cas_writes():
    mem = Memory(2)
    x = mem.alloc("x", home=1, init=3)
    ev = apply(mem, 2, cas(x, expected=3, value=5))
    assert ev.outcome is True
    assert ev.value_written == 5
    assert mem.value(x) == 5


def test_fai_returns_old_and_increments():
    mem = Memory(2)
    tail = mem.alloc("tail", home=1, init=4)
    ev = apply(mem, 1, fai(tail))
    assert ev.value_read == 4
    assert ev.value_written == 5
    assert mem.value(tail) == 5


def test_fas_swaps():
    mem = Memory(2)
    x = mem.alloc("x", home=1, init=7)
    ev = apply(mem, 2, fas(x, 9))
    assert ev.value_read == 7
    assert mem.value(x) == 9


def test_tas_sets_once():
    mem = Memory(2)
    x = mem.alloc("x", home=1, init=0)
    first = apply(mem, 1, tas(x))
    assert first.outcome is True and first.value_read == 0 and mem.value(x) == 1
    second = apply(mem, 2, tas(x))
    # A second TAS is a failed attempt: it observes 1 and writes nothing.
    assert second.outcome is False
    assert second.value_written is None
    assert mem.value(x) == 1


def test_sc_without_ll_fails_quietly():
    mem = Memory(2)
    x = mem.alloc("x", home=1, init=0)
    ev = apply(mem, 1, sc(x, 5))
    assert ev.outcome is False
    assert mem.value(x) == 0


def test_ll_sc_roundtrip():
    mem = Memory(2)
    x = mem.alloc("x", home=1, init=0)
    apply(mem, 1, ll(x))
    ev = apply(mem, 1, sc(x, 5))
    assert ev.outcome is True
    assert mem.value(x) == 5


def test_sc_fails_after_intervening_write():
    mem = Memory(2)
    x = mem.alloc("x", home=1, init=0)
    apply(mem, 1, ll(x))
    apply(mem, 2, write(x, 9))
    ev = apply(mem, 1, sc(x, 5))
    assert ev.outcome is False
    assert mem.value(x) == 9


def test_sc_attempt_consumes_link():
    mem = Memory(2)
    x = mem.alloc("x", home=1, init=0)
    apply(mem, 1, ll(x))
    apply(mem, 1, sc(x, 5))
    ev = apply(mem, 1, sc(x, 6))
    assert ev.outcome is False


def test_failed_rmw_does_not_clear_links():
    mem = Memory(2)
    x = mem.alloc("x", home=1, init=1)
    apply(mem, 1, ll(x))
    apply(mem, 2, cas(x, expected=0, value=5))  # fails, no write
    ev = apply(mem, 1, sc(x, 7))
    assert ev.outcome is True


def test_last_writer_none_before_any_write():
    mem = Memory(2)
    x = mem.alloc("x", home=1)
    events = [apply(mem, 1, read(x))]
    assert last_writer(events, x) is None


def test_last_writer_follows_writes():
    mem = Memory(2)
    x = mem.alloc("x", home=1)
    events = [
        apply(mem, 1, write(x, 1), seq=0),
        apply(mem, 2, write(x, 2), seq=1),
    ]
    assert last_writer(events, x) == 2


def test_last_writer_ignores_failed_cas():
    mem = Memory(2)
    x = mem.alloc("x", home=1)
    events = [
        apply(mem, 1, write(x, 1), seq=0),
        apply(mem, 2, cas(x, expected=7, value=9), seq=1),
    ]
    assert events[1].value_written is None
    assert last_writer(events, x) == 1
    assert mem.current_writer(x) == 1


def test_writer_before_equals_last_writer_of_prefix():
    mem = Memory(3)
    x = mem.alloc("x", home=1)
    y = mem.alloc("y", home=2)
    script = [
        (1, write(x, 1)), (2, read(x)), (2, write(y, 4)), (3, fai(y)),
        (1, cas(x, 1, 8)), (3, read(x)), (2, tas(y)), (1, read(y)),
    ]
    events = []
    for i, (proc, req) in enumerate(script):
        before = last_writer(events, req[1])
        ev = apply(mem, proc, req, seq=i)
        assert ev.writer_before == before
        events.append(ev)


def test_word_range_enforced():
    mem = Memory(2)
    x = mem.alloc("x", home=1)
    with pytest.raises(CapacityError):
        apply(mem, 1, write(x, 1 << 70))


def test_event_kind_sets():
    from rmrsim.memory import TRIVIAL_KINDS, VALUE_READING_KINDS

    assert OpKind.READ in TRIVIAL_KINDS and OpKind.LL in TRIVIAL_KINDS
    assert OpKind.WRITE not in TRIVIAL_KINDS
    assert OpKind.SC not in VALUE_READING_KINDS
    assert OpKind.CAS in VALUE_READING_KINDS


def test_nil_is_zero_and_ids_start_at_one():
    assert NIL == 0
