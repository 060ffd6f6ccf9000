"""Atomic shared-memory core.

Memory is a set of named single-word locations, each tied to the memory
module of one owning process (its *home*).  Processes act on locations
through the primitive operations below; every applied operation is recorded
as an :class:`Event` carrying the data later needed by the cost models and
the safety checker (values moved, success flag, previous writer).

All steps are sequentially consistent atomic events; there is no weak
ordering and no interleaving inside a step.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .errors import CapacityError, ConfigError

WORD_MIN = -(1 << 63)
WORD_MAX = (1 << 63) - 1

#: NIL process id / empty slot marker.  Real process ids start at 1.
NIL = 0


class OpKind(Enum):
    READ = "read"
    WRITE = "write"
    CAS = "cas"
    LL = "ll"
    SC = "sc"
    FAI = "fai"
    FAS = "fas"
    TAS = "tas"


#: Kinds that can never modify memory.  Everything else is a nontrivial
#: attempt: it overwrites the location, or at least tries to.
TRIVIAL_KINDS = frozenset({OpKind.READ, OpKind.LL})

#: Kinds whose response includes the value found at the location.
VALUE_READING_KINDS = frozenset(
    {OpKind.READ, OpKind.LL, OpKind.CAS, OpKind.FAI, OpKind.FAS, OpKind.TAS}
)


@dataclass(frozen=True, slots=True)
class PrimitiveOp:
    """One primitive operation with its operands.

    ``value`` is the word to store (WRITE, CAS, SC, FAS); ``expected`` is the
    comparison operand of CAS.
    """

    kind: OpKind
    value: int | None = None
    expected: int | None = None


@dataclass(frozen=True, slots=True)
class Location:
    """A named shared word living in the memory module of process ``home``."""

    uid: int
    name: str
    home: int


# Operand-free ops are interned; programs issue millions of reads.
_READ = PrimitiveOp(OpKind.READ)
_LL = PrimitiveOp(OpKind.LL)
_FAI = PrimitiveOp(OpKind.FAI)
_TAS = PrimitiveOp(OpKind.TAS)

OpRequest = "tuple[PrimitiveOp, Location]"


def read(loc: Location):
    return (_READ, loc)


def write(loc: Location, value: int):
    return (PrimitiveOp(OpKind.WRITE, value=value), loc)


def cas(loc: Location, expected: int, value: int):
    return (PrimitiveOp(OpKind.CAS, value=value, expected=expected), loc)


def ll(loc: Location):
    return (_LL, loc)


def sc(loc: Location, value: int):
    return (PrimitiveOp(OpKind.SC, value=value), loc)


def fai(loc: Location):
    return (_FAI, loc)


def fas(loc: Location, value: int):
    return (PrimitiveOp(OpKind.FAS, value=value), loc)


def tas(loc: Location):
    return (_TAS, loc)


@dataclass(slots=True)
class Event:
    """One atomic step: a primitive applied by one process to one location.

    ``value_written`` is present iff the operation actually modified memory
    (a failed CAS/SC/TAS leaves it ``None``).  ``writer_before`` is the
    process whose write was last applied to the location before this event,
    which is what the observation relation and erasure validation need.
    """

    seq: int
    proc: int
    op: PrimitiveOp
    loc: int
    home: int
    value_read: int | None
    value_written: int | None
    outcome: bool
    call_id: int
    writer_before: int | None

    @property
    def kind(self) -> OpKind:
        return self.op.kind

    def signature(self) -> tuple:
        """Schedule-independent identity of the step, used by replay checks."""
        return (
            self.proc,
            self.op.kind,
            self.op.value,
            self.op.expected,
            self.loc,
            self.value_read,
            self.value_written,
            self.outcome,
        )


class Memory:
    """Word storage partitioned into per-process modules, plus LL link state.

    A link is held per (process, location) pair; any successful write to the
    location, by anyone, clears all links on it, and an SC attempt consumes
    the issuing process's link whether or not it succeeds.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ConfigError(f"need at least one process, got n={n}")
        self.n = n
        self._values: list[int] = []
        self._writers: list[int | None] = []
        self._links: list[set[int]] = []
        self._locations: list[Location] = []
        self._by_name: dict[str, int] = {}

    # -- allocation ---------------------------------------------------------

    def alloc(self, name: str, home: int, init: int = 0) -> Location:
        """Register a fresh location owned by ``home`` with initial value."""
        if not 1 <= home <= self.n:
            raise ConfigError(f"home {home} outside 1..{self.n}")
        if name in self._by_name:
            raise ConfigError(f"location name {name!r} already allocated")
        _check_word(init)
        loc = Location(uid=len(self._locations), name=name, home=home)
        self._locations.append(loc)
        self._by_name[name] = loc.uid
        self._values.append(init)
        self._writers.append(None)
        self._links.append(set())
        return loc

    @property
    def locations(self) -> tuple[Location, ...]:
        return tuple(self._locations)

    def location(self, name: str) -> Location:
        return self._locations[self._by_name[name]]

    # -- inspection ---------------------------------------------------------

    def value(self, loc: Location | int) -> int:
        return self._values[loc if isinstance(loc, int) else loc.uid]

    def current_writer(self, loc: Location | int) -> int | None:
        """Process whose write was applied most recently, or None."""
        return self._writers[loc if isinstance(loc, int) else loc.uid]

    def image(self) -> tuple[int, ...]:
        """Snapshot of all location values, in allocation order."""
        return tuple(self._values)

    def module_snapshot(self, home: int) -> tuple[tuple[int, int], ...]:
        """(uid, value) pairs for every location homed at ``home``."""
        return tuple(
            (loc.uid, self._values[loc.uid])
            for loc in self._locations
            if loc.home == home
        )

    # -- execution ----------------------------------------------------------

    def apply(self, proc: int, op: PrimitiveOp, loc: Location, *, seq: int, call_id: int) -> Event:
        """Atomically apply one primitive and return the recorded event."""
        kind = op.kind
        uid = loc.uid
        old = self._values[uid]
        writer_before = self._writers[uid]
        value_read: int | None = None
        written: int | None = None
        outcome = True

        if kind is OpKind.READ:
            value_read = old
        elif kind is OpKind.WRITE:
            written = op.value
        elif kind is OpKind.CAS:
            value_read = old
            if old == op.expected:
                written = op.value
            else:
                outcome = False
        elif kind is OpKind.LL:
            value_read = old
            self._links[uid].add(proc)
        elif kind is OpKind.SC:
            # An SC attempt consumes the reservation either way.
            if proc in self._links[uid]:
                written = op.value
            else:
                outcome = False
            self._links[uid].discard(proc)
        elif kind is OpKind.FAI:
            value_read = old
            written = old + 1
        elif kind is OpKind.FAS:
            value_read = old
            written = op.value
        elif kind is OpKind.TAS:
            value_read = old
            if old == 0:
                written = 1
            else:
                outcome = False
        else:  # pragma: no cover - enum is closed
            raise ConfigError(f"unknown primitive {kind}")

        if written is not None:
            _check_word(written)
            self._values[uid] = written
            self._writers[uid] = proc
            self._links[uid].clear()

        return Event(
            seq=seq,
            proc=proc,
            op=op,
            loc=uid,
            home=loc.home,
            value_read=value_read,
            value_written=written,
            outcome=outcome,
            call_id=call_id,
            writer_before=writer_before,
        )


def last_writer(events: Iterable[Event], loc: Location | int) -> int | None:
    """Process of the most recent memory-modifying event on ``loc`` in the
    given event prefix, or None if the location was never written there."""
    uid = loc if isinstance(loc, int) else loc.uid
    found: int | None = None
    for e in events:
        if e.loc == uid and e.value_written is not None:
            found = e.proc
    return found


def _check_word(value: int) -> None:
    if not WORD_MIN <= value <= WORD_MAX:
        raise CapacityError(f"value {value} outside the 64-bit word range")
