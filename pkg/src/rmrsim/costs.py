"""Remote-memory-reference cost models and coherence-message accounting.

Two charging rules classify every event as local or remote (RMR):

* distributed shared memory (DSM): an access is an RMR iff it targets a
  location homed at another process's module; a pure function of the event.
* cache-coherent (CC): every process may cache any location.  A read is
  local while the reader holds a valid copy; it is an RMR (and creates a
  copy) otherwise.  Any nontrivial attempt, including a failed CAS/SC/TAS,
  costs one RMR, destroys all remote copies, and refreshes the writer's own.

Invalidation traffic is counted for two interconnects: a broadcast bus
(one message per nontrivial attempt) and an ideal directory (one message
per remote copy actually held).
"""

from __future__ import annotations

from enum import Enum

from .memory import Event, TRIVIAL_KINDS

LOCAL = "local"
RMR = "rmr"


class Model(Enum):
    DSM = "dsm"
    CC = "cc"


class MessageMode(Enum):
    BUS = "bus"
    IDEAL_DIRECTORY = "ideal_directory"


#: Metric key order used in every serialized record.
METRIC_NAMES = ("rmr_dsm", "rmr_cc", "msg_bus", "msg_dir", "steps")


def is_nontrivial_attempt(event: Event) -> bool:
    return event.op.kind not in TRIVIAL_KINDS


def classify_dsm(event: Event) -> str:
    """DSM rule: remote iff the location lives in another process's module."""
    return RMR if event.home != event.proc else LOCAL


class CacheState:
    """Which processes hold a valid cached copy of which location.

    The ideal cache never drops a copy spuriously; a copy disappears only
    when some other process performs a nontrivial attempt on the location.
    """

    __slots__ = ("_holders",)

    def __init__(self):
        self._holders: dict[int, set[int]] = {}

    def holds(self, proc: int, loc: int) -> bool:
        h = self._holders.get(loc)
        return h is not None and proc in h

    def holders(self, loc: int) -> frozenset[int]:
        return frozenset(self._holders.get(loc) or ())

    def held_by(self, proc: int) -> tuple[int, ...]:
        """Locations ``proc`` currently holds, in uid order."""
        return tuple(sorted(u for u, h in self._holders.items() if proc in h))

    def pairs(self) -> set[tuple[int, int]]:
        return {(p, u) for u, h in self._holders.items() for p in h}

    def copy(self) -> "CacheState":
        fresh = CacheState()
        fresh._holders = {u: set(h) for u, h in self._holders.items()}
        return fresh


def count_messages(event: Event, cache: CacheState, mode: MessageMode) -> int:
    """Invalidation messages the event triggers, given the cache state
    *before* the event is applied to it.  Trivial operations send none."""
    if event.op.kind in TRIVIAL_KINDS:
        return 0
    if mode is MessageMode.BUS:
        return 1
    remote = cache._holders.get(event.loc)
    if not remote:
        return 0
    return len(remote) - (1 if event.proc in remote else 0)


def classify_cc(event: Event, cache: CacheState) -> str:
    """CC rule.  Mutates ``cache`` to reflect the event; when message counts
    are wanted, call :func:`count_messages` on the pre-state first."""
    holders = cache._holders.get(event.loc)
    if event.op.kind in TRIVIAL_KINDS:
        if holders is not None and event.proc in holders:
            return LOCAL
        if holders is None:
            cache._holders[event.loc] = {event.proc}
        else:
            holders.add(event.proc)
        return RMR
    # Nontrivial attempt: write-through to memory, invalidate remote copies,
    # refresh the issuer's own copy.  Always an RMR, cached copy or not.
    if holders is None:
        cache._holders[event.loc] = {event.proc}
    else:
        holders.clear()
        holders.add(event.proc)
    return RMR


class RmrLedger:
    """Per-process cost accounting folded over an event sequence.

    Counts DSM RMRs, CC RMRs, bus and ideal-directory invalidation messages,
    and steps, and tracks the participant and finished process sets.  All
    counts are nonnegative and only ever grow.
    """

    __slots__ = (
        "n",
        "cache",
        "_rmr_dsm",
        "_rmr_cc",
        "_msg_bus",
        "_msg_dir",
        "_steps",
        "_cc_read_rmrs",
        "participants",
        "finished",
    )

    def __init__(self, n: int):
        self.n = n
        self.cache = CacheState()
        self._rmr_dsm = [0] * (n + 1)
        self._rmr_cc = [0] * (n + 1)
        self._msg_bus = [0] * (n + 1)
        self._msg_dir = [0] * (n + 1)
        self._steps = [0] * (n + 1)
        self._cc_read_rmrs = [0] * (n + 1)
        self.participants: set[int] = set()
        self.finished: set[int] = set()

    def record(self, event: Event) -> None:
        p = event.proc
        self._steps[p] += 1
        self.participants.add(p)
        if event.home != p:
            self._rmr_dsm[p] += 1
        trivial = event.op.kind in TRIVIAL_KINDS
        if not trivial:
            self._msg_bus[p] += 1
            self._msg_dir[p] += count_messages(event, self.cache, MessageMode.IDEAL_DIRECTORY)
        if classify_cc(event, self.cache) is RMR:
            self._rmr_cc[p] += 1
            if trivial:
                self._cc_read_rmrs[p] += 1

    def mark_finished(self, proc: int) -> None:
        if proc in self.participants:
            self.finished.add(proc)

    # -- accessors ------------------------------------------------------

    def rmr(self, model: Model, proc: int) -> int:
        return (self._rmr_dsm if model is Model.DSM else self._rmr_cc)[proc]

    def rmr_dsm(self, proc: int) -> int:
        return self._rmr_dsm[proc]

    def rmr_cc(self, proc: int) -> int:
        return self._rmr_cc[proc]

    def msg_bus(self, proc: int) -> int:
        return self._msg_bus[proc]

    def msg_dir(self, proc: int) -> int:
        return self._msg_dir[proc]

    def steps(self, proc: int) -> int:
        return self._steps[proc]

    def cc_read_rmrs(self, proc: int) -> int:
        return self._cc_read_rmrs[proc]

    @property
    def total_rmr_dsm(self) -> int:
        return sum(self._rmr_dsm)

    @property
    def total_rmr_cc(self) -> int:
        return sum(self._rmr_cc)

    @property
    def total_msg_bus(self) -> int:
        return sum(self._msg_bus)

    @property
    def total_msg_dir(self) -> int:
        return sum(self._msg_dir)

    @property
    def total_steps(self) -> int:
        return sum(self._steps)

    @property
    def total_cc_read_rmrs(self) -> int:
        return sum(self._cc_read_rmrs)

    def total(self, model: Model) -> int:
        return self.total_rmr_dsm if model is Model.DSM else self.total_rmr_cc

    def per_process(self, proc: int) -> dict[str, int]:
        """Metrics for one process under the fixed metric names."""
        return {
            "rmr_dsm": self._rmr_dsm[proc],
            "rmr_cc": self._rmr_cc[proc],
            "msg_bus": self._msg_bus[proc],
            "msg_dir": self._msg_dir[proc],
            "steps": self._steps[proc],
        }

    def totals(self) -> dict[str, int]:
        return {
            "rmr_dsm": self.total_rmr_dsm,
            "rmr_cc": self.total_rmr_cc,
            "msg_bus": self.total_msg_bus,
            "msg_dir": self.total_msg_dir,
            "steps": self.total_steps,
        }


def ledger_update(ledger: RmrLedger, event: Event) -> RmrLedger:
    """Fold one event into the ledger and return it."""
    ledger.record(event)
    return ledger
