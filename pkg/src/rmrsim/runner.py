"""Deterministic execution engine.

Each process runs a *script* (its planned sequence of procedure calls) and
the procedure bodies are generators that yield one primitive operation per
step.  The engine owns all interleaving: a scheduled step applies exactly
one memory operation of one process.  Interleaving decisions are recorded
in a *trace*, so any run can be rebuilt bit-identically by replaying the
trace, which is what forking, erasure, and the determinism guarantees rest
on.

Procedure-call rules enforced here: a process makes calls one at a time,
calls Signal at most once, and a scripted poller stops polling after a call
returns true.  Every procedure call must perform at least one memory
access.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .costs import RmrLedger
from .errors import (
    ConfigError,
    RoleError,
    SchedulingError,
    SimError,
    StepBudgetExceeded,
)
from .memory import Event, Memory, OpKind

DEFAULT_BUDGET = 100_000

POLL = "Poll"
SIGNAL = "Signal"
WAIT = "Wait"
_CALL_KINDS = (POLL, SIGNAL, WAIT)


# ---------------------------------------------------------------------------
# Scripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Script:
    """What a process plans to call.

    ``poll`` scripts call Poll repeatedly until a call returns true; a
    ``max_calls`` bound lets the process give up and terminate after that
    many false responses.  ``signal`` and ``wait`` scripts make one call.
    """

    kind: str
    max_calls: int | None = None


def poll_until_true() -> Script:
    return Script("poll", None)


def poll_at_most(calls: int) -> Script:
    return Script("poll", calls)


def signal_once() -> Script:
    return Script("signal", 1)


def wait_once() -> Script:
    return Script("wait", 1)


# ---------------------------------------------------------------------------
# Histories
# ---------------------------------------------------------------------------


@dataclass(slots=True)
class CallRecord:
    """One procedure call: its interval in the event sequence and response.

    ``start_seq`` is the seq of the call's first event (a call with no
    events has not begun); ``end_seq`` is the seq of the event on which the
    call returned, or None while the call is open.
    """

    call_id: int
    proc: int
    kind: str
    response: object = None
    start_seq: int | None = None
    end_seq: int | None = None

    @property
    def open(self) -> bool:
        return self.end_seq is None


@dataclass(slots=True)
class History:
    """An execution: the event sequence plus its procedure-call records.

    ``finished`` holds the processes that terminated; ``incomplete`` is set
    when the run stopped while some process still had steps to take (budget
    exhaustion during a busy-wait, a depth cutoff, or a schedule that ended
    early).  ``trace`` is the replay recipe.
    """

    events: list[Event]
    calls: list[CallRecord]
    finished: frozenset[int]
    incomplete: bool
    trace: tuple

    @property
    def participants(self) -> frozenset[int]:
        return frozenset(e.proc for e in self.events)

    @property
    def active(self) -> frozenset[int]:
        return self.participants - self.finished

    def events_of(self, proc: int) -> list[Event]:
        return [e for e in self.events if e.proc == proc]

    def calls_of(self, proc: int) -> list[CallRecord]:
        return [c for c in self.calls if c.proc == proc]


# ---------------------------------------------------------------------------
# Scheduling policies
# ---------------------------------------------------------------------------


class RoundRobin:
    """Cycle through runnable processes in ascending id order."""

    def __init__(self):
        self._last = 0

    def choose(self, runnable: Sequence[int]) -> int | None:
        for pid in runnable:
            if pid > self._last:
                self._last = pid
                return pid
        self._last = runnable[0]
        return runnable[0]


class SeededRandom:
    """Uniform choice among runnable processes from a seeded generator."""

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = random.Random(seed)

    def choose(self, runnable: Sequence[int]) -> int | None:
        return runnable[self._rng.randrange(len(runnable))]


class ExplicitSchedule:
    """Follow a fixed process-id sequence; entries that are not currently
    runnable are skipped, and the run stops when the sequence ends."""

    def __init__(self, sequence: Iterable[int]):
        self._entries = list(sequence)
        self._pos = 0

    def choose(self, runnable: Sequence[int]) -> int | None:
        while self._pos < len(self._entries):
            pid = self._entries[self._pos]
            self._pos += 1
            if pid in runnable:
                return pid
        return None


# ---------------------------------------------------------------------------
# The engine
# ---------------------------------------------------------------------------


class _ProcState:
    __slots__ = ("gen", "call", "pending", "calls_made", "saw_true", "forced")

    def __init__(self):
        self.gen = None
        self.call: CallRecord | None = None
        self.pending = None
        self.calls_made = 0
        self.saw_true = False
        self.forced: list[str] = []


class Runner:
    """A single deterministic simulation instance.

    Confined to one thread of control; forking is done by replaying the
    trace into a fresh instance, never by sharing state.
    """

    def __init__(self, algorithm, roles: dict[int, Script], *, with_ledger: bool = True):
        self.algorithm = algorithm
        self.n = algorithm.n
        for pid, script in roles.items():
            if not 1 <= pid <= self.n:
                raise ConfigError(f"role process {pid} outside 1..{self.n}")
            if script.kind not in ("poll", "signal", "wait"):
                raise ConfigError(f"unknown script kind {script.kind!r}")
        algorithm.validate_roles(roles)
        self.roles = dict(roles)
        self.mem = Memory(self.n)
        self.locs = algorithm.setup(self.mem)
        self.ctxs = {
            pid: algorithm.make_ctx(pid, self.locs) for pid in range(1, self.n + 1)
        }
        self.events: list[Event] = []
        self.calls: list[CallRecord] = []
        self.trace: list = []
        self.ledger: RmrLedger | None = RmrLedger(self.n) if with_ledger else None
        self._procs = {pid: _ProcState() for pid in range(1, self.n + 1)}
        self._terminated: set[int] = set()
        self._pollers: set[int] = set()
        self._signaled: set[int] = set()
        self._live: list[int] = sorted(
            pid for pid in self.roles if self._script_next(pid) is not None
        )

    # -- public state -----------------------------------------------------

    @property
    def terminated(self) -> frozenset[int]:
        return frozenset(self._terminated)

    def runnable(self) -> list[int]:
        """Processes with at least one enabled step, ascending."""
        return list(self._live)

    def open_call(self, pid: int) -> CallRecord | None:
        return self._procs[pid].call

    def participants(self) -> frozenset[int]:
        if self.ledger is not None:
            return frozenset(self.ledger.participants)
        return frozenset(e.proc for e in self.events)

    def active(self) -> frozenset[int]:
        return self.participants() - self._terminated

    def history(self) -> History:
        return History(
            events=list(self.events),
            calls=[replace(c) for c in self.calls],
            finished=frozenset(self._terminated),
            incomplete=bool(self._live),
            trace=tuple(self.trace),
        )

    # -- scheduling -------------------------------------------------------

    def step(self, pid: int) -> Event:
        """Run one step of ``pid``: apply one memory operation and resume
        the procedure body up to its next operation or return."""
        req = self._ensure_pending(pid)
        if req is None:
            raise SchedulingError(f"process {pid} has no enabled step")
        state = self._procs[pid]
        op, loc = req
        if op.kind not in self.algorithm.primitives:
            raise ConfigError(
                f"{self.algorithm.name} issued undeclared primitive {op.kind.value}"
            )
        rec = state.call
        ev = self.mem.apply(pid, op, loc, seq=len(self.events), call_id=rec.call_id)
        self.trace.append(pid)
        self.events.append(ev)
        if self.ledger is not None:
            self.ledger.record(ev)
        if rec.start_seq is None:
            rec.start_seq = ev.seq
        state.pending = None
        try:
            state.pending = state.gen.send(_response(ev))
        except StopIteration as stop:
            rec.response = stop.value
            rec.end_seq = ev.seq
            state.gen = None
            state.call = None
            if rec.kind == POLL and stop.value:
                state.saw_true = True
            if not state.forced and self._script_next(pid) is None:
                self._terminate(pid)
        return ev

    def drive(self, policy, budget: int = DEFAULT_BUDGET) -> None:
        """Step per policy until nothing is runnable or the budget is spent."""
        while self._live and len(self.events) < budget:
            pid = policy.choose(self._live)
            if pid is None:
                break
            self.step(pid)

    def force_next_call(self, pid: int, kind: str) -> None:
        """Queue a procedure call for ``pid`` ahead of its script."""
        if kind not in _CALL_KINDS:
            raise ConfigError(f"unknown procedure {kind!r}")
        if pid in self._terminated:
            raise SimError(f"process {pid} has terminated")
        self.trace.append(("force", pid, kind))
        self._procs[pid].forced.append(kind)
        if pid not in self._live:
            self._live.append(pid)
            self._live.sort()

    def run_call(self, pid: int, *, max_steps: int = DEFAULT_BUDGET) -> CallRecord:
        """Step ``pid`` until its current (or next) procedure call returns."""
        self._ensure_pending(pid)
        rec = self._procs[pid].call
        if rec is None:
            raise SchedulingError(f"process {pid} has no call to run")
        for _ in range(max_steps):
            self.step(pid)
            if rec.end_seq is not None:
                return rec
        raise StepBudgetExceeded(f"call did not complete within {max_steps} steps")

    def peek(self, pid: int):
        """The (op, location) the process will apply on its next step, or
        None.  Starts the next procedure call if one is due."""
        return self._ensure_pending(pid)

    # -- replay -----------------------------------------------------------

    @classmethod
    def replay(cls, algorithm, roles: dict[int, Script], trace: Iterable,
               *, with_ledger: bool = True) -> "Runner":
        run = cls(algorithm, roles, with_ledger=with_ledger)
        for entry in trace:
            if isinstance(entry, tuple):
                run.force_next_call(entry[1], entry[2])
            else:
                run.step(entry)
        return run

    def fork(self) -> "Runner":
        """Independent copy rebuilt by replaying this run's trace."""
        return Runner.replay(self.algorithm, self.roles, list(self.trace))

    # -- internals ----------------------------------------------------------

    def _script_next(self, pid: int) -> str | None:
        script = self.roles.get(pid)
        if script is None:
            return None
        state = self._procs[pid]
        if script.kind == "poll":
            if state.saw_true:
                return None
            if script.max_calls is not None and state.calls_made >= script.max_calls:
                return None
            return POLL
        if script.kind == "signal":
            return SIGNAL if state.calls_made < 1 else None
        return WAIT if state.calls_made < 1 else None

    def _ensure_pending(self, pid: int):
        state = self._procs[pid]
        if state.pending is not None:
            return state.pending
        if state.gen is not None:  # pragma: no cover - engine invariant
            raise AssertionError("open call without a pending operation")
        if state.forced:
            kind = state.forced.pop(0)
            forced = True
        else:
            kind = self._script_next(pid)
            forced = False
        if kind is None:
            return None
        self._begin_call(pid, kind, forced)
        try:
            state.pending = next(state.gen)
        except StopIteration:
            raise SimError(
                f"{self.algorithm.name}.{kind} performed no memory access"
            ) from None
        return state.pending

    def _begin_call(self, pid: int, kind: str, forced: bool) -> None:
        if kind == SIGNAL and pid in self._signaled:
            raise RoleError(f"process {pid} may call Signal at most once")
        self.algorithm.validate_call(pid, kind, self._pollers)
        if kind == SIGNAL:
            self._signaled.add(pid)
        else:
            self._pollers.add(pid)
        state = self._procs[pid]
        if not forced:
            state.calls_made += 1
        rec = CallRecord(call_id=len(self.calls), proc=pid, kind=kind)
        self.calls.append(rec)
        state.call = rec
        ctx = self.ctxs[pid]
        if kind == POLL:
            state.gen = self.algorithm.poll(ctx)
        elif kind == SIGNAL:
            state.gen = self.algorithm.signal(ctx)
        else:
            state.gen = self.algorithm.wait(ctx)

    def _terminate(self, pid: int) -> None:
        self._terminated.add(pid)
        if self.ledger is not None:
            self.ledger.mark_finished(pid)
        try:
            self._live.remove(pid)
        except ValueError:  # pragma: no cover - forced call on role-less pid
            pass


def _response(ev: Event):
    kind = ev.op.kind
    if kind is OpKind.WRITE:
        return None
    if kind is OpKind.SC:
        return ev.outcome
    return ev.value_read


def run(algorithm, roles: dict[int, Script], policy, *,
        budget: int = DEFAULT_BUDGET) -> tuple[History, RmrLedger]:
    """Run the algorithm under the policy and return (history, ledger)."""
    runner = Runner(algorithm, roles)
    runner.drive(policy, budget)
    return runner.history(), runner.ledger
