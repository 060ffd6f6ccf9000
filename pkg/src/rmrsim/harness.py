"""Exploration and proof-style tooling over recorded runs.

* exhaustive bounded enumeration of interleavings (stateless: every branch
  is rebuilt by replay, so what you enumerate is exactly what a normal run
  would have produced);
* solo extensions and a stability probe: a process is *stable* when letting
  it poll alone forever would never cost another remote reference;
* the observation relations (who read whose value, who touched whose
  module) and erasure: removing every step of an unobserved process yields
  another legal run, certified here by replaying and comparing rather than
  trusted;
* the adversary drill: stabilize a crowd of waiters, then make a signaler
  run alone and count what it must spend to reach them all.
"""

from __future__ import annotations

from dataclasses import dataclass

from .costs import Model
from .errors import (
    DrillNotApplicable,
    EnumerationOverflow,
    ErasureRefused,
    ReplayDivergence,
    SimError,
    StabilityUndecided,
    StepBudgetExceeded,
)
from .memory import Event, OpKind, TRIVIAL_KINDS, VALUE_READING_KINDS
from .runner import POLL, SIGNAL, History, Runner, Script, poll_until_true

DEFAULT_HORIZON = 10_000
DEFAULT_ENUM_BUDGET = 1_000_000


# ---------------------------------------------------------------------------
# Exhaustive enumeration
# ---------------------------------------------------------------------------


def enumerate_histories(algorithm, roles: dict[int, Script], depth: int, *,
                        max_histories: int = DEFAULT_ENUM_BUDGET,
                        with_ledger: bool = False):
    """Yield every schedule interleaving up to ``depth`` steps, once each.

    Depth-first over scheduling choices, rebuilding each branch by replay;
    a history is maximal when every process terminated or the depth was
    reached (the latter are yielded with ``incomplete`` set).  Raises
    :class:`EnumerationOverflow` past ``max_histories``.
    """
    if algorithm.n > 255:
        raise SimError("enumeration supports at most 255 processes")
    explored = 0
    pending: list[bytes] = [b""]
    while pending:
        prefix = pending.pop()
        runner = Runner(algorithm, roles, with_ledger=with_ledger)
        for pid in prefix:
            runner.step(pid)
        schedule = bytearray(prefix)
        while len(schedule) < depth:
            choices = runner.runnable()
            if not choices:
                break
            for alt in choices[:0:-1]:
                pending.append(bytes(schedule) + bytes([alt]))
            runner.step(choices[0])
            schedule.append(choices[0])
        explored += 1
        if explored > max_histories:
            raise EnumerationOverflow(explored - 1, max_histories)
        yield runner.history()


# ---------------------------------------------------------------------------
# Solo runs and stability
# ---------------------------------------------------------------------------


def solo_extend(base: Runner, pid: int, *, calls: int, kind: str = POLL,
                max_steps_per_call: int = DEFAULT_HORIZON) -> Runner:
    """Fork the run and let only ``pid`` execute up to ``calls`` further
    procedure calls.  Polling stops early once a call returns true (no
    further polls would be legal)."""
    if pid in base.terminated:
        raise SimError(f"process {pid} has terminated")
    fork = base.fork()
    for _ in range(calls):
        fork.force_next_call(pid, kind)
        rec = fork.run_call(pid, max_steps=max_steps_per_call)
        if kind == POLL and rec.response:
            break
    return fork


@dataclass(frozen=True, slots=True)
class StabilityResult:
    stable: bool
    solo_calls: int


def stability(base: Runner, pid: int, *, model: Model = Model.DSM,
              horizon: int = DEFAULT_HORIZON) -> StabilityResult:
    """Decide whether ``pid``, polling alone from here on, ever pays
    another RMR under ``model``.

    UNSTABLE as soon as a solo poll costs an RMR.  STABLE when a solo poll
    returns true (no further polls are legal) or when the configuration the
    process can observe without an RMR (its persistent state plus the
    memory it can read locally) repeats between calls, which pins the solo
    run in a zero-cost cycle.  Raises :class:`StabilityUndecided` when the
    horizon is hit first.
    """
    if pid in base.terminated or pid not in base.participants():
        raise SimError(f"process {pid} is not active")
    if base.open_call(pid) is not None:
        raise SimError(f"process {pid} is mid-call; stability is a between-calls question")
    fork = base.fork()
    seen = {_configuration(fork, pid, model)}
    for made in range(1, horizon + 1):
        before = fork.ledger.rmr(model, pid)
        fork.force_next_call(pid, POLL)
        try:
            rec = fork.run_call(pid, max_steps=horizon)
        except StepBudgetExceeded:
            if fork.ledger.rmr(model, pid) > before:
                return StabilityResult(stable=False, solo_calls=made)
            raise StabilityUndecided(
                f"process {pid}: poll did not return within {horizon} steps"
            ) from None
        if fork.ledger.rmr(model, pid) > before:
            return StabilityResult(stable=False, solo_calls=made)
        if rec.response:
            return StabilityResult(stable=True, solo_calls=made)
        config = _configuration(fork, pid, model)
        if config in seen:
            return StabilityResult(stable=True, solo_calls=made)
        seen.add(config)
        if len(seen) > horizon:
            break
    raise StabilityUndecided(
        f"process {pid}: no repeat and no RMR within {horizon} configurations"
    )


def _configuration(runner: Runner, pid: int, model: Model) -> tuple:
    """Everything a solo run of ``pid`` can branch on without paying an RMR:
    its persistent local state plus the values it can read locally (its own
    module under DSM; its valid cached copies under CC)."""
    state = tuple(sorted(runner.ctxs[pid].state.items()))
    if model is Model.DSM:
        mem = runner.mem.module_snapshot(pid)
    else:
        held = runner.ledger.cache.held_by(pid)
        mem = tuple((uid, runner.mem.value(uid)) for uid in held)
    return (state, mem)


# ---------------------------------------------------------------------------
# Observation relations and erasure
# ---------------------------------------------------------------------------


def sees(history: History, p: int, q: int) -> bool:
    """Did ``p`` read a value whose last writer was ``q``?  Covers every
    primitive whose response exposes the location's value."""
    return any(
        e.proc == p and e.op.kind in VALUE_READING_KINDS and e.writer_before == q
        for e in history.events
    )


def touches(history: History, p: int, q: int) -> bool:
    """Did ``p`` access any location homed at ``q``?"""
    return any(e.proc == p and e.home == q for e in history.events)


def validate_erasure(history: History | list, p: int) -> bool:
    """True iff removing every step of ``p`` cannot change anyone else's
    steps: nobody read a value last written by ``p``, and no other
    process's SC verdict depended on a write of ``p``."""
    events = history.events if isinstance(history, History) else history
    return _erasure_safe(events, p)


def _erasure_safe(events: list[Event], p: int) -> bool:
    for e in events:
        if e.proc != p and e.op.kind in VALUE_READING_KINDS and e.writer_before == p:
            return False
    # An SC outcome also depends on writes landing between the issuer's LL
    # and the SC itself, which no read response exposes.
    last_ll: dict[tuple[int, int], int] = {}
    p_writes: dict[int, list[int]] = {}
    for e in events:
        if e.proc == p and e.value_written is not None:
            p_writes.setdefault(e.loc, []).append(e.seq)
    if p_writes:
        for e in events:
            if e.op.kind is OpKind.LL:
                last_ll[(e.proc, e.loc)] = e.seq
            elif e.op.kind is OpKind.SC and e.proc != p:
                start = last_ll.get((e.proc, e.loc), -1)
                if any(start < w < e.seq for w in p_writes.get(e.loc, ())):
                    return False
    return True


def erase(base: Runner, p: int) -> Runner:
    """Replay the run with every step of ``p`` dropped from the schedule.

    Refused unless :func:`validate_erasure` holds.  The survivors' replayed
    steps are then compared against their originals; any difference means
    the validator is wrong and raises :class:`ReplayDivergence`.
    """
    if p in base.terminated or p not in base.participants():
        raise SimError(f"process {p} is not active; only active processes can be erased")
    if not _erasure_safe(base.events, p):
        raise ErasureRefused(f"some process observed {p}; erasure would change the run")
    trace = [
        entry for entry in base.trace
        if (entry[1] if isinstance(entry, tuple) else entry) != p
    ]
    replayed = Runner.replay(base.algorithm, base.roles, trace)
    _assert_survivors_match(base, replayed, p)
    return replayed


def _assert_survivors_match(base: Runner, replayed: Runner, p: int) -> None:
    original = [e.signature() for e in base.events if e.proc != p]
    rebuilt = [e.signature() for e in replayed.events]
    if original != rebuilt:
        raise ReplayDivergence(f"erasing {p} changed surviving steps")
    # A call with no steps yet has not begun; it materializes lazily and is
    # not part of the run being compared.
    original_calls = [
        (c.proc, c.kind, c.response)
        for c in base.calls
        if c.proc != p and c.start_seq is not None
    ]
    rebuilt_calls = [
        (c.proc, c.kind, c.response)
        for c in replayed.calls
        if c.start_seq is not None
    ]
    if original_calls != rebuilt_calls:
        raise ReplayDivergence(f"erasing {p} changed surviving calls")


# ---------------------------------------------------------------------------
# The adversary drill
# ---------------------------------------------------------------------------


@dataclass(slots=True)
class SeparationReport:
    """Outcome of one adversary drill.

    ``status`` is "ok" or "non_stabilizing"; metrics are None in the latter
    case.  ``post_poll_ok`` records whether every waiter still active after
    the drill got true from its next poll, which is the correctness
    property the drill leans on.
    """

    algorithm: str
    model: str
    W: int
    k: int | None = None
    signaler_rmrs: int | None = None
    total_rmr_dsm: int | None = None
    total_rmr_cc: int | None = None
    msg_bus: int | None = None
    msg_dir: int | None = None
    status: str = "ok"
    diagnosis: str | None = None
    signaler: int | None = None
    erased: int = 0
    post_poll_ok: bool | None = None
    history: History | None = None

    def to_record(self) -> dict:
        """The fixed wire format: exactly these nine keys."""
        return {
            "algorithm": self.algorithm,
            "model": self.model,
            "W": self.W,
            "k": self.k,
            "signaler_rmrs": self.signaler_rmrs,
            "total_rmr_dsm": self.total_rmr_dsm,
            "total_rmr_cc": self.total_rmr_cc,
            "msg_bus": self.msg_bus,
            "msg_dir": self.msg_dir,
        }


def adversary_separation(algorithm, *, waiters=None, model: Model = Model.DSM,
                         signaler: int | str = "auto", max_rounds: int = 8,
                         horizon: int = DEFAULT_HORIZON,
                         erase_on_discovery: bool = False,
                         signal_budget: int = 1_000_000) -> SeparationReport:
    """Run the two-phase separation drill.

    Phase one schedules the waiters' polls round-robin, one complete poll
    per waiter per round, until the stability probe reports every waiter
    stable (or gives up).  Each waiter then has no open call.  Phase two
    picks a signaler: the instance's designated one if any, an explicit id,
    or (AUTO) the lowest process whose memory module nobody wrote, and runs
    its Signal alone to completion, counting its remote references.

    With ``erase_on_discovery`` (meant for read/write-only algorithms),
    whenever the signaler is about to read a value last written by a still
    active unobserved waiter, or to write into such a waiter's module, that
    waiter is erased first, and any unobserved waiters left after Signal
    are erased too; the surviving history then has few participants but
    all of the signaler's spending.
    """
    if waiters is None:
        waiters = getattr(algorithm, "waiters", None) or tuple(range(2, algorithm.n + 1))
    waiters = tuple(sorted(waiters))
    w_count = len(waiters)
    report = SeparationReport(algorithm=algorithm.name, model=model.value, W=w_count)
    roles = {w: poll_until_true() for w in waiters}
    runner = Runner(algorithm, roles)

    unstable: list[int] = list(waiters)
    for _ in range(max_rounds):
        try:
            for w in waiters:
                runner.run_call(w, max_steps=horizon)
        except StepBudgetExceeded:
            report.status = "non_stabilizing"
            report.diagnosis = f"a poll by waiter {w} ran past {horizon} steps"
            return report
        unstable = []
        for w in waiters:
            try:
                if not stability(runner, w, model=model, horizon=horizon).stable:
                    unstable.append(w)
            except StabilityUndecided:
                unstable.append(w)
        if not unstable:
            break
    if unstable:
        report.status = "non_stabilizing"
        report.diagnosis = (
            f"waiters {unstable[:8]} still pay RMRs after {max_rounds} polling rounds"
        )
        return report

    for w in waiters:
        while runner.open_call(w) is not None:
            runner.step(w)

    s = _pick_signaler(runner, algorithm, signaler)
    report.signaler = s

    runner.force_next_call(s, SIGNAL)
    steps = 0
    while not _signal_completed(runner, s):
        if erase_on_discovery:
            target = _discovery_target(runner, s)
            if target is not None:
                runner = erase(runner, target)
                report.erased += 1
                continue
        runner.step(s)
        steps += 1
        if steps > signal_budget:
            raise DrillNotApplicable(f"Signal by {s} ran past {signal_budget} steps")

    if erase_on_discovery:
        for w in waiters:
            if w in runner.active() and _erasure_safe(runner.events, w):
                runner = erase(runner, w)
                report.erased += 1

    report.post_poll_ok = _verify_post_polls(runner, waiters)
    ledger = runner.ledger
    report.k = len(runner.participants())
    report.signaler_rmrs = ledger.rmr(model, s)
    report.total_rmr_dsm = ledger.total_rmr_dsm
    report.total_rmr_cc = ledger.total_rmr_cc
    report.msg_bus = ledger.total_msg_bus
    report.msg_dir = ledger.total_msg_dir
    report.history = runner.history()
    return report


def _pick_signaler(runner: Runner, algorithm, choice) -> int:
    if algorithm.designated_signaler is not None:
        if choice not in ("auto", algorithm.designated_signaler):
            raise DrillNotApplicable(
                f"{algorithm.name} fixes the signaler to {algorithm.designated_signaler}"
            )
        return algorithm.designated_signaler
    if choice != "auto":
        return int(choice)
    written = {e.home for e in runner.events if e.value_written is not None}
    for pid in range(1, runner.n + 1):
        if pid not in written:
            return pid
    raise DrillNotApplicable(
        "every process's memory module was written; rerun with a larger n"
    )


def _signal_completed(runner: Runner, s: int) -> bool:
    return any(
        c.proc == s and c.kind == SIGNAL and c.end_seq is not None for c in runner.calls
    )


def _discovery_target(runner: Runner, s: int) -> int | None:
    """The active, unobserved process the signaler's next step would
    observe (read its last write) or whose module it would write."""
    req = runner.peek(s)
    if req is None:
        return None
    op, loc = req
    active = runner.active()
    if op.kind in VALUE_READING_KINDS:
        writer = runner.mem.current_writer(loc)
        if (writer is not None and writer != s and writer in active
                and _erasure_safe(runner.events, writer)):
            return writer
    if op.kind not in TRIVIAL_KINDS and loc.home != s and loc.home in active:
        if _erasure_safe(runner.events, loc.home):
            return loc.home
    return None


def _verify_post_polls(runner: Runner, waiters) -> bool:
    """Every waiter still active must get true from its next poll."""
    remaining = [w for w in waiters if w in runner.active()]
    if not remaining:
        return True
    probe = runner.fork()
    for w in remaining:
        probe.force_next_call(w, POLL)
        if not probe.run_call(w).response:
            return False
    return True
