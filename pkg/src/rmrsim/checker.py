"""Safety and budget checks over recorded histories.

The polling contract has two directions: a Poll that returns true needs
some Signal to have already begun (its first step precedes the Poll's
returning step), and a Poll that returns false forbids any Signal having
completed before the Poll began.  The blocking contract is one-sided: a
Wait may return only after some Signal has begun.

Budgets are falsification-only: a wait-freedom bound or an amortized
per-participant RMR bound can be refuted by a history, never proven.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .costs import CacheState, Model, RMR, classify_cc, classify_dsm
from .runner import History, POLL, SIGNAL, WAIT

POLL_TRUE_NO_SIGNAL = "POLL_TRUE_NO_SIGNAL"
POLL_FALSE_AFTER_SIGNAL = "POLL_FALSE_AFTER_SIGNAL"
WAIT_BEFORE_SIGNAL = "WAIT_BEFORE_SIGNAL"
WAITFREE_BUDGET = "WAITFREE_BUDGET"
AMORTIZED_BUDGET = "AMORTIZED_BUDGET"
HARNESS_MISUSE = "HARNESS_MISUSE"


@dataclass(frozen=True, slots=True)
class Violation:
    """One broken property, with enough positions to replay and confirm it."""

    kind: str
    call_ids: tuple[int, ...] = ()
    seqs: tuple[int, ...] = ()
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "call_ids": list(self.call_ids),
            "seqs": list(self.seqs),
            "message": self.message,
        }


def check_polling(history: History) -> list[Violation]:
    """Both polling bullets for every completed Poll.

    "Begun" means the Signal's first step happened (a call with no steps
    has not begun).  Polls issued after the caller already got true are
    harness misuse: flagged, excluded from the bullet checks.
    """
    out: list[Violation] = []
    begun_signals = [
        c for c in history.calls if c.kind == SIGNAL and c.start_seq is not None
    ]
    completed_signals = [c for c in begun_signals if c.end_seq is not None]
    earliest_begun = min((c.start_seq for c in begun_signals), default=None)

    got_true_at: dict[int, int] = {}
    for call in history.calls:
        if call.kind != POLL:
            continue
        true_seq = got_true_at.get(call.proc)
        if true_seq is not None:
            out.append(Violation(
                HARNESS_MISUSE,
                call_ids=(call.call_id,),
                seqs=(true_seq,),
                message=f"process {call.proc} polled again after a true response",
            ))
            continue
        if call.end_seq is None:
            continue
        if call.response:
            got_true_at[call.proc] = call.end_seq
            if earliest_begun is None or earliest_begun >= call.end_seq:
                out.append(Violation(
                    POLL_TRUE_NO_SIGNAL,
                    call_ids=(call.call_id,),
                    seqs=(call.end_seq,),
                    message=f"poll by {call.proc} returned true before any signal began",
                ))
        else:
            culprit = next(
                (s for s in completed_signals if s.end_seq < call.start_seq), None
            )
            if culprit is not None:
                out.append(Violation(
                    POLL_FALSE_AFTER_SIGNAL,
                    call_ids=(call.call_id, culprit.call_id),
                    seqs=(call.start_seq, culprit.end_seq),
                    message=(
                        f"poll by {call.proc} returned false although signal "
                        f"by {culprit.proc} completed first"
                    ),
                ))
    return out


def check_blocking(history: History) -> list[Violation]:
    """A completed Wait needs some Signal begun before its return."""
    out: list[Violation] = []
    begun = [
        c.start_seq for c in history.calls
        if c.kind == SIGNAL and c.start_seq is not None
    ]
    for call in history.calls:
        if call.kind != WAIT or call.end_seq is None:
            continue
        if not any(s < call.end_seq for s in begun):
            out.append(Violation(
                WAIT_BEFORE_SIGNAL,
                call_ids=(call.call_id,),
                seqs=(call.end_seq,),
                message=f"wait by {call.proc} returned before any signal began",
            ))
    return out


def check_waitfree(histories: Iterable[History], bound: int) -> list[Violation]:
    """Flag every call (open or completed) that took more than ``bound``
    steps of its own process."""
    if bound < 1:
        raise ValueError("step bound must be at least 1")
    out: list[Violation] = []
    for history in histories:
        steps: dict[int, int] = {}
        for e in history.events:
            steps[e.call_id] = steps.get(e.call_id, 0) + 1
        for call in history.calls:
            taken = steps.get(call.call_id, 0)
            if taken > bound:
                out.append(Violation(
                    WAITFREE_BUDGET,
                    call_ids=(call.call_id,),
                    seqs=(call.start_seq,),
                    message=(
                        f"{call.kind} by {call.proc} took {taken} steps "
                        f"(bound {bound})"
                    ),
                ))
    return out


@dataclass(frozen=True, slots=True)
class AmortizedResult:
    passed: bool
    total: int
    k: int
    c: int
    model: Model
    violations: tuple[Violation, ...] = field(default=())


def check_amortized(history: History, c: int, model: Model) -> AmortizedResult:
    """Does the history keep total RMRs within c per participant?

    Totals are recomputed here from the raw events, independently of any
    ledger the run kept.
    """
    if c < 1:
        raise ValueError("amortized constant must be at least 1")
    if model is Model.DSM:
        total = sum(1 for e in history.events if classify_dsm(e) is RMR)
    else:
        cache = CacheState()
        total = sum(1 for e in history.events if classify_cc(e, cache) is RMR)
    k = len(history.participants)
    passed = total <= c * k
    violations = ()
    if not passed:
        violations = (Violation(
            AMORTIZED_BUDGET,
            seqs=(len(history.events) - 1,) if history.events else (),
            message=f"{total} {model.value} RMRs across {k} participants exceeds c*k={c * k}",
        ),)
    return AmortizedResult(passed=passed, total=total, k=k, c=c, model=model,
                           violations=violations)


def real_violations(violations: Iterable[Violation]) -> list[Violation]:
    """Everything except harness-misuse notes."""
    return [v for v in violations if v.kind != HARNESS_MISUSE]
