"""The signaling protocol library.

Each algorithm solves the same problem: one process announces an event by
calling Signal, and waiters learn of it through Poll (which returns whether
the signal has been issued) or Wait (which returns only once it has).  The
variants differ in which primitives they use and in where their shared
words live, which is what drives their remote-reference costs apart under
the two cost models.

Procedure bodies are generators yielding one primitive operation per step;
the value sent back is the operation's response.  Per-process state that
survives across calls (e.g. "already announced myself") lives in the
process context, so a run is a pure function of the schedule.
"""

from __future__ import annotations

from types import SimpleNamespace

from .errors import CapacityError, ConfigError, RoleError
from .memory import NIL, Memory, OpKind, fai, read, write

READ_WRITE = frozenset({OpKind.READ, OpKind.WRITE})


class Ctx:
    """Per-process runtime context: id, location handles, persistent state."""

    __slots__ = ("pid", "n", "locs", "state")

    def __init__(self, pid: int, n: int, locs):
        self.pid = pid
        self.n = n
        self.locs = locs
        self.state: dict = {}


class SignalingAlgorithm:
    """Base class: an immutable protocol configuration.

    Instances hold no run state; ``setup`` allocates this protocol's
    locations into a fresh memory image and every simulation keeps its own
    contexts, so one instance can back any number of independent runs.
    """

    name = "signaling"
    primitives: frozenset = READ_WRITE
    #: Only this process may call Signal, when set.
    designated_signaler: int | None = None

    def __init__(self, n: int, home: int = 1):
        if n < 1:
            raise ConfigError(f"need at least one process, got n={n}")
        if not 1 <= home <= n:
            raise ConfigError(f"global home {home} outside 1..{n}")
        self.n = n
        self.home = home

    def make_ctx(self, pid: int, locs) -> Ctx:
        return Ctx(pid, self.n, locs)

    def setup(self, mem: Memory):
        raise NotImplementedError

    def poll(self, ctx: Ctx):
        raise NotImplementedError

    def signal(self, ctx: Ctx):
        raise NotImplementedError

    def wait(self, ctx: Ctx):
        raise ConfigError(f"{self.name} has no Wait procedure; use {self.name}+blocking")

    def validate_roles(self, roles) -> None:
        """Hook for construction-time role checks."""

    def validate_call(self, pid: int, kind: str, pollers: set[int]) -> None:
        """Hook for call-time precondition checks."""


class CcFlag(SignalingAlgorithm):
    """One shared flag word.

    Signal writes the flag; Poll reads it; Wait spins on it.  Under the CC
    model the spin is cached, so every process pays O(1) remote references.
    Under the DSM model every poll by a non-owner is remote.
    """

    name = "cc_flag"

    def setup(self, mem: Memory):
        return SimpleNamespace(flag=mem.alloc("flag", home=self.home, init=0))

    def poll(self, ctx: Ctx):
        return bool((yield read(ctx.locs.flag)))

    def signal(self, ctx: Ctx):
        yield write(ctx.locs.flag, 1)

    def wait(self, ctx: Ctx):
        while True:
            if (yield read(ctx.locs.flag)):
                return True


class SingleWaiter(SignalingAlgorithm):
    """At most one waiter, identity decided at runtime.

    The waiter's first Poll announces its id in a global word and reads the
    global done flag; later Polls spin on a notification word in the
    waiter's own module.  Signal sets the done flag, then notifies the
    announced waiter, if any.
    """

    name = "dsm_single_waiter"

    def setup(self, mem: Memory):
        return SimpleNamespace(
            announce=mem.alloc("waiter_id", home=self.home, init=NIL),
            done=mem.alloc("signaled", home=self.home, init=0),
            notify=_per_process(mem, "notify", range(1, self.n + 1)),
        )

    def poll(self, ctx: Ctx):
        if not ctx.state.get("announced"):
            ctx.state["announced"] = True
            yield write(ctx.locs.announce, ctx.pid)
            return bool((yield read(ctx.locs.done)))
        return bool((yield read(ctx.locs.notify[ctx.pid])))

    def signal(self, ctx: Ctx):
        yield write(ctx.locs.done, 1)
        waiter = yield read(ctx.locs.announce)
        if waiter != NIL:
            yield write(ctx.locs.notify[waiter], 1)

    def validate_roles(self, roles) -> None:
        waiters = [p for p, s in roles.items() if s.kind in ("poll", "wait")]
        if len(waiters) > 1:
            raise RoleError(f"{self.name} supports a single waiter, got {sorted(waiters)}")

    def validate_call(self, pid: int, kind: str, pollers: set[int]) -> None:
        if kind != "Signal" and pollers and pid not in pollers:
            raise RoleError(f"{self.name}: second distinct waiter {pid}")


class MutantSingleWaiter(SingleWaiter):
    """Deliberately broken single-waiter variant: Signal never writes the
    waiter's notification word.  Checker self-test material only."""

    name = "mutant_single_waiter"

    def signal(self, ctx: Ctx):
        yield write(ctx.locs.done, 1)
        yield read(ctx.locs.announce)


class FixedWaiters(SignalingAlgorithm):
    """Waiter ids fixed in advance.

    Poll reads a notification word in the poller's own module, so polling
    is free of remote references.  Signal writes every fixed waiter's word,
    paying one remote reference per waiter other than itself.  The
    terminating variant first spins on per-waiter presence flags (set by
    each waiter's first Poll) before notifying anyone, so Signal blocks
    until every fixed waiter has shown up.
    """

    def __init__(self, n: int, waiters=None, home: int = 1, terminating: bool = False):
        super().__init__(n, home)
        if waiters is None:
            waiters = range(2, n + 1)
        waiters = tuple(sorted(set(waiters)))
        if not waiters:
            raise ConfigError("fixed waiter set must be nonempty")
        if waiters[0] < 1 or waiters[-1] > n:
            raise ConfigError(f"waiter ids {waiters} outside 1..{n}")
        self.waiters = waiters
        self.terminating = terminating
        self.name = "dsm_fixed_waiters_term" if terminating else "dsm_fixed_waiters"

    def setup(self, mem: Memory):
        locs = SimpleNamespace(notify=_per_process(mem, "notify", self.waiters))
        if self.terminating:
            locs.present = {
                i: mem.alloc(f"present[{i}]", home=self.home, init=0) for i in self.waiters
            }
        return locs

    def poll(self, ctx: Ctx):
        if self.terminating and not ctx.state.get("present"):
            ctx.state["present"] = True
            yield write(ctx.locs.present[ctx.pid], 1)
        return bool((yield read(ctx.locs.notify[ctx.pid])))

    def signal(self, ctx: Ctx):
        if self.terminating:
            for j in self.waiters:
                while not (yield read(ctx.locs.present[j])):
                    pass
        for j in self.waiters:
            yield write(ctx.locs.notify[j], 1)

    def validate_call(self, pid: int, kind: str, pollers: set[int]) -> None:
        if kind != "Signal" and pid not in self.waiters:
            raise RoleError(f"{self.name}: {pid} not in the fixed waiter set")


class Registration(SignalingAlgorithm):
    """One signaler fixed in advance; waiters register with it.

    A waiter's first Poll sets its registration flag in the signaler's
    module and then reads the global done flag, which closes the race with
    a concurrent Signal: Signal sets the done flag first and only then
    scans the registrations, so a registration that the scan misses implies
    the waiter's first Poll already saw the flag set.
    """

    name = "dsm_registration"

    def __init__(self, n: int, signaler: int = 1):
        super().__init__(n, home=signaler)
        self.signaler = signaler
        self.designated_signaler = signaler

    def setup(self, mem: Memory):
        ids = range(1, self.n + 1)
        return SimpleNamespace(
            registered={i: mem.alloc(f"registered[{i}]", home=self.signaler, init=0) for i in ids},
            done=mem.alloc("signaled", home=self.signaler, init=0),
            notify=_per_process(mem, "notify", ids),
        )

    def poll(self, ctx: Ctx):
        if not ctx.state.get("registered"):
            ctx.state["registered"] = True
            yield write(ctx.locs.registered[ctx.pid], 1)
            return bool((yield read(ctx.locs.done)))
        return bool((yield read(ctx.locs.notify[ctx.pid])))

    def signal(self, ctx: Ctx):
        yield write(ctx.locs.done, 1)
        for i in range(1, ctx.n + 1):
            if (yield read(ctx.locs.registered[i])):
                yield write(ctx.locs.notify[i], 1)

    def validate_call(self, pid: int, kind: str, pollers: set[int]) -> None:
        if kind == "Signal" and pid != self.signaler:
            raise RoleError(f"{self.name}: only process {self.signaler} may signal")


class QueueSignaling(SignalingAlgorithm):
    """Signaler not fixed in advance; waiters enqueue themselves.

    A waiter's first Poll grabs a slot with fetch-and-increment, records
    its id there, and reads the global done flag; later Polls read the
    waiter's own notification word.  Signal sets the done flag, then scans
    the filled slots and notifies each enqueued waiter.  A slot whose write
    has not landed when the scan passes is skipped; its owner's done-flag
    read necessarily follows its slot write, so that Poll returns true.
    """

    name = "dsm_queue"
    primitives = frozenset({OpKind.READ, OpKind.WRITE, OpKind.FAI})

    def setup(self, mem: Memory):
        ids = range(1, self.n + 1)
        return SimpleNamespace(
            tail=mem.alloc("tail", home=self.home, init=0),
            done=mem.alloc("signaled", home=self.home, init=0),
            slots=[mem.alloc(f"queue[{k}]", home=self.home, init=NIL) for k in range(self.n)],
            notify=_per_process(mem, "notify", ids),
        )

    def poll(self, ctx: Ctx):
        if not ctx.state.get("enqueued"):
            ctx.state["enqueued"] = True
            slot = yield fai(ctx.locs.tail)
            if slot >= ctx.n:
                raise CapacityError(f"queue capacity {ctx.n} exceeded")
            yield write(ctx.locs.slots[slot], ctx.pid)
            return bool((yield read(ctx.locs.done)))
        return bool((yield read(ctx.locs.notify[ctx.pid])))

    def signal(self, ctx: Ctx):
        yield write(ctx.locs.done, 1)
        tail = yield read(ctx.locs.tail)
        for k in range(min(tail, ctx.n)):
            waiter = yield read(ctx.locs.slots[k])
            if waiter != NIL:
                yield write(ctx.locs.notify[waiter], 1)


class Blocking(SignalingAlgorithm):
    """Blocking wrapper: Wait repeatedly runs the inner Poll until true."""

    def __init__(self, inner: SignalingAlgorithm):
        self.inner = inner
        self.n = inner.n
        self.home = inner.home
        self.name = inner.name + "+blocking"
        self.primitives = inner.primitives
        self.designated_signaler = inner.designated_signaler

    def setup(self, mem: Memory):
        return self.inner.setup(mem)

    def poll(self, ctx: Ctx):
        return (yield from self.inner.poll(ctx))

    def signal(self, ctx: Ctx):
        return (yield from self.inner.signal(ctx))

    def wait(self, ctx: Ctx):
        while True:
            if (yield from self.inner.poll(ctx)):
                return True

    def validate_roles(self, roles) -> None:
        self.inner.validate_roles(roles)

    def validate_call(self, pid: int, kind: str, pollers: set[int]) -> None:
        self.inner.validate_call(pid, kind, pollers)


def _per_process(mem: Memory, label: str, ids) -> dict:
    """One word per process id, each homed at its own process."""
    return {i: mem.alloc(f"{label}[{i}]", home=i, init=0) for i in ids}


REGISTRY = {
    "cc_flag": CcFlag,
    "dsm_single_waiter": SingleWaiter,
    "dsm_fixed_waiters": FixedWaiters,
    "dsm_fixed_waiters_term": lambda n, **kw: FixedWaiters(n, terminating=True, **kw),
    "dsm_registration": Registration,
    "dsm_queue": QueueSignaling,
    "mutant_single_waiter": MutantSingleWaiter,
}


def make_algorithm(name: str, n: int, **params) -> SignalingAlgorithm:
    """Build a registered algorithm; append ``+blocking`` to wrap Wait."""
    base, _, suffix = name.partition("+")
    factory = REGISTRY.get(base)
    if factory is None:
        raise ConfigError(f"unknown algorithm {name!r}; known: {sorted(REGISTRY)}")
    algorithm = factory(n=n, **params)
    if suffix == "blocking":
        algorithm = Blocking(algorithm)
    elif suffix:
        raise ConfigError(f"unknown algorithm variant {suffix!r}")
    return algorithm
