"""Single-path execution: seeded random choice or interactive selection."""

from __future__ import annotations

import random

from .engine import Engine, all_delivered
from .scenario import Scenario, format_scenario
from .trace import Trace, TraceEvent


class MaxStepsExceeded(Exception):
    def __init__(self, trace: Trace):
        super().__init__(f"stopped after {len(trace.events)} steps without finishing")
        self.trace = trace


def run(s: Scenario, seed: int | None = None, max_steps: int | None = None,
        choose=None, strict: bool = False) -> Trace:
    """Reduce until quiescence, delivery of every task, or the step bound.

    Without ``choose`` each step picks uniformly among all redexes using a
    generator seeded with ``seed``. ``choose(engine, term, redexes)`` may
    instead return an index, or None to stop. Hitting the step bound is not
    an error: the trace's ``reason`` is then ``"max-steps"``.
    """
    seed = s.options.seed if seed is None else seed
    max_steps = s.options.max_steps if max_steps is None else max_steps
    eng = Engine.for_config(s.config, strict=strict)
    rng = random.Random(seed)
    p = eng.initial()
    snap = eng.snapshot(p)
    trace = Trace(format_scenario(s), None if choose else seed, snap)
    users = s.config.users
    while True:
        if all_delivered(snap, users):
            trace.reason = "delivered"
            break
        rs = eng.redexes(p)
        if not rs:
            trace.reason = "quiescent"
            break
        if len(trace.events) >= max_steps:
            trace.reason = "max-steps"
            break
        i = rng.randrange(len(rs)) if choose is None else choose(eng, p, rs)
        if i is None:
            trace.reason = "stopped"
            break
        info = eng.describe(p, rs[i])
        p = eng.step(p, rs[i])
        snap = eng.snapshot(p)
        trace.events.append(TraceEvent(len(trace.events) + 1, info.kind, info.channel,
                                       info.values, eng.digest(p), snap))
    trace.term = p
    return trace


def run_checked(s: Scenario, **kw) -> Trace:
    """Like ``run`` but raises MaxStepsExceeded (carrying the partial trace) at the bound."""
    trace = run(s, **kw)
    if trace.reason == "max-steps":
        raise MaxStepsExceeded(trace)
    return trace


def interactive_chooser(read=input, write=print):
    """A ``choose`` callback that lists redexes and reads a number; ``q`` stops."""

    def choose(eng, p, rs):
        for i, r in enumerate(rs):
            info = eng.describe(p, r)
            vals = f"<{', '.join(info.values)}>" if info.kind == "comm" else ""
            write(f"  [{i}] {info.kind} {info.channel}{vals}")
        while True:
            try:
                ans = read(f"choose 0-{len(rs) - 1} (q to quit): ").strip()
            except EOFError:
                return None
            if ans in ("q", "quit"):
                return None
            if ans.isdigit() and int(ans) < len(rs):
                return int(ans)
            write(f"not a valid choice: {ans!r}")

    return choose
