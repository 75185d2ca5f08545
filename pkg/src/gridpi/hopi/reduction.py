"""Redex enumeration and one-step reduction.

A normalized term is viewed in prenex form: every restriction reachable
through parallel composition is pulled to the top (binders are kept unique,
so this is scope extrusion) leaving a list of *leaves*: sums, conditionals,
calls and variable applications. Redex paths are leaf indices in that list.
"""

from __future__ import annotations

from dataclasses import dataclass

from .congruence import normalize
from .terms import (
    NIL, Call, Cond, FreshSupply, HopiError, Input, Output, Par, ProcVar, Restrict,
    Sum, VarApp, compatible, free, instantiate, restrict, substitute,
)


class StaleRedex(HopiError):
    pass


@dataclass(frozen=True)
class Comm:
    inp: int
    inp_branch: int
    out: int
    out_branch: int
    channel: object

    kind = "comm"


@dataclass(frozen=True)
class CondResolve:
    leaf: int
    outcome: str  # "then" | "else"

    kind = "cond"


@dataclass(frozen=True)
class Unfold:
    leaf: int
    defn: str

    kind = "unfold"


Redex = Comm | CondResolve | Unfold


def prenex(p) -> tuple[list, list]:
    """Split ``p`` into (restricted names, leaves)."""
    names, leaves = [], []
    stack = [p]
    while stack:
        t = stack.pop()
        if isinstance(t, Par):
            stack.extend(reversed(t.items))
        elif isinstance(t, Restrict):
            names.append(t.name)
            stack.append(t.body)
        elif t != NIL:
            leaves.append(t)
    return names, leaves


def enumerate_redexes(p, env) -> list:
    _, leaves = prenex(p)
    comms, conds, unfolds = [], [], []
    outputs: dict = {}
    for j, leaf in enumerate(leaves):
        if isinstance(leaf, Sum):
            for bj, (pre, _) in enumerate(leaf.branches):
                if isinstance(pre, Output):
                    outputs.setdefault(pre.chan, []).append((j, bj, pre))
    for i, leaf in enumerate(leaves):
        match leaf:
            case Sum(branches):
                for bi, (pre, _) in enumerate(branches):
                    if not isinstance(pre, Input):
                        continue
                    for j, bj, o in outputs.get(pre.chan, ()):
                        if j != i and compatible(pre.formals, o.args):
                            comms.append(Comm(i, bi, j, bj, pre.chan))
            case Cond(a, b, _, _):
                conds.append(CondResolve(i, "then" if a == b else "else"))
            case Call(d, _):
                if d in env:
                    unfolds.append(Unfold(i, d))
    return comms + conds + unfolds


def _leaf(leaves, i, cls):
    if not 0 <= i < len(leaves) or not isinstance(leaves[i], cls):
        raise StaleRedex(f"no {cls.__name__} component at position {i}")
    return leaves[i]


def _branch(leaf, b, cls):
    if not 0 <= b < len(leaf.branches) or not isinstance(leaf.branches[b][0], cls):
        raise StaleRedex(f"no {cls.__name__} prefix at branch {b}")
    return leaf.branches[b]


def contract(p, r, env, fresh: FreshSupply | None = None):
    """Apply ``r`` without normalizing; returns (names, new leaves)."""
    names, leaves = prenex(p)
    leaves = list(leaves)
    match r:
        case Comm(i, bi, j, bj, chan):
            if i == j:
                raise StaleRedex("communication needs two distinct components")
            (ipre, icont) = _branch(_leaf(leaves, i, Sum), bi, Input)
            (opre, ocont) = _branch(_leaf(leaves, j, Sum), bj, Output)
            if ipre.chan != chan or opre.chan != chan:
                raise StaleRedex("channel mismatch")
            leaves[i] = substitute(icont, ipre.formals, opre.args, fresh)
            leaves[j] = ocont
        case CondResolve(i, outcome):
            c = _leaf(leaves, i, Cond)
            if outcome != ("then" if c.lhs == c.rhs else "else"):
                raise StaleRedex("conditional outcome does not match")
            leaves[i] = c.then if outcome == "then" else c.else_
        case Unfold(i, d):
            c = _leaf(leaves, i, Call)
            if c.defn != d or d not in env:
                raise StaleRedex(f"no call to {d} at position {i}")
            leaves[i] = instantiate(env[d], c.args, fresh)
        case _:
            raise TypeError(f"not a redex: {r!r}")
    return names, leaves


def reduce_step(p, r, env, fresh: FreshSupply | None = None):
    """One reduction of normalized ``p`` at redex ``r``; result normalized."""
    names, leaves = contract(p, r, env, fresh)
    return normalize(restrict(names, Par(tuple(leaves)) if len(leaves) > 1 else
                              (leaves[0] if leaves else NIL)))


def unfold_all(p, env, fresh: FreshSupply | None = None, limit: int = 10_000):
    """Unfold every top-level call until none is left (guardedness bounds this)."""
    for _ in range(limit):
        names, leaves = prenex(p)
        if not any(isinstance(t, (Call, Cond)) for t in leaves):
            return p
        new = []
        for t in leaves:
            if isinstance(t, Call) and t.defn in env:
                new.append(instantiate(env[t.defn], t.args, fresh))
            elif isinstance(t, Cond):
                new.append(t.then if t.lhs == t.rhs else t.else_)
            else:
                new.append(t)
        if new == leaves:
            return p
        p = normalize(restrict(names, Par(tuple(new))))
    raise HopiError("unfolding did not terminate; is recursion guarded?")


def collect_garbage(p):
    """Drop components that can never act again.

    A sum is inert for good when every prefix subject is a restricted name that
    no other component knows. Removing it is behaviour-preserving although it
    is not one of the structural laws.
    """
    names, leaves = prenex(p)
    restricted = set(names)
    changed = False
    while True:
        counts: dict = {}
        for t in leaves:
            for n in free(t):
                if n in restricted:
                    counts[n] = counts.get(n, 0) + 1
        keep = []
        for t in leaves:
            if isinstance(t, Sum) and t.branches and all(
                    pre.chan in restricted and counts.get(pre.chan, 0) == 1
                    for pre, _ in t.branches):
                continue
            keep.append(t)
        if len(keep) == len(leaves):
            break
        leaves, changed = keep, True
    if not changed:
        return p
    return normalize(restrict(names, Par(tuple(leaves)) if len(leaves) > 1 else
                              (leaves[0] if leaves else NIL)))


def is_stuck_var(t) -> bool:
    return isinstance(t, VarApp) and isinstance(t.var, ProcVar)
