"""Generators for well-formed random process terms.

Terms are built over a small pool of free names so that communications and
conditionals actually line up. Process variables are only ever applied to
no arguments and abstractions take no parameters, which keeps every
generated term kind-correct.

Hypothesis draws a seed and a size budget; the term itself is built by a
plain recursive generator, which is much faster than composing strategies
and still reproducible from the failing example.
"""

from __future__ import annotations

import random

from hypothesis import strategies as st

from gridpi.hopi.terms import (
    NIL, Abs, Cond, Input, Name, Output, Par, ProcVar, Restrict, Sum, VarApp, new_name, new_var,
    size,
)

POOL = tuple(new_name(x) for x in "abc")
MAX_SIZE = 30


def random_term(rng: random.Random, budget: int, names=POOL, vars_=()):
    """A closed term of size at most about ``budget``."""
    return _Gen(rng).proc(budget, tuple(names), tuple(vars_))


class _Gen:
    def __init__(self, rng):
        self.rng = rng

    def leaf(self, vars_, names=()):
        k = self.rng.random()
        if vars_ and k < 0.4:
            return VarApp(self.rng.choice(vars_), ())
        if names and k < 0.7:
            return Sum(((Output(self.rng.choice(names), ()), NIL),))
        return NIL

    def proc(self, budget, names, vars_):
        r = self.rng
        if budget <= 2:
            return self.leaf(vars_, names if budget == 2 else ())
        k = r.random()
        if k < 0.45:
            return self.sum(budget - 1, names, vars_)
        if k < 0.65:
            n = r.randint(2, 3)
            parts = _split(r, budget - 1, n)
            return Par(tuple(self.proc(p, names, vars_) for p in parts))
        if k < 0.8:
            x = new_name(r.choice("xyz"))
            return Restrict(x, self.proc(budget - 1, names + (x,), vars_))
        if k < 0.92:
            p, q = _split(r, budget - 3, 2)
            return Cond(r.choice(names), r.choice(names),
                        self.proc(p, names, vars_), self.proc(q, names, vars_))
        return self.leaf(vars_)

    def sum(self, budget, names, vars_):
        r = self.rng
        n = 1 if budget < 6 else r.randint(1, 2)
        branches = []
        for part in _split(r, budget, n):
            chan = r.choice(names)
            if r.random() < 0.5:
                formals = tuple(new_var("X") if r.random() < 0.3 else new_name(r.choice("uvw"))
                                for _ in range(r.randint(0, 2)))
                cont = self.proc(part - 1 - len(formals),
                                 names + tuple(f for f in formals if isinstance(f, Name)),
                                 vars_ + tuple(f for f in formals if isinstance(f, ProcVar)))
                branches.append((Input(chan, formals), cont))
            else:
                args, spent = [], 1
                for _ in range(r.randint(0, 2)):
                    if r.random() < 0.25 and part - spent > 4:
                        sub = r.randint(2, max(2, (part - spent) // 2))
                        args.append(Abs((), self.proc(sub, names, vars_)))
                        spent += sub
                    else:
                        args.append(r.choice(names))
                        spent += 1
                branches.append((Output(chan, tuple(args)), self.proc(part - spent, names, vars_)))
        return Sum(tuple(branches))


def _split(r, total, n):
    total = max(total, 0)
    cuts = sorted(r.randint(0, total) for _ in range(n - 1))
    bounds = [0] + cuts + [total]
    return [bounds[i + 1] - bounds[i] for i in range(n)]


def terms(max_size=MAX_SIZE, names=POOL):
    return st.builds(
        lambda seed, budget: random_term(random.Random(seed), budget, names),
        st.integers(0, 2**32 - 1), st.integers(1, max_size * 4 // 5),
    ).filter(lambda t: size(t) <= max_size)


small_terms = terms()
