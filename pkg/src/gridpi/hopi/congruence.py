"""Structural congruence decided on a normal-form fragment.

``normalize`` rewrites a term so that parallel composition is a flat, sorted
multiset without ``0`` components, restrictions sit at their smallest scope
(unused ones vanish), resolvable conditionals are resolved and sum branches
are sorted. Definition calls are left alone.

Sorting uses a key that is invariant under renaming of bound names: names
bound inside the keyed subterm are numbered by binding position, interned
global names print by label, and every other name prints as ``_``.
"""

from __future__ import annotations

import hashlib

from .terms import (
    NIL, Abs, Call, Cond, Input, Name, Output, Par, ProcVar, Restrict, Sum,
    UnboundDefinition, VarApp, _cache, free, is_global,
)


# -- alpha-invariant ordering key -------------------------------------------------


def sort_key(t) -> str:
    return _cache(t, "_key", lambda: "".join(_KeyWriter().term(t)))


class _KeyWriter:
    def __init__(self):
        self.bound: dict = {}
        self.out: list[str] = []
        self.slots: list = []   # the anonymous identifiers, in order of appearance

    def ident(self, n):
        k = self.bound.get(n)
        if k is not None:
            self.out.append(f"${k}")
        elif isinstance(n, Name) and is_global(n):
            self.out.append(n.display)
        else:
            self.out.append("_")
            self.slots.append(n)

    def bind(self, binders):
        for b in binders:
            self.bound[b] = len(self.bound)

    def value(self, v):
        if isinstance(v, (Name, ProcVar)):
            self.ident(v)
        else:
            self.out.append("{")
            saved = dict(self.bound)
            self.bind(v.params)
            self.out.append(str(len(v.params)))
            self.term(v.body)
            self.bound = saved
            self.out.append("}")

    def term(self, t):
        o = self.out
        match t:
            case Sum(branches):
                o.append("S(")
                for pre, cont in branches:
                    saved = self.bound
                    if isinstance(pre, Input):
                        o.append("i")
                        self.ident(pre.chan)
                        o.append(str(len(pre.formals)))
                        o.append("".join("n" if isinstance(f, Name) else "X" for f in pre.formals))
                        self.bound = dict(saved)
                        self.bind(pre.formals)
                    else:
                        o.append("o")
                        self.ident(pre.chan)
                        o.append("<")
                        for a in pre.args:
                            self.value(a)
                            o.append(",")
                        o.append(">")
                    o.append(".")
                    self.term(cont)
                    self.bound = saved
                    o.append(";")
                o.append(")")
            case Par(items):
                o.append("P(")
                for p in items:
                    self.term(p)
                    o.append("|")
                o.append(")")
            case Restrict(n, body):
                o.append("R.")
                saved = self.bound
                self.bound = dict(saved)
                self.bind((n,))
                self.term(body)
                self.bound = saved
            case Cond(a, b, p, q):
                o.append("C(")
                self.ident(a)
                o.append("=")
                self.ident(b)
                o.append("?")
                self.term(p)
                o.append(":")
                self.term(q)
                o.append(")")
            case Call(d, args):
                o.append(f"D{d}<")
                for a in args:
                    self.value(a)
                    o.append(",")
                o.append(">")
            case VarApp(x, args):
                o.append("V")
                self.ident(x)
                o.append("<")
                for a in args:
                    self.value(a)
                    o.append(",")
                o.append(">")
        return o


# -- traversal order (used to order restriction chains) ---------------------------


def occurrence_order(t) -> list:
    """Names and variables in first-occurrence order of a left-to-right walk."""
    seen: dict = {}

    def see(n):
        if n not in seen:
            seen[n] = len(seen)

    def value(v):
        if isinstance(v, (Name, ProcVar)):
            see(v)
        else:
            walk(v.body)

    def walk(t):
        match t:
            case Sum(branches):
                for pre, cont in branches:
                    see(pre.chan)
                    for a in getattr(pre, "args", ()):
                        value(a)
                    walk(cont)
            case Par(items):
                for p in items:
                    walk(p)
            case Restrict(_, body):
                walk(body)
            case Cond(a, b, p, q):
                see(a)
                see(b)
                walk(p)
                walk(q)
            case Call(_, args):
                for a in args:
                    value(a)
            case VarApp(x, args):
                see(x)
                for a in args:
                    value(a)

    walk(t)
    return list(seen)


# -- normal form ---------------------------------------------------------------------


def normalize(p, env=None, placeholders=frozenset()):
    """Normal form of ``p`` modulo the structural laws (no unfolding).

    ``placeholders`` are names standing for not-yet-received values (e.g. the
    formals of a definition body); conditionals over them stay unresolved.
    """
    return _Normalizer(env).proc(p, frozenset(placeholders))


class _Normalizer:
    def __init__(self, env):
        self.env = env

    def proc(self, t, ph):
        if self.env is not None:
            missing = calls(t) - self.env.keys()
            if missing:
                raise UnboundDefinition(", ".join(sorted(missing)))
        relevant = ph & free(t) if ph else ph
        cache = t.__dict__.setdefault("_nf", {})
        hit = cache.get(relevant)
        if hit is not None:
            return hit
        r = self._proc(t, relevant)
        cache[relevant] = r
        # a normal form is its own normal form
        r.__dict__.setdefault("_nf", {}).setdefault(relevant, r)
        return r

    def value(self, v, ph):
        if isinstance(v, (Name, ProcVar)):
            return v
        body = self.proc(v.body, ph | frozenset(v.params))
        return v if body is v.body else Abs(v.params, body)

    def _proc(self, t, ph):
        match t:
            case Sum(branches):
                nb = []
                for pre, cont in branches:
                    if isinstance(pre, Input):
                        nb.append((pre, self.proc(cont, ph | frozenset(pre.formals))))
                    else:
                        args = tuple(self.value(a, ph) for a in pre.args)
                        nb.append((Output(pre.chan, args), self.proc(cont, ph)))
                nb.sort(key=lambda b: sort_key(Sum((b,))))
                return _same(t, Sum(tuple(nb)))
            case Par(items):
                flat = []
                for p in items:
                    q = self.proc(p, ph)
                    if isinstance(q, Par):
                        flat.extend(q.items)
                    elif q != NIL:
                        flat.append(q)
                return _same(t, _mkpar(flat))
            case Restrict():
                names = []
                body = t
                while isinstance(body, Restrict):
                    names.append(body.name)
                    body = body.body
                return _same(t, _scope(names, self.proc(body, ph)))
            case Cond(a, b, p, q):
                if a == b:
                    return self.proc(p, ph)
                if a not in ph and b not in ph:
                    return self.proc(q, ph)
                return _same(t, Cond(a, b, self.proc(p, ph), self.proc(q, ph)))
            case Call(d, args):
                return _same(t, Call(d, tuple(self.value(a, ph) for a in args)))
            case VarApp(x, args):
                return _same(t, VarApp(x, tuple(self.value(a, ph) for a in args)))
        raise TypeError(f"not a process: {t!r}")


def _same(old, new):
    return new


def calls(t) -> frozenset:
    """Definition identifiers called anywhere in ``t`` (including inside values)."""
    if isinstance(t, (Name, ProcVar)):
        return frozenset()
    return _cache(t, "_calls", lambda: _calls(t))


def _calls(t):
    match t:
        case Abs(_, body):
            return calls(body)
        case Sum(branches):
            acc = frozenset()
            for pre, cont in branches:
                acc |= calls(cont)
                for a in getattr(pre, "args", ()):
                    acc |= calls(a)
            return acc
        case Par(items):
            return frozenset().union(*(calls(p) for p in items))
        case Restrict(_, body):
            return calls(body)
        case Cond(_, _, p, q):
            return calls(p) | calls(q)
        case Call(d, args):
            return frozenset((d,)).union(*(calls(a) for a in args))
        case VarApp(_, args):
            return frozenset().union(*(calls(a) for a in args))
    raise TypeError(t)


def _mkpar(items):
    if not items:
        return NIL
    if len(items) == 1:
        return items[0]
    return Par(tuple(sorted(items, key=sort_key)))


def _chain(names, body):
    if not names:
        return body
    order = {n: i for i, n in enumerate(occurrence_order(body))}
    names = sorted(names, key=lambda n: order.get(n, len(order)))
    for n in reversed(names):
        body = Restrict(n, body)
    return body


def _scope(names, body):
    """Place restrictions of ``names`` over normalized ``body`` at minimal scope."""
    names = list(names)
    while isinstance(body, Restrict):
        names.append(body.name)
        body = body.body
    nameset = set(names)
    if not isinstance(body, Par):
        return _chain([n for n in names if n in free(body)], body)
    # group parallel components connected through the restricted names
    items = list(body.items)
    parent = list(range(len(items)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict = {}
    used = [nameset & free(p) for p in items]
    for i, ns in enumerate(used):
        for n in ns:
            if n in owner:
                parent[find(i)] = find(owner[n])
            else:
                owner[n] = i
    groups: dict[int, list[int]] = {}
    for i in range(len(items)):
        groups.setdefault(find(i), []).append(i)
    result = []
    for members in groups.values():
        gnames = set().union(*(used[i] for i in members))
        if not gnames:
            result.extend(items[i] for i in members)
        elif len(members) == 1:
            inner = _scope([n for n in names if n in gnames], items[members[0]])
            result.append(inner)
        else:
            sub = _mkpar([items[i] for i in members])
            result.append(_chain([n for n in names if n in gnames], sub))
    flat = []
    for r in result:
        flat.extend(r.items if isinstance(r, Par) else (r,))
    return _mkpar(flat)


# -- alpha-equivalence and congruence ----------------------------------------------------


def canonical(t, with_ids: bool = True) -> str:
    """Rendering of ``t`` with bound identifiers numbered by binding order."""
    counter = [0]
    out: list[str] = []

    def ident(n, env):
        if n in env:
            out.append(env[n])
        elif with_ids:
            out.append(f"{n.display}#{n.id}")
        else:
            out.append(n.display)

    def bind(binders, env):
        env = dict(env)
        for b in binders:
            env[b] = f"%{counter[0]}"
            counter[0] += 1
        return env

    def value(v, env):
        if isinstance(v, (Name, ProcVar)):
            ident(v, env)
        else:
            e = bind(v.params, env)
            out.append("{(" + ",".join(e[b] for b in v.params) + ")")
            walk(v.body, e)
            out.append("}")

    def walk(t, env):
        match t:
            case Sum(branches):
                out.append("(")
                for k, (pre, cont) in enumerate(branches):
                    if k:
                        out.append("+")
                    if isinstance(pre, Input):
                        ident(pre.chan, env)
                        e = bind(pre.formals, env)
                        out.append("(" + ",".join(
                            ("@" if isinstance(f, ProcVar) else "") + e[f] for f in pre.formals) + ").")
                        walk(cont, e)
                    else:
                        ident(pre.chan, env)
                        out.append("<")
                        for a in pre.args:
                            value(a, env)
                            out.append(",")
                        out.append(">.")
                        walk(cont, env)
                out.append(")")
            case Par(items):
                out.append("[")
                for p in items:
                    walk(p, env)
                    out.append("|")
                out.append("]")
            case Restrict(n, body):
                e = bind((n,), env)
                out.append(f"new {e[n]}.")
                walk(body, e)
            case Cond(a, b, p, q):
                out.append("if ")
                ident(a, env)
                out.append("=")
                ident(b, env)
                out.append(" then ")
                walk(p, env)
                out.append(" else ")
                walk(q, env)
            case Call(d, args) | VarApp(d, args):
                if isinstance(t, Call):
                    out.append(d)
                else:
                    out.append("@")
                    ident(d, env)
                out.append("<")
                for a in args:
                    value(a, env)
                    out.append(",")
                out.append(">")

    walk(t, {})
    return "".join(out)


def alpha_equal(p, q) -> bool:
    return canonical(p) == canonical(q)


def congruent(p, q, env=None, placeholders=frozenset()) -> bool:
    """Sound, incomplete check of ``p ≡ q`` (no definition unfolding).

    Normal forms are compared up to renaming of bound names and reordering of
    components and branches whose ordering keys tie.
    """
    np_, nq = normalize(p, env, placeholders), normalize(q, env, placeholders)
    if alpha_equal(np_, nq):
        return True
    return next(_Matcher().proc(np_, nq, _MState({}, {}, {})), None) is not None


# -- alpha-equivalence modulo reordering ----------------------------------------------


class _MState:
    __slots__ = ("m", "inv", "pend")

    def __init__(self, m, inv, pend):
        self.m, self.inv, self.pend = m, inv, pend   # pend: restricted p-name -> allowed q-names


class _Matcher:
    def ident(self, x, y, st):
        if type(x) is not type(y):
            return None
        if x in st.m:
            return st if st.m[x] == y else None
        if y in st.inv:
            return None
        if x in st.pend:
            if y not in st.pend[x]:
                return None
            return _MState({**st.m, x: y}, {**st.inv, y: x}, st.pend)
        if x != y or any(y in allowed for allowed in st.pend.values()):
            return None
        return st

    def _bind(self, xs, ys, st):
        if len(xs) != len(ys) or any(type(a) is not type(b) for a, b in zip(xs, ys)):
            return None
        m, inv = dict(st.m), dict(st.inv)
        for x, y in zip(xs, ys):
            m[x], inv[y] = y, x
        return _MState(m, inv, st.pend)

    def _unbind(self, xs, ys, after, before):
        m, inv = dict(after.m), dict(after.inv)
        for x in xs:
            if x in before.m:
                m[x] = before.m[x]
            else:
                m.pop(x, None)
        for y in ys:
            if y in before.inv:
                inv[y] = before.inv[y]
            else:
                inv.pop(y, None)
        return _MState(m, inv, before.pend)

    def values(self, xs, ys, st):
        if len(xs) != len(ys):
            return
        if not xs:
            yield st
            return
        for st1 in self.value(xs[0], ys[0], st):
            yield from self.values(xs[1:], ys[1:], st1)

    def value(self, v, w, st):
        if isinstance(v, (Name, ProcVar)):
            r = self.ident(v, w, st)
            if r is not None:
                yield r
        elif isinstance(v, Abs) and isinstance(w, Abs):
            inner = self._bind(v.params, w.params, st)
            if inner is not None:
                for st1 in self.proc(v.body, w.body, inner):
                    yield self._unbind(v.params, w.params, st1, st)

    def multiset(self, xs, ys, st, match):
        """Pair up ``xs`` with a permutation of ``ys`` (keys must agree)."""
        if len(xs) != len(ys):
            return
        if not xs:
            yield st
            return
        kx = sort_key(_as_term(xs[0]))
        for i, y in enumerate(ys):
            if sort_key(_as_term(y)) != kx:
                continue
            for st1 in match(xs[0], y, st):
                yield from self.multiset(xs[1:], ys[:i] + ys[i + 1:], st1, match)

    def branch(self, bx, by, st):
        (px, cx), (py, cy) = bx, by
        if type(px) is not type(py):
            return
        st0 = self.ident(px.chan, py.chan, st)
        if st0 is None:
            return
        if isinstance(px, Input):
            inner = self._bind(px.formals, py.formals, st0)
            if inner is not None:
                for st1 in self.proc(cx, cy, inner):
                    yield self._unbind(px.formals, py.formals, st1, st0)
        else:
            for st1 in self.values(px.args, py.args, st0):
                yield from self.proc(cx, cy, st1)

    def proc(self, p, q, st):
        match p, q:
            case Sum(bp), Sum(bq):
                yield from self.multiset(list(bp), list(bq), st, self.branch)
            case Par(ip), Par(iq):
                yield from self.multiset(list(ip), list(iq), st, self.proc)
            case Restrict(), Restrict():
                xs, bp = _unchain(p)
                ys, bq = _unchain(q)
                if len(xs) != len(ys):
                    return
                allowed = frozenset(ys)
                inner = _MState(st.m, st.inv, {**st.pend, **{x: allowed for x in xs}})
                for st1 in self.proc(bp, bq, inner):
                    if all(x in st1.m for x in xs):
                        yield self._unbind(xs, ys, st1, st)
            case Cond(a, b, p1, p2), Cond(c, d, q1, q2):
                for st1 in self.values((a, b), (c, d), st):
                    for st2 in self.proc(p1, q1, st1):
                        yield from self.proc(p2, q2, st2)
            case Call(d, args), Call(e, brgs) if d == e:
                yield from self.values(args, brgs, st)
            case VarApp(x, args), VarApp(y, brgs):
                yield from self.values((x,) + args, (y,) + brgs, st)


def _as_term(x):
    return Sum((x,)) if isinstance(x, tuple) else x


def _unchain(t):
    names = []
    while isinstance(t, Restrict):
        names.append(t.name)
        t = t.body
    return names, t


# -- state digests ----------------------------------------------------------------------


def _top(p):
    names, leaves, stack = [], [], [p]
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


def canonical_state(p):
    """``p`` rearranged as ``new names. (leaves)`` in a congruence-invariant order.

    Components whose ordering keys tie are told apart by iteratively refining
    a colouring of the restricted names they share (colour refinement); only
    genuinely symmetric components may remain tied, and their order does not
    affect the rendering.
    """
    names, leaves = _top(p)
    restricted = set(names)
    info = []
    for t in leaves:
        w = _KeyWriter()
        w.term(t)
        info.append(("".join(w.out), w.slots))
    colour = {n: 0 for n in names}

    def sig(i):
        key, slots = info[i]
        return key, tuple(colour[n] if n in restricted else (-1, n.display) for n in slots)

    for _ in range(len(names) + 1):
        sigs = [repr(sig(i)) for i in range(len(leaves))]
        rank = {s: k for k, s in enumerate(sorted(set(sigs)))}
        occ: dict = {n: [] for n in names}
        for i, (_, slots) in enumerate(info):
            for j, n in enumerate(slots):
                if n in restricted:
                    occ[n].append((rank[sigs[i]], j))
        raw = {n: tuple(sorted(v)) for n, v in occ.items()}
        palette = {c: k for k, c in enumerate(sorted(set(raw.values())))}
        new = {n: palette[raw[n]] for n in names}
        if len(set(new.values())) == len(set(colour.values())):
            colour = new
            break
        colour = new
    order = sorted(range(len(leaves)), key=lambda i: repr(sig(i)))
    body = Par(tuple(leaves[i] for i in order)) if len(leaves) > 1 else (leaves[0] if leaves else NIL)
    seen = {}
    for n in occurrence_order(body):
        if n in restricted:
            seen.setdefault(n, None)
    for n in reversed(list(seen)):
        body = Restrict(n, body)
    return body


def digest(p) -> str:
    """Stable hash of an engine-produced normal form (free names by label)."""
    return hashlib.sha256(canonical(canonical_state(p), with_ids=False).encode()).hexdigest()[:16]
