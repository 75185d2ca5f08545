"""Term algebra for the higher-order pi-calculus.

Names and process variables are identified by a globally unique integer id;
the ``display`` label only matters for printing. Process values sent over
channels are abstractions ``Abs(params, body)``; a plain process is an
abstraction with no parameters.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Union

_ids = itertools.count(1)


class HopiError(Exception):
    pass


class ArityMismatch(HopiError):
    pass


class KindMismatch(HopiError):
    pass


class UnboundDefinition(HopiError):
    pass


@dataclass(frozen=True)
class Name:
    id: int
    display: str = field(compare=False)

    def __repr__(self):
        return f"Name({self.display}#{self.id})"


@dataclass(frozen=True)
class ProcVar:
    id: int
    display: str = field(compare=False)

    def __repr__(self):
        return f"ProcVar({self.display}#{self.id})"


def new_name(display: str) -> Name:
    return Name(next(_ids), display)


def new_var(display: str) -> ProcVar:
    return ProcVar(next(_ids), display)


_globals: dict[str, Name] = {}
_globals_lock = threading.Lock()


def gname(label: str) -> Name:
    """Interned global name: the same label always yields the same Name."""
    with _globals_lock:
        n = _globals.get(label)
        if n is None:
            n = _globals[label] = new_name(label)
        return n


def is_global(n: Name) -> bool:
    return _globals.get(n.display) is n


# -- processes -------------------------------------------------------------


@dataclass(frozen=True)
class Abs:
    """A process value, optionally parameterised: ``{(x, @Y) P}``."""

    params: tuple = ()
    body: "Process" = None


@dataclass(frozen=True)
class Input:
    chan: Name
    formals: tuple = ()


@dataclass(frozen=True)
class Output:
    chan: Name
    args: tuple = ()


@dataclass(frozen=True)
class Sum:
    branches: tuple = ()

    def __repr__(self):
        return "NIL" if not self.branches else f"Sum({self.branches!r})"


@dataclass(frozen=True)
class Par:
    items: tuple


@dataclass(frozen=True)
class Restrict:
    name: Name
    body: "Process"


@dataclass(frozen=True)
class Cond:
    lhs: Name
    rhs: Name
    then: "Process"
    else_: "Process"


@dataclass(frozen=True)
class Call:
    defn: str
    args: tuple = ()


@dataclass(frozen=True)
class VarApp:
    var: ProcVar
    args: tuple = ()


Process = Union[Sum, Par, Restrict, Cond, Call, VarApp]
Prefix = Union[Input, Output]
Formal = Union[Name, ProcVar]
Value = Union[Name, ProcVar, Abs]

NIL = Sum(())


@dataclass(frozen=True)
class Definition:
    formals: tuple
    body: Process


def par(*procs: Process) -> Process:
    items = tuple(p for p in procs if p != NIL)
    if not items:
        return NIL
    if len(items) == 1:
        return items[0]
    return Par(items)


def restrict(names, body: Process) -> Process:
    for n in reversed(list(names)):
        body = Restrict(n, body)
    return body


def inp(chan, formals, cont=NIL) -> Sum:
    return Sum(((Input(chan, tuple(formals)), cont),))


def out(chan, args=(), cont=NIL) -> Sum:
    return Sum(((Output(chan, tuple(args)), cont),))


def choice(*sums: Sum) -> Sum:
    return Sum(tuple(b for s in sums for b in s.branches))


# -- caching on immutable nodes ---------------------------------------------


def _cache(node, key, compute):
    d = node.__dict__
    try:
        return d[key]
    except KeyError:
        v = d[key] = compute()
        return v


# -- free names / variables --------------------------------------------------


def free(term) -> frozenset:
    """Free names and process variables of a process or value."""
    if isinstance(term, (Name, ProcVar)):
        return frozenset((term,))
    return _cache(term, "_free", lambda: _free(term))


def _free_seq(values) -> frozenset:
    acc = frozenset()
    for v in values:
        acc |= free(v)
    return acc


def _free(t) -> frozenset:
    match t:
        case Abs(params, body):
            return free(body) - frozenset(params)
        case Sum(branches):
            acc = frozenset()
            for pre, cont in branches:
                if isinstance(pre, Input):
                    acc |= (free(cont) - frozenset(pre.formals)) | {pre.chan}
                else:
                    acc |= free(cont) | _free_seq(pre.args) | {pre.chan}
            return acc
        case Par(items):
            return _free_seq(items)
        case Restrict(n, body):
            return free(body) - {n}
        case Cond(a, b, p, q):
            return free(p) | free(q) | {a, b}
        case Call(_, args):
            return _free_seq(args)
        case VarApp(x, args):
            return _free_seq(args) | {x}
    raise TypeError(f"not a term: {t!r}")


def free_names(term) -> set[Name]:
    return {n for n in free(term) if isinstance(n, Name)}


def free_vars(term) -> set[ProcVar]:
    return {x for x in free(term) if isinstance(x, ProcVar)}


# -- fresh identifiers ----------------------------------------------------------


class FreshSupply:
    """Per-engine fresh identifier source; labels are ``base'N``."""

    def __init__(self):
        self._counts: dict[str, int] = {}

    def _label(self, display: str) -> str:
        base = display.split("'", 1)[0] or "n"
        k = self._counts.get(base, 0) + 1
        self._counts[base] = k
        return f"{base}'{k}"

    def like(self, ident: Formal) -> Formal:
        if isinstance(ident, ProcVar):
            return new_var(self._label(ident.display))
        return new_name(self._label(ident.display))


_default_supply = FreshSupply()


# -- substitution -------------------------------------------------------------


def check_binding(formals, args) -> None:
    if len(formals) != len(args):
        raise ArityMismatch(f"expected {len(formals)} arguments, got {len(args)}")
    for f, a in zip(formals, args):
        if isinstance(f, Name) != isinstance(a, Name):
            raise KindMismatch(f"cannot bind {a!r} to formal {f!r}")


def compatible(formals, args) -> bool:
    if len(formals) != len(args):
        return False
    return all(isinstance(f, Name) == isinstance(a, Name) for f, a in zip(formals, args))


def substitute(body: Process, formals, args, fresh: FreshSupply | None = None,
               rename_all: bool = False) -> Process:
    """Capture-avoiding ``body{args/formals}``.

    With ``rename_all`` every binder in the result is replaced by a fresh
    identifier, which keeps binders unique when a definition is unfolded.
    """
    formals, args = tuple(formals), tuple(args)
    check_binding(formals, args)
    return _Subst(dict(zip(formals, args)), fresh or _default_supply, rename_all).proc(body)


class _Subst:
    def __init__(self, mapping, fresh, rename_all):
        self.m = mapping
        self.fresh = fresh
        self.rename_all = rename_all
        self.range_free = _free_seq(mapping.values())

    def _enter(self, binders):
        """Return (new binders, child substitution) for going under ``binders``."""
        m = self.m
        new, renames = [], {}
        for b in binders:
            if self.rename_all or b in self.range_free:
                nb = self.fresh.like(b)
                renames[b] = nb
                new.append(nb)
            else:
                new.append(b)
        if not renames and not any(b in m for b in binders):
            return tuple(new), self
        child = dict(m)
        for b in binders:
            child.pop(b, None)
        child.update(renames)
        sub = _Subst.__new__(_Subst)
        sub.m, sub.fresh, sub.rename_all = child, self.fresh, self.rename_all
        sub.range_free = self.range_free | frozenset(renames.values())
        return tuple(new), sub

    def _skip(self, t) -> bool:
        return not self.rename_all and not (free(t) & self.m.keys())

    def name(self, n: Name) -> Name:
        v = self.m.get(n, n)
        if not isinstance(v, Name):
            raise KindMismatch(f"name {n!r} substituted by a process value")
        return v

    def value(self, v):
        if isinstance(v, Name):
            return self.name(v)
        if isinstance(v, ProcVar):
            r = self.m.get(v, v)
            if isinstance(r, Name):
                raise KindMismatch(f"process variable {v!r} substituted by a name")
            return r
        if self._skip(v):
            return v
        params, sub = self._enter(v.params)
        return Abs(params, sub.proc(v.body))

    def proc(self, t: Process) -> Process:
        if self._skip(t):
            return t
        match t:
            case Sum(branches):
                out_b = []
                for pre, cont in branches:
                    if isinstance(pre, Input):
                        formals, sub = self._enter(pre.formals)
                        out_b.append((Input(self.name(pre.chan), formals), sub.proc(cont)))
                    else:
                        args = tuple(self.value(a) for a in pre.args)
                        out_b.append((Output(self.name(pre.chan), args), self.proc(cont)))
                return Sum(tuple(out_b))
            case Par(items):
                return Par(tuple(self.proc(p) for p in items))
            case Restrict(n, body):
                (nn,), sub = self._enter((n,))
                return Restrict(nn, sub.proc(body))
            case Cond(a, b, p, q):
                return Cond(self.name(a), self.name(b), self.proc(p), self.proc(q))
            case Call(d, args):
                return Call(d, tuple(self.value(a) for a in args))
            case VarApp(x, args):
                args = tuple(self.value(a) for a in args)
                target = self.m.get(x, x)
                if isinstance(target, Name):
                    raise KindMismatch(f"process variable {x!r} substituted by a name")
                if isinstance(target, ProcVar):
                    return VarApp(target, args)
                return substitute(target.body, target.params, args, self.fresh, rename_all=True)
        raise TypeError(f"not a process: {t!r}")


def instantiate(defn: Definition, args, fresh: FreshSupply | None = None) -> Process:
    """Body of ``defn`` applied to ``args`` with all binders freshened."""
    return substitute(defn.body, defn.formals, args, fresh, rename_all=True)


def apply_value(value, args, fresh: FreshSupply | None = None) -> Process:
    if not isinstance(value, Abs):
        raise KindMismatch(f"cannot apply {value!r}")
    return substitute(value.body, value.params, args, fresh, rename_all=True)


def size(t) -> int:
    match t:
        case Name() | ProcVar():
            return 1
        case Abs(params, body):
            return 1 + size(body)
        case Sum(branches):
            return 1 + sum(1 + len(getattr(pre, "formals", ())) +
                           sum(size(a) for a in getattr(pre, "args", ())) + size(c)
                           for pre, c in branches)
        case Par(items):
            return 1 + sum(size(p) for p in items)
        case Restrict(_, body):
            return 1 + size(body)
        case Cond(_, _, p, q):
            return 3 + size(p) + size(q)
        case Call(_, args) | VarApp(_, args):
            return 1 + sum(size(a) for a in args)
    raise TypeError(t)
