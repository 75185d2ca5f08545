"""Task trees: basic jobs composed sequentially, in parallel, or by choice.

Concrete syntax::

    task   ::= choice
    choice ::= par ("(+)" par)*
    par    ::= seq ("||" seq)*
    seq    ::= atom ("." seq)?
    atom   ::= JOB "<" kind ("," kind)* ">" | "end" | "(" task ")"
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass


class TaskSyntaxError(ValueError):
    pass


class UnknownDescriptor(ValueError):
    pass


@dataclass(frozen=True)
class Basic:
    job: str
    kinds: tuple[str, ...]

    def __post_init__(self):
        if not self.kinds:
            raise ValueError(f"basic task {self.job} needs at least one resource kind")


@dataclass(frozen=True)
class Seq:
    first: "TaskDef"
    then: "TaskDef"


@dataclass(frozen=True)
class ParT:
    left: "TaskDef"
    right: "TaskDef"


@dataclass(frozen=True)
class Choice:
    left: "TaskDef"
    right: "TaskDef"


@dataclass(frozen=True)
class End:
    pass


END = End()
TaskDef = Basic | Seq | ParT | Choice | End

_TOK = re.compile(r"\s*(?:(\(\+\))|(\|\|)|([A-Za-z_][A-Za-z0-9_]*)|([<>,.()]))")


def _tokens(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOK.match(text, pos)
        if not m:
            raise TaskSyntaxError(f"unexpected {text[pos:pos + 10]!r} at offset {pos}")
        out.append((m.group(m.lastindex), m.start(m.lastindex)))
        pos = m.end()
    out.append(("", len(text)))
    return out


def parse_task(text: str, kinds=None) -> TaskDef:
    """Parse a task expression; kinds, when given, must cover every descriptor."""
    toks = _tokens(text)
    i = 0

    def peek():
        return toks[i][0]

    def take(expected=None):
        nonlocal i
        tok, pos = toks[i]
        if expected is not None and tok != expected:
            raise TaskSyntaxError(f"expected {expected!r} at offset {pos}, found {tok or 'end'!r}")
        i += 1
        return tok

    def choice():
        t = par()
        while peek() == "(+)":
            take()
            t = Choice(t, par())
        return t

    def par():
        t = seq()
        while peek() == "||":
            take()
            t = ParT(t, seq())
        return t

    def seq():
        a = atom()
        if peek() == ".":
            take()
            return Seq(a, seq())
        return a

    def atom():
        tok, pos = toks[i]
        if tok == "(":
            take()
            t = choice()
            take(")")
            return t
        if tok == "end":
            take()
            return END
        if tok and (tok[0].isalpha() or tok[0] == "_"):
            take()
            take("<")
            ks = [take()]
            while peek() == ",":
                take()
                ks.append(take())
            take(">")
            for k in ks:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", k):
                    raise TaskSyntaxError(f"bad descriptor {k!r} in {tok}")
                if kinds is not None and k not in kinds:
                    raise UnknownDescriptor(f"{k} (in {tok})")
            return Basic(tok, tuple(ks))
        raise TaskSyntaxError(f"expected a task at offset {pos}, found {tok or 'end'!r}")

    t = choice()
    if peek() != "":
        raise TaskSyntaxError(f"trailing input at offset {toks[i][1]}")
    return t


def format_task(t: TaskDef) -> str:
    def go(t, level):
        # level: 0 choice, 1 par, 2 seq-left/atom
        match t:
            case End():
                return "end"
            case Basic(j, ks):
                return f"{j}<{','.join(ks)}>"
            case Seq(a, b):
                s = f"{go(a, 2)}.{go(b, 1.5)}"
                return f"({s})" if level > 1.5 else s
            case ParT(a, b):
                s = f"{go(a, 1)} || {go(b, 1.5)}"
                return f"({s})" if level > 1 else s
            case Choice(a, b):
                s = f"{go(a, 0)} (+) {go(b, 1)}"
                return f"({s})" if level > 0 else s
    return go(t, 0)


def basics(t: TaskDef) -> list[Basic]:
    match t:
        case Basic():
            return [t]
        case Seq(a, b) | ParT(a, b) | Choice(a, b):
            return basics(a) + basics(b)
    return []


def _seq(a, b):
    return b if a == END else (a if b == END else Seq(a, b))


def _par(a, b):
    return b if a == END else (a if b == END else ParT(a, b))


def task_step(t: TaskDef) -> frozenset:
    """One round: the basic tasks that may start now and what remains after them."""
    match t:
        case End():
            return frozenset({((), END)})
        case Basic():
            return frozenset({((t,), END)})
        case Seq(a, b):
            out = set()
            for f, c in task_step(a):
                # an empty step finishes ``a`` (it only ever leaves End behind)
                out |= task_step(b) if not f else {(f, _seq(c, b))}
            return frozenset(out)
        case ParT(a, b):
            return frozenset((fa + fb, _par(ca, cb))
                             for fa, ca in task_step(a) for fb, cb in task_step(b))
        case Choice(a, b):
            return task_step(a) | task_step(b)
    raise TypeError(t)


def schedules(t: TaskDef) -> frozenset:
    """All complete round sequences obtained by iterating task_step."""
    out = set()

    def go(t, acc):
        if t == END:
            out.add(acc)
            return
        for f, c in task_step(t):
            go(c, acc + (f,) if f else acc)

    go(t, ())
    return frozenset(out)


def required_descriptors(t: TaskDef) -> Counter:
    match t:
        case End():
            return Counter()
        case Basic(_, ks):
            return Counter(ks)
        case Seq(a, b) | ParT(a, b):
            return required_descriptors(a) + required_descriptors(b)
        case Choice(a, b):
            return required_descriptors(a) | required_descriptors(b)
    raise TypeError(t)


def zetas(t: TaskDef) -> set[int]:
    """Descriptor counts of the basic tasks of ``t``."""
    return {len(b.kinds) for b in basics(t)}
