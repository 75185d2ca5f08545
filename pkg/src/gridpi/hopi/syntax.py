"""Concrete syntax: tokenizer, recursive-descent parser and pretty printer.

Grammar (see docs/grammar.md for the full EBNF)::

    par     ::= sum ("|" sum)*
    sum     ::= prefixed ("+" prefixed)*
    prefixed::= prefix ["." prefixed] | "0" | "(" par ")"
              | "new" ident ("," ident)* "." prefixed
              | "if" ident "=" ident "then" prefixed "else" prefixed
              | ident "<" [value ("," value)*] ">"        (call / var application)
    prefix  ::= ident "(" [formal ("," formal)*] ")"     (input)
              | ident "<" [value ("," value)*] ">"        (output)
    formal  ::= ident | "@" ident
    value   ::= ident | "{" par "}" | "{" "(" [formal ("," formal)*] ")" par "}"
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .defs import check_env, check_main
from .terms import (
    NIL, Abs, Call, Cond, Definition, HopiError, Input, Name, Output, Par, ProcVar, Restrict,
    Sum, VarApp, free, gname, is_global, new_name, new_var,
)

KEYWORDS = {"new", "if", "then", "else", "def", "main", "const"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<zero>0(?![0-9]))
  | (?P<punct>[(){}<>,.|+=@])
""", re.VERBOSE)


class HopiSyntaxError(HopiError, SyntaxError):
    def __init__(self, msg, line=0, col=0):
        super().__init__(msg)
        self.msg, self.line, self.col = msg, line, col
        self.lineno, self.offset = line, col

    def __str__(self):
        return f"{self.msg} at line {self.line}, column {self.col}"


class UnboundIdentifier(HopiError):
    pass


class DuplicateFormal(HopiError):
    pass


class DuplicateDefinition(HopiError):
    pass


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    toks, pos, line, bol = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise HopiSyntaxError(f"unexpected character {text[pos]!r}", line, pos - bol + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            toks.append(Tok(kind, s, line, pos - bol + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            bol = pos + s.rindex("\n") + 1
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - bol + 1))
    return toks


class _Parser:
    def __init__(self, text, defs=(), scope=None):
        self.toks = tokenize(text)
        self.i = 0
        self.defs = set(defs)
        # scope None: free identifiers become global names
        self.strict = scope is not None
        self.env: dict[str, Name | ProcVar] = dict(scope or {})

    # -- token helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k=1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, kind=None) -> bool:
        t = self.tok
        return t.text == text and (kind is None or t.kind == kind) and t.kind != "eof"

    def expect(self, text) -> Tok:
        t = self.tok
        if t.text != text or t.kind == "eof":
            self.fail(f"expected {text!r}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def ident(self) -> Tok:
        t = self.tok
        if t.kind != "ident":
            self.fail(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def fail(self, msg, tok=None):
        t = tok or self.tok
        raise HopiSyntaxError(msg, t.line, t.col)

    # -- identifiers
    def lookup(self, tok: Tok):
        v = self.env.get(tok.text)
        if v is not None:
            return v
        if self.strict:
            raise UnboundIdentifier(f"{tok.text} at line {tok.line}, column {tok.col}")
        return gname(tok.text)

    def name(self, tok: Tok) -> Name:
        v = self.lookup(tok)
        if not isinstance(v, Name):
            self.fail(f"{tok.text} is a process variable, a name is required here", tok)
        return v

    def bind(self, formals):
        """Create fresh binders; returns (binders, saved scope)."""
        seen, out = set(), []
        for var, t in formals:
            if t.text in seen:
                raise DuplicateFormal(f"{t.text} at line {t.line}, column {t.col}")
            seen.add(t.text)
            out.append(new_var(t.text) if var else new_name(t.text))
        saved = self.env
        self.env = dict(saved)
        for b in out:
            self.env[b.display] = b
        return tuple(out), saved

    def formals(self):
        self.expect("(")
        fs = []
        if not self.at(")"):
            while True:
                var = self.at("@", "punct")
                if var:
                    self.i += 1
                fs.append((var, self.ident()))
                if not self.at(","):
                    break
                self.i += 1
        self.expect(")")
        return fs

    # -- processes
    def par(self):
        items = [self.sum()]
        while self.at("|", "punct"):
            self.i += 1
            items.append(self.sum())
        return items[0] if len(items) == 1 else Par(tuple(items))

    def sum(self):
        start = self.tok
        first = self.prefixed()
        if not self.at("+", "punct"):
            return first
        terms = [(start, first)]
        while self.at("+", "punct"):
            self.i += 1
            terms.append((self.tok, self.prefixed()))
        branches = []
        for t, p in terms:
            if not isinstance(p, Sum) or len(p.branches) != 1:
                self.fail("summands of '+' must be prefixed processes", t)
            branches.extend(p.branches)
        return Sum(tuple(branches))

    def cont(self):
        if self.at(".", "punct"):
            self.i += 1
            return self.prefixed()
        return NIL

    def prefixed(self):
        t = self.tok
        if t.kind == "zero":
            self.i += 1
            return NIL
        if t.text == "(" and t.kind == "punct":
            self.i += 1
            p = self.par()
            self.expect(")")
            return p
        if t.kind == "kw" and t.text == "new":
            self.i += 1
            toks = [self.ident()]
            while self.at(","):
                self.i += 1
                toks.append(self.ident())
            self.expect(".")
            names, saved = self.bind([(False, x) for x in toks])
            body = self.prefixed()
            self.env = saved
            for n in reversed(names):
                body = Restrict(n, body)
            return body
        if t.kind == "kw" and t.text == "if":
            self.i += 1
            a = self.name(self.ident())
            self.expect("=")
            b = self.name(self.ident())
            self.expect("then")
            p = self.prefixed()
            self.expect("else")
            q = self.prefixed()
            return Cond(a, b, p, q)
        if t.kind != "ident":
            self.fail(f"expected a process, found {t.text or 'end of input'!r}")
        self.i += 1
        nxt = self.tok
        if nxt.text == "(":
            chan = self.name(t)
            binders, saved = self.bind(self.formals())
            body = self.cont()
            self.env = saved
            return Sum(((Input(chan, binders), body),))
        if nxt.text == "<":
            args = self.values()
            bound = self.env.get(t.text)
            if isinstance(bound, ProcVar):
                self.no_cont()
                return VarApp(bound, args)
            if bound is None and (t.text in self.defs or t.text[0].isupper()):
                self.no_cont()
                return Call(t.text, args)
            chan = self.name(t)
            return Sum(((Output(chan, args), self.cont()),))
        self.fail(f"expected '(' or '<' after {t.text!r}", nxt)

    def no_cont(self):
        if self.at(".", "punct"):
            self.fail("a call cannot be used as a prefix")

    def values(self):
        self.expect("<")
        vs = []
        if not self.at(">"):
            while True:
                vs.append(self.value())
                if not self.at(","):
                    break
                self.i += 1
        self.expect(">")
        return tuple(vs)

    def value(self):
        t = self.tok
        if t.kind == "ident":
            self.i += 1
            return self.lookup(t)
        if t.text == "{":
            self.i += 1
            params = ()
            if self.at("(") and self._abs_params():
                binders, saved = self.bind(self.formals())
                body = self.par()
                self.env = saved
                params = binders
            else:
                body = self.par()
            self.expect("}")
            return Abs(params, body)
        self.fail(f"expected a value, found {t.text or 'end of input'!r}")

    def _abs_params(self) -> bool:
        """Is the '(' at point a parameter list (rather than a parenthesized process)?"""
        j = self.i + 1
        toks = self.toks
        if toks[j].text != ")":
            while True:
                if toks[j].text == "@":
                    j += 1
                if toks[j].kind != "ident":
                    return False
                j += 1
                if toks[j].text != ",":
                    break
                j += 1
        if toks[j].text != ")":
            return False
        return toks[j + 1].text not in ("}", "|", "+", ".") and toks[j + 1].kind != "eof"


def _guard(fn):
    try:
        return fn()
    except RecursionError:
        raise HopiSyntaxError("nesting too deep") from None


def parse_process(text: str, scope=None, defs=()):
    """Parse one process.

    ``scope`` maps identifiers to Names/ProcVars; when given, any other free
    identifier raises UnboundIdentifier. Without it free identifiers become
    interned global names.
    """
    def go():
        p = _Parser(text, defs, scope)
        t = p.par()
        if p.tok.kind != "eof":
            p.fail(f"unexpected {p.tok.text!r}")
        return t
    return _guard(go)


_DEF_HEAD = re.compile(r"^\s*def\s+([A-Za-z_][A-Za-z0-9_']*)", re.MULTILINE)


@dataclass
class Program:
    env: dict
    main: object
    constants: tuple = ()


def parse_program(text: str, constants=None, check: bool = True):
    """Parse ``def``/``const``/``main`` blocks; returns (env, main).

    Free identifiers in definition bodies must be formals or declared with
    ``const`` (or passed in ``constants``).
    """
    prog = _guard(lambda: _parse_program(text))
    if check:
        check_env(prog.env, set(constants or ()) | set(prog.constants))
        if prog.main is not None:
            check_main(prog.main, prog.env)
    return prog.env, prog.main


def _parse_program(text):
    defs = set(_DEF_HEAD.findall(text))
    p = _Parser(text, defs, None)
    env, main, consts = {}, None, []
    while p.tok.kind != "eof":
        t = p.tok
        if t.kind == "kw" and t.text == "const":
            p.i += 1
            consts.append(gname(p.ident().text))
            while p.at(","):
                p.i += 1
                consts.append(gname(p.ident().text))
        elif t.kind == "kw" and t.text == "def":
            p.i += 1
            nt = p.ident()
            if nt.text in env:
                raise DuplicateDefinition(f"{nt.text} at line {nt.line}, column {nt.col}")
            formals, saved = p.bind(p.formals())
            p.expect("=")
            body = p.par()
            p.env = saved
            env[nt.text] = Definition(formals, body)
        elif t.kind == "kw" and t.text == "main":
            if main is not None:
                p.fail("duplicate main")
            p.i += 1
            p.expect("=")
            main = p.par()
        else:
            p.fail(f"expected 'def', 'const' or 'main', found {t.text!r}")
    return Program(env, main, tuple(consts))


# -- pretty printing --------------------------------------------------------------


_PAR, _SUM, _PRE = 0, 1, 2


class _Printer:
    def __init__(self, term_free):
        self.labels: dict = {}
        self.used: set[str] = set()
        for n in sorted(term_free, key=lambda n: (not _is_global(n), n.id)):
            self.labels[n] = self._pick(n.display)

    def _pick(self, base):
        if base in KEYWORDS or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", base):
            base = re.sub(r"[^A-Za-z0-9_']", "_", base) or "n"
            if not base[0].isalpha() and base[0] != "_":
                base = "n" + base
            if base in KEYWORDS:
                base += "_"
        label, k = base, 0
        while label in self.used:
            k += 1
            label = f"{base}_{k}"
        self.used.add(label)
        return label

    def bind(self, binders):
        return [self._pick(b.display) for b in binders], binders

    def enter(self, binders):
        saved = {b: self.labels.get(b) for b in binders}
        out = []
        for b in binders:
            lab = self._pick(b.display)
            self.labels[b] = lab
            out.append(lab)
        return out, saved

    def leave(self, saved, labels):
        for b, old in saved.items():
            if old is None:
                self.labels.pop(b, None)
            else:
                self.labels[b] = old
        self.used.difference_update(labels)

    def ident(self, n):
        return self.labels.get(n) or n.display

    def formal_list(self, binders, labels):
        return ", ".join(("@" if isinstance(b, ProcVar) else "") + lab
                         for b, lab in zip(binders, labels))

    def value(self, v):
        if isinstance(v, (Name, ProcVar)):
            return self.ident(v)
        labels, saved = self.enter(v.params)
        body = self.proc(v.body, _PAR, False)
        self.leave(saved, labels)
        if v.params:
            return "{(" + self.formal_list(v.params, labels) + ") " + body + "}"
        return "{" + body + "}"

    def args(self, args):
        return "<" + ", ".join(self.value(a) for a in args) + ">"

    def branch(self, pre, cont):
        if isinstance(pre, Input):
            labels, saved = self.enter(pre.formals)
            head = f"{self.ident(pre.chan)}({self.formal_list(pre.formals, labels)})"
            body = None if cont == NIL else self.proc(cont, _PRE, False)
            self.leave(saved, labels)
        else:
            head = self.ident(pre.chan) + self.args(pre.args)
            body = None if cont == NIL else self.proc(cont, _PRE, False)
        return head if body is None else f"{head}.{body}"

    def proc(self, t, ctx, multiline):
        match t:
            case Sum(()):
                return "0"
            case Sum(branches):
                s = " + ".join(self.branch(pre, c) for pre, c in branches)
                return f"({s})" if len(branches) > 1 and ctx == _PRE else s
            case Par(items):
                sep = "\n| " if multiline else " | "
                s = sep.join(self.proc(p, _SUM, False) for p in items)
                return s if ctx == _PAR else f"({s})"
            case Restrict():
                names = []
                while isinstance(t, Restrict):
                    names.append(t.name)
                    t = t.body
                labels, saved = self.enter(names)
                s = f"new {', '.join(labels)}. {self.proc(t, _PRE, False)}"
                self.leave(saved, labels)
                return s if ctx == _PRE else s
            case Cond(a, b, p, q):
                return (f"if {self.ident(a)}={self.ident(b)} then {self.proc(p, _PRE, False)}"
                        f" else {self.proc(q, _PRE, False)}")
            case Call(d, args):
                return d + self.args(args)
            case VarApp(x, args):
                return self.ident(x) + self.args(args)
        raise TypeError(f"not a process: {t!r}")


def _is_global(n):
    return isinstance(n, Name) and is_global(n)


def pretty(t, multiline: bool = False) -> str:
    """Deterministic concrete rendering; re-parses to an alpha-equivalent term."""
    return _Printer(free(t)).proc(t, _PAR, multiline)


def pretty_value(v) -> str:
    return _Printer(free(v)).value(v)


def pretty_program(env, main=None, constants=(), markers=None) -> str:
    """Render a definition environment in the ``.hopi`` format."""
    lines = []
    if constants:
        lines.append("const " + ", ".join(sorted(c.display for c in constants)))
        lines.append("")
    for ident, d in env.items():
        if markers and ident in markers:
            lines.append(f"# {markers[ident]}")
        pr = _Printer(free(d.body) - set(d.formals))
        labels, _ = pr.enter(d.formals)
        body = pr.proc(d.body, _PAR, True).replace("\n", "\n   ")
        lines.append(f"def {ident}({pr.formal_list(d.formals, labels)}) =\n    {body}")
        lines.append("")
    if main is not None:
        lines.append("main = " + pretty(main, multiline=True))
    return "\n".join(lines).rstrip() + "\n"
