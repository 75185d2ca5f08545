"""Well-formedness of definition environments."""

from __future__ import annotations

from .congruence import calls
from .terms import (
    Abs, ArityMismatch, Call, Cond, HopiError, KindMismatch, Name, Par, ProcVar, Restrict,
    Sum, UnboundDefinition, VarApp, is_global,
)


class UnguardedRecursion(HopiError):
    pass


class FreeSymbolInBody(HopiError):
    pass


def unguarded_calls(t) -> set[str]:
    """Definitions called in ``t`` outside every prefix."""
    match t:
        case Par(items):
            return set().union(*(unguarded_calls(p) for p in items))
        case Restrict(_, body):
            return unguarded_calls(body)
        case Cond(_, _, p, q):
            return unguarded_calls(p) | unguarded_calls(q)
        case Call(d, _):
            return {d}
    return set()


def _check_calls(t, env, where):
    """Arity and kind of every call in ``t`` (including inside values)."""
    match t:
        case Name() | ProcVar():
            return
        case Abs(_, body):
            _check_calls(body, env, where)
        case Sum(branches):
            for pre, cont in branches:
                for a in getattr(pre, "args", ()):
                    _check_calls(a, env, where)
                _check_calls(cont, env, where)
        case Par(items):
            for p in items:
                _check_calls(p, env, where)
        case Restrict(_, body):
            _check_calls(body, env, where)
        case Cond(_, _, p, q):
            _check_calls(p, env, where)
            _check_calls(q, env, where)
        case Call(d, args) | VarApp(d, args):
            if isinstance(t, Call):
                if d not in env:
                    raise UnboundDefinition(f"{d} (in {where})")
                formals = env[d].formals
                if len(formals) != len(args):
                    raise ArityMismatch(f"{d} expects {len(formals)} arguments, got {len(args)} (in {where})")
                for f, a in zip(formals, args):
                    if isinstance(f, Name) != isinstance(a, Name):
                        raise KindMismatch(f"argument {a!r} of {d} does not match formal kind (in {where})")
            for a in args:
                _check_calls(a, env, where)


def check_env(env, constants=None) -> None:
    """Validate guardedness, free-symbol containment and call arities.

    Global names (interned constants) may occur free in bodies when
    ``constants`` is None; otherwise only those listed in ``constants``.
    """
    from .terms import free

    for ident, d in env.items():
        allowed = set(d.formals)
        for n in free(d.body) - allowed:
            if isinstance(n, Name) and is_global(n) and (constants is None or n in constants):
                continue
            raise FreeSymbolInBody(f"{n.display} occurs free in the body of {ident}")
        _check_calls(d.body, env, ident)
    graph = {ident: unguarded_calls(d.body) & env.keys() for ident, d in env.items()}
    state: dict[str, int] = {}

    def visit(v, path):
        state[v] = 1
        for w in sorted(graph[v]):
            if state.get(w) == 1:
                cycle = path[path.index(w):] + [w] if w in path else [v, w]
                raise UnguardedRecursion(" -> ".join(cycle))
            if w not in state:
                visit(w, path + [w])
        state[v] = 2

    for v in sorted(graph):
        if v not in state:
            visit(v, [v])


def check_main(main, env) -> None:
    missing = calls(main) - env.keys()
    if missing:
        raise UnboundDefinition(", ".join(sorted(missing)))
    _check_calls(main, env, "main")
