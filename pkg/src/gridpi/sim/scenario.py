"""Scenario files: a grid configuration plus run options.

Format (UTF-8, ``#`` starts a comment, blank lines ignored)::

    [kinds]
    k1 k2 k3
    [users]
    u1 vo=v1 task="J1<k1,k2>.end" creds=c1a,c1b
    [ads]
    d1 vos=v1,v2 resources=r1:k1,r2:k1,r3:k2
    [nodes]
    n1 vo=v1
    [options]
    scheduler=random seed=1 max-steps=5000 depth=60

Users may add ``instance=S1 def=T1`` to name their task instance and its
definition; otherwise ``S_<user>`` and ``T_<user>`` are used. The
``[kinds]`` and ``[options]`` sections are optional.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from ..grid.static import (
    GridConfig, InvariantViolation, build_config, check_invariants, check_structure,
)
from ..grid.tasks import TaskSyntaxError, format_task

SECTIONS = ("kinds", "users", "ads", "nodes", "options")
SCHEDULERS = ("random", "exhaustive", "interactive")
_OPTION_KEYS = ("scheduler", "seed", "max-steps", "depth", "trace")


class ScenarioError(Exception):
    pass


class FormatError(ScenarioError):
    def __init__(self, msg, line=None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


class IoError(ScenarioError):
    pass


@dataclass(frozen=True)
class Options:
    scheduler: str = "random"
    seed: int = 0
    max_steps: int = 10000
    depth: int | None = None
    trace: str | None = None

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise FormatError(f"scheduler must be one of {', '.join(SCHEDULERS)}")
        if self.seed < 0 or self.max_steps < 0 or (self.depth is not None and self.depth < 0):
            raise FormatError("seed, max-steps and depth must be non-negative")


@dataclass(frozen=True)
class Scenario:
    config: GridConfig
    options: Options = field(default_factory=Options)
    declared_kinds: bool = False
    declared_options: tuple = ()


def _split_kv(tokens, lineno, allowed):
    out = {}
    for tok in tokens:
        key, eq, val = tok.partition("=")
        if not eq or not val:
            raise FormatError(f"expected key=value, found {tok!r}", lineno)
        if key not in allowed:
            raise FormatError(f"unknown field {key!r}", lineno)
        if key in out:
            raise FormatError(f"field {key!r} given twice", lineno)
        out[key] = val
    return out


def _need(kv, key, lineno, what):
    if key not in kv:
        raise FormatError(f"{what} is missing {key}=", lineno)
    return kv[key]


def _list(val):
    return tuple(x for x in val.split(",") if x)


def parse_scenario(text: str, strict: bool = True) -> Scenario:
    section = None
    seen_sections = []
    kinds: list[str] = []
    users, ads, nodes, names = {}, {}, {}, {}
    instances = {}
    opts: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1] not in SECTIONS:
                raise FormatError(f"unknown section {line}", lineno)
            section = line[1:-1]
            if section in seen_sections:
                raise FormatError(f"section [{section}] appears twice", lineno)
            seen_sections.append(section)
            continue
        try:
            toks = shlex.split(line)
        except ValueError as e:
            raise FormatError(str(e), lineno) from None
        if section is None:
            raise FormatError("entry outside of any section", lineno)
        if section == "kinds":
            for k in toks:
                if k in kinds:
                    raise FormatError(f"duplicate kind {k}", lineno)
                kinds.append(k)
            continue
        if section == "options":
            for key, val in _split_kv(toks, lineno, _OPTION_KEYS).items():
                if key in opts:
                    raise FormatError(f"option {key} given twice", lineno)
                opts[key] = val
            continue
        ident, rest = toks[0], toks[1:]
        if "=" in ident:
            raise FormatError(f"entry must start with an identifier, found {ident!r}", lineno)
        if ident in names:
            raise FormatError(f"duplicate id {ident} (first defined as a {names[ident]})", lineno)
        names[ident] = section[:-1]
        if section == "users":
            kv = _split_kv(rest, lineno, ("vo", "task", "creds", "instance", "def"))
            users[ident] = (_need(kv, "vo", lineno, f"user {ident}"),
                            _need(kv, "task", lineno, f"user {ident}"),
                            _list(_need(kv, "creds", lineno, f"user {ident}")))
            if ("instance" in kv) != ("def" in kv):
                raise FormatError("instance= and def= go together", lineno)
            if "instance" in kv:
                instances[ident] = (kv["instance"], kv["def"])
        elif section == "ads":
            kv = _split_kv(rest, lineno, ("vos", "resources"))
            res = {}
            for item in _list(kv.get("resources", "")):
                r, colon, k = item.partition(":")
                if not colon or not r or not k:
                    raise FormatError(f"resource {item!r} must be written r:kind", lineno)
                if r in names or r in res:
                    raise FormatError(f"duplicate id {r}", lineno)
                res[r] = k
            for r in res:
                names[r] = "resource"
            ads[ident] = (_list(_need(kv, "vos", lineno, f"AD {ident}")), res)
        elif section == "nodes":
            kv = _split_kv(rest, lineno, ("vo",))
            nodes[ident] = _need(kv, "vo", lineno, f"node {ident}")
    try:
        cfg = build_config(users, ads, nodes, kinds or None)
    except (TaskSyntaxError, ValueError) as e:
        raise FormatError(f"bad task: {e}") from None
    if instances:
        tdefs = {}
        utasks = {}
        task_of = set()
        for u in users:
            s, t = instances.get(u, (f"S_{u}", f"T_{u}"))
            if s in utasks or (t in tdefs and tdefs[t] != cfg.task_defs[f"T_{u}"]):
                raise FormatError(f"task instance {s} or definition {t} reused")
            tdefs[t] = cfg.task_defs[f"T_{u}"]
            utasks[s] = t
            task_of.add((u, s))
        cfg = replace(cfg, task_defs=tdefs, user_tasks=utasks, task_of=frozenset(task_of))
    problems = check_structure(cfg)
    if problems:
        raise FormatError("; ".join(problems))
    try:
        options = Options(
            scheduler=opts.get("scheduler", "random"),
            seed=int(opts.get("seed", 0)),
            max_steps=int(opts.get("max-steps", 10000)),
            depth=int(opts["depth"]) if "depth" in opts else None,
            trace=opts.get("trace"),
        )
    except ValueError as e:
        raise FormatError(f"bad option value: {e}") from None
    if strict:
        report = check_invariants(cfg)
        if not report.ok:
            raise InvariantViolation(report)
    return Scenario(cfg, options, bool(kinds), tuple(k for k in _OPTION_KEYS if k in opts))


def _strip_comment(raw: str) -> str:
    out, quoted = [], False
    for ch in raw:
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out).strip()


def load_scenario(path, strict: bool = True) -> Scenario:
    """Read and validate a scenario file.

    Raises IoError, FormatError, or (when ``strict``) InvariantViolation.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise IoError(f"cannot read {path}: {e}") from None
    return parse_scenario(text, strict)


def format_scenario(s: Scenario) -> str:
    cfg = s.config
    out = []
    if s.declared_kinds:
        out += ["[kinds]", " ".join(cfg.descriptors)]
    out.append("[users]")
    default_names = all(cfg.task_of_user(u) == f"S_{u}" and cfg.user_tasks[f"S_{u}"] == f"T_{u}"
                        for u in cfg.users)
    for u in cfg.users:
        line = (f'{u} vo={cfg.vo_of(u)} task="{format_task(cfg.task_tree(u))}" '
                f'creds={",".join(cfg.credentials.get(u, ()))}')
        if not default_names:
            sid = cfg.task_of_user(u)
            line += f" instance={sid} def={cfg.user_tasks[sid]}"
        out.append(line)
    out.append("[ads]")
    for d in cfg.ads:
        vos = ",".join(v for v in cfg.vos if (d, v) in cfg.participate)
        res = ",".join(f"{r}:{cfg.kind_of(r)}" for r in cfg.resources_of(d))
        out.append(f"{d} vos={vos}" + (f" resources={res}" if res else ""))
    out.append("[nodes]")
    for n in cfg.nodes:
        out.append(f"{n} vo={cfg.vo_of_node(n)}")
    if s.declared_options:
        o = s.options
        vals = {"scheduler": o.scheduler, "seed": o.seed, "max-steps": o.max_steps,
                "depth": o.depth, "trace": o.trace}
        out += ["[options]", " ".join(f"{k}={vals[k]}" for k in s.declared_options)]
    return "\n".join(out) + "\n"


def save_scenario(s: Scenario, path) -> None:
    try:
        Path(path).write_text(format_scenario(s), encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from None


def shipped(name: str) -> Path:
    """Path of a scenario file bundled with the package (e.g. ``scenario5.grid``)."""
    return Path(str(resources.files("gridpi") / "data" / name))
