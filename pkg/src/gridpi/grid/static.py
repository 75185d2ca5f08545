"""Static grid model: base sets, relations and first-order invariants."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace

from .tasks import TaskDef, basics, parse_task, required_descriptors


@dataclass(frozen=True)
class GridConfig:
    users: tuple[str, ...] = ()
    vos: tuple[str, ...] = ()
    ads: tuple[str, ...] = ()
    resources: tuple[str, ...] = ()
    nodes: tuple[str, ...] = ()
    descriptors: tuple[str, ...] = ()
    task_defs: dict = field(default_factory=dict)     # T id -> TaskDef
    user_tasks: dict = field(default_factory=dict)    # S id -> T id
    member: frozenset = frozenset()                   # (u, v)
    task_of: frozenset = frozenset()                  # (u, s)
    belongs_to: frozenset = frozenset()               # (r, d)
    participate: frozenset = frozenset()              # (d, v)
    node_vo: frozenset = frozenset()                  # (n, v)
    resource_kind: frozenset = frozenset()            # (r, k)
    credentials: dict = field(default_factory=dict)   # u -> tuple of labels

    def with_relation(self, rel: str, *pairs) -> "GridConfig":
        return replace(self, **{rel: getattr(self, rel) | frozenset(pairs)})

    # convenience lookups (first match in base-set order; callers check invariants first)
    def vo_of(self, u):
        return next((v for v in self.vos if (u, v) in self.member), None)

    def task_of_user(self, u):
        return next((s for s in sorted(self.user_tasks) if (u, s) in self.task_of), None)

    def task_tree(self, u) -> TaskDef | None:
        s = self.task_of_user(u)
        return None if s is None else self.task_defs.get(self.user_tasks.get(s))

    def ad_of(self, r):
        return next((d for d in self.ads if (r, d) in self.belongs_to), None)

    def kind_of(self, r):
        return next((k for k in self.descriptors if (r, k) in self.resource_kind), None)

    def ads_of_vo(self, v):
        return [d for d in self.ads if (d, v) in self.participate]

    def resources_of(self, d):
        return [r for r in self.resources if (r, d) in self.belongs_to]

    def nodes_of_vo(self, v):
        return [n for n in self.nodes if (n, v) in self.node_vo]

    def vo_of_node(self, n):
        return next((v for v in self.vos if (n, v) in self.node_vo), None)


@dataclass(frozen=True)
class Violation:
    invariant: str
    subject: tuple
    message: str


@dataclass(frozen=True)
class InvariantReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def ids(self) -> set[str]:
        return {v.invariant for v in self.violations}

    def __str__(self):
        if self.ok:
            return "all invariants hold"
        return "\n".join(f"{v.invariant}: {v.message}" for v in self.violations)


class InvariantViolation(Exception):
    def __init__(self, report: InvariantReport):
        super().__init__(str(report))
        self.report = report


def _exactly_one(out, inv, domain, codomain, rel, what):
    for x in domain:
        ys = [y for y in codomain if (x, y) in rel]
        if not ys:
            out.append(Violation(inv, (x,), f"{x} has no {what}"))
        elif len(ys) > 1:
            out.append(Violation(inv, (x, *ys), f"{x} has {len(ys)} {what}s: {', '.join(ys)}"))


def check_structure(cfg: GridConfig) -> list[str]:
    """Type-level problems (dangling endpoints, non-total kind map)."""
    sets = {
        "member": (cfg.users, cfg.vos), "task_of": (cfg.users, tuple(cfg.user_tasks)),
        "belongs_to": (cfg.resources, cfg.ads), "participate": (cfg.ads, cfg.vos),
        "node_vo": (cfg.nodes, cfg.vos), "resource_kind": (cfg.resources, cfg.descriptors),
    }
    problems = []
    for rel, (dom, cod) in sets.items():
        for a, b in sorted(getattr(cfg, rel)):
            if a not in dom or b not in cod:
                problems.append(f"{rel}({a}, {b}) refers to an unknown element")
    for r in cfg.resources:
        ks = [k for k in cfg.descriptors if (r, k) in cfg.resource_kind]
        if len(ks) != 1:
            problems.append(f"resource {r} must have exactly one kind")
    for s, tid in sorted(cfg.user_tasks.items()):
        if tid not in cfg.task_defs:
            problems.append(f"task {s} instantiates unknown definition {tid}")
    for tid, t in sorted(cfg.task_defs.items()):
        for b in basics(t):
            for k in b.kinds:
                if k not in cfg.descriptors:
                    problems.append(f"task {tid} uses unknown descriptor {k}")
    return problems


def check_invariants(cfg: GridConfig) -> InvariantReport:
    out: list[Violation] = []
    tasks = tuple(sorted(cfg.user_tasks))
    # I1 each user is member of exactly one VO
    _exactly_one(out, "I1", cfg.users, cfg.vos, cfg.member, "VO")
    # I2 each user owns exactly one task, and no task has two owners
    _exactly_one(out, "I2", cfg.users, tasks, cfg.task_of, "task")
    for s in tasks:
        owners = [u for u in cfg.users if (u, s) in cfg.task_of]
        if len(owners) > 1:
            out.append(Violation("I2", (s, *owners), f"task {s} is owned by {', '.join(owners)}"))
    # I3 each resource belongs to exactly one AD
    _exactly_one(out, "I3", cfg.resources, cfg.ads, cfg.belongs_to, "AD")
    # I4 every AD participates in at least one VO
    for d in cfg.ads:
        if not any((d, v) in cfg.participate for v in cfg.vos):
            out.append(Violation("I4", (d,), f"AD {d} participates in no VO"))
    # I5 every node serves exactly one VO
    _exactly_one(out, "I5", cfg.nodes, cfg.vos, cfg.node_vo, "VO")
    # I6 every user's VO has an access node
    for u in cfg.users:
        for v in cfg.vos:
            if (u, v) in cfg.member and not any((n, v) in cfg.node_vo for n in cfg.nodes):
                out.append(Violation("I6", (u, v), f"VO {v} of user {u} has no node"))
    # I7 each task's descriptors are offered by one AD of the owner's VO
    for u in cfg.users:
        for s in tasks:
            if (u, s) not in cfg.task_of:
                continue
            t = cfg.task_defs.get(cfg.user_tasks[s])
            if t is None:
                continue
            for b in basics(t):
                if not _satisfiable(cfg, u, Counter(b.kinds)):
                    out.append(Violation("I7", (u, s, b.job),
                                         f"no AD in the VO of {u} offers {', '.join(b.kinds)} for {b.job}"))
    # I8 every VO has a participating AD
    for v in cfg.vos:
        if not any((d, v) in cfg.participate for d in cfg.ads):
            out.append(Violation("I8", (v,), f"VO {v} has no participating AD"))
    return InvariantReport(tuple(out))


def _satisfiable(cfg, u, need: Counter) -> bool:
    """Some AD of some VO of ``u`` holds at least ``need`` resources per kind."""
    for v in cfg.vos:
        if (u, v) not in cfg.member:
            continue
        for d in cfg.ads:
            if (d, v) not in cfg.participate:
                continue
            have = Counter(k for r in cfg.resources if (r, d) in cfg.belongs_to
                           for k in cfg.descriptors if (r, k) in cfg.resource_kind)
            if all(have[k] >= n for k, n in need.items()):
                return True
    return False


def ad_covers(cfg: GridConfig, d: str, need) -> bool:
    have = Counter(cfg.kind_of(r) for r in cfg.resources_of(d))
    return all(have[k] >= n for k, n in Counter(need).items())


def task_requirements(cfg: GridConfig, u) -> Counter:
    t = cfg.task_tree(u)
    return Counter() if t is None else required_descriptors(t)


# -- fixtures -------------------------------------------------------------------


def build_config(users, ads, nodes, descriptors=None) -> GridConfig:
    """Assemble a config from compact records.

    users: {u: (vo, task_text, creds)}; ads: {d: (vos, {r: kind})}; nodes: {n: vo}.
    Each user gets task instance ``S_<u>`` of definition ``T_<u>``.
    """
    vos, kinds = [], list(descriptors or [])

    def add(seq, x):
        if x not in seq:
            seq.append(x)

    for u, (v, _, _) in users.items():
        add(vos, v)
    for d, (dvos, res) in ads.items():
        for v in dvos:
            add(vos, v)
        for k in res.values():
            add(kinds, k)
    for v in nodes.values():
        add(vos, v)
    task_defs, user_tasks = {}, {}
    for u, (_, text, _) in users.items():
        t = parse_task(text)
        for b in basics(t):
            for k in b.kinds:
                add(kinds, k)
        task_defs[f"T_{u}"] = t
        user_tasks[f"S_{u}"] = f"T_{u}"
    return GridConfig(
        users=tuple(users), vos=tuple(vos), ads=tuple(ads),
        resources=tuple(r for _, res in ads.values() for r in res),
        nodes=tuple(nodes), descriptors=tuple(kinds),
        task_defs=task_defs, user_tasks=user_tasks,
        member=frozenset((u, v) for u, (v, _, _) in users.items()),
        task_of=frozenset((u, f"S_{u}") for u in users),
        belongs_to=frozenset((r, d) for d, (_, res) in ads.items() for r in res),
        participate=frozenset((d, v) for d, (dvos, _) in ads.items() for v in dvos),
        node_vo=frozenset(nodes.items()),
        resource_kind=frozenset((r, k) for _, res in ads.values() for r, k in res.items()),
        credentials={u: tuple(c) for u, (_, _, c) in users.items()},
    )


def scenario5() -> GridConfig:
    """Two users, two VOs, three ADs and eight resources."""
    cfg = build_config(
        users={"u1": ("v1", "J1<k1,k2>.end", ("c1a", "c1b")),
               "u2": ("v2", "J2<k1,k2,k3>.end", ("c2a", "c2b"))},
        ads={"d1": (("v1", "v2"), {"r1": "k1", "r2": "k1", "r3": "k2"}),
             "d2": (("v1",), {"r4": "k1", "r5": "k2"}),
             "d3": (("v2",), {"r6": "k1", "r7": "k2", "r8": "k3"})},
        nodes={"n1": "v1", "n2": "v2"},
        descriptors=("k1", "k2", "k3"),
    )
    return replace(cfg, task_defs={"T1": cfg.task_defs["T_u1"], "T2": cfg.task_defs["T_u2"]},
                   user_tasks={"S1": "T1", "S2": "T2"},
                   task_of=frozenset({("u1", "S1"), ("u2", "S2")}))


def micro(resources: int = 1) -> GridConfig:
    """One user needing one k1 resource, one AD with ``resources`` k1 resources."""
    return build_config(
        users={"u1": ("v1", "J1<k1>.end", ("c1",))},
        ads={"d1": (("v1",), {f"r{i}": "k1" for i in range(1, resources + 1)})},
        nodes={"n1": "v1"},
        descriptors=("k1",),
    )
