"""Compile a GridConfig into a process network.

The encoder emits program text in the ``.hopi`` format and parses it, so the
prelude written to disk and the terms used in memory are the same artifact.
Constants are mangled by category (``kind_k1``, ``user_u1``, ``ad_d1`` ...)
so they never clash with formal parameters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..hopi.syntax import parse_program
from ..hopi.terms import Par, Restrict, gname
from .static import GridConfig, InvariantViolation, check_invariants, check_structure
from .tasks import END, Basic, Choice, End, ParT, Seq, TaskDef, basics, zetas

# protocol constants
STATES = ("submitted", "queued", "running", "finished")
CONSTANTS = ("ok", "denied", "null", "empty", "state", "result", "free", "busy",
             "delivered", "lrm_obs", "queue_obs", "rp_obs") + STATES

VERBATIM = "transcribed from the published definition"
RECONSTRUCTED = "reconstructed"


def kind_c(k): return f"kind_{k}"
def user_c(u): return f"user_{u}"
def ad_c(d): return f"ad_{d}"
def res_c(r): return f"res_{r}"
def job_c(j): return f"job_{j}"
def cred_c(c): return f"cred_{c}"


def unmangle(label: str) -> str:
    return label.split("_", 1)[1] if "_" in label else label


def _j(*parts) -> str:
    return ", ".join(p for part in parts for p in ([part] if isinstance(part, str) else part))


def _seq(prefix, n, start=1):
    return [f"{prefix}{i}" for i in range(start, start + n)]


@dataclass
class EncodingParams:
    omega: int
    mu: int
    delta: int
    eta: int
    registry: dict = field(default_factory=dict)   # "y:n1" / "d:d1" -> Name
    constants: frozenset = frozenset()
    user_node: dict = field(default_factory=dict)  # u -> node
    user_tag: dict = field(default_factory=dict)   # u -> tag Name
    zetas: tuple = ()
    cred_arities: tuple = ()
    users: tuple = ()
    ad_resources: dict = field(default_factory=dict)  # d -> resources in LRM order


@dataclass
class Encoding:
    env: dict
    main: object
    params: EncodingParams
    text: str
    markers: dict


class _Gen:
    def __init__(self, cfg: GridConfig):
        self.cfg = cfg
        zs = set()
        for u in cfg.users:
            t = cfg.task_tree(u)
            if t is not None:
                zs |= zetas(t)
        self.Z = sorted(zs) or [1]
        self.C = sorted({len(cfg.credentials.get(u, ())) for u in cfg.users}) or [1]
        self.defs: list[tuple[str, str, str, str]] = []  # (name, formals, body, marker)
        self.ids = itertools.count(1)

    def define(self, name, formals, body, marker=RECONSTRUCTED):
        self.defs.append((name, formals, body, marker))

    def user_name(self, n):
        return "User" if len(self.C) == 1 else f"User{n}"

    def monitor_name(self, n):
        return "Monitor" if len(self.C) == 1 else f"Monitor{n}"

    # -- users
    def users(self):
        for n in self.C:
            c = _seq("c", n)
            self.define(self.user_name(n), _j(c, "@S", "y", "@P"),
                        f"new u. y<{_j(c, 'u')}>.u(ch1, w, m).if m=ok "
                        f"then ch1<>.ch1(a).ch1<S>.ch1(g).{self.monitor_name(n)}<{_j(c, 'g', 'a', 'y', 'P')}> "
                        f"else 0", VERBATIM)
            again = f"{self.monitor_name(n)}<{_j(c, 'g', 'a', 'y', 'P')}>"
            self.define(self.monitor_name(n), _j(c, "g", "a", "y", "@P"),
                        f"g(st, z, tg).if st=finished then (if z=null then {again} else P<z>) else {again}")

    # -- middleware
    def access_points(self):
        cfg = self.cfg
        for v in cfg.vos:
            ads = cfg.ads_of_vo(v)
            ds = _seq("d", len(ads))
            branches = []
            for n in self.C:
                c = _seq("c", n)
                branches.append(f"y({_j(c, 'u')}).(AP_{v}<{_j('y', ds)}> | {self.auth_chain(v, n, 1)})")
            self.define(f"AP_{v}", _j("y", ds), " + ".join(branches))
            self.define(f"UsrHdl_{v}", _j("ch1", ds, "tag"),
                        "ch1().new a. ch1<a>.ch1(@X).new gw, gr, ce, t, e. (ch1<gr> "
                        "| Log<gw, gr, submitted, null, tag> | X<t, e> "
                        "| e(r).gw<state, finished>.gw<result, r> "
                        f"| UsrPrx<ce, a, t, gw> | PrxHdl_{v}<{_j('ce', ds)}>)")
            self.prxhdl(v, ads)

    def auth_chain(self, v, n, i) -> str:
        """Call (or inline refusal) checking members of ``v`` from the i-th on."""
        cfg = self.cfg
        members = [u for u in cfg.users if (u, v) in cfg.member
                   and len(cfg.credentials.get(u, ())) == n]
        c = _seq("c", n)
        ds = _seq("d", len(cfg.ads_of_vo(v)))
        if i > len(members):
            return "u<null, null, denied>"
        name = f"Auth_{v}_{n}_{i}"
        if not any(d[0] == name for d in self.defs):
            u = members[i - 1]
            nxt = self.auth_chain(v, n, i + 1)
            accept = f"new ch1. (u<ch1, null, ok> | UsrHdl_{v}<{_j('ch1', ds, user_c(u))}>)"
            body = accept
            for ci, cred in reversed(list(zip(c, cfg.credentials[u]))):
                body = f"if {ci}={cred_c(cred)} then ({body}) else {nxt}"
            self.define(name, _j(c, "u", ds), body)
        return f"{name}<{_j(c, 'u', ds)}>"

    def prxhdl(self, v, ads):
        ds = _seq("d", len(ads))
        sigma = len(ads)
        branches = []
        for z in self.Z:
            k = _seq("k", z)
            searches = " | ".join(f"Search_{ad}_{z}<{_j(k, 'c', 'f', di)}>" for ad, di in zip(ads, ds))
            xs = _seq("x", sigma)
            choice = " + ".join(f"{x}<{_j(k, 'm', 'a', 'g')}>" for x in xs)
            branches.append(
                f"ce({_j(k, 'm', 'a', 'g')}).(PrxHdl_{v}<{_j('ce', ds)}> | new c, b, f. ("
                f"{searches} | Acc{sigma}_0_0<{_j('c', 'f', 'b', ds)}> | b({_j(xs)}).({choice})))")
        self.define(f"PrxHdl_{v}", _j("ce", ds), " + ".join(branches), VERBATIM)

    def search_defs(self):
        cfg = self.cfg
        for ad in cfg.ads:
            have = {}
            for r in cfg.resources_of(ad):
                have[cfg.kind_of(r)] = have.get(cfg.kind_of(r), 0) + 1
            for z in self.Z:
                self.define(f"Search_{ad}_{z}", _j(_seq("k", z), "c", "f", "d"),
                            self._search_tree(1, z, dict(have)))

    def _search_tree(self, j, z, have) -> str:
        if j > z:
            return "c<d>"
        out = "f<>"
        for kind in sorted(have, reverse=True):
            if have[kind] <= 0:
                continue
            have[kind] -= 1
            sub = self._search_tree(j + 1, z, have)
            have[kind] += 1
            out = f"if k{j}={kind_c(kind)} then ({sub}) else {out}"
        return out

    def acc_defs(self):
        for sigma in sorted({len(self.cfg.ads_of_vo(v)) for v in self.cfg.vos}):
            ds = _seq("d", sigma)
            for i in range(sigma + 1):
                for j in range(i + 1):
                    xs = _seq("x", j)
                    formals = _j("c", "f", "b", ds, xs)
                    if i == sigma:
                        sent = xs + [xs[0]] * (sigma - j) if j else ds
                        body = f"b<{_j(sent)}>"
                    else:
                        nx = f"x{j + 1}"
                        body = (f"c({nx}).Acc{sigma}_{i + 1}_{j + 1}<{_j('c', 'f', 'b', ds, xs, nx)}> "
                                f"+ f().Acc{sigma}_{i + 1}_{j}<{formals}>")
                    self.define(f"Acc{sigma}_{i}_{j}", formals, body)

    def user_proxy(self):
        branches = []
        for z in self.Z:
            k = _seq("k", z)
            h = [f"h{i}" for i in range(1, z + 1)]
            cr = _seq("cr", z)
            echo = _j(*[[hi, ci] for hi, ci in zip(h, cr)], "mm", "o")
            backs = _seq("back", z)
            dispatch = " | ".join(f"j{i}<J, back{i}>" for i in range(1, z + 1))
            collect = ".".join(f"back{i}(v{i})" for i in range(1, z + 1))
            run = f"o<{{new {_j(backs)}. ({dispatch} | {collect}.mm<v1>)}}>"
            for i in range(z, 0, -1):
                run = f"new rep{i}. cr{i}<g, rep{i}>.rep{i}(s{i}, j{i}).if s{i}=ok then ({run}) else 0"
            branches.append(
                f"t({_j(k, '@J', 'm')}).(UsrPrx<ce, a, t, g> | new p. ce<{_j(k, 'm', 'p', 'g')}>."
                f"p({echo}).g<state, running>.{run})")
        self.define("UsrPrx", "ce, a, t, g", " + ".join(branches))

    def log(self):
        self.define("Log", "gw, gr, st, z, tag",
                    "gr<st, z, tag>.Log<gw, gr, st, z, tag> + gw(f, v).if f=state "
                    "then LogAdvance<gw, gr, st, v, z, tag> else Log<gw, gr, st, v, tag>")
        keep = "Log<gw, gr, st, z, tag>"
        self.define("LogAdvance", "gw, gr, st, v, z, tag",
                    f"if v=queued then (if st=submitted then Log<gw, gr, queued, z, tag> else {keep}) "
                    f"else if v=running then (if st=finished then {keep} else Log<gw, gr, running, z, tag>) "
                    f"else if v=finished then Log<gw, gr, finished, z, tag> else {keep}")

    # -- administrative domains
    def ad_common(self):
        z_br = []
        for z in self.Z:
            k = _seq("k", z)
            z_br.append(f"d({_j(k, 'm', 'p', 'g')}).(Receptor<tl, d> | g<state, queued>.tl<{_j(k, 'm', 'p', 'g')}>)")
        self.define("Receptor", "tl, d", " + ".join(z_br))
        nil = ["b(n, c).n<>.Nil<b, tl, adid>"]
        for z in self.Z:
            k = _seq("k", z)
            nil.append(f"tl({_j(k, 'm', 'p', 'g')}).new b2. (Cell{z}<{_j('b', 'b2', k, 'm', 'p', 'g', 'adid')}> "
                       f"| Nil<b2, tl, adid>)")
            self.define(f"Cell{z}", _j("b", "b2", k, "m", "p", "g", "adid"),
                        f"b(n, c).c<{_j(k, 'm', 'p', 'g', 'b2')}> + queue_obs<adid>")
        self.define("Nil", "b, tl, adid", " + ".join(nil))
        a_br = []
        for z in self.Z:
            k = _seq("k", z)
            cr = _seq("cr", z)
            inter = _j(*[[ki, ci] for ki, ci in zip(k, cr)])
            a_br.append(
                f"c({_j(k, 'm', 'p', 'g', 'b2')}).new o, ans1, ans2. (ch<{_j(k, 'ans1', 'ans2')}>."
                f"(ans1({_j(cr)}).p<{_j(inter, 'm', 'o')}>.Assign<b2, d, ch> "
                f"+ ans2().d<{_j(k, 'm', 'p', 'g')}>.Assign<b2, d, ch>) | o(@X).X<>)")
        a_br.append("n().Assign<b, d, ch>")
        self.define("Assign", "b, d, ch", f"new n, c. b<n, c>.({' + '.join(a_br)})", VERBATIM)
        self.define("RProxy", "x, q, r, w, rid",
                    "x(cred, rep).new j. rep<ok, j>.RProxyWait<x, q, r, w, rid, cred, j> + rp_obs<rid, null>")
        self.define("RProxyWait", "x, q, r, w, rid, cred, j",
                    "j(@X, back).RProxySend<x, q, r, w, rid, cred, X, back> + rp_obs<rid, cred>")
        self.define("RProxySend", "x, q, r, w, rid, cred, @X, back",
                    "r<X>.RProxyRun<x, q, r, w, rid, cred, back> + rp_obs<rid, cred>")
        self.define("RProxyRun", "x, q, r, w, rid, cred, back",
                    "q(res).back<res>.w<>.RProxy<x, q, r, w, rid> + rp_obs<rid, cred>")
        self.define("Resource", "r, q", "r(@X).new z. (X<z> | z(v).q<v>.Resource<r, q>)")

    def ads(self):
        cfg = self.cfg
        for ad in cfg.ads:
            rs = cfg.resources_of(ad)
            n = len(rs)
            s, x, w = _seq("s", n), _seq("x", n), _seq("w", n)
            lrm_formals = _j(s, x, w, "ch")
            probe = f"lrm_obs<{_j(ad_c(ad), *[[res_c(r), si] for r, si in zip(rs, s)])}>"
            br = []
            for z in self.Z:
                k = _seq("k", z)
                br.append(f"ch({_j(k, 'a1', 'a2')}).{self._alloc(ad, rs, z, 1, [])}")
            for i in range(n):
                st = list(s)
                st[i] = "free"
                br.append(f"{w[i]}().LRM_{ad}<{_j(st, x, w, 'ch')}>")
            br.append(probe)
            self.define(f"LRM_{ad}", lrm_formals, " + ".join(br))
            q, r = _seq("q", n), _seq("r", n)
            names = _j("tl", "b", "ch", x, w, q, r)
            parts = ["Receptor<tl, d>", f"Nil<b, tl, {ad_c(ad)}>", "Assign<b, d, ch>",
                     f"LRM_{ad}<{_j(['free'] * n, x, w, 'ch')}>"]
            for i, rr in enumerate(rs):
                parts.append(f"Resource<{r[i]}, {q[i]}>")
                parts.append(f"RProxy<{x[i]}, {q[i]}, {r[i]}, {w[i]}, {res_c(rr)}>")
            self.define(f"AD_{ad}", "d", f"new {names}. ({' | '.join(parts)})")

    def _alloc(self, ad, rs, z, j, chosen) -> str:
        """Decision tree picking, for each requested kind, the first free matching resource."""
        cfg = self.cfg
        n = len(rs)
        s, x, w = _seq("s", n), _seq("x", n), _seq("w", n)
        if j > z:
            st = ["busy" if i in chosen else s[i] for i in range(n)]
            return f"a1<{_j([x[i] for i in chosen])}>.LRM_{ad}<{_j(st, x, w, 'ch')}>"
        fail = f"a2<>.LRM_{ad}<{_j(s, x, w, 'ch')}>"
        out = fail
        kinds = []
        for r in rs:
            if cfg.kind_of(r) not in kinds:
                kinds.append(cfg.kind_of(r))
        for kind in reversed(kinds):
            chain = fail
            for i in reversed([i for i, r in enumerate(rs) if cfg.kind_of(r) == kind and i not in chosen]):
                chain = f"if {s[i]}=free then ({self._alloc(ad, rs, z, j + 1, chosen + [i])}) else {chain}"
            out = f"if k{j}={kind_c(kind)} then ({chain}) else {out}"
        return out

    # -- tasks and the whole system
    def task(self, t: TaskDef) -> str:
        return "{(t, e) " + self._task(t, "empty", lambda r: f"e<{r}>") + "}"

    def _task(self, t, r, k) -> str:
        i = next(self.ids)
        match t:
            case End():
                return k(r)
            case Basic(job, kinds):
                return (f"new dn{i}. t<{_j([kind_c(x) for x in kinds], '{(ret) ret<' + job_c(job) + '>}', f'dn{i}')}>."
                        f"dn{i}(rs{i}).{k(f'rs{i}')}")
            case Seq(a, b):
                return self._task(a, r, lambda r2: self._task(b, r2, k))
            case ParT(a, b):
                left = self._task(a, r, lambda x: f"jl{i}<{x}>")
                right = self._task(b, r, lambda x: f"jr{i}<{x}>")
                return f"new jl{i}, jr{i}. ({left} | {right} | jl{i}(xl{i}).jr{i}(xr{i}).{k(f'xl{i}')})"
            case Choice(a, b):
                return f"new ch{i}. (ch{i}<> | ch{i}().{self._task(a, r, k)} + ch{i}().{self._task(b, r, k)})"
        raise TypeError(t)

    def main(self):
        cfg = self.cfg
        ys = {nd: f"y_{nd}" for nd in cfg.nodes}
        dd = {ad: f"d_{ad}" for ad in cfg.ads}
        users = []
        for u in cfg.users:
            creds = cfg.credentials.get(u, ())
            v = cfg.vo_of(u)
            node = cfg.nodes_of_vo(v)[0]
            t = cfg.task_tree(u) or END
            users.append(f"{self.user_name(len(creds))}<{_j([cred_c(c) for c in creds], self.task(t), ys[node], '{(r) delivered<' + user_c(u) + ', r>}')}>")
        aps = []
        for nd in cfg.nodes:
            v = cfg.vo_of_node(nd)
            aps.append(f"AP_{v}<{_j(ys[nd], [dd[a] for a in cfg.ads_of_vo(v)])}>")
        ads = [f"AD_{ad}<{dd[ad]}>" for ad in cfg.ads]
        inner = " | ".join(aps + ads)
        return f"new {_j(list(ys.values()))}. ({' | '.join(users)} | new {_j(list(dd.values()))}. ({inner}))"

    def constants(self) -> list[str]:
        cfg = self.cfg
        out = list(CONSTANTS)
        out += [kind_c(k) for k in cfg.descriptors]
        out += [user_c(u) for u in cfg.users]
        out += [ad_c(d) for d in cfg.ads]
        out += [res_c(r) for r in cfg.resources]
        out += sorted({cred_c(c) for cs in cfg.credentials.values() for c in cs})
        jobs = set()
        for u in cfg.users:
            t = cfg.task_tree(u)
            if t is not None:
                jobs |= {job_c(b.job) for b in basics(t)}
        return out + sorted(jobs)

    def program(self) -> tuple[str, dict]:
        self.users()
        self.access_points()
        self.search_defs()
        self.acc_defs()
        self.user_proxy()
        self.log()
        self.ad_common()
        self.ads()
        lines = ["const " + ", ".join(self.constants()), ""]
        markers = {}
        for name, formals, body, marker in self.defs:
            markers[name] = marker
            lines.append(f"# {marker}")
            lines.append(f"def {name}({formals}) =\n    {body}")
            lines.append("")
        lines.append("main = " + self.main())
        return "\n".join(lines) + "\n", markers


def grid_program(cfg: GridConfig) -> tuple[str, dict]:
    """Program text (prelude plus main) for ``cfg`` and the per-definition markers."""
    return _Gen(cfg).program()


def encode_grid(cfg: GridConfig, strict: bool = True) -> Encoding:
    """Definitions, main term and parameters of the process model of ``cfg``.

    With ``strict`` the config must satisfy every static invariant; otherwise
    only the structural checks are enforced (useful for deliberately broken
    scenarios such as one without matching resources).
    """
    problems = check_structure(cfg)
    if problems:
        raise ValueError("; ".join(problems))
    report = check_invariants(cfg)
    if strict and not report.ok:
        raise InvariantViolation(report)
    for inv in ("I1", "I2", "I5", "I6"):
        if inv in report.ids():
            # the encoder needs these to wire users to nodes
            raise InvariantViolation(report)
    gen = _Gen(cfg)
    text, markers = gen.program()
    env, main = parse_program(text)
    registry = {}
    t = main
    while isinstance(t, Restrict):
        registry[f"y:{t.name.display[2:]}"] = t.name
        t = t.body
    _collect_d(t, registry)
    params = EncodingParams(
        omega=len(cfg.vos), mu=len(cfg.users), delta=len(cfg.ads), eta=len(cfg.nodes),
        registry=registry, constants=frozenset(gname(c) for c in gen.constants()),
        user_node={u: cfg.nodes_of_vo(cfg.vo_of(u))[0] for u in cfg.users},
        user_tag={u: gname(user_c(u)) for u in cfg.users},
        zetas=tuple(gen.Z), cred_arities=tuple(gen.C),
        users=tuple(cfg.users), ad_resources={d: tuple(cfg.resources_of(d)) for d in cfg.ads},
    )
    return Encoding(env, main, params, text, markers)


def _collect_d(t, registry):
    stack = [t]
    while stack:
        t = stack.pop()
        if isinstance(t, Par):
            stack.extend(t.items)
        elif isinstance(t, Restrict):
            if t.name.display.startswith("d_"):
                registry[f"d:{t.name.display[2:]}"] = t.name
            stack.append(t.body)
