"""Read grid-level state back out of a running process term.

The term is never modified. Information comes from three places: the Log
component of each submitted task (phase and result), the observation
branches that LRM, queue cells and resource proxies keep offering on global
channels nobody listens to, and the shape of not-yet-submitted User
components.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..hopi.reduction import prenex
from ..hopi.terms import Call, Cond, Input, Name, Output, Sum, free, is_global
from .encode import EncodingParams, unmangle
from .static import GridConfig, check_invariants

PHASES = ("initial", "authenticated", "submitted", "queued", "running", "finished")
RANK = {p: i for i, p in enumerate(PHASES)}


class UnrecognizedShape(Exception):
    pass


@dataclass(frozen=True)
class ResourceState:
    status: str                 # "free" | "busy"
    holder: str | None = None   # user whose proxy is currently authenticated


@dataclass(frozen=True)
class Snapshot:
    phases: tuple          # ((user, phase), ...)
    results: tuple         # ((user, result | None), ...)
    delivered: tuple       # users whose post-completion process has run
    resources: tuple       # ((resource, ResourceState), ...)
    queues: tuple          # ((ad, pending requests), ...)
    ad_of: tuple = ()      # ((resource, ad), ...) as reported by the LRMs
    logs: tuple = ()       # ((user, number of logs), ...)

    def phase(self, u) -> str:
        return dict(self.phases)[u]

    def result(self, u):
        return dict(self.results).get(u)

    def resource(self, r) -> ResourceState:
        return dict(self.resources)[r]

    def queue(self, d) -> int:
        return dict(self.queues)[d]

    def to_dict(self) -> dict:
        return {
            "phases": dict(self.phases),
            "results": dict(self.results),
            "delivered": list(self.delivered),
            "resources": {r: {"status": s.status, "holder": s.holder} for r, s in self.resources},
            "queues": dict(self.queues),
            "ad_of": dict(self.ad_of),
            "logs": dict(self.logs),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Snapshot":
        return cls(
            phases=tuple(d["phases"].items()),
            results=tuple(d["results"].items()),
            delivered=tuple(d["delivered"]),
            resources=tuple((r, ResourceState(s["status"], s["holder"])) for r, s in d["resources"].items()),
            queues=tuple(d["queues"].items()),
            ad_of=tuple(d.get("ad_of", {}).items()),
            logs=tuple(d.get("logs", {}).items()),
        )


def _label(n) -> str | None:
    return n.display if isinstance(n, Name) and is_global(n) else None


def _log_info(leaf):
    """(gw, state, result, tag) of a Log component, or None."""
    match leaf:
        case Call("Log", (gw, _, st, z, tag)):
            return gw, st, z, tag
        case Call("LogAdvance", (gw, _, st, v, z, tag)):
            # a write already accepted but not yet applied; the log only moves forward
            if RANK.get(_label(v), -1) > RANK.get(_label(st), -1):
                st = v
            return gw, st, z, tag
        case Sum(branches) if len(branches) == 2:
            outs = [p for p, _ in branches if isinstance(p, Output) and len(p.args) == 3]
            ins = [p for p, _ in branches if isinstance(p, Input) and len(p.formals) == 2]
            if outs and ins and _label(outs[0].args[2]) and _label(outs[0].args[2]).startswith("user_"):
                st, z, tag = outs[0].args
                return ins[0].chan, st, z, tag
    return None


def _probes(leaf, channel):
    if isinstance(leaf, Sum):
        for p, _ in leaf.branches:
            if isinstance(p, Output) and _label(p.chan) == channel:
                yield p.args


def _lrm_state(leaf, params):
    """[(resource, status)] for an LRM component (probe, call, or pending reply)."""
    for args in _probes(leaf, "lrm_obs"):
        ad = unmangle(_label(args[0]))
        return ad, [(unmangle(_label(args[i])), _label(args[i + 1])) for i in range(1, len(args), 2)]
    call = leaf
    if isinstance(leaf, Sum) and len(leaf.branches) == 1 and isinstance(leaf.branches[0][1], Call):
        call = leaf.branches[0][1]
    if isinstance(call, Call) and call.defn.startswith("LRM_"):
        ad = call.defn[4:]
        rs = params.ad_resources.get(ad, ())
        return ad, [(r, _label(call.args[i])) for i, r in enumerate(rs)]
    return None


_RP_HOLDING = {"RProxyWait", "RProxySend", "RProxyRun"}


def _rp_state(leaf):
    """(resource, credential name or None) for a resource proxy component."""
    for args in _probes(leaf, "rp_obs"):
        cred = args[1]
        return unmangle(_label(args[0])), (None if _label(cred) == "null" else cred)
    match leaf:
        case Call(d, args) if d in _RP_HOLDING:
            return unmangle(_label(args[4])), args[5]
        case Call("RProxy", args):
            return unmangle(_label(args[4])), None
    return None


def _queue_owner(leaf):
    for args in _probes(leaf, "queue_obs"):
        return unmangle(_label(args[0]))
    if isinstance(leaf, Call) and leaf.defn.startswith("Cell"):
        return unmangle(_label(leaf.args[-1]))
    return None


def _monitor_depth(t, depth=0):
    """Prefix depth of the first Monitor call inside a User component."""
    match t:
        case Call(d, _):
            return depth if d.startswith("Monitor") else None
        case Sum(branches):
            for _, cont in branches:
                r = _monitor_depth(cont, depth + 1)
                if r is not None:
                    return r
        case Cond(_, _, p, q):
            for b in (p, q):
                r = _monitor_depth(b, depth)
                if r is not None:
                    return r
    return None


def extract_snapshot(p, params: EncodingParams) -> Snapshot:
    _, leaves = prenex(p)
    tag_user = {f"user_{u}": u for u in params.users}
    cred_user = {}
    log_count = {u: 0 for u in params.users}
    phases = {u: "initial" for u in params.users}
    results: dict = {u: None for u in params.users}
    delivered = set()
    lrm: dict = {}
    rps: dict = {}
    queues = {d: 0 for d in params.ad_resources}
    user_leaves = []
    handed = {}
    for leaf in leaves:
        info = _log_info(leaf)
        if info is not None:
            gw, st, z, tag = info
            u = tag_user.get(_label(tag))
            if u is None:
                raise UnrecognizedShape(f"log with unknown owner {tag!r}")
            log_count[u] += 1
            cred_user[gw] = u
            st_l, z_l = _label(st), _label(z)
            phase = st_l if st_l in RANK else "submitted"
            if phase == "finished" and z_l == "null":
                phase = "running"  # the result has not been written yet
            if RANK[phase] >= RANK[phases[u]]:
                phases[u] = phase
            results[u] = None if z_l == "null" else (unmangle(z_l) if z_l else repr(z))
            continue
        for args in _probes(leaf, "delivered"):
            u = tag_user.get(_label(args[0]))
            if u is not None:
                delivered.add(u)
                handed[u] = args[1]
        st = _lrm_state(leaf, params)
        if st is not None:
            lrm[st[0]] = st[1]
            continue
        rp = _rp_state(leaf)
        if rp is not None:
            rps[rp[0]] = rp[1]
            continue
        q = _queue_owner(leaf)
        if q is not None:
            queues[q] = queues.get(q, 0) + 1
            continue
        user_leaves.append(leaf)
    # once delivered, the log may have been collected (nobody can read it any more)
    for u, r in handed.items():
        if not log_count[u]:
            phases[u] = "finished"
            results[u] = unmangle(_label(r)) if _label(r) else repr(r)
    # users that have not submitted yet
    for leaf in user_leaves:
        labels = {_label(n) for n in free(leaf)} - {None}
        for u in params.users:
            if log_count[u] or u in delivered or f"user_{u}" not in labels:
                continue
            if isinstance(leaf, Call) and leaf.defn.startswith("User"):
                continue
            depth = _monitor_depth(leaf)
            if depth is not None and depth <= 4:
                phases[u] = "authenticated"
    for d in params.ad_resources:
        if d not in lrm:
            raise UnrecognizedShape(f"no resource manager found for {d}")
    resources = []
    ad_of = []
    for d, rs in sorted(lrm.items()):
        for r, status in rs:
            holder = rps.get(r)
            holder_u = None
            if holder is not None:
                holder_u = cred_user.get(holder, "?")
            resources.append((r, ResourceState(status or "?", holder_u)))
            ad_of.append((r, d))
    return Snapshot(
        phases=tuple((u, phases[u]) for u in params.users),
        results=tuple((u, results[u]) for u in params.users),
        delivered=tuple(u for u in params.users if u in delivered),
        resources=tuple(sorted(resources)),
        queues=tuple(sorted(queues.items())),
        ad_of=tuple(sorted(ad_of)),
        logs=tuple((u, log_count[u]) for u in params.users),
    )


def check_snapshot(snap: Snapshot, cfg: GridConfig) -> list[str]:
    """Exclusivity, phase/resource coherence and the static invariants of the live state."""
    problems = []
    phases = dict(snap.phases)
    for r, st in snap.resources:
        if st.holder is not None:
            if st.status != "busy":
                problems.append(f"resource {r} is held by {st.holder} but not marked busy")
            if st.holder == "?":
                problems.append(f"resource {r} is held by an unknown task")
            elif phases.get(st.holder) != "running":
                problems.append(f"resource {r} is held by {st.holder} in phase {phases.get(st.holder)}")
    seen: dict = {}
    for r, _ in snap.resources:
        seen[r] = seen.get(r, 0) + 1
    for r, n in seen.items():
        if n > 1:
            problems.append(f"resource {r} is reported {n} times")
    for u, res in snap.results:
        if phases.get(u) == "finished" and res is None:
            problems.append(f"task of {u} finished without a result")
    report = check_invariants(live_config(snap, cfg))
    problems += [f"{v.invariant}: {v.message}" for v in report.violations]
    return problems


def live_config(snap: Snapshot, cfg: GridConfig) -> GridConfig:
    """The static config with task ownership and resource placement read from ``snap``."""
    logs = dict(snap.logs)
    task_of = set()
    extra = []
    for u in cfg.users:
        owned = [s for s in cfg.user_tasks if (u, s) in cfg.task_of]
        n = logs.get(u, 0)
        if n == 0:
            task_of |= {(u, s) for s in owned}
        else:
            s0 = owned[0] if owned else f"{u}#task"
            task_of.add((u, s0))
            for i in range(1, n):
                extra.append(f"{s0}#{i}")
                task_of.add((u, extra[-1]))
    user_tasks = dict(cfg.user_tasks)
    for s in extra:
        user_tasks[s] = user_tasks.get(s.split("#")[0])
    belongs = frozenset(snap.ad_of) | frozenset(
        (r, d) for r, d in cfg.belongs_to if r not in dict(snap.ad_of))
    return replace(cfg, task_of=frozenset(task_of), user_tasks=user_tasks, belongs_to=belongs)


def classify_phase(trace) -> dict:
    """Per user, the ordered de-duplicated milestones reached along ``trace``."""
    out: dict = {}
    last: dict = {}
    for snap in trace:
        for u, ph in snap.phases:
            if ph != last.get(u):
                last[u] = ph
                if ph not in ("initial", "authenticated"):
                    out.setdefault(u, []).append(ph)
        for u in snap.delivered:
            seq = out.setdefault(u, [])
            if "delivered" not in seq:
                seq.append("delivered")
    return out


CONFORMING = ["submitted", "queued", "running", "finished", "delivered"]


def phase_regressions(trace) -> list[str]:
    """Users whose phase goes backwards between consecutive snapshots."""
    problems = []
    prev = None
    for i, snap in enumerate(trace):
        if prev is not None:
            before = dict(prev.phases)
            for u, ph in snap.phases:
                if u in before and RANK[ph] < RANK[before[u]]:
                    problems.append(f"step {i}: {u} went from {before[u]} to {ph}")
            for u in prev.delivered:
                if u not in snap.delivered:
                    problems.append(f"step {i}: delivery of {u} disappeared")
        prev = snap
    return problems
