"""Breadth-first exploration of the communication graph of an encoded grid.

States are saturated (all unfoldings and conditionals performed), garbage
collected and identified by the digest of their canonical normal form, so
alpha-variants collapse into one state. Each state records its BFS parent
and the index of the communication redex that produced it, which makes every
reported state replayable from the initial term.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import networkx as nx

from ..grid.snapshot import check_snapshot
from ..grid.static import GridConfig
from .engine import Engine, all_delivered


class DepthExhausted(Exception):
    """Raised by callers that require a complete exploration."""

    def __init__(self, report):
        super().__init__(f"exploration stopped at depth {report.depth} with "
                         f"{report.frontier} unexpanded states")
        self.report = report


@dataclass
class Finding:
    digest: str
    path: tuple[int, ...]
    detail: str = ""


@dataclass
class ExplorationReport:
    states: int = 0
    transitions: int = 0
    depth: int = 0
    frontier: int = 0                 # states at the depth bound left unexpanded
    delivered_reachable: bool = False
    deadlocks: list = field(default_factory=list)
    livelocks: list = field(default_factory=list)     # one Finding per livelock class
    violations: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def complete(self) -> bool:
        return self.frontier == 0

    @property
    def ok(self) -> bool:
        return not (self.deadlocks or self.livelocks or self.violations)

    def summary(self) -> dict:
        """Worker-independent content of the report."""
        return {
            "states": self.states, "transitions": self.transitions,
            "depth": self.depth, "frontier": self.frontier,
            "delivered_reachable": self.delivered_reachable,
            "deadlocks": [(f.digest, f.path) for f in self.deadlocks],
            "livelocks": [(f.digest, f.path, f.detail) for f in self.livelocks],
            "violations": [(f.digest, f.path, f.detail) for f in self.violations],
        }

    def lines(self) -> list[str]:
        out = [f"states: {self.states}", f"transitions: {self.transitions}",
               f"depth: {self.depth}{'' if self.complete else f' (bound hit, {self.frontier} unexpanded)'}",
               f"delivered-all reachable: {'yes' if self.delivered_reachable else 'no'}",
               f"deadlocks: {len(self.deadlocks)}", f"livelock classes: {len(self.livelocks)}",
               f"invariant violations: {len(self.violations)}",
               f"time: {self.elapsed:.2f}s"]
        for name, items in (("deadlock", self.deadlocks), ("livelock", self.livelocks),
                            ("violation", self.violations)):
            for f in items[:5]:
                out.append(f"  {name} {f.digest} via {list(f.path)} {f.detail}".rstrip())
        return out


def explore(cfg: GridConfig, depth: int | None = None, workers: int = 1,
            strict: bool = False) -> ExplorationReport:
    """Explore all communication interleavings up to ``depth`` steps (None: unbounded)."""
    t0 = time.perf_counter()
    eng = Engine.for_config(cfg, eager=True, strict=strict)
    users = cfg.users
    start = eng.initial()
    d0 = eng.digest(start)
    parent: dict[str, tuple[str | None, int]] = {d0: (None, -1)}
    graph = nx.DiGraph()
    graph.add_node(d0)
    done: set[str] = set()
    delivered: set[str] = set()
    report = ExplorationReport()
    level = [(d0, start)]
    k = 0

    def path(d):
        steps = []
        while parent[d][0] is not None:
            d, i = parent[d]
            steps.append(i)
        return tuple(reversed(steps))

    def visit(d, p):
        snap = eng.snapshot(p)
        if all_delivered(snap, users):
            delivered.add(d)
        for msg in check_snapshot(snap, cfg):
            report.violations.append(Finding(d, path(d), msg))

    visit(d0, start)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        while level and (depth is None or k < depth):
            expand = lambda item: [(i, eng.step(item[1], r))
                                   for i, r in enumerate(eng.redexes(item[1]))]
            succs = list(pool.map(expand, level)) if pool else [expand(x) for x in level]
            nxt = []
            for (d, _), out in zip(level, succs):
                done.add(d)
                for i, q in out:
                    e = eng.digest(q)
                    graph.add_edge(d, e)
                    if e not in parent:
                        parent[e] = (d, i)
                        nxt.append((e, q))
                        visit(e, q)
            level = nxt
            if level:
                k += 1
    finally:
        if pool:
            pool.shutdown()
    report.states = len(parent)
    report.transitions = graph.number_of_edges()
    report.depth = k
    report.frontier = len([d for d, _ in level if d not in done])
    report.delivered_reachable = bool(delivered)
    _classify(report, graph, done, delivered, path)
    report.elapsed = time.perf_counter() - t0
    return report


def _classify(report, graph, done, delivered, path):
    """Deadlocks are expanded dead ends; livelocks are closed cycles that can never deliver."""
    open_ = set(graph.nodes) - done
    for d in sorted(done, key=lambda d: (len(path(d)), path(d))):
        if graph.out_degree(d) == 0 and d not in delivered:
            report.deadlocks.append(Finding(d, path(d)))
    hopeful = set(delivered | open_)
    stack = list(hopeful)
    while stack:
        for q in graph.predecessors(stack.pop()):
            if q not in hopeful:
                hopeful.add(q)
                stack.append(q)
    # a livelock class is a bottom strongly connected component with a cycle
    # from which no delivered-all state (and no unexplored state) is reachable
    cond = nx.condensation(graph)
    for c in cond.nodes:
        comp = cond.nodes[c]["members"]
        if cond.out_degree(c) or comp & hopeful:
            continue
        d = next(iter(comp))
        if len(comp) == 1 and not graph.has_edge(d, d):
            continue
        d = min(comp, key=lambda d: (len(path(d)), path(d)))
        report.livelocks.append(Finding(d, path(d), f"{len(comp)} states"))
    report.livelocks.sort(key=lambda f: (len(f.path), f.path))


def replay(cfg: GridConfig, steps, strict: bool = False):
    """Re-execute a redex path from a report; returns the reached term."""
    eng = Engine.for_config(cfg, eager=True, strict=strict)
    p = eng.initial()
    for i in steps:
        p = eng.step(p, eng.redexes(p)[i])
    return eng, p
