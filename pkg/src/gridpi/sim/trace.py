"""JSONL traces and their offline verification.

A trace file holds a header line (schema tag, the scenario text, the seed
and the initial snapshot), one line per step, and a closing line with the
stop reason. Every step line carries the snapshot after the step, so a
stored trace can be re-verified without re-running the engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..grid.snapshot import Snapshot, check_snapshot, classify_phase, phase_regressions
from .scenario import IoError, parse_scenario

SCHEMA = "gridpi-trace/1"


class SchemaMismatch(Exception):
    pass


@dataclass(frozen=True)
class TraceEvent:
    step: int
    kind: str                  # comm | unfold | cond
    channel: str | None        # channel or definition name
    values: tuple[str, ...]    # pretty-printed, truncated
    digest: str                # of the normalized term after the step
    snapshot: Snapshot

    def to_json(self) -> dict:
        return {"step": self.step, "kind": self.kind, "channel": self.channel,
                "values": list(self.values), "digest": self.digest,
                "snapshot": self.snapshot.to_dict()}

    @classmethod
    def from_json(cls, d: dict) -> "TraceEvent":
        return cls(d["step"], d["kind"], d["channel"], tuple(d["values"]), d["digest"],
                   Snapshot.from_dict(d["snapshot"]))


@dataclass
class Trace:
    scenario_text: str
    seed: int | None
    initial: Snapshot
    events: list[TraceEvent] = field(default_factory=list)
    reason: str = ""
    term: object = field(default=None, repr=False, compare=False)   # final term, in memory only

    @property
    def snapshots(self) -> list[Snapshot]:
        return [self.initial] + [e.snapshot for e in self.events]


def dumps(trace: Trace) -> str:
    lines = [{"schema": SCHEMA, "seed": trace.seed, "scenario": trace.scenario_text,
              "initial": trace.initial.to_dict()}]
    lines += [e.to_json() for e in trace.events]
    lines.append({"end": trace.reason, "steps": len(trace.events)})
    return "".join(json.dumps(x, sort_keys=True) + "\n" for x in lines)


def emit_trace(trace: Trace, path) -> None:
    try:
        Path(path).write_text(dumps(trace), encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from None


def loads(text: str) -> Trace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaMismatch("empty trace file")
    try:
        rows = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"not JSONL: {e}") from None
    head = rows[0]
    if not isinstance(head, dict) or head.get("schema") != SCHEMA:
        got = head.get("schema") if isinstance(head, dict) else None
        raise SchemaMismatch(f"expected schema {SCHEMA}, found {got!r}")
    try:
        trace = Trace(head["scenario"], head.get("seed"), Snapshot.from_dict(head["initial"]))
        body = rows[1:]
        if body and "end" in body[-1]:
            trace.reason = body.pop()["end"]
        trace.events = [TraceEvent.from_json(r) for r in body]
    except (KeyError, TypeError, AttributeError) as e:
        raise SchemaMismatch(f"malformed trace record: {e!r}") from None
    return trace


def read_trace(path) -> Trace:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise IoError(f"cannot read {path}: {e}") from None
    return loads(text)


@dataclass(frozen=True)
class VerificationReport:
    problems: tuple[str, ...]
    milestones: dict

    @property
    def ok(self) -> bool:
        return not self.problems

    def lines(self) -> list[str]:
        out = [f"{u}: {' -> '.join(ms) or '(no milestones)'}" for u, ms in sorted(self.milestones.items())]
        out += self.problems
        out.append("PASS" if self.ok else f"FAIL ({len(self.problems)} problems)")
        return out


def verify_snapshots(snaps, cfg) -> VerificationReport:
    """Phase monotonicity, resource exclusivity and live invariants along a run."""
    problems = list(phase_regressions(snaps))
    for i, s in enumerate(snaps):
        problems += [f"step {i}: {m}" for m in check_snapshot(s, cfg)]
    return VerificationReport(tuple(problems), classify_phase(snaps))


def verify(trace: Trace) -> VerificationReport:
    cfg = parse_scenario(trace.scenario_text, strict=False).config
    return verify_snapshots(trace.snapshots, cfg)
