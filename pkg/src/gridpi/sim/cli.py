"""Command line interface.

Exit codes: 0 when every check passes, 1 when a violation is found, 2 for
usage, input or I/O errors.
"""

from __future__ import annotations

import sys

import click

from ..grid.static import InvariantViolation, check_invariants
from .explore import explore as run_explore
from .run import interactive_chooser, run as run_scenario
from .scenario import ScenarioError, load_scenario
from .trace import SchemaMismatch, emit_trace, read_trace, verify as verify_trace, verify_snapshots

OK, VIOLATION, ERROR = 0, 1, 2


def _load(path):
    try:
        return load_scenario(path, strict=False)
    except ScenarioError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(ERROR)


def _echo_lines(lines):
    for line in lines:
        click.echo(line)


@click.group()
def main():
    """Simulate grid scenarios as higher-order pi-calculus processes."""


@main.command()
@click.argument("scenario")
def check(scenario):
    """Check the static invariants of SCENARIO."""
    s = _load(scenario)
    report = check_invariants(s.config)
    click.echo(str(report))
    sys.exit(OK if report.ok else VIOLATION)


def _static_gate(s):
    report = check_invariants(s.config)
    if not report.ok:
        click.echo("warning: static invariants violated:", err=True)
        click.echo(str(report), err=True)
    return report.ok


@main.command()
@click.argument("scenario")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Random seed (default: from the scenario).")
@click.option("--max-steps", type=click.IntRange(min=0), default=None, help="Step bound.")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None, help="Write a JSONL trace here.")
def run(scenario, seed, max_steps, trace_path):
    """Run SCENARIO once with a seeded random scheduler."""
    s = _load(scenario)
    static_ok = _static_gate(s)
    trace = run_scenario(s, seed=seed, max_steps=max_steps)
    trace_path = trace_path or s.options.trace
    if trace_path:
        try:
            emit_trace(trace, trace_path)
        except ScenarioError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(ERROR)
    click.echo(f"stopped after {len(trace.events)} steps: {trace.reason}")
    if trace.reason == "max-steps":
        click.echo("note: step bound reached before every task was delivered")
    report = verify_snapshots(trace.snapshots, s.config)
    _echo_lines(report.lines())
    sys.exit(OK if report.ok and static_ok else VIOLATION)


@main.command()
@click.argument("scenario")
@click.option("--max-steps", type=click.IntRange(min=0), default=None)
def step(scenario, max_steps):
    """Step through SCENARIO choosing each redex by hand."""
    s = _load(scenario)
    static_ok = _static_gate(s)

    def read(prompt):
        click.echo(prompt, nl=False)
        line = sys.stdin.readline()
        if not line:
            raise EOFError
        return line

    trace = run_scenario(s, max_steps=max_steps, choose=interactive_chooser(read, click.echo))
    click.echo(f"stopped after {len(trace.events)} steps: {trace.reason}")
    report = verify_snapshots(trace.snapshots, s.config)
    _echo_lines(report.lines())
    sys.exit(OK if report.ok and static_ok else VIOLATION)


@main.command()
@click.argument("scenario")
@click.option("--depth", type=click.IntRange(min=0), default=None, help="Step bound (default: from the scenario, else unbounded).")
@click.option("--workers", type=click.IntRange(min=1), default=1, help="Threads expanding each frontier.")
def explore(scenario, depth, workers):
    """Explore every interleaving of SCENARIO breadth-first."""
    s = _load(scenario)
    depth = s.options.depth if depth is None else depth
    report = run_explore(s.config, depth=depth, workers=workers)
    _echo_lines(report.lines())
    if not report.complete:
        click.echo("note: depth bound reached; results are partial")
    sys.exit(OK if report.ok else VIOLATION)


@main.command()
@click.argument("trace")
def verify(trace):
    """Re-check a stored JSONL trace."""
    try:
        t = read_trace(trace)
        report = verify_trace(t)
    except (ScenarioError, SchemaMismatch, InvariantViolation) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(ERROR)
    _echo_lines(report.lines())
    sys.exit(OK if report.ok else VIOLATION)


if __name__ == "__main__":
    main()
