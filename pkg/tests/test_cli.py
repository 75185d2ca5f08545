import json

import pytest
from click.testing import CliRunner

from gridpi.sim.cli import main
from gridpi.sim.scenario import shipped

SCEN5, MICRO, ZERO = (str(shipped(n)) for n in ("scenario5.grid", "micro.grid", "micro_zero.grid"))


@pytest.fixture
def cli():
    runner = CliRunner()
    return lambda *args, input=None: runner.invoke(main, list(args), input=input)


def test_check_exit_codes(cli):
    assert cli("check", SCEN5).exit_code == 0
    r = cli("check", ZERO)
    assert r.exit_code == 1 and "I7" in r.output


def test_run_writes_a_trace_that_verifies(cli, tmp_path):
    path = tmp_path / "micro.jsonl"
    r = cli("run", MICRO, "--seed", "4", "--trace", str(path))
    assert r.exit_code == 0, r.output
    assert "delivered" in r.output and r.output.rstrip().splitlines()[-1].startswith("PASS")
    json.loads(path.read_text().splitlines()[0])
    v = cli("verify", str(path))
    assert v.exit_code == 0 and "PASS" in v.output


def test_run_is_reproducible(cli, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    cli("run", MICRO, "--seed", "9", "--trace", str(a))
    cli("run", MICRO, "--seed", "9", "--trace", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_zero_step_bound_is_not_a_violation(cli):
    r = cli("run", MICRO, "--seed", "1", "--max-steps", "0")
    assert r.exit_code == 0 and "max-steps" in r.output


def test_verify_errors(cli, tmp_path):
    assert cli("verify", str(tmp_path / "missing.jsonl")).exit_code == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"schema": "something-else"}\n')
    assert cli("verify", str(bad)).exit_code == 2


def test_verify_reports_a_tampered_trace(cli, tmp_path):
    path = tmp_path / "t.jsonl"
    cli("run", MICRO, "--seed", "2", "--trace", str(path))
    rows = [json.loads(x) for x in path.read_text().splitlines()]
    i = next(k for k, r in enumerate(rows) if r.get("snapshot", {}).get("phases", {}).get("u1") == "running")
    rows[i + 1]["snapshot"]["phases"]["u1"] = "submitted"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    r = cli("verify", str(path))
    assert r.exit_code == 1 and "FAIL" in r.output


def test_explore_exit_codes(cli):
    r = cli("explore", MICRO)
    assert r.exit_code == 0 and "states" in r.output
    assert cli("explore", ZERO).exit_code == 1
    r = cli("explore", MICRO, "--depth", "0")
    assert r.exit_code == 0 and "partial" in r.output


def test_step_reads_choices_from_stdin(cli):
    r = cli("step", MICRO, input="0\n0\nq\n")
    assert r.exit_code == 0, r.output
    assert "stopped after 2 steps: stopped" in r.output
    assert cli("step", MICRO, input="").exit_code == 0


def test_usage_and_input_errors(cli, tmp_path):
    assert cli("run").exit_code == 2
    assert cli("run", MICRO, "--seed", "-3").exit_code == 2
    assert cli("check", str(tmp_path / "nope.grid")).exit_code == 2
    bad = tmp_path / "bad.grid"
    bad.write_text("[users]\nu1 vo=v1\n")
    r = cli("check", str(bad))
    assert r.exit_code == 2 and "error" in r.output
