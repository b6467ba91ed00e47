from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import pytest
from hypothesis import HealthCheck, settings

from dds_gate import synth
from dds_gate.cli import run_cli

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GENERATED_AT = "2024-06-01T00:00:00Z"


def check_report(paths: synth.FixturePaths, out: Path, *extra: str) -> tuple[int, dict[str, Any]]:
    """Run ``dds check --all`` on a written fixture; returns (exit code, parsed report)."""
    code = run_cli(["check", *paths.check_args(), "--all", "--output", str(out),
                    "--generated-at", GENERATED_AT, *extra])
    return code, json.loads(out.read_text(encoding="utf-8"))


def rec_statuses(report: dict[str, Any]) -> dict[int, str]:
    return {e["rec_id"]: e["status"] for e in report["entries"]}


@pytest.fixture(scope="session")
def golden_fixture() -> synth.Fixture:
    return synth.golden(synth.FixtureConfig())


@pytest.fixture(scope="session")
def golden_paths(golden_fixture: synth.Fixture, tmp_path_factory: pytest.TempPathFactory) -> synth.FixturePaths:
    return synth.write_fixture(golden_fixture, tmp_path_factory.mktemp("golden"))


@pytest.fixture(scope="session")
def golden_run(golden_paths: synth.FixturePaths, tmp_path_factory: pytest.TempPathFactory) -> tuple[int, dict]:
    return check_report(golden_paths, tmp_path_factory.mktemp("golden-report") / "report.json")


# -- acceptance verdicts ---------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}
ACCEPTANCE_CRITERIA = range(1, 11)


def verdict(n: int, ok: bool, detail: str) -> None:
    """Record and print one pass/fail line for acceptance criterion ``n``; fails the test when not ok."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    ran = any("test_acceptance" in r.nodeid for rs in terminalreporter.stats.values() for r in rs
              if hasattr(r, "nodeid"))
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in ACCEPTANCE_CRITERIA:
        terminalreporter.write_line(ACCEPTANCE.get(n, f"FAIL criterion {n:>2}: did not complete"))
