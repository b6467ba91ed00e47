from __future__ import annotations

import json

import pytest

from dds_gate import synth
from dds_gate.cli import run_cli
from conftest import GENERATED_AT, check_report, rec_statuses
from helpers import item, manifest_bytes


def test_size_solves_for_n(capsys):
    assert run_cli(["size", "--delta", "0.05", "--target", "0.001"]) == 0
    assert capsys.readouterr().out.strip() == "5992"


def test_size_evaluates_bound(capsys):
    assert run_cli(["size", "--delta", "0.05", "--n", "1000"]) == 0
    assert capsys.readouterr().out.strip() == "0.00599146455"


@pytest.mark.parametrize("argv", [
    ["size", "--delta", "0.05"],
    ["size", "--delta", "1.5", "--target", "0.1"],
    ["size", "--delta", "0.05", "--target", "0.1", "--n", "5"],
    ["check"],
    ["nonsense"],
    ["check", "--manifest", "/nonexistent/m.jsonl"],
])
def test_usage_and_io_errors_exit_2(argv, capsys):
    assert run_cli(argv) == 2
    assert capsys.readouterr().err


def test_golden_fixture_passes(golden_run):
    code, report = golden_run
    assert code == 0 and report["exit_code"] == 0
    assert set(rec_statuses(report).values()) <= {"pass", "attested_pass", "warn", "not_applicable"}


def test_cross_split_duplicate_fails_rec_39(golden_fixture, tmp_path):
    paths = synth.write_fixture(synth.planted(golden_fixture, "cross_split_duplicate"), tmp_path / "fx")
    code, report = check_report(paths, tmp_path / "r.json")
    assert code == 1 and rec_statuses(report)[39] == "fail"


def test_report_is_byte_identical_across_runs(golden_paths, tmp_path):
    args = ["check", *golden_paths.check_args(), "--all", "--generated-at", GENERATED_AT]
    run_cli([*args, "--output", str(tmp_path / "a.json")])
    run_cli([*args, "--output", str(tmp_path / "b.json")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_findings_round_trip_through_report_command(golden_paths, tmp_path):
    full = tmp_path / "full.json"
    saved = tmp_path / "findings.json"
    run_cli(["check", *golden_paths.check_args(), "--all", "--generated-at", GENERATED_AT,
             "--output", str(full), "--findings-out", str(saved)])
    merged = tmp_path / "merged.json"
    code = run_cli(["report", "--findings", str(saved), "--attestations", str(golden_paths.attestations),
                    "--generated-at", GENERATED_AT, "--output", str(merged)])
    assert code == 0 and merged.read_bytes() == full.read_bytes()


def test_missing_attestations_block_unless_lenient(golden_paths, tmp_path):
    args = [a for a in golden_paths.check_args()]
    i = args.index("--attestations")
    del args[i:i + 2]
    base = ["check", *args, "--all", "--generated-at", GENERATED_AT, "--output", str(tmp_path / "r.json")]
    assert run_cli(base) == 1
    assert run_cli([*base, "--lenient"]) == 0


def test_selected_groups_leave_others_pending(golden_paths, tmp_path):
    out = tmp_path / "r.json"
    code = run_cli(["check", *golden_paths.check_args(), "--splits", "--generated-at", GENERATED_AT,
                    "--output", str(out)])
    st = rec_statuses(json.loads(out.read_text()))
    assert code == 1 and st[39] == "pass" and st[4] == "pass" and st[22] == "manual_pending"


def test_text_format(golden_paths, capsys):
    run_cli(["check", *golden_paths.check_args(), "--all", "--format", "text", "--generated-at", GENERATED_AT])
    out = capsys.readouterr().out
    assert "summary:" in out and "exit code: 0" in out


def test_config_file_and_env_var(golden_paths, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"min_count": 10**6}))
    out = tmp_path / "r.json"
    argv = ["check", *golden_paths.check_args(), "--all", "--generated-at", GENERATED_AT, "--output", str(out)]
    assert run_cli([*argv, "--config", str(cfg)]) == 1
    assert rec_statuses(json.loads(out.read_text()))[5] == "fail"
    monkeypatch.setenv("DDS_CONFIG", str(cfg))
    assert run_cli(argv) == 1
    assert run_cli([*argv, "--min-count", "1"]) == 0  # flags override the config


def test_unknown_config_key_is_usage_error(golden_paths, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"min_cuont": 5}))
    assert run_cli(["check", *golden_paths.check_args(), "--config", str(cfg)]) == 2


def test_validate(golden_paths, tmp_path, capsys):
    assert run_cli(["validate", "--manifest", str(golden_paths.manifest), "--odd-schema", "builtin:railway",
                    "--rules", str(golden_paths.rules)]) == 0
    bad = tmp_path / "bad.jsonl"
    bad.write_bytes(manifest_bytes([item("a"), item("a")]))
    assert run_cli(["validate", "--manifest", str(bad)]) == 1
    assert "error" in capsys.readouterr().out


def test_seal_then_verify(tmp_path, capsys):
    m = tmp_path / "m.jsonl"
    m.write_bytes(manifest_bytes([item("a", "test"), item("b", "test")]))
    seal = tmp_path / "seal.json"
    assert run_cli(["seal", "--manifest", str(m), "--output", str(seal), "--sealed-at", GENERATED_AT]) == 0
    assert run_cli(["verify-seal", "--manifest", str(m), "--seal", str(seal)]) == 0
    m.write_bytes(manifest_bytes([item("a", "test"), item("b", "test", digest="sha256:" + "0" * 64)]))
    assert run_cli(["verify-seal", "--manifest", str(m), "--seal", str(seal)]) == 1
    assert "commitment mismatch" in capsys.readouterr().out


def test_seal_of_empty_split_is_an_error(tmp_path):
    m = tmp_path / "m.jsonl"
    m.write_bytes(manifest_bytes([item("a")]))
    assert run_cli(["seal", "--manifest", str(m), "--split", "test"]) == 2


def test_severity_policy_from_config(golden_fixture, tmp_path):
    paths = synth.write_fixture(synth.planted(golden_fixture, "cross_split_duplicate"), tmp_path / "fx")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"severity": {"39": "warn"}}))
    out = tmp_path / "r.json"
    argv = ["check", *paths.check_args(), "--all", "--generated-at", GENERATED_AT, "--output", str(out)]
    assert run_cli([*argv, "--config", str(cfg)]) == 0
    assert rec_statuses(json.loads(out.read_text()))[39] == "warn"
    cfg.write_text(json.dumps({"severity": {"1": "warn"}}))
    assert run_cli([*argv, "--config", str(cfg)]) == 2
