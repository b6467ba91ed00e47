from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from dds_gate.errors import RegistryViolation
from dds_gate.findings import STATUS_ORDER, Finding, Status, merge_findings, severity, worst
from dds_gate.manifest import AttestationRecord
from dds_gate.registry import ATTESTED, AUTOMATED, DEFAULT_REGISTRY, HYBRID, regrade
from dds_gate.report import assemble, canonical_json, exit_code_for, format_float, render, report_to_dict

DATE = "2024-03-01T00:00:00Z"
AUTOMATABLE = DEFAULT_REGISTRY.ids(AUTOMATED, HYBRID)
ATTESTABLE = DEFAULT_REGISTRY.attestable


def all_passing():
    findings = [Finding(r, Status.PASS, "ok") for r in AUTOMATABLE]
    atts = [AttestationRecord(r, "attested_pass", "qa", DATE) for r in ATTESTABLE]
    return findings, atts


# -- registry ----------------------------------------------------------------------


def test_registry_has_44_entries_and_expected_modes():
    assert list(DEFAULT_REGISTRY) == list(range(1, 45))
    assert DEFAULT_REGISTRY.ids(HYBRID) == [3, 7, 28, 35, 40]
    attested = {1, 2, 10, 11, 13, 18, 20, 21, 24, 25, 26, 30, 32, 33, 34, 41}
    assert set(DEFAULT_REGISTRY.ids(ATTESTED)) == attested


# -- assemble -----------------------------------------------------------------------


def test_empty_input_is_all_pending():
    rep = assemble([], [])
    assert len(rep.entries) == 44
    assert {e.status for e in rep.entries} == {Status.MANUAL_PENDING}
    assert rep.exit_code == 1
    assert "check not run" in rep.entry(4).message and "attestation missing" in rep.entry(1).message


def test_all_pass_exits_zero():
    rep = assemble(*all_passing())
    assert rep.exit_code == 0
    assert {e.status for e in rep.entries} <= {Status.PASS, Status.ATTESTED_PASS}


def test_pass_and_fail_merge_to_fail():
    findings, atts = all_passing()
    findings.append(Finding(39, Status.FAIL, "overlap", ("a", "b")))
    rep = assemble(findings, atts)
    e = rep.entry(39)
    assert e.status is Status.FAIL and e.automated.evidence == ("a", "b") and rep.exit_code == 1


def test_hybrid_entry_is_worst_of_both_halves():
    findings, atts = all_passing()
    atts = [a for a in atts if a.rec_id != 40]
    rep = assemble(findings, atts)
    assert rep.entry(40).status is Status.MANUAL_PENDING
    assert rep.entry(40).automated.status is Status.PASS


def test_warn_does_not_block_and_lenient_demotes_pending():
    findings, atts = all_passing()
    findings.append(Finding(12, Status.WARN, "outlier"))
    assert assemble(findings, atts).exit_code == 0
    assert assemble(findings, atts[1:], lenient=True).exit_code == 0
    assert assemble(findings, atts[1:]).exit_code == 1


def test_registry_violations():
    with pytest.raises(RegistryViolation):
        assemble([Finding(1, Status.PASS, "x")])
    with pytest.raises(RegistryViolation):
        assemble([], [AttestationRecord(39, "attested_pass", "qa", DATE)])


def test_latest_attestation_wins():
    atts = [AttestationRecord(1, "attested_fail", "qa", "2024-01-01T00:00:00Z"),
            AttestationRecord(1, "attested_pass", "qa", "2024-02-01T00:00:00Z")]
    assert assemble([], atts).entry(1).status is Status.ATTESTED_PASS


def test_assemble_is_idempotent():
    findings, atts = all_passing()
    findings += [Finding(39, Status.FAIL, "overlap", ("a",)), Finding(12, Status.WARN, "o", ("x",), {"n": 2})]
    once = assemble(findings, atts, dataset_id="d", generated_at=DATE)
    twice = assemble(once.findings(), once.attestations(), dataset_id="d", generated_at=DATE)
    assert render(once) == render(twice)


def test_regrade_changes_only_problem_findings():
    found = [Finding(39, Status.FAIL, "overlap", ("a",)), Finding(39, Status.PASS, "ok"),
             Finding(12, Status.WARN, "outlier"), Finding(5, Status.MANUAL_PENDING, "no schema")]
    out = regrade(found, {39: "warn", 12: "fail", 5: "fail"})
    assert [f.status for f in out] == [Status.WARN, Status.PASS, Status.FAIL, Status.MANUAL_PENDING]
    assert out[0].evidence == ("a",) and regrade(found, {}) == found


@pytest.mark.parametrize("overrides", [{1: "warn"}, {45: "fail"}, {39: "pass"}])
def test_regrade_rejects_bad_policy(overrides):
    with pytest.raises(ValueError):
        regrade([], overrides)


# -- merge laws ---------------------------------------------------------------------

finding_st = st.builds(
    Finding, st.just(39), st.sampled_from(list(Status)), st.sampled_from(["a", "b", "c\nd"]),
    st.lists(st.sampled_from("xyz"), max_size=3).map(tuple),
    st.dictionaries(st.sampled_from(["n", "tv"]), st.integers(0, 9)))


@given(st.lists(finding_st, min_size=1, max_size=5), st.lists(finding_st, min_size=1, max_size=5))
def test_merge_is_associative_and_commutative(xs, ys):
    assert merge_findings(xs + ys) == merge_findings(ys + xs)
    assert merge_findings([merge_findings(xs), merge_findings(ys)]) == merge_findings(xs + ys)


@given(st.lists(st.sampled_from(list(Status)), min_size=1))
def test_exit_code_is_function_of_worst_status(ss):
    w = worst(ss)
    assert exit_code_for(ss) == exit_code_for([w])
    assert exit_code_for(ss) == (1 if severity(w) >= severity(Status.MANUAL_PENDING) else 0)


def test_status_order():
    assert [s.value for s in STATUS_ORDER] == ["fail", "attested_fail", "manual_pending", "warn",
                                               "not_applicable", "attested_pass", "pass"]


# -- rendering -----------------------------------------------------------------------


def test_render_is_deterministic_and_formats_floats():
    findings, atts = all_passing()
    findings.append(Finding(6, Status.PASS, "tv", metrics={"tv_distance": 0.1}))
    rep = assemble(findings, atts, dataset_id="d", generated_at=DATE)
    a, b = render(rep), render(rep)
    assert a == b
    assert b'"tv_distance": 0.100000000' in a
    doc = json.loads(a)
    assert doc["entries"][0]["evidence"] == [] and len(doc["entries"]) == 44
    assert doc["schema_version"] == "dds-report/1" and doc["exit_code"] == 0


@pytest.mark.parametrize(("x", "text"), [(0.1, "0.100000000"), (1.0, "1.00000000"), (0.005991464547107982, "0.00599146455"),
                                         (123456.789, "123456.789"), (0.0, "0.00000000"), (-0.25, "-0.250000000")])
def test_format_float(x, text):
    assert format_float(x) == text


def test_canonical_json_sorts_keys_and_maps_nan_to_null():
    assert canonical_json({"b": 1, "a": float("nan")}) == '{\n  "a": null,\n  "b": 1\n}\n'


def test_text_render_lists_every_rec():
    text = render(assemble([], []), "text").decode()
    assert text.count("manual_pending") >= 44 and "exit code: 1" in text


def test_report_matches_schema():
    jsonschema = pytest.importorskip("jsonschema")
    schema = json.loads((Path(__file__).parent.parent / "docs" / "report.schema.json").read_text())
    findings, atts = all_passing()
    doc = report_to_dict(assemble(findings, atts, dataset_id="d", generated_at=DATE))
    jsonschema.validate(json.loads(canonical_json(doc)), schema)
    jsonschema.validate(json.loads(canonical_json(report_to_dict(assemble([], [])))), schema)
