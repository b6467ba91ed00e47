from __future__ import annotations

import hashlib

import pytest
from hypothesis import given, strategies as st

from dds_gate.errors import EmptySplit, ParseError
from dds_gate.findings import Status
from dds_gate.integrity import (
    GENESIS_DIGEST,
    DirectoryResolver,
    SealCommitment,
    append_entry,
    commitment_for,
    dump_audit_log,
    load_audit_log,
    load_seal,
    seal_split,
    sha256_digest,
    verify_audit_chain,
    verify_item_digests,
    verify_seal,
)
from helpers import digest_of, item, make_manifest, statuses

SEALED_AT = "2024-02-01T00:00:00Z"


def chain(n: int):
    log = []
    for k in range(n):
        log = append_entry(log, f"2024-01-0{k + 1}T00:00:00Z", "alice", "modify", [f"i{k}"], "fix label")
    return log


# -- digests -------------------------------------------------------------------------


def test_sha256_digest_format():
    assert sha256_digest(b"abc") == "sha256:" + hashlib.sha256(b"abc").hexdigest()


def test_all_digests_match():
    m = make_manifest([item("a"), item("b")])
    found = verify_item_digests(m, {"a": b"a", "b": b"b"})
    assert [(f.rec_id, f.status) for f in found] == [(22, Status.PASS), (23, Status.PASS)]


def test_mutated_and_missing_content_named():
    m = make_manifest([item("a"), item("b"), item("c")])
    found = verify_item_digests(m, {"a": b"a", "b": b"B"}, max_workers=2)
    assert [(f.rec_id, f.evidence) for f in found] == [(22, ("b",)), (22, ("c",)), (23, ("b", "c"))]
    assert "digest mismatch" in found[0].message and "unavailable" in found[1].message


def test_directory_resolver(tmp_path):
    (tmp_path / "a").write_bytes(b"a")
    (tmp_path / "sub").mkdir()
    r = DirectoryResolver(tmp_path)
    assert r["a"] == b"a" and "a" in r and "zz" not in r
    with pytest.raises(KeyError):
        r["../etc/passwd"]
    m = make_manifest([item("a")])
    assert statuses(verify_item_digests(m, r)) == ["pass", "pass"]


# -- audit chain ---------------------------------------------------------------------


def test_empty_log_warns():
    assert statuses(verify_audit_chain([])) == ["warn"]


def test_three_entry_chain_passes():
    log = chain(3)
    assert log[0].prev_digest == GENESIS_DIGEST
    assert statuses(verify_audit_chain(log)) == ["pass"]


def test_altered_link_reports_index():
    import dataclasses

    log = chain(3)
    log[2] = dataclasses.replace(log[2], prev_digest=digest_of(b"forged"))
    found = verify_audit_chain(log)
    assert found[0].status is Status.FAIL and found[0].message == "chain broken at index 2"


def test_edit_of_earlier_entry_breaks_next_link():
    import dataclasses

    log = chain(3)
    log[0] = dataclasses.replace(log[0], justification="something else")
    assert verify_audit_chain(log)[0].message == "chain broken at index 1"


def test_missing_justification_user_and_time_order():
    log = append_entry([], "2024-01-02T00:00:00Z", "", "add", ["a"], " ")
    log = append_entry(log, "2024-01-01T00:00:00Z", "bob", "remove", ["a"], "dup")
    msgs = [f.message for f in verify_audit_chain(log)]
    assert msgs == ["entry 0 has no justification", "entry 0 is not traced to a user",
                    "timestamp goes backwards at index 1"]


def test_audit_log_round_trip_and_validation():
    log = chain(2)
    assert load_audit_log(dump_audit_log(log)) == log
    with pytest.raises(ParseError):
        load_audit_log(dump_audit_log(log).replace(b'"modify"', b'"rename"'))


@given(st.integers(1, 8), st.data())
def test_prefixes_of_valid_chain_are_valid(n, data):
    log = chain(n)
    k = data.draw(st.integers(1, n))
    assert statuses(verify_audit_chain(log[:k])) == ["pass"]


# -- seals -------------------------------------------------------------------------


def test_single_item_seal():
    m = make_manifest([item("a", "test")])
    seal = seal_split(m, "test", SEALED_AT)
    d = item("a")["digest"]
    assert seal.commitment == sha256_digest((d + "\n").encode()) and seal.item_count == 1


def test_seal_empty_split_raises():
    with pytest.raises(EmptySplit):
        seal_split(make_manifest([item("a")]), "test")


def test_seal_fails_after_digest_change():
    m = make_manifest([item("a", "test"), item("b", "test")])
    seal = seal_split(m, "test", SEALED_AT)
    assert verify_seal(m, seal).status is Status.PASS
    changed = make_manifest([item("a", "test"), item("b", "test", digest=digest_of(b"other"))])
    f = verify_seal(changed, seal)
    assert f.status is Status.FAIL and "commitment mismatch" in f.message


def test_seal_fails_after_removal_with_count_message():
    m = make_manifest([item("a", "test"), item("b", "test")])
    seal = seal_split(m, "test", SEALED_AT)
    f = verify_seal(make_manifest([item("a", "test"), item("b")]), seal)
    assert f.status is Status.FAIL and "item count mismatch" in f.message


def test_seal_file_round_trip():
    seal = seal_split(make_manifest([item("a", "test")]), "test", SEALED_AT)
    import json

    assert load_seal(json.dumps(seal.to_dict()).encode()) == seal
    with pytest.raises(ParseError):
        load_seal(json.dumps({**seal.to_dict(), "commitment": "nope"}).encode())


@given(st.lists(st.binary(max_size=8), min_size=1, max_size=12, unique=True), st.randoms(use_true_random=False))
def test_commitment_is_order_invariant(blobs, rnd):
    digests = [sha256_digest(b) for b in blobs]
    shuffled = digests[:]
    rnd.shuffle(shuffled)
    assert commitment_for(digests) == commitment_for(shuffled)
    assert SealCommitment("test", len(digests), commitment_for(digests), SEALED_AT).item_count == len(blobs)
