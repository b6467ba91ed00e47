"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

from __future__ import annotations

import dataclasses
import itertools
import json
import os
import random
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from dds_gate import synth
from dds_gate.annotation import cohen_kappa, run_pvalue_exhaustive
from dds_gate.cli import run_cli
from dds_gate.findings import Status, severity
from dds_gate.integrity import seal_split, verify_item_digests, verify_seal
from dds_gate.manifest import Manifest, load_manifest
from dds_gate.odd import ExpectedDistribution, proportion_check
from dds_gate.splits import BoundInputs, bound, near_duplicate_leakage, required_test_size, test_bound as upper_bound
from conftest import GENERATED_AT, check_report, rec_statuses, verdict
from helpers import item, make_manifest
from oracles import bound_mp, kappa_from_table, run_pvalue_enumeration, run_pvalues_enumerated


def per_call_seconds(fn, calls: int = 2000) -> float:
    """Best of five batches, per call."""
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(calls):
            fn()
        best = min(best, (time.perf_counter() - t0) / calls)
    return best


def leakage_oracle(ids: list[str], splits: list[str], hashes: list[int], max_distance: int) -> set[tuple[str, str, int]]:
    """All pairs by vectorised XOR and byte-table popcount; no banding."""
    h = np.array(hashes, dtype=np.uint64)
    table = np.array([bin(b).count("1") for b in range(256)], dtype=np.uint8)
    split_code = np.unique(np.array(splits), return_inverse=True)[1]
    out = set()
    for i in range(len(h)):
        x = (h[i + 1:] ^ h[i]).view(np.uint8).reshape(-1, 8)
        d = table[x].sum(axis=1)
        for j in np.flatnonzero((d <= max_distance) & (split_code[i + 1:] != split_code[i])):
            a, b = sorted((ids[i], ids[i + 1 + j]))
            out.add((a, b, int(d[j])))
    return out


# -- 1 ----------------------------------------------------------------------------


def test_criterion_01_bound_arithmetic():
    a = upper_bound(BoundInputs(0.0, 1000, 0.05))
    b = upper_bound(BoundInputs(0.01, 10000, 0.01))
    ref_a, ref_b = float(bound_mp(0, 1000, "0.05")), float(bound_mp("0.01", 10000, "0.01"))
    cost = per_call_seconds(lambda: upper_bound(BoundInputs(0.01, 10000, 0.01)))
    ok = (abs(a - 0.005991465) <= 1e-9 and abs(b - 0.01395589) <= 1e-7
          and abs(a - ref_a) <= 1e-15 and abs(b - ref_b) <= 1e-15 and cost < 1e-3)
    verdict(1, ok, f"bound={a:.12f}, {b:.12f} (mpmath {ref_a:.12f}, {ref_b:.12f}); {cost * 1e6:.1f} us per call")


# -- 2 ----------------------------------------------------------------------------


def test_criterion_02_inversion_minimality():
    rng = random.Random(20240601)
    triples = []
    for _ in range(1000):
        p = rng.uniform(0, 0.2)
        delta = rng.uniform(0.001, 0.2)
        target = p + rng.uniform(1e-9, 0.1)
        triples.append((p, delta, min(target, p + 0.1)))
    t0 = time.perf_counter()
    ns = [required_test_size(p, t, d) for p, d, t in triples]
    elapsed = time.perf_counter() - t0
    bad = [(p, d, t, n) for (p, d, t), n in zip(triples, ns)
           if not (bound(p, n, d) <= t and (n == 1 or t < bound(p, n - 1, d)))]
    spot = required_test_size(0.0, 0.001, 0.05)
    ok = not bad and spot == 5992 and elapsed < 1.0
    verdict(2, ok, f"{1000 - len(bad)}/1000 minimal, spot (0, 0.05, 0.001) -> {spot}; {elapsed:.3f} s total")


# -- 3 ----------------------------------------------------------------------------


def test_criterion_03_run_test_oracle():
    rng = random.Random(3)
    worst_err = 0.0
    cases = 0
    for k in (1, 2, 3):
        weights = [rng.randint(1, 9) for _ in range(k)]
        probs = [w / sum(weights) for w in weights]
        for m in range(1, 13):
            want = run_pvalues_enumerated(weights, m)
            for run in range(1, m + 1):
                worst_err = max(worst_err, abs(run_pvalue_exhaustive(probs, m, run) - float(want[run - 1])))
                cases += 1
    # the itertools/Fraction oracle cross-checks the table oracle on small cases
    for m, run in ((4, 3), (6, 2), (7, 4)):
        assert run_pvalue_enumeration([Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)], m, run) == \
            float(run_pvalues_enumerated([3, 2, 1], m)[run - 1])
    hand = run_pvalue_exhaustive([0.5, 0.5], 4, 3)
    ok = worst_err <= 1e-12 and hand == 0.375
    verdict(3, ok, f"{cases} (m, k, run) cases, max |diff| {worst_err:.2e}; m=4 k=2 run>=3 -> {hand}")


# -- 4 ----------------------------------------------------------------------------


def test_criterion_04_kappa():
    perfect = cohen_kappa(list("ABABABABAB"), list("ABABABABAB")).kappa
    a = ["A"] * 4 + ["B"] * 4 + ["A", "B"]
    b = ["A"] * 4 + ["B"] * 4 + ["B", "A"]
    table = cohen_kappa(a, b).kappa
    rng = random.Random(4)
    renaming_ok = 0
    for _ in range(100):
        n = rng.randint(2, 40)
        alphabet = list("ABCDE")[: rng.randint(2, 5)]
        x = [rng.choice(alphabet) for _ in range(n)]
        y = [xi if rng.random() < 0.7 else rng.choice(alphabet) for xi in x]
        perm = alphabet[:]
        rng.shuffle(perm)
        rename = {s: f"label_{t}" for s, t in zip(alphabet, perm)}
        k1 = cohen_kappa(x, y)
        k2 = cohen_kappa([rename[v] for v in x], [rename[v] for v in y])
        renaming_ok += abs(k1.kappa - k2.kappa) <= 1e-12
    exact = float(kappa_from_table([[4, 1], [1, 4]]))
    ok = abs(perfect - 1) <= 1e-12 and abs(table - 0.6) <= 1e-12 and abs(exact - 0.6) <= 1e-12 and renaming_ok == 100
    verdict(4, ok, f"perfect {perfect}, 4/4/1/1 table {table:.15f}, renaming invariant on {renaming_ok}/100")


# -- 5 ----------------------------------------------------------------------------


def leakage_fixture(seed: int) -> tuple[Manifest, list[str], list[str], list[int], list[tuple[str, str]]]:
    rng = random.Random(seed)
    n = rng.randint(200, 2000)
    splits_of = ["train", "validation", "test"]
    ids = [f"r{i:04d}" for i in range(n - 5)]
    splits = [rng.choice(splits_of) for _ in ids]
    hashes = [rng.getrandbits(64) for _ in ids]
    planted = []
    for k in range(5):
        src = rng.randrange(len(ids))
        h = hashes[src]
        for bit in rng.sample(range(64), rng.randint(0, 3)):
            h ^= 1 << bit
        other = rng.choice([s for s in splits_of if s != splits[src]])
        planted.append(tuple(sorted((ids[src], f"p{k}"))))
        ids.append(f"p{k}")
        splits.append(other)
        hashes.append(h)
    rows = [item(i, s, simhash64=h) for i, s, h in zip(ids, splits, hashes)]
    return make_manifest(rows), ids, splits, hashes, planted


def test_criterion_05_leakage_oracle():
    mismatched = []
    slowest = 0.0
    sizes = []
    for seed in range(50):
        m, ids, splits, hashes, planted = leakage_fixture(seed)
        sizes.append(len(ids))
        t0 = time.perf_counter()
        pairs = near_duplicate_leakage(m, 3, 4)
        slowest = max(slowest, time.perf_counter() - t0)
        got = {(p.item_a, p.item_b, p.distance) for p in pairs}
        want = leakage_oracle(ids, splits, hashes, 3)
        if got != want or not set(planted) <= {(a, b) for a, b, _ in got}:
            mismatched.append(seed)
    ok = not mismatched and slowest < 5.0 and max(sizes) <= 2000
    verdict(5, ok, f"{50 - len(mismatched)}/50 fixtures (n {min(sizes)}..{max(sizes)}) equal brute force; "
                   f"slowest {slowest:.3f} s")


# -- 6 ----------------------------------------------------------------------------


def test_criterion_06_integrity_sensitivity():
    fx = synth.golden(synth.FixtureConfig(n_items=1000, n_test=300, n_validation=100, seed=6))
    m = load_manifest(synth._jsonl([fx.header, *fx.items]))
    contents = dict(fx.contents)
    clean = all(f.status is Status.PASS for f in verify_item_digests(m, contents))
    rng = random.Random(6)
    ids = sorted(contents)
    exact = 0
    for _ in range(100):
        victim = rng.choice(ids)
        data = bytearray(contents[victim])
        pos = rng.randrange(len(data))
        data[pos] = (data[pos] + rng.randint(1, 255)) % 256
        mutated = {**contents, victim: bytes(data)}
        named = {e for f in verify_item_digests(m, mutated) if f.rec_id == 22 and f.status is Status.FAIL
                 for e in f.evidence}
        exact += named == {victim}
    seal = seal_split(m, "test", GENERATED_AT)
    round_trip = verify_seal(m, seal).status is Status.PASS
    test_idx = [k for k, it in enumerate(m.items) if it.split == "test"]
    caught = 0
    for k in test_idx:
        items = list(m.items)
        items[k] = dataclasses.replace(items[k], digest="sha256:" + format(k, "064x"))
        caught += verify_seal(Manifest(m.header, tuple(items)), seal).status is Status.FAIL
    ok = clean and exact == 100 and round_trip and caught == len(test_idx)
    verdict(6, ok, f"{exact}/100 mutations named exactly; seal round-trip {'ok' if round_trip else 'BROKEN'}, "
                   f"{caught}/{len(test_idx)} test-digest changes caught")


# -- 7 ----------------------------------------------------------------------------


def test_criterion_07_tv_distance():
    expected = ExpectedDistribution({"fog": {"strong": 0.5, "low": 0.3, "no": 0.2}})

    def tv(counts):
        rows = [item(f"{lv}{k}", "test", odd={"fog": lv}) for lv, c in counts.items() for k in range(c)]
        (f,) = proportion_check(make_manifest(rows), "test", expected, 0.05)
        return f.metrics["tv_distance"]

    off = tv({"strong": 60, "low": 25, "no": 15})
    exact = [tv({"strong": 50 * s, "low": 30 * s, "no": 20 * s}) for s in (1, 2, 7)]
    ok = abs(off - 0.10) <= 1e-12 and exact == [0.0, 0.0, 0.0]
    verdict(7, ok, f"TV {off!r} for 60/25/15; exact-match TVs {exact}")


# -- 8 ----------------------------------------------------------------------------


def test_criterion_08_report_totality_and_determinism(golden_paths, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"in-process-{k}.json"
        run_cli(["check", *golden_paths.check_args(), "--all", "--output", str(out), "--generated-at", GENERATED_AT])
        outs.append(out.read_bytes())
    # a fresh interpreter with a different hash seed stands in for another platform
    out = tmp_path / "subprocess.json"
    env = {**os.environ, "PYTHONHASHSEED": "12345"}
    subprocess.run([sys.executable, "-m", "dds_gate.cli", "check", *golden_paths.check_args(), "--all",
                    "--output", str(out), "--generated-at", GENERATED_AT], env=env, check=False)
    outs.append(out.read_bytes())
    empty = tmp_path / "empty.json"
    empty_manifest = tmp_path / "m.jsonl"
    empty_manifest.write_bytes(synth._jsonl([synth.golden(synth.FixtureConfig(n_items=40, n_test=10,
                                                                              n_validation=5)).header]))
    run_cli(["check", "--manifest", str(empty_manifest), "--output", str(empty), "--generated-at", GENERATED_AT])
    counts = [len(json.loads(b)["entries"]) for b in [*outs, empty.read_bytes()]]
    rec_ids = [[e["rec_id"] for e in json.loads(b)["entries"]] for b in outs]
    ok = counts == [44] * 4 and all(r == list(range(1, 45)) for r in rec_ids) and len(set(outs)) == 1
    verdict(8, ok, f"entry counts {counts}; {len(set(outs))} distinct render(s) over 3 runs")


# -- 9 ----------------------------------------------------------------------------


def test_criterion_09_end_to_end_gate(golden_fixture, golden_run, tmp_path):
    code, report = golden_run
    base = rec_statuses(report)
    problems = [] if code == 0 else [f"golden exit {code}"]
    for name, (rec, _) in synth.DEFECTS.items():
        paths = synth.write_fixture(synth.planted(golden_fixture, name), tmp_path / name)
        dcode, drep = check_report(paths, tmp_path / f"{name}.json")
        st = rec_statuses(drep)
        regressed = sorted(r for r in st if r != rec and severity(Status(st[r])) > severity(Status(base[r])))
        if dcode != 1 or st[rec] != "fail" or regressed:
            problems.append(f"{name}: exit {dcode}, REC {rec} {st[rec]}, regressed {regressed}")
    ok = not problems
    verdict(9, ok, "golden exit 0; 8/8 defects fail only their REC" if ok else "; ".join(problems))


# -- 10 ---------------------------------------------------------------------------


def calibration_seconds() -> float:
    t0 = time.perf_counter()
    sum(range(3 * 10**7))
    return time.perf_counter() - t0


@pytest.mark.slow
def test_criterion_10_scale(tmp_path):
    paths = synth.write_fixture(synth.scale(100_000, seed=0), tmp_path / "scale")
    out = tmp_path / "report.json"
    argv = [sys.executable, "-m", "dds_gate.cli", "check", *paths.check_args(), "--all",
            "--output", str(out), "--generated-at", GENERATED_AT]
    calib = calibration_seconds()
    os.sync()  # fixture write-back is not part of the gate run
    t0 = time.perf_counter()
    proc = subprocess.run(argv, capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    doc = json.loads(out.read_text())
    n_annotators = len({json.loads(line)["annotator"] for line in paths.annotations.read_text().splitlines()})
    ok = proc.returncode == 0 and elapsed < 10.0 and len(doc["entries"]) == 44 and n_annotators == 3
    verdict(10, ok, f"100000 items, {n_annotators} annotators: exit {proc.returncode} in {elapsed:.2f} s "
                    f"(limit 10 s; box calibration sum(range(3e7)) = {calib:.2f} s)")
