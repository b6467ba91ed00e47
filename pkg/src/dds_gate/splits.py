"""Audits of declared train/validation/test partitions and the test-set size bound."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidBanding, InvalidParameter, MissingLabels
from .findings import Finding, Status
from .manifest import DataItem, Manifest
from .odd import CellMemo, OddSchema

EVAL_SPLITS = ("train", "validation", "test")


# -- test-set size bound ---------------------------------------------------------


@dataclass(frozen=True)
class BoundInputs:
    """Observed error rate ``p_hat`` on ``n`` test items at confidence ``1 - delta``."""

    p_hat: float
    n: int
    delta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_hat <= 1.0:
            raise InvalidParameter(f"p_hat must lie in [0, 1], got {self.p_hat!r}")
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise InvalidParameter(f"n must be a positive integer, got {self.n!r}")
        _check_delta(self.delta)


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise InvalidParameter(f"delta must lie in (0, 1), got {delta!r}")


def test_bound(inputs: BoundInputs) -> float:
    """Upper confidence bound on the true error rate.

    With probability at least ``1 - delta`` the true rate is below
    ``p_hat + sqrt(2 p_hat ln(1/delta) / n) + 2 ln(1/delta) / n``, assuming
    i.i.d. test items drawn from the target distribution.
    """
    log_term = math.log(1.0 / inputs.delta)
    return inputs.p_hat + math.sqrt(2.0 * inputs.p_hat * log_term / inputs.n) + 2.0 * log_term / inputs.n


test_bound.__test__ = False  # type: ignore[attr-defined]


def bound(p_hat: float, n: int, delta: float) -> float:
    return test_bound(BoundInputs(p_hat, n, delta))


def required_test_size(p_hat: float, target_upper: float, delta: float) -> int:
    """Smallest n whose bound is at most ``target_upper``.

    The bound strictly decreases in n, so doubling brackets the answer and a
    binary search pins it down.
    """
    _check_delta(delta)
    if not 0.0 <= p_hat <= 1.0:
        raise InvalidParameter(f"p_hat must lie in [0, 1], got {p_hat!r}")
    if not target_upper > p_hat:
        raise InvalidParameter(f"target {target_upper!r} is unreachable for p_hat {p_hat!r}")
    hi = 1
    while bound(p_hat, hi, delta) > target_upper:
        hi *= 2
    lo = hi // 2  # bound(lo) > target, or lo == 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bound(p_hat, mid, delta) <= target_upper:
            hi = mid
        else:
            lo = mid
    return hi


def check_test_size(manifest: Manifest, p_hat: float, delta: float, target_upper: float) -> list[Finding]:
    """REC 44 applied to the declared test split (items counted, not groups)."""
    test = manifest.split_items("test")
    n = len(test)
    required = required_test_size(p_hat, target_upper, delta)
    if n == 0:
        return [Finding(44, Status.FAIL, "no test items", metrics={"required_n": required})]
    b = bound(p_hat, n, delta)
    metrics = {"n": n, "required_n": required, "bound": b, "p_hat": p_hat, "delta": delta, "target": target_upper}
    note = ("valid for i.i.d. items drawn from the target distribution; "
            "test-split representativeness is assessed under REC 6")
    findings = []
    if n >= required:
        findings.append(Finding(44, Status.PASS, f"test size {n} >= {required} required (bound {b:.6g}); {note}",
                                metrics=metrics))
    else:
        findings.append(Finding(44, Status.FAIL, f"test size {n} < {required} required (bound {b:.6g} > "
                                                 f"{target_upper:g}); {note}", metrics=metrics))
    sizes: dict[str, int] = defaultdict(int)
    for it in test:
        if it.group_id is not None:
            sizes[it.group_id] += 1
    correlated = sorted(g for g, c in sizes.items() if c > 1)
    if correlated:
        findings.append(Finding(44, Status.WARN, f"{len(correlated)} group(s) contribute several test items; "
                                                 "the effective sample size may be smaller than the item count",
                                tuple(correlated), {"test_groups": len(correlated)}))
    return findings


# -- disjointness and groups -----------------------------------------------------------


def _spanning(manifest: Manifest, key: Callable[[DataItem], str | None]) -> dict[str, dict[str, list[str]]]:
    """Keys whose assigned (non-``unassigned``) items fall in more than one split."""
    first: dict[str, str] = {}
    spanning: set[str] = set()
    for it in manifest.items:
        k = key(it)
        if k is None or it.split == "unassigned":
            continue
        if first.setdefault(k, it.split) != it.split:
            spanning.add(k)
    out: dict[str, dict[str, list[str]]] = {k: defaultdict(list) for k in sorted(spanning)}
    if spanning:
        for it in manifest.items:
            k = key(it)
            if k in out and it.split != "unassigned":
                out[k][it.split].append(it.id)
    return out


def check_disjoint(manifest: Manifest) -> list[Finding]:
    """REC 39: no content digest may appear in two evaluation splits."""
    findings = []
    for digest, splits in _spanning(manifest, lambda it: it.digest).items():
        ids = sorted(i for group in splits.values() for i in group)
        findings.append(Finding(39, Status.FAIL, f"content {digest} appears in splits {sorted(splits)}", tuple(ids)))
    unassigned = sorted(it.id for it in manifest.items if it.split == "unassigned")
    if unassigned:
        findings.append(Finding(39, Status.WARN, f"{len(unassigned)} item(s) not assigned to a split",
                                tuple(unassigned), {"unassigned": len(unassigned)}))
    if not any(f.status is Status.FAIL for f in findings):
        findings.append(Finding(39, Status.PASS, "train, validation and test splits share no content"))
    return findings


def check_group_integrity(manifest: Manifest) -> list[Finding]:
    """REC 43: correlated groups and augmentations stay within one split."""
    findings = []
    for gid, splits in _spanning(manifest, lambda it: it.group_id).items():
        ids = sorted(i for group in splits.values() for i in group)
        findings.append(Finding(43, Status.FAIL, f"group {gid} spans splits {sorted(splits)}", tuple(ids)))
    by_id = manifest.by_id
    derived = sorted((it for it in manifest.items if it.lineage.transforms), key=lambda x: x.id)
    for it in derived:
        for parent_id in it.lineage.parents():
            parent = by_id.get(parent_id)
            if parent is None or it.split == "unassigned" or parent.split == "unassigned":
                continue
            if parent.split != it.split:
                findings.append(Finding(43, Status.FAIL, f"augmentation crosses split: {it.id} ({it.split}) "
                                                         f"derives from {parent.id} ({parent.split})",
                                        (it.id, parent.id)))
    if not findings:
        groups = len({it.group_id for it in manifest.items if it.group_id is not None and it.split != "unassigned"})
        findings.append(Finding(43, Status.PASS, "groups and augmentations confined to single splits",
                                metrics={"groups": groups}))
    return findings


# -- near duplicates -------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class LeakagePair:
    item_a: str
    item_b: str
    kind: str
    distance: int


def hamming(a: int, b: int) -> int:
    return (a ^ b).bit_count()


def _validate_banding(max_distance: int, bands: int) -> None:
    if bands < 1 or 64 % bands:
        raise InvalidBanding(f"bands must divide 64, got {bands}")
    if not 0 <= max_distance < bands:
        raise InvalidBanding(f"max_distance must lie in [0, bands), got {max_distance} with {bands} bands")


def popcount64(x: np.ndarray) -> np.ndarray:
    """Number of set bits in each element of a uint64 array."""
    x = x.astype(np.uint64, copy=True)
    x -= (x >> np.uint64(1)) & np.uint64(0x5555555555555555)
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return ((x * np.uint64(0x0101010101010101)) >> np.uint64(56)).astype(np.int64)


def near_duplicate_leakage(manifest: Manifest, max_distance: int = 3, bands: int = 4) -> list[LeakagePair]:
    """Cross-split pairs whose simhashes differ in at most ``max_distance`` bits.

    Hashes are cut into ``bands`` equal segments. Two hashes at distance
    ``<= bands - 1`` agree on at least one whole segment (pigeonhole), so
    bucketing by (segment index, segment value) finds every such pair.
    """
    _validate_banding(max_distance, bands)
    width = 64 // bands
    mask = np.uint64((1 << width) - 1)
    items = [it for it in manifest.items if it.simhash64 is not None and it.split in EVAL_SPLITS]
    n = len(items)
    if n < 2:
        return []
    h = np.fromiter((it.simhash64 for it in items), dtype=np.uint64, count=n)
    split = np.fromiter((EVAL_SPLITS.index(it.split) for it in items), dtype=np.int8, count=n)
    firsts, seconds = [], []
    for b in range(bands):
        seg = (h >> np.uint64(b * width)) & mask
        order = np.argsort(seg, kind="stable")
        s = seg[order]
        # Members of one bucket are contiguous after sorting; pair each with
        # the members d places later until no bucket is that large.
        for d in range(1, n):
            same = s[d:] == s[:-d]
            if not same.any():
                break
            firsts.append(order[:-d][same])
            seconds.append(order[d:][same])
    if not firsts:
        return []
    i = np.concatenate(firsts)
    j = np.concatenate(seconds)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    cross = split[lo] != split[hi]
    codes = np.unique(lo[cross].astype(np.int64) * n + hi[cross])
    lo, hi = codes // n, codes % n
    dist = popcount64(h[lo] ^ h[hi])
    keep = dist <= max_distance
    pairs = []
    for a_idx, b_idx, d in zip(lo[keep].tolist(), hi[keep].tolist(), dist[keep].tolist()):
        a, b = items[a_idx], items[b_idx]
        first, second = sorted((a, b), key=lambda it: it.id)
        kind = "exact" if a.digest == b.digest else "near"
        pairs.append(LeakagePair(first.id, second.id, kind, d))
    return sorted(pairs)


def check_near_duplicates(manifest: Manifest, max_distance: int = 3, bands: int = 4) -> list[Finding]:
    pairs = near_duplicate_leakage(manifest, max_distance, bands)
    split = {it.id: it.split for it in manifest.items}
    findings = [
        Finding(43, Status.FAIL, f"{p.kind} duplicate across splits: {p.item_a} ({split[p.item_a]}) ~ "
                                 f"{p.item_b} ({split[p.item_b]}), hamming {p.distance}",
                (p.item_a, p.item_b), {"hamming": p.distance})
        for p in pairs
    ]
    skipped = sorted(it.id for it in manifest.items if it.simhash64 is None and it.split in EVAL_SPLITS)
    if skipped:
        findings.append(Finding(43, Status.WARN, f"{len(skipped)} item(s) without simhash64 not screened for "
                                                 "near duplicates", tuple(skipped), {"unscreened": len(skipped)}))
    if not pairs:
        findings.append(Finding(43, Status.PASS, f"no cross-split near duplicates within hamming {max_distance}",
                                metrics={"max_distance": max_distance}))
    return findings


# -- bias ------------------------------------------------------------------------------


def bias_scan(
    manifest: Manifest,
    schema: OddSchema,
    purity_threshold: float = 0.99,
    min_support: int = 30,
    split: str | None = "train",
) -> list[Finding]:
    """REC 42: flag ODD levels that (almost) determine the label.

    A level is flagged when some label covers at least ``purity_threshold`` of
    its items while that label's overall frequency stays below the threshold.
    """
    if not 0.0 < purity_threshold <= 1.0:
        raise InvalidParameter("purity_threshold must lie in (0, 1]")
    items = [it for it in manifest.items if split is None or it.split == split]
    labelled = [it for it in items if it.label is not None]
    if not labelled:
        raise MissingLabels(f"no labelled items in {split or 'any'} split")
    n = len(labelled)
    global_counts: dict[str, int] = defaultdict(int)
    for it in labelled:
        global_counts[it.label] += 1
    findings = []
    scanned = 0
    for dim in schema.dimensions:
        cells: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
        memo = CellMemo(dim)
        for it in labelled:
            if dim.name in it.odd:
                cell = memo.cell(it.odd[dim.name])
                if cell is not None:
                    cells[cell][it.label] += 1
        for cell in sorted(cells):
            by_label = cells[cell]
            support = sum(by_label.values())
            if support < min_support:
                continue
            scanned += 1
            for label in sorted(by_label):
                cond = by_label[label] / support
                glob = global_counts[label] / n
                if cond >= purity_threshold and glob < purity_threshold:
                    findings.append(Finding(
                        42, Status.FAIL,
                        f"{dim.name}={cell} almost determines label {label!r} "
                        f"(conditional {cond:.3f} vs overall {glob:.3f}, support {support})",
                        metrics={"conditional_frequency": cond, "global_frequency": glob, "support": support},
                    ))
    if not findings:
        findings.append(Finding(42, Status.PASS, f"no confounding ODD level among {scanned} with support >= "
                                                 f"{min_support}", metrics={"levels_scanned": scanned}))
    return findings
