"""Label-quality statistics: audit sample sizing, agreement, run and randomness tests."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientData, InsufficientOverlap, InvalidParameter, UnknownField
from .findings import Finding, Status
from .manifest import AnnotationRecord, AnnotationSet, AttestationRecord, Manifest
from .consistency import _ABSENT, _getter
from .splits import required_test_size

EXHAUSTIVE_LIMIT = 2**20
MC_DRAWS = 100_000
# Monte Carlo cost is draws * length; past this budget the exact Markov-chain
# evaluation is used instead.
MC_BUDGET = 25_000_000
PERMUTATIONS = 10_000
PERMUTATION_BUDGET = 10_000_000


# -- audit sampling ----------------------------------------------------------------


def audit_sample_plan(population: int, delta: float, target_bound: float) -> int:
    """Items to audit so that zero observed errors bounds the error rate by ``target_bound``."""
    if isinstance(population, bool) or not isinstance(population, int) or population < 1:
        raise InvalidParameter(f"population must be a positive integer, got {population!r}")
    if not 0.0 < target_bound < 1.0:
        raise InvalidParameter(f"target_bound must lie in (0, 1), got {target_bound!r}")
    return min(required_test_size(0.0, target_bound, delta), population)


def sample_plan_findings(population: int, delta: float, target_bound: float) -> list[Finding]:
    required = required_test_size(0.0, target_bound, delta)
    n = audit_sample_plan(population, delta, target_bound)
    metrics = {"sample_size": n, "required": required, "population": population}
    if n < required:
        return [Finding(35, Status.WARN, f"population smaller than statistically required sample "
                                         f"({population} < {required}); audit every item", metrics=metrics)]
    return [Finding(35, Status.PASS, f"expert audit sample of {n} of {population} annotated items "
                                     f"(delta={delta:g}, bound {target_bound:g})", metrics=metrics)]


# -- agreement ---------------------------------------------------------------------


@dataclass(frozen=True)
class PairAgreement:
    annotator_a: str
    annotator_b: str
    n_shared: int
    p_o: float
    p_e: float
    kappa: float
    degenerate: bool = False


@dataclass(frozen=True)
class AgreementResult:
    pairs: tuple[PairAgreement, ...]
    overall: float


def _labels_by_annotator(annotations: Iterable[AnnotationRecord]) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = defaultdict(dict)
    for r in annotations:
        if r.annotator.strip():
            out[r.annotator][r.item_id] = r.label
    return out


def cohen_kappa(a: Sequence[str], b: Sequence[str]) -> PairAgreement:
    """Cohen's kappa for two aligned label sequences, computed from integer counts."""
    n = len(a)
    if n == 0 or n != len(b):
        raise InsufficientOverlap("kappa needs two equally long, non-empty label sequences")
    agree = sum(x == y for x, y in zip(a, b))
    ca, cb = Counter(a), Counter(b)
    chance = sum(ca[label] * cb[label] for label in ca)
    p_o = agree / n
    p_e = chance / (n * n)
    if chance == n * n:
        return PairAgreement("", "", n, p_o, p_e, 1.0, degenerate=True)
    kappa = (agree * n - chance) / (n * n - chance)
    return PairAgreement("", "", n, p_o, p_e, kappa)


def agreement(annotations: Iterable[AnnotationRecord]) -> AgreementResult:
    """Pairwise Cohen's kappa over shared items, averaged over pairs."""
    labels = _labels_by_annotator(annotations)
    pairs = []
    for a, b in combinations(sorted(labels), 2):
        shared = sorted(labels[a].keys() & labels[b].keys())
        if not shared:
            continue
        k = cohen_kappa([labels[a][i] for i in shared], [labels[b][i] for i in shared])
        pairs.append(PairAgreement(a, b, k.n_shared, k.p_o, k.p_e, k.kappa, k.degenerate))
    if not pairs:
        raise InsufficientOverlap("no two annotators share an item")
    return AgreementResult(tuple(pairs), math.fsum(p.kappa for p in pairs) / len(pairs))


def check_agreement(annotations: AnnotationSet, min_kappa: float = 0.6) -> list[Finding]:
    """REC 29: consistency between annotators measured on multiply-labelled items."""
    try:
        result = agreement(annotations)
    except InsufficientOverlap:
        return [Finding(29, Status.WARN, "no item labelled by two annotators; label consistency not measured")]
    findings = []
    for p in result.pairs:
        note = " (degenerate marginals)" if p.degenerate else ""
        status = Status.PASS if p.kappa >= min_kappa else Status.WARN
        findings.append(Finding(29, status, f"{p.annotator_a} vs {p.annotator_b}: kappa {p.kappa:.3f} over "
                                            f"{p.n_shared} shared items{note}", (p.annotator_a, p.annotator_b),
                                {"kappa": p.kappa, "n_shared": p.n_shared}))
    findings.append(Finding(29, Status.PASS if result.overall >= min_kappa else Status.WARN,
                            f"mean pairwise kappa {result.overall:.3f} (minimum {min_kappa:g})",
                            metrics={"mean_kappa": result.overall}))
    return findings


# -- object labels and ambiguity ------------------------------------------------------------


def check_object_label_consistency(
    manifest: Manifest, annotations: AnnotationSet | None, object_key: str
) -> list[Finding]:
    """REC 27: every occurrence of one object of interest carries the same label."""
    by_item = annotations.by_item() if annotations is not None else {}
    get_obj = _getter(object_key, "items")
    first: dict[str, str] = {}
    conflicted: set[str] = set()
    occurrences: list[tuple[str, str, str]] = []
    seen_key = False
    for it in manifest.items:
        obj = get_obj(it)
        if obj is _ABSENT:
            continue
        seen_key = True
        key = obj if type(obj) is str else str(obj)
        labels = (it.label,) if it.label is not None else [r.label for r in by_item.get(it.id, ())]
        for label in labels:
            occurrences.append((key, label, it.id))
            if first.setdefault(key, label) != label:
                conflicted.add(key)
    if not seen_key:
        raise UnknownField("object_label_consistency", object_key)
    by_label: dict[str, dict[str, set[str]]] = {k: defaultdict(set) for k in conflicted}
    for key, label, item_id in occurrences:
        if key in by_label:
            by_label[key][label].add(item_id)
    findings = []
    for obj in sorted(by_label):
        labels_of = by_label[obj]
        ids = sorted(set().union(*labels_of.values()))
        findings.append(Finding(27, Status.FAIL, f"object {obj} labelled inconsistently: {sorted(labels_of)}",
                                tuple(ids)))
    if not findings:
        findings.append(Finding(27, Status.PASS, f"{len(first)} object(s) labelled consistently",
                                metrics={"objects": len(first)}))
    return findings


def check_ambiguity_handling(
    manifest: Manifest, annotations: AnnotationSet, attestations: Iterable[AttestationRecord] = ()
) -> list[Finding]:
    """REC 31 (ambiguous items get a manual label) and REC 28 (expert ambiguity review)."""
    by_item = annotations.by_item()
    ambiguous = sorted(it.id for it in manifest.items if it.ambiguous)
    findings = []
    for item_id in ambiguous:
        recs = by_item.get(item_id, [])
        if recs and all(r.method == "automatic" for r in recs):
            findings.append(Finding(31, Status.FAIL, f"ambiguous item {item_id} labelled only automatically", (item_id,)))
    if not any(f.rec_id == 31 for f in findings):
        findings.append(Finding(31, Status.PASS, f"{len(ambiguous)} ambiguous item(s), none labelled only automatically",
                                metrics={"ambiguous": len(ambiguous)}))
    if not ambiguous:
        findings.append(Finding(28, Status.PASS, "no ambiguous items flagged; expert ambiguity review satisfied vacuously"))
    elif not any(a.rec_id == 28 for a in attestations):
        findings.append(Finding(28, Status.WARN, f"{len(ambiguous)} ambiguous item(s) but no expert review attested",
                                tuple(ambiguous), {"ambiguous": len(ambiguous)}))
    else:
        findings.append(Finding(28, Status.PASS, f"{len(ambiguous)} ambiguous item(s), expert review attested",
                                metrics={"ambiguous": len(ambiguous)}))
    return findings


# -- run-length test ------------------------------------------------------------------------


def longest_run(seq: Sequence[object]) -> int:
    best = cur = 0
    prev = object()
    for x in seq:
        cur = cur + 1 if x == prev else 1
        prev = x
        best = max(best, cur)
    return best


def _row_longest_runs(draws: np.ndarray) -> np.ndarray:
    """Longest run of equal values along axis 1 of a 2-D array."""
    rows, m = draws.shape
    cur = np.ones(rows, dtype=np.int64)
    best = np.ones(rows, dtype=np.int64)
    for t in range(1, m):
        same = draws[:, t] == draws[:, t - 1]
        cur = np.where(same, cur + 1, 1)
        np.maximum(best, cur, out=best)
    return best


def run_pvalue_exhaustive(probs: Sequence[float], m: int, run: int) -> float:
    """P(longest run >= ``run``) by summing over all k**m label sequences."""
    p = np.asarray(probs, dtype=float)
    k = len(p)
    total = k**m
    if total > EXHAUSTIVE_LIMIT:
        raise InvalidParameter(f"{k}**{m} sequences exceed the exhaustive limit")
    rem = np.arange(total, dtype=np.int64)
    prob = np.ones(total)
    cur = np.zeros(total, dtype=np.int64)
    best = np.zeros(total, dtype=np.int64)
    prev = np.full(total, -1, dtype=np.int64)
    for _ in range(m):
        d = rem % k
        rem //= k
        prob *= p[d]
        cur = np.where(d == prev, cur + 1, 1)
        np.maximum(best, cur, out=best)
        prev = d
    return float(min(1.0, prob[best >= run].sum()))


def run_pvalue_monte_carlo(
    probs: Sequence[float], m: int, run: int, seed: int, draws: int = MC_DRAWS, chunk: int = 10_000
) -> float:
    rng = np.random.default_rng(seed)
    p = np.asarray(probs, dtype=float)
    hits = 0
    done = 0
    while done < draws:
        rows = min(chunk, draws - done)
        sample = rng.choice(len(p), size=(rows, m), p=p)
        hits += int(np.count_nonzero(_row_longest_runs(sample) >= run))
        done += rows
    return hits / draws


def run_pvalue_markov(probs: Sequence[float], m: int, run: int) -> float:
    """Exact P(longest run >= ``run``) via the chain of (current label, run length)."""
    if run <= 1:
        return 1.0
    if run > m:
        return 0.0
    p = np.asarray(probs, dtype=float)
    k = len(p)
    width = run - 1  # tracked run lengths 1..run-1; reaching ``run`` is absorbed
    v = np.zeros((k, width))
    v[:, 0] = p
    steps = m - 1
    if k * width <= 300:
        size = k * width
        T = np.zeros((size, size))
        for i in range(k):
            for r in range(width):
                src = i * width + r
                if r + 1 < width:
                    T[src, i * width + r + 1] = p[i]
                for j in range(k):
                    if j != i:
                        T[src, j * width] = p[j]
        v = v.reshape(-1) @ np.linalg.matrix_power(T, steps)
        survive = float(v.sum())
    else:
        for _ in range(steps):
            row = v.sum(axis=1)
            nxt = np.empty_like(v)
            nxt[:, 0] = p * (row.sum() - row)
            nxt[:, 1:] = p[:, None] * v[:, :-1]
            v = nxt
        survive = float(v.sum())
    return min(1.0, max(0.0, 1.0 - survive))


@dataclass(frozen=True)
class RunTestResult:
    annotator: str
    longest_run: int
    labels_sequence_length: int
    p_value: float
    method: str
    seed: int | None = None
    draws: int | None = None
    run_label: str = ""

    def finding(self, alpha: float = 0.01) -> Finding:
        metrics = {"longest_run": self.longest_run, "p_value": self.p_value, "length": self.labels_sequence_length}
        detail = (f"{self.annotator}: longest run of {self.longest_run} x {self.run_label!r} in "
                  f"{self.labels_sequence_length} labels, p={self.p_value:.4g} ({self.method})")
        if self.p_value < alpha:
            return Finding(36, Status.FAIL, detail + f" < {alpha:g}; check this series", (self.annotator,), metrics)
        return Finding(36, Status.PASS, detail, (self.annotator,), metrics)


def run_length_test(
    annotations: AnnotationSet, annotator: str, seed: int = 0, draws: int = MC_DRAWS
) -> RunTestResult:
    """Is the annotator's longest same-label streak surprising under i.i.d. labelling?

    The null draws labels independently from the annotator's own label
    frequencies, so class imbalance alone does not raise alarms.
    """
    records = annotations.for_annotator(annotator)
    m = len(records)
    if m < 2:
        raise InsufficientData(f"annotator {annotator!r} has {m} record(s); need at least 2")
    labels = [r.label for r in records]
    counts = Counter(labels)
    alphabet = sorted(counts)
    probs = [counts[a] / m for a in alphabet]
    L = longest_run(labels)
    run_label = _run_label(labels, L)
    k = len(alphabet)
    if k == 1 or (m <= 64 and k**m <= EXHAUSTIVE_LIMIT):
        return RunTestResult(annotator, L, m, run_pvalue_exhaustive(probs, m, L), "exhaustive", run_label=run_label)
    if m * draws <= MC_BUDGET:
        p = run_pvalue_monte_carlo(probs, m, L, seed, draws)
        return RunTestResult(annotator, L, m, p, "monte_carlo", seed, draws, run_label)
    return RunTestResult(annotator, L, m, run_pvalue_markov(probs, m, L), "markov_chain", run_label=run_label)


def _run_label(labels: Sequence[str], length: int) -> str:
    cur = 0
    for i, x in enumerate(labels):
        cur = cur + 1 if i and x == labels[i - 1] else 1
        if cur == length:
            return x
    return ""


# -- assignment randomness ------------------------------------------------------------------


@dataclass(frozen=True)
class RandomnessResult:
    annotator: str
    n: int
    rho: float
    p_value: float
    method: str
    finding: Finding


def rankdata(x: Sequence[float]) -> np.ndarray:
    """Average ranks (1-based); ties share the mean of their positions."""
    a = np.asarray(x, dtype=float)
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    starts = np.concatenate(([True], sorted_a[1:] != sorted_a[:-1]))
    tie_id = np.cumsum(starts) - 1
    first = np.flatnonzero(starts)
    counts = np.diff(np.append(first, len(a)))
    avg = first + (counts + 1) / 2.0
    ranks = np.empty(len(a))
    ranks[order] = avg[tie_id]
    return ranks


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    rx = rankdata(x)
    ry = rankdata(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        return 0.0
    return float(rx @ ry) / denom


def _permutation_pvalue(x: Sequence[float], y: Sequence[float], rho: float, permutations: int, seed: int) -> float:
    rx = rankdata(x)
    ry = rankdata(y)
    rx = (rx - rx.mean()) / np.linalg.norm(rx - rx.mean())
    ry = (ry - ry.mean()) / np.linalg.norm(ry - ry.mean())
    rng = np.random.default_rng(seed)
    n = len(rx)
    chunk = max(1, min(permutations, 2_000_000 // max(n, 1)))
    hits = 0
    done = 0
    observed = abs(rho) - 1e-12
    while done < permutations:
        rows = min(chunk, permutations - done)
        perms = rng.permuted(np.broadcast_to(rx, (rows, n)), axis=1)
        hits += int(np.count_nonzero(np.abs(perms @ ry) >= observed))
        done += rows
    return (1 + hits) / (1 + permutations)


def assignment_randomness(
    annotations: AnnotationSet,
    annotator: str,
    seed: int = 0,
    permutations: int = PERMUTATIONS,
    rho_threshold: float = 0.5,
    alpha: float = 0.01,
    min_records: int = 10,
) -> RandomnessResult:
    """REC 37: rank correlation between processing order and storage position.

    The p-value comes from a seeded permutation test; when ``n * permutations``
    exceeds the compute budget the large-sample normal approximation
    ``rho * sqrt(n - 1) ~ N(0, 1)`` is used instead.
    """
    records = annotations.for_annotator(annotator)
    n = len(records)
    if n < min_records:
        f = Finding(37, Status.WARN, f"{annotator}: insufficient data ({n} < {min_records} records)", (annotator,))
        return RandomnessResult(annotator, n, float("nan"), float("nan"), "skipped", f)
    seq = [r.seq for r in records]
    pos = [r.storage_index for r in records]
    rho = spearman_rho(seq, pos)
    if len(set(seq)) < 2 or len(set(pos)) < 2:
        p, method = 1.0, "degenerate"
    elif n * permutations <= PERMUTATION_BUDGET:
        p, method = _permutation_pvalue(seq, pos, rho, permutations, seed), "permutation"
    else:
        p, method = math.erfc(abs(rho) * math.sqrt(n - 1) / math.sqrt(2)), "normal_approximation"
    metrics = {"rho": rho, "p_value": p, "n": n}
    detail = f"{annotator}: Spearman rho {rho:+.3f} between processing and storage order, p={p:.4g} ({method})"
    if abs(rho) > rho_threshold and p < alpha:
        f = Finding(37, Status.FAIL, detail + "; assignment follows storage order", (annotator,), metrics)
    else:
        f = Finding(37, Status.PASS, detail, (annotator,), metrics)
    return RandomnessResult(annotator, n, rho, p, method, f)
