"""Run the selected check groups over loaded inputs and collect findings.

A check that cannot run because an input is missing yields ``manual_pending``
findings carrying the reason, so the gate never passes on silence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import annotation, consistency, integrity, manifest as mf, odd, splits
from .config import GateConfig
from .errors import EmptySplit, InsufficientData, InvalidParameter, MissingLabels, UnknownField
from .findings import Finding, Status
from .registry import regrade

GROUPS = ("integrity", "odd", "consistency", "annotation", "splits")


@dataclass(frozen=True)
class GateInputs:
    manifest: mf.Manifest
    schema: odd.OddSchema | None = None
    annotations: mf.AnnotationSet | None = None
    attestations: Sequence[mf.AttestationRecord] = ()
    audit_log: Sequence[integrity.AuditLogEntry] | None = None
    rules: Sequence[consistency.ConsistencyRule] | None = None
    expected: odd.ExpectedDistribution | None = None
    resolver: Mapping[str, bytes] | None = None
    seal: integrity.SealCommitment | None = None


def pending(recs: Iterable[int], reason: str) -> list[Finding]:
    return [Finding(r, Status.MANUAL_PENDING, reason) for r in recs]


def integrity_checks(inp: GateInputs, cfg: GateConfig) -> list[Finding]:
    out = mf.check_lineage(inp.manifest)
    if inp.resolver is None:
        out += pending([22, 23], "no content location supplied; digests not recomputed")
    else:
        out += integrity.verify_item_digests(inp.manifest, inp.resolver)
    if inp.audit_log is None:
        out += pending([19], "no audit log supplied")
    else:
        out += integrity.verify_audit_chain(inp.audit_log)
    if inp.seal is None:
        out += pending([40], "no seal supplied for the test split")
    else:
        out.append(integrity.verify_seal(inp.manifest, inp.seal))
    return out


def odd_checks(inp: GateInputs, cfg: GateConfig) -> list[Finding]:
    if inp.schema is None:
        return pending([3, 4, 5, 6, 7], "no ODD schema supplied")
    schema = inp.schema
    out = odd.validate_schema(schema)
    out += odd.check_traceability(inp.manifest, schema, cfg.missing_dimension)
    out += odd.coverage(inp.manifest, schema, cfg.coverage_dims, cfg.min_count)[1]
    if inp.expected is None:
        out += pending([6], "no expected operational distribution declared")
    else:
        thresholds = {"default": cfg.tv_threshold, **cfg.tv_thresholds}
        try:
            out += odd.proportion_check(inp.manifest, cfg.proportion_split, inp.expected, thresholds, schema)
        except EmptySplit as exc:
            out.append(Finding(6, Status.FAIL, str(exc)))
    return out


def consistency_checks(inp: GateInputs, cfg: GateConfig) -> list[Finding]:
    out = []
    if inp.rules is None:
        out += pending([14, 15, 16], "no consistency rules supplied")
    else:
        out += consistency.check_rules(inp.manifest, inp.annotations, inp.rules)
    out += consistency.check_representation(inp.manifest)
    out += consistency.duplicate_findings(consistency.group_exact_duplicates(inp.manifest), inp.manifest)
    policy = consistency.OutlierPolicy(
        tuple(cfg.outlier_fields) if cfg.outlier_fields is not None else None,
        cfg.outlier_threshold,
        cfg.outlier_rel_epsilon,
    )
    out += consistency.detect_outliers(inp.manifest, policy)
    return out


def annotation_checks(inp: GateInputs, cfg: GateConfig) -> list[Finding]:
    m = inp.manifest
    out = []
    try:
        out += annotation.check_object_label_consistency(m, inp.annotations, cfg.object_key)
    except UnknownField:
        out += pending([27], f"no item carries the object key {cfg.object_key!r}")
    if inp.annotations is None:
        return out + pending([28, 29, 31, 35, 36, 37, 38], "no annotations supplied")
    ann = inp.annotations
    out += mf.check_annotation_traceability(ann, m)
    out += annotation.check_agreement(ann, cfg.min_kappa)
    out += annotation.check_ambiguity_handling(m, ann, inp.attestations)
    population = len({r.item_id for r in ann})
    if population:
        out += annotation.sample_plan_findings(population, cfg.audit_delta, cfg.audit_target)
    else:
        out += pending([35], "no annotated items to sample")
    annotators = [a for a in ann.annotators() if a.strip()]
    if not annotators:
        out += pending([36, 37], "no attributed annotations")
    for a in annotators:
        try:
            out.append(annotation.run_length_test(ann, a, cfg.seed, cfg.mc_draws).finding(cfg.run_test_alpha))
        except InsufficientData as exc:
            out.append(Finding(36, Status.WARN, str(exc), (a,)))
        out.append(annotation.assignment_randomness(
            ann, a, cfg.seed, cfg.permutations, cfg.rho_threshold, cfg.randomness_alpha, cfg.min_records
        ).finding)
    return out


def splits_checks(inp: GateInputs, cfg: GateConfig) -> list[Finding]:
    m = inp.manifest
    out = splits.check_disjoint(m)
    out += splits.check_group_integrity(m)
    out += splits.check_near_duplicates(m, cfg.max_distance, cfg.bands)
    if inp.schema is None:
        out += pending([42], "no ODD schema supplied for the bias scan")
    else:
        try:
            out += splits.bias_scan(m, inp.schema, cfg.purity_threshold, cfg.min_support, cfg.bias_split)
        except MissingLabels as exc:
            out += pending([42], f"bias scan not run: {exc}")
    out += splits.check_test_size(m, cfg.p_hat, cfg.delta, cfg.target_bound)
    return out


_RUNNERS = {
    "integrity": integrity_checks,
    "odd": odd_checks,
    "consistency": consistency_checks,
    "annotation": annotation_checks,
    "splits": splits_checks,
}


def run_checks(inputs: GateInputs, config: GateConfig | None = None, groups: Iterable[str] = GROUPS) -> list[Finding]:
    config = config or GateConfig()
    selected = set(groups)
    findings: list[Finding] = []
    for g in GROUPS:
        if g in selected:
            findings.extend(_RUNNERS[g](inputs, config))
    try:
        return regrade(findings, config.severity_overrides())
    except ValueError as exc:
        raise InvalidParameter(str(exc)) from None
