"""Merge findings and attestations into a total REC 1..44 report and render it."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from decimal import Decimal
from typing import Any, Iterable, Sequence

from . import __version__
from .errors import RegistryViolation
from .findings import STATUS_ORDER, Finding, Status, merge_findings, severity, worst
from .manifest import AttestationRecord
from .registry import DEFAULT_REGISTRY, RecRegistry

REPORT_SCHEMA_VERSION = "dds-report/1"
BLOCKING = frozenset({Status.FAIL, Status.ATTESTED_FAIL, Status.MANUAL_PENDING})
CHECK_NOT_RUN = "check not run"
ATTESTATION_MISSING = "attestation missing"


@dataclass(frozen=True)
class ReportEntry:
    rec_id: int
    title: str
    mode: str
    section: str
    status: Status
    automated: Finding | None
    attestation: AttestationRecord | None

    @property
    def attestation_status(self) -> Status | None:
        if self.mode == "automated":
            return None
        return Status(self.attestation.status) if self.attestation else Status.MANUAL_PENDING

    @property
    def message(self) -> str:
        parts = []
        if self.automated is not None:
            parts.append(self.automated.message)
        if self.mode != "automated":
            if self.attestation is None:
                parts.append(ATTESTATION_MISSING)
            else:
                note = f": {self.attestation.note}" if self.attestation.note else ""
                parts.append(f"{self.attestation.status} by {self.attestation.by} on {self.attestation.date}{note}")
        return "\n".join(parts)


def exit_code_for(statuses: Iterable[Status], lenient: bool = False) -> int:
    blocking = BLOCKING - {Status.MANUAL_PENDING} if lenient else BLOCKING
    return 1 if any(Status(s) in blocking for s in statuses) else 0


@dataclass(frozen=True)
class ComplianceReport:
    dataset_id: str
    generated_at: str
    tool_version: str
    entries: tuple[ReportEntry, ...]
    lenient: bool = False

    @property
    def summary(self) -> dict[str, int]:
        counts = {s.value: 0 for s in STATUS_ORDER}
        for e in self.entries:
            counts[e.status.value] += 1
        return counts

    @property
    def worst_status(self) -> Status:
        return worst(e.status for e in self.entries)

    @property
    def exit_code(self) -> int:
        return exit_code_for((e.status for e in self.entries), self.lenient)

    def entry(self, rec_id: int) -> ReportEntry:
        return self.entries[rec_id - 1]

    def findings(self) -> list[Finding]:
        return [e.automated for e in self.entries if e.automated is not None]

    def attestations(self) -> list[AttestationRecord]:
        return [e.attestation for e in self.entries if e.attestation is not None]


def _pick_attestation(records: Sequence[AttestationRecord]) -> AttestationRecord:
    """Latest by date; ties broken toward the worse status."""
    return max(records, key=lambda a: (a.date, severity(Status(a.status)), a.by, a.note))


def assemble(
    findings: Iterable[Finding],
    attestations: Iterable[AttestationRecord] = (),
    registry: RecRegistry = DEFAULT_REGISTRY,
    dataset_id: str = "",
    generated_at: str = "",
    lenient: bool = False,
) -> ComplianceReport:
    """Total map REC id -> entry; absent evidence becomes ``manual_pending``."""
    by_rec: dict[int, list[Finding]] = defaultdict(list)
    for f in findings:
        if not registry[f.rec_id].takes_findings:
            raise RegistryViolation(f"REC {f.rec_id} is attestation-only but received a finding")
        by_rec[f.rec_id].append(f)
    att_by_rec: dict[int, list[AttestationRecord]] = defaultdict(list)
    for a in attestations:
        if not registry[a.rec_id].takes_attestation:
            raise RegistryViolation(f"REC {a.rec_id} is automated-only but received an attestation")
        att_by_rec[a.rec_id].append(a)

    entries = []
    for rec_id in registry:
        spec = registry[rec_id]
        automated = None
        halves = []
        if spec.takes_findings:
            if by_rec[rec_id]:
                automated = merge_findings(by_rec[rec_id])
            else:
                automated = Finding(rec_id, Status.MANUAL_PENDING, CHECK_NOT_RUN)
            halves.append(automated.status)
        attestation = None
        if spec.takes_attestation:
            if att_by_rec[rec_id]:
                attestation = _pick_attestation(att_by_rec[rec_id])
                halves.append(Status(attestation.status))
            else:
                halves.append(Status.MANUAL_PENDING)
        entries.append(ReportEntry(rec_id, spec.title, spec.mode, spec.section, worst(halves), automated, attestation))
    return ComplianceReport(dataset_id, generated_at, __version__, tuple(entries), lenient)


# -- canonical JSON ----------------------------------------------------------------


def format_float(x: float) -> str:
    """Positional notation with 9 significant digits, e.g. 0.1 -> 0.100000000."""
    text = format(Decimal(f"{x:.8e}"), "f")
    return text if "." in text else text + ".0"


def canonical_json(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, fixed float format, ASCII only."""

    def enc(o: Any, level: int) -> str:
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None:
            return "null"
        if o is True:
            return "true"
        if o is False:
            return "false"
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return format_float(o) if math.isfinite(o) else "null"
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=True)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(o[k], level + 1)}" for k in sorted(o, key=str)]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot encode {type(o).__name__}")

    return enc(obj, 0) + "\n"


def entry_to_dict(e: ReportEntry) -> dict[str, Any]:
    auto = e.automated
    return {
        "rec_id": e.rec_id,
        "title": e.title,
        "mode": e.mode,
        "section": e.section,
        "status": e.status.value,
        "message": e.message,
        "evidence": list(auto.evidence) if auto else [],
        "metrics": dict(auto.metrics) if auto else {},
        "automated": auto.to_dict() if auto else None,
        "attestation": e.attestation.to_dict() if e.attestation else None,
    }


def report_to_dict(report: ComplianceReport) -> dict[str, Any]:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "dataset_id": report.dataset_id,
        "generated_at": report.generated_at,
        "tool_version": report.tool_version,
        "lenient": report.lenient,
        "worst_status": report.worst_status.value,
        "exit_code": report.exit_code,
        "summary": report.summary,
        "entries": [entry_to_dict(e) for e in report.entries],
    }


GLYPHS = {
    Status.PASS: "✔",
    Status.ATTESTED_PASS: "✔",
    Status.NOT_APPLICABLE: "·",
    Status.WARN: "!",
    Status.MANUAL_PENDING: "?",
    Status.ATTESTED_FAIL: "✘",
    Status.FAIL: "✘",
}


def render_text(report: ComplianceReport) -> str:
    lines = [
        f"dataset {report.dataset_id}  generated {report.generated_at}  dds-gate {report.tool_version}",
        "",
        f"{'REC':>3}  {'':1} {'status':<15} {'mode':<9} title",
    ]
    for e in report.entries:
        lines.append(f"{e.rec_id:>3}  {GLYPHS[e.status]} {e.status.value:<15} {e.mode:<9} {e.title}")
        if e.status not in (Status.PASS, Status.ATTESTED_PASS):
            for msg in e.message.split("\n")[:5]:
                lines.append(f"{'':>16}{msg}")
    summary = ", ".join(f"{k}={v}" for k, v in report.summary.items() if v)
    lines += ["", f"summary: {summary}", f"exit code: {report.exit_code}" + (" (lenient)" if report.lenient else "")]
    return "\n".join(lines) + "\n"


def render(report: ComplianceReport, fmt: str = "json") -> bytes:
    if fmt == "json":
        return canonical_json(report_to_dict(report)).encode("ascii")
    if fmt == "text":
        return render_text(report).encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")
