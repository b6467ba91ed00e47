from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping


class Status(str, enum.Enum):
    PASS = "pass"
    WARN = "warn"
    FAIL = "fail"
    MANUAL_PENDING = "manual_pending"
    ATTESTED_PASS = "attested_pass"
    ATTESTED_FAIL = "attested_fail"
    NOT_APPLICABLE = "not_applicable"

    def __str__(self) -> str:
        return self.value


# worst first
STATUS_ORDER: tuple[Status, ...] = (
    Status.FAIL,
    Status.ATTESTED_FAIL,
    Status.MANUAL_PENDING,
    Status.WARN,
    Status.NOT_APPLICABLE,
    Status.ATTESTED_PASS,
    Status.PASS,
)
_SEVERITY = {s: len(STATUS_ORDER) - i for i, s in enumerate(STATUS_ORDER)}


def severity(status: Status) -> int:
    """Larger is worse."""
    return _SEVERITY[Status(status)]


def worst(statuses: Iterable[Status]) -> Status:
    return max((Status(s) for s in statuses), key=severity)


@dataclass(frozen=True)
class Finding:
    rec_id: int
    status: Status
    message: str
    evidence: tuple[str, ...] = ()
    metrics: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 1 <= self.rec_id <= 44:
            raise ValueError(f"rec_id out of range: {self.rec_id}")
        object.__setattr__(self, "status", Status(self.status))
        object.__setattr__(self, "evidence", tuple(self.evidence))
        object.__setattr__(self, "metrics", dict(self.metrics))

    def to_dict(self) -> dict[str, Any]:
        return {
            "rec_id": self.rec_id,
            "status": self.status.value,
            "message": self.message,
            "evidence": list(self.evidence),
            "metrics": dict(self.metrics),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Finding":
        return cls(
            rec_id=int(d["rec_id"]),
            status=Status(d["status"]),
            message=str(d.get("message", "")),
            evidence=tuple(str(e) for e in d.get("evidence", ())),
            metrics=dict(d.get("metrics", {})),
        )


def merge_findings(findings: Iterable[Finding]) -> Finding:
    """Collapse findings for one REC into a single finding.

    Status is the worst status, evidence and message lines are set unions and
    metrics keep the maximum per key, so the merge is associative and
    commutative.
    """
    findings = list(findings)
    if not findings:
        raise ValueError("nothing to merge")
    rec_ids = {f.rec_id for f in findings}
    if len(rec_ids) != 1:
        raise ValueError(f"cannot merge findings of different RECs: {sorted(rec_ids)}")
    lines: set[str] = set()
    evidence: set[str] = set()
    metrics: dict[str, float] = {}
    for f in findings:
        lines.update(line for line in f.message.split("\n") if line)
        evidence.update(f.evidence)
        for k, v in f.metrics.items():
            metrics[k] = v if k not in metrics else max(metrics[k], v)
    return Finding(
        rec_id=findings[0].rec_id,
        status=worst(f.status for f in findings),
        message="\n".join(sorted(lines)),
        evidence=tuple(sorted(evidence)),
        metrics=metrics,
    )


def sort_findings(findings: Iterable[Finding]) -> list[Finding]:
    return sorted(findings, key=lambda f: (f.rec_id, -severity(f.status), f.message, f.evidence))
