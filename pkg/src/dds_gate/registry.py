"""The 44 recommendations and how each one is evidenced.

``automated`` recommendations are decided by checks, ``attested`` ones by a
signed-off manual record, ``hybrid`` ones need both halves.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .findings import Finding, Status

AUTOMATED = "automated"
ATTESTED = "attested"
HYBRID = "hybrid"


@dataclass(frozen=True)
class RecSpec:
    rec_id: int
    mode: str
    title: str
    section: str

    @property
    def takes_findings(self) -> bool:
        return self.mode in (AUTOMATED, HYBRID)

    @property
    def takes_attestation(self) -> bool:
        return self.mode in (ATTESTED, HYBRID)


_TABLE = [
    (1, ATTESTED, "Acquisition chain close to the operational chain", "representativeness"),
    (2, ATTESTED, "System validation on the operational acquisition chain", "representativeness"),
    (3, HYBRID, "ODD defined with identified variables", "representativeness"),
    (4, AUTOMATED, "Datasets traceable to the ODD", "representativeness"),
    (5, AUTOMATED, "Operational situations sufficiently represented", "representativeness"),
    (6, AUTOMATED, "Operating conditions in operational proportions", "representativeness"),
    (7, HYBRID, "Data kept to assess ODD compliance", "representativeness"),
    (8, AUTOMATED, "Any data can be regenerated or restored", "traceability"),
    (9, AUTOMATED, "Acquisition under configuration management", "traceability"),
    (10, ATTESTED, "Acquisition chain differences identified and estimated", "accuracy"),
    (11, ATTESTED, "Degradation sources identified; lossless storage", "accuracy"),
    (12, AUTOMATED, "Outliers cleaned", "reliability"),
    (13, ATTESTED, "Source reliability assessed", "reliability"),
    (14, AUTOMATED, "Consistency properties expressed", "consistency"),
    (15, AUTOMATED, "Consistency properties verified", "consistency"),
    (16, AUTOMATED, "Attributes of the same object consistent", "consistency"),
    (17, AUTOMATED, "Consistent data representation", "consistency"),
    (18, ATTESTED, "Role-based dataset access", "integrity"),
    (19, AUTOMATED, "Modifications justified, logged, attributed", "integrity"),
    (20, ATTESTED, "Write-access protocol defined", "integrity"),
    (21, ATTESTED, "Modifications notified to impacted users", "integrity"),
    (22, AUTOMATED, "Integrity guaranteed by cryptographic hash", "integrity"),
    (23, AUTOMATED, "Integrity checked after transmission", "integrity"),
    (24, ATTESTED, "Dataset specified before acquisition", "bias"),
    (25, ATTESTED, "Compliance checked after acquisition", "bias"),
    (26, ATTESTED, "Experts check label accuracy on a subset", "label accuracy"),
    (27, AUTOMATED, "Same object labelled identically", "label consistency"),
    (28, HYBRID, "Ambiguities checked by experts", "label consistency"),
    (29, AUTOMATED, "Label consistency checked like accuracy", "label consistency"),
    (30, ATTESTED, "Consistency checks and corrections by experts", "label consistency"),
    (31, AUTOMATED, "Ambiguous data labelled manually", "label consistency"),
    (32, ATTESTED, "Automatic labelling workflow assessed", "label consistency"),
    (33, ATTESTED, "Annotator ability assessed", "annotation bias"),
    (34, ATTESTED, "Annotation instructions validated by experts", "annotation bias"),
    (35, HYBRID, "Annotation audited on a significant sample", "annotation bias"),
    (36, AUTOMATED, "Same-label series checked", "annotation bias"),
    (37, AUTOMATED, "Random assignment to annotators", "annotation bias"),
    (38, AUTOMATED, "Annotations traceable to the annotator", "annotation bias"),
    (39, AUTOMATED, "Train and test sets do not overlap", "dataset building"),
    (40, HYBRID, "Test set sealed until validation", "dataset building"),
    (41, ATTESTED, "Test-to-train information policy", "dataset building"),
    (42, AUTOMATED, "Automatic bias detection on training data", "dataset independence"),
    (43, AUTOMATED, "No redundancy between train and test", "dataset independence"),
    (44, AUTOMATED, "Test set large enough for the error bound", "dataset independence"),
]


class RecRegistry(Mapping[int, RecSpec]):
    def __init__(self, specs: Mapping[int, RecSpec]) -> None:
        if sorted(specs) != list(range(1, 45)):
            raise ValueError("registry must cover REC 1..44 exactly once")
        self._specs = MappingProxyType(dict(specs))

    def __getitem__(self, rec_id: int) -> RecSpec:
        return self._specs[rec_id]

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self._specs))

    def __len__(self) -> int:
        return len(self._specs)

    def ids(self, *modes: str) -> list[int]:
        return [r for r in self if self[r].mode in modes]

    @property
    def attestable(self) -> list[int]:
        return self.ids(ATTESTED, HYBRID)


DEFAULT_REGISTRY = RecRegistry({r: RecSpec(r, mode, title, section) for r, mode, title, section in _TABLE})


def regrade(
    findings: Iterable[Finding], overrides: Mapping[int, str], registry: RecRegistry = DEFAULT_REGISTRY
) -> list[Finding]:
    """Apply a user severity policy: each named REC reports its problems as ``warn`` or ``fail``.

    The warn/fail choice built into each check is tool policy; pass, pending
    and not-applicable findings are never touched.
    """
    for rec, level in overrides.items():
        if rec not in registry or not registry[rec].takes_findings:
            raise ValueError(f"REC {rec} has no automated findings to regrade")
        if level not in ("warn", "fail"):
            raise ValueError(f"severity for REC {rec} must be 'warn' or 'fail', not {level!r}")
    out = []
    for f in findings:
        level = overrides.get(f.rec_id)
        if level is not None and f.status in (Status.WARN, Status.FAIL):
            f = Finding(f.rec_id, Status(level), f.message, f.evidence, f.metrics)
        out.append(f)
    return out
