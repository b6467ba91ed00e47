"""Content digests, hash-chained audit logs and split seals.

SHA-256 everywhere. Audit entries are hashed over their canonical JSON form
(sorted keys, no insignificant whitespace, UTF-8), which makes the chain
bit-exact across implementations.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

from .errors import EmptySplit, ParseError
from .findings import Finding, Status
from .manifest import (
    SPLITS,
    ByteSource,
    Manifest,
    _Fields,
    is_digest,
    iter_json_lines,
    read_json,
)

GENESIS_DIGEST = "sha256:" + "0" * 64
AUDIT_ACTIONS = ("add", "modify", "remove")


def sha256_digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# -- item digests --------------------------------------------------------------


class DirectoryResolver(Mapping[str, bytes]):
    """Resolve item content as ``<root>/<item id>``."""

    def __init__(self, root: str | os.PathLike[str]) -> None:
        self.root = Path(root).resolve()
        self._prefix = str(self.root) + os.sep

    def _path(self, item_id: str) -> str | None:
        # Ids are relative paths below the root; anything that could escape it is refused.
        if "\\" in item_id or "\0" in item_id or any(p in ("", ".", "..") for p in item_id.split("/")):
            return None
        return self._prefix + item_id

    def __getitem__(self, item_id: str) -> bytes:
        p = self._path(item_id)
        if p is None:
            raise KeyError(item_id)
        try:
            with open(p, "rb") as fh:
                return fh.read()
        except (FileNotFoundError, IsADirectoryError, NotADirectoryError):
            raise KeyError(item_id) from None

    def __contains__(self, item_id: object) -> bool:
        if not isinstance(item_id, str):
            return False
        p = self._path(item_id)
        return p is not None and os.path.isfile(p)

    def __iter__(self) -> Iterator[str]:
        for p in sorted(self.root.rglob("*")):
            if p.is_file():
                yield p.relative_to(self.root).as_posix()

    def __len__(self) -> int:
        return sum(1 for _ in self)


def _check_one(item_id: str, recorded: str, resolver: Mapping[str, bytes]) -> str | None:
    try:
        content = resolver[item_id]
    except KeyError:
        return "content unavailable"
    actual = sha256_digest(content)
    if actual != recorded:
        return f"digest mismatch (recorded {recorded}, actual {actual})"
    return None


def verify_item_digests(
    manifest: Manifest, resolver: Mapping[str, bytes], max_workers: int | None = None
) -> list[Finding]:
    """Recompute every item digest from resolved content.

    Emits one REC 22 fail per bad item plus a REC 23 summary over the whole
    transfer. Items are independent, so ``max_workers > 1`` hashes in threads.
    """
    items = sorted(manifest.items, key=lambda it: it.id)
    args = [(it.id, it.digest, resolver) for it in items]
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            problems = list(pool.map(lambda a: _check_one(*a), args))
    else:
        problems = [_check_one(*a) for a in args]

    findings = []
    bad = []
    for item, problem in zip(items, problems):
        if problem is not None:
            bad.append(item.id)
            findings.append(Finding(22, Status.FAIL, f"{item.id}: {problem}", (item.id,)))
    n = len(items)
    if bad:
        findings.append(
            Finding(23, Status.FAIL, f"{len(bad)} of {n} items failed integrity verification",
                    tuple(bad), {"failed": len(bad), "items": n})
        )
    else:
        findings.append(Finding(22, Status.PASS, f"{n} item digests verified", metrics={"items": n}))
        findings.append(Finding(23, Status.PASS, "received content matches recorded digests", metrics={"items": n}))
    return findings


# -- audit log -----------------------------------------------------------------


@dataclass(frozen=True)
class AuditLogEntry:
    ts: str
    user: str
    action: str
    item_ids: tuple[str, ...]
    justification: str
    prev_digest: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "ts": self.ts,
            "user": self.user,
            "action": self.action,
            "item_ids": list(self.item_ids),
            "justification": self.justification,
            "prev_digest": self.prev_digest,
        }

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    def digest(self) -> str:
        return sha256_digest(self.canonical_bytes())


def append_entry(
    log: Sequence[AuditLogEntry],
    ts: str,
    user: str,
    action: str,
    item_ids: Sequence[str],
    justification: str,
) -> list[AuditLogEntry]:
    """Return ``log`` extended by a correctly chained entry."""
    prev = log[-1].digest() if log else GENESIS_DIGEST
    entry = AuditLogEntry(ts, user, action, tuple(item_ids), justification, prev)
    return [*log, entry]


def load_audit_log(src: ByteSource, source_name: str = "") -> list[AuditLogEntry]:
    entries = []
    for lineno, obj in iter_json_lines(src, source_name):
        f = _Fields(obj, lineno, "audit entry", source_name)
        f.only(["ts", "user", "action", "item_ids", "justification", "prev_digest"])
        item_ids = f.list("item_ids")
        if not all(isinstance(i, str) for i in item_ids):
            raise f.fail("item_ids must be strings")
        prev = f.str("prev_digest")
        if not is_digest(prev):
            raise f.fail(f"prev_digest {prev!r} is not a sha256 digest")
        entries.append(
            AuditLogEntry(
                ts=f.timestamp("ts"),
                user=f.str("user"),
                action=f.enum("action", AUDIT_ACTIONS),
                item_ids=tuple(item_ids),
                justification=f.str("justification"),
                prev_digest=prev,
            )
        )
    return entries


def dump_audit_log(log: Sequence[AuditLogEntry]) -> bytes:
    return b"".join(e.canonical_bytes() + b"\n" for e in log)


def verify_audit_chain(log: Sequence[AuditLogEntry]) -> list[Finding]:
    """REC 19: modifications are chained, justified, attributed and ordered."""
    if not log:
        return [Finding(19, Status.WARN, "no modification history")]
    findings = []
    expected = GENESIS_DIGEST
    broken_at = None
    for k, entry in enumerate(log):
        if broken_at is None and entry.prev_digest != expected:
            broken_at = k
        expected = entry.digest()
        if not entry.justification.strip():
            findings.append(Finding(19, Status.FAIL, f"entry {k} has no justification", entry.item_ids, {"index": k}))
        if not entry.user.strip():
            findings.append(Finding(19, Status.FAIL, f"entry {k} is not traced to a user", entry.item_ids, {"index": k}))
        if k > 0 and entry.ts < log[k - 1].ts:
            findings.append(Finding(19, Status.FAIL, f"timestamp goes backwards at index {k}", entry.item_ids, {"index": k}))
    if broken_at is not None:
        findings.insert(0, Finding(19, Status.FAIL, f"chain broken at index {broken_at}", metrics={"index": broken_at}))
    if not findings:
        findings.append(Finding(19, Status.PASS, f"{len(log)} modifications chained, justified and attributed",
                                metrics={"entries": len(log)}))
    return findings


# -- seals ---------------------------------------------------------------------


@dataclass(frozen=True)
class SealCommitment:
    split: str
    item_count: int
    commitment: str
    sealed_at: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "split": self.split,
            "item_count": self.item_count,
            "commitment": self.commitment,
            "sealed_at": self.sealed_at,
        }


def commitment_for(digests: Sequence[str]) -> str:
    """Digest of the sorted digests, each terminated by a newline."""
    return sha256_digest("".join(d + "\n" for d in sorted(digests)).encode("ascii"))


def seal_split(manifest: Manifest, split: str = "test", sealed_at: str | None = None) -> SealCommitment:
    digests = [it.digest for it in manifest.items if it.split == split]
    if not digests:
        raise EmptySplit(split)
    return SealCommitment(split, len(digests), commitment_for(digests), sealed_at or utc_now())


def verify_seal(manifest: Manifest, seal: SealCommitment) -> Finding:
    """REC 40: the sealed split is unchanged since commitment."""
    digests = [it.digest for it in manifest.items if it.split == seal.split]
    metrics = {"sealed_count": seal.item_count, "current_count": len(digests)}
    problems = []
    if len(digests) != seal.item_count:
        problems.append(f"item count mismatch: sealed {seal.item_count}, found {len(digests)}")
    if commitment_for(digests) != seal.commitment:
        problems.append("commitment mismatch")
    if problems:
        return Finding(40, Status.FAIL, f"{seal.split} split differs from seal: " + "; ".join(problems), metrics=metrics)
    return Finding(40, Status.PASS, f"{seal.split} split matches seal of {seal.sealed_at}", metrics=metrics)


def load_seal(src: ByteSource, source_name: str = "") -> SealCommitment:
    f = _Fields(read_json(src, source_name), 1, "seal", source_name)
    f.only(["split", "item_count", "commitment", "sealed_at"])
    commitment = f.str("commitment")
    if not is_digest(commitment):
        raise ParseError(1, "seal: commitment is not a sha256 digest", source_name)
    return SealCommitment(
        split=f.enum("split", SPLITS),
        item_count=f.int("item_count", minimum=1),
        commitment=commitment,
        sealed_at=f.timestamp("sealed_at"),
    )
