"""Manifest, annotation and attestation models plus their JSON Lines loaders.

All loaders are strict: unknown keys, duplicate keys, wrong types and bad
timestamps raise :class:`ParseError` with the offending line number.
Referential checks (annotation -> item, parent_id -> item) are deferred to the
check functions so that files can be linted standalone.
"""

from __future__ import annotations

import gc
import io
import json
import os
import re
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from functools import cached_property, lru_cache
from operator import attrgetter
from types import MappingProxyType
from typing import IO, Any, Callable, Iterable, Iterator, Mapping, Union

from .errors import (
    DDSError,
    DuplicateAnnotation,
    DuplicateId,
    ParseError,
    SchemaVersionUnsupported,
    UnknownSource,
)
from .findings import Finding, Status

SUPPORTED_SCHEMA_VERSIONS = frozenset({"1.0"})
SPLITS = ("train", "validation", "test", "unassigned")
ANNOTATION_METHODS = ("manual", "automatic")
ATTESTATION_STATUSES = ("attested_pass", "attested_fail", "not_applicable")

DIGEST_RE = re.compile(r"^sha256:[0-9a-f]{64}$")
TIMESTAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")

ByteSource = Union[bytes, IO[bytes], str, "os.PathLike[str]"]


@dataclass(frozen=True)
class SourceDecl:
    source_id: str
    description: str = ""
    acquisition_config_version: str | None = None


@dataclass(frozen=True)
class ManifestHeader:
    schema_version: str
    dataset_id: str
    created: str
    sources: tuple[SourceDecl, ...]


@dataclass(frozen=True)
class TransformStep:
    op_name: str
    params: Mapping[str, Any] = field(default_factory=dict)
    tool_version: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def parent_id(self) -> str | None:
        p = self.params.get("parent_id")
        return p if isinstance(p, str) else None


@dataclass(frozen=True)
class Lineage:
    raw_uri: str | None = None
    is_raw: bool = False
    transforms: tuple[TransformStep, ...] = ()

    def parents(self) -> list[str]:
        return [t.parent_id for t in self.transforms if t.parent_id is not None]


@dataclass(frozen=True)
class DataItem:
    id: str
    digest: str
    source_id: str
    split: str
    lineage: Lineage
    group_id: str | None = None
    odd: Mapping[str, Any] = field(default_factory=dict)
    ambiguous: bool = False
    simhash64: int | None = None
    label: str | None = None
    attrs: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "odd", MappingProxyType(dict(self.odd)))
        object.__setattr__(self, "attrs", MappingProxyType(dict(self.attrs)))


@dataclass(frozen=True)
class Manifest:
    header: ManifestHeader
    items: tuple[DataItem, ...]

    @property
    def dataset_id(self) -> str:
        return self.header.dataset_id

    @cached_property
    def by_id(self) -> Mapping[str, DataItem]:
        return MappingProxyType({it.id: it for it in self.items})

    def split_items(self, split: str) -> list[DataItem]:
        return [it for it in self.items if it.split == split]


@dataclass(frozen=True)
class AnnotationRecord:
    item_id: str
    annotator: str
    label: str
    at: str
    seq: int
    storage_index: int
    method: str = "manual"


@dataclass(frozen=True)
class AnnotationSet:
    records: tuple[AnnotationRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[AnnotationRecord]:
        return iter(self.records)

    @cached_property
    def _by_annotator(self) -> dict[str, tuple[AnnotationRecord, ...]]:
        grouped: dict[str, list[AnnotationRecord]] = {}
        for r in self.records:
            grouped.setdefault(r.annotator, []).append(r)
        order = attrgetter("seq", "item_id")
        return {a: tuple(sorted(rs, key=order)) for a, rs in grouped.items()}

    def annotators(self) -> list[str]:
        return sorted(self._by_annotator)

    def for_annotator(self, annotator: str) -> list[AnnotationRecord]:
        """Records of one annotator in processing (seq) order."""
        return list(self._by_annotator.get(annotator, ()))

    @cached_property
    def _by_item(self) -> dict[str, list[AnnotationRecord]]:
        out: dict[str, list[AnnotationRecord]] = {}
        for r in self.records:
            rs = out.get(r.item_id)
            if rs is None:
                out[r.item_id] = [r]
            else:
                rs.append(r)
        return out

    def by_item(self) -> dict[str, list[AnnotationRecord]]:
        """Records grouped by item; shared and cached, so treat as read-only."""
        return self._by_item


@dataclass(frozen=True)
class AttestationRecord:
    rec_id: int
    status: str
    by: str
    date: str
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "rec_id": self.rec_id,
            "status": self.status,
            "by": self.by,
            "date": self.date,
            "note": self.note,
        }


# -- low level parsing helpers -------------------------------------------------


@contextmanager
def paused_gc() -> Iterator[None]:
    """Suspend cyclic garbage collection while building large acyclic structures."""
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


def _no_duplicate_keys(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out = dict(pairs)
    if len(out) != len(pairs):
        seen: set[str] = set()
        dup = next(k for k, _ in pairs if k in seen or seen.add(k))  # type: ignore[func-returns-value]
        raise ValueError(f"duplicate key {dup!r}")
    return out


def _bad_constant(name: str) -> Any:
    raise ValueError(f"non-finite number {name}")


def parse_json(text: str | bytes) -> Any:
    """``json.loads`` that rejects duplicate object keys and NaN/Infinity."""
    return json.loads(text, object_pairs_hook=_no_duplicate_keys, parse_constant=_bad_constant)


def _open_bytes(src: ByteSource) -> tuple[IO[bytes], bool]:
    if isinstance(src, (bytes, bytearray)):
        return io.BytesIO(bytes(src)), True
    if isinstance(src, (str, os.PathLike)):
        return open(src, "rb"), True
    return src, False


def _read_all(src: ByteSource) -> bytes:
    fh, owned = _open_bytes(src)
    try:
        return fh.read()
    finally:
        if owned:
            fh.close()


def _key_count(obj: Any) -> int:
    """Number of object keys anywhere inside a decoded JSON value."""
    n = 0
    stack = [obj]
    while stack:
        v = stack.pop()
        if type(v) is dict:
            n += len(v)
            stack.extend(v.values())
        elif type(v) is list:
            stack.extend(v)
    return n


def _textual_key_count(data: bytes) -> int:
    """Occurrences of a closing quote directly followed by ``:``; -1 when a key may be spaced from its colon.

    Without ``" :`` style spacing every key contributes exactly one ``":`` and
    string contents can only add more, so per line the count is at least the
    decoded key count. Equal totals over a file therefore mean that no object
    anywhere had a duplicated (and silently collapsed) key.
    """
    if b'" :' in data or b'"\t:' in data or b'"\r:' in data:
        return -1
    return data.count(b'":')


def _decode_lines(data: bytes, source_name: str = "", strict: bool = True) -> list[tuple[int, Any]]:
    """``(line number, object)`` for every non-blank line.

    The whole file is decoded as one array (much faster than line by line);
    only when that fails are lines decoded one at a time, strictly, to locate
    the error. ``strict=False`` skips the duplicate-key hook on the fast path;
    callers then compare key totals against :func:`_textual_key_count`.
    """
    numbered = [(n, raw.rstrip(b" \t\r")) for n, raw in enumerate(data.split(b"\n"), 1)]
    numbered = [(n, line) for n, line in numbered if line]
    try:
        text = b"[" + b",".join(line for _, line in numbered) + b"]"
        hook = _no_duplicate_keys if strict else None
        objs = json.loads(text.decode("utf-8"), object_pairs_hook=hook, parse_constant=_bad_constant)
        if len(objs) != len(numbered):
            raise ValueError("line count changed")
    except (UnicodeDecodeError, ValueError):
        objs = []
        for lineno, line in numbered:
            try:
                objs.append(parse_json(line.decode("utf-8")))
            except (UnicodeDecodeError, ValueError) as exc:
                raise ParseError(lineno, f"invalid JSON: {exc}", source_name) from None
    return list(zip((n for n, _ in numbered), objs))


def iter_json_lines(src: ByteSource, source_name: str = "") -> Iterator[tuple[int, Any]]:
    """Yield ``(line_number, object)`` for every non-blank line, rejecting duplicate keys."""
    return iter(_decode_lines(_read_all(src), source_name))


def _load_checked(loader: Callable[[bytes, str, bool, list[int]], Any], src: ByteSource, source_name: str) -> Any:
    """Run ``loader`` on a hook-free decode, falling back to a strict decode unless key totals agree.

    Any error on the fast pass is also re-raised from the strict pass, so
    collapsed duplicate keys can never mask or alter the reported error.
    """
    data = _read_all(src)
    with paused_gc():
        keys = [0]
        try:
            out = loader(data, source_name, False, keys)
        except DDSError:
            out = None
        if out is None or keys[0] != _textual_key_count(data):
            out = loader(data, source_name, True, [0])
    return out


def read_json(src: ByteSource, source_name: str = "") -> Any:
    try:
        return parse_json(_read_all(src).decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ParseError(1, f"invalid JSON: {exc}", source_name) from None


class _Fields:
    """Typed accessor over one JSON object that raises ParseError with context."""

    def __init__(self, obj: Any, line: int, what: str, source: str = "") -> None:
        if not isinstance(obj, dict):
            raise ParseError(line, f"{what} must be a JSON object", source)
        self.obj = obj
        self.line = line
        self.what = what
        self.source = source

    def fail(self, reason: str) -> ParseError:
        return ParseError(self.line, f"{self.what}: {reason}", self.source)

    def only(self, required: Iterable[str], optional: Iterable[str] = ()) -> None:
        required = set(required)
        allowed = required | set(optional)
        missing = sorted(required - self.obj.keys())
        if missing:
            raise self.fail(f"missing field(s) {missing}")
        extra = sorted(self.obj.keys() - allowed)
        if extra:
            raise self.fail(f"unknown field(s) {extra}")

    def str(self, key: str, *, nonempty: bool = False, optional: bool = False) -> Any:
        v = self.obj.get(key)
        if v is None and optional:
            return None
        if not isinstance(v, str):
            raise self.fail(f"{key} must be a string")
        if nonempty and not v:
            raise self.fail(f"{key} must be non-empty")
        return v

    def int(self, key: str, *, minimum: int | None = None, optional: bool = False) -> Any:
        v = self.obj.get(key)
        if v is None and optional:
            return None
        if not isinstance(v, int) or isinstance(v, bool):
            raise self.fail(f"{key} must be an integer")
        if minimum is not None and v < minimum:
            raise self.fail(f"{key} must be >= {minimum}")
        return v

    def bool(self, key: str, default: bool | None = None) -> bool:
        v = self.obj.get(key, default)
        if not isinstance(v, bool):
            raise self.fail(f"{key} must be a boolean")
        return v

    def enum(self, key: str, allowed: Iterable[str]) -> str:
        v = self.str(key)
        allowed = tuple(allowed)
        if v not in allowed:
            raise self.fail(f"{key}={v!r} not one of {list(allowed)}")
        return v

    def timestamp(self, key: str) -> str:
        v = self.str(key)
        if not is_utc_timestamp(v):
            raise self.fail(f"{key}={v!r} is not a UTC ISO-8601 timestamp (YYYY-MM-DDTHH:MM:SSZ)")
        return v

    def dict(self, key: str, default: Any = None) -> dict[str, Any]:
        v = self.obj.get(key, default)
        if not isinstance(v, dict):
            raise self.fail(f"{key} must be an object")
        return v

    def list(self, key: str, default: Any = None) -> list[Any]:
        v = self.obj.get(key, default)
        if not isinstance(v, list):
            raise self.fail(f"{key} must be an array")
        return v


def is_utc_timestamp(value: Any) -> bool:
    if not isinstance(value, str) or not TIMESTAMP_RE.match(value):
        return False
    try:
        datetime.fromisoformat(value[:-1])
    except ValueError:
        return False
    return True


def is_digest(value: Any) -> bool:
    return isinstance(value, str) and DIGEST_RE.match(value) is not None


# -- manifest ------------------------------------------------------------------

_HEADER_FIELDS = ("schema_version", "dataset_id", "created", "sources")
_ITEM_REQUIRED = ("id", "digest", "source_id", "split", "lineage")
_ITEM_OPTIONAL = ("group_id", "odd", "ambiguous", "simhash64", "label", "attrs")


def _parse_header(obj: Any, line: int, source: str) -> ManifestHeader:
    f = _Fields(obj, line, "header", source)
    f.only(_HEADER_FIELDS)
    version = f.str("schema_version")
    if version not in SUPPORTED_SCHEMA_VERSIONS:
        raise SchemaVersionUnsupported(version)
    sources = []
    seen: set[str] = set()
    for raw in f.list("sources"):
        s = _Fields(raw, line, "source", source)
        s.only(["source_id"], ["description", "acquisition_config_version"])
        sid = s.str("source_id", nonempty=True)
        if sid in seen:
            raise s.fail(f"duplicate source_id {sid!r}")
        seen.add(sid)
        sources.append(
            SourceDecl(
                source_id=sid,
                description=s.str("description", optional=True) or "",
                acquisition_config_version=s.str("acquisition_config_version", optional=True),
            )
        )
    return ManifestHeader(
        schema_version=version,
        dataset_id=f.str("dataset_id", nonempty=True),
        created=f.timestamp("created"),
        sources=tuple(sources),
    )


def _parse_lineage(obj: Any, line: int, source: str) -> Lineage:
    f = _Fields(obj, line, "lineage", source)
    f.only(["is_raw"], ["raw_uri", "transforms"])
    steps = []
    for raw in f.list("transforms", []):
        t = _Fields(raw, line, "transform", source)
        t.only(["op_name"], ["params", "tool_version"])
        steps.append(
            TransformStep(
                op_name=t.str("op_name", nonempty=True),
                params=t.dict("params", {}),
                tool_version=t.str("tool_version", optional=True) or "",
            )
        )
    return Lineage(
        raw_uri=f.str("raw_uri", optional=True),
        is_raw=f.bool("is_raw"),
        transforms=tuple(steps),
    )


def _parse_item(obj: Any, line: int, source: str) -> DataItem:
    f = _Fields(obj, line, "item", source)
    f.only(_ITEM_REQUIRED, _ITEM_OPTIONAL)
    digest = f.str("digest")
    if not is_digest(digest):
        raise f.fail(f"digest {digest!r} is not 'sha256:' followed by 64 lowercase hex chars")
    odd = f.dict("odd", {})
    for k, v in odd.items():
        if isinstance(v, (dict, list)):
            raise f.fail(f"odd value for {k!r} must be a scalar")
    simhash = f.int("simhash64", minimum=0, optional=True)
    if simhash is not None and simhash >= 1 << 64:
        raise f.fail("simhash64 must fit in 64 bits")
    return DataItem(
        id=f.str("id", nonempty=True),
        digest=digest,
        source_id=f.str("source_id", nonempty=True),
        split=f.enum("split", SPLITS),
        lineage=_parse_lineage(obj["lineage"], line, source),
        group_id=f.str("group_id", optional=True),
        odd=odd,
        ambiguous=f.bool("ambiguous", False),
        simhash64=simhash,
        label=f.str("label", optional=True),
        attrs=f.dict("attrs", {}),
    )


def _trusted(cls: type, values: dict[str, Any]) -> Any:
    """Instantiate a frozen dataclass from already validated, freshly decoded values.

    Skips the per-field ``object.__setattr__`` of the generated ``__init__``,
    which dominates load time on large manifests.
    """
    obj = object.__new__(cls)
    obj.__dict__.update(values)
    return obj


_ITEM_KEYS = frozenset(_ITEM_REQUIRED + _ITEM_OPTIONAL)
_ITEM_REQ_KEYS = frozenset(_ITEM_REQUIRED)
_LINEAGE_KEYS = frozenset(("is_raw", "raw_uri", "transforms"))
_SPLIT_SET = frozenset(SPLITS)


def _fast_item(obj: Any, keys: list[int]) -> DataItem | None:
    """Build an item from a well-formed record without per-field bookkeeping.

    Returns None whenever anything is unusual; the strict parser then either
    raises the precise error or accepts the record. Adds the record's key
    count to ``keys[0]``.
    """
    if type(obj) is not dict or not _ITEM_REQ_KEYS <= obj.keys() <= _ITEM_KEYS:
        return None
    g = obj.get
    item_id, digest, source_id, split = obj["id"], obj["digest"], obj["source_id"], obj["split"]
    group_id, label, simhash = g("group_id"), g("label"), g("simhash64")
    odd, attrs, ambiguous, lin = g("odd", {}), g("attrs", {}), g("ambiguous", False), obj["lineage"]
    if not (
        type(item_id) is str and item_id and type(source_id) is str and source_id
        and type(digest) is str and DIGEST_RE.match(digest) and split in _SPLIT_SET
        and (group_id is None or type(group_id) is str) and (label is None or type(label) is str)
        and (simhash is None or (type(simhash) is int and 0 <= simhash < 1 << 64))
        and type(odd) is dict and type(attrs) is dict and type(ambiguous) is bool
        and type(lin) is dict and "is_raw" in lin and lin.keys() <= _LINEAGE_KEYS
    ):
        return None
    for v in odd.values():
        if type(v) in (dict, list):
            return None
    is_raw, raw_uri, transforms = lin["is_raw"], lin.get("raw_uri"), lin.get("transforms", [])
    if type(is_raw) is not bool or not (raw_uri is None or type(raw_uri) is str) or transforms != []:
        return None
    n = len(obj) + len(odd) + len(attrs) + len(lin)
    for v in attrs.values():
        if type(v) is dict:
            n += len(v)
            for w in v.values():
                if type(w) is dict or type(w) is list:
                    n += _key_count(w)
        elif type(v) is list:
            n += _key_count(v)
    keys[0] += n
    return _trusted(DataItem, {
        "id": item_id, "digest": digest, "source_id": source_id, "split": split,
        "lineage": _trusted(Lineage, {"raw_uri": raw_uri, "is_raw": is_raw, "transforms": ()}),
        "group_id": group_id, "odd": MappingProxyType(odd), "ambiguous": ambiguous,
        "simhash64": simhash, "label": label, "attrs": MappingProxyType(attrs),
    })


def load_manifest(src: ByteSource, source_name: str = "") -> Manifest:
    """Parse a manifest: one header line followed by one item per line."""
    return _load_checked(_load_manifest, src, source_name)


def _load_manifest(data: bytes, source_name: str, strict: bool, keys: list[int]) -> Manifest:
    header: ManifestHeader | None = None
    items: list[DataItem] = []
    seen: set[str] = set()
    declared: set[str] = set()
    for lineno, obj in _decode_lines(data, source_name, strict):
        if header is None:
            keys[0] += _key_count(obj)
            header = _parse_header(obj, lineno, source_name)
            declared = {s.source_id for s in header.sources}
            continue
        item = _fast_item(obj, keys)
        if item is None:
            keys[0] += _key_count(obj)
            item = _parse_item(obj, lineno, source_name)
        if item.id in seen:
            raise DuplicateId(item.id)
        if item.source_id not in declared:
            raise UnknownSource(item.id, item.source_id)
        seen.add(item.id)
        items.append(item)
    if header is None:
        raise ParseError(1, "manifest is empty; expected a header line", source_name)
    return Manifest(header=header, items=tuple(items))


def _canonical_line(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def header_to_dict(h: ManifestHeader) -> dict[str, Any]:
    return {
        "schema_version": h.schema_version,
        "dataset_id": h.dataset_id,
        "created": h.created,
        "sources": [
            {
                "source_id": s.source_id,
                "description": s.description,
                "acquisition_config_version": s.acquisition_config_version,
            }
            for s in h.sources
        ],
    }


def item_to_dict(it: DataItem) -> dict[str, Any]:
    return {
        "id": it.id,
        "digest": it.digest,
        "source_id": it.source_id,
        "split": it.split,
        "group_id": it.group_id,
        "odd": dict(it.odd),
        "lineage": {
            "raw_uri": it.lineage.raw_uri,
            "is_raw": it.lineage.is_raw,
            "transforms": [
                {"op_name": t.op_name, "params": dict(t.params), "tool_version": t.tool_version}
                for t in it.lineage.transforms
            ],
        },
        "ambiguous": it.ambiguous,
        "simhash64": it.simhash64,
        "label": it.label,
        "attrs": dict(it.attrs),
    }


def dump_manifest(m: Manifest) -> bytes:
    lines = [_canonical_line(header_to_dict(m.header))]
    lines.extend(_canonical_line(item_to_dict(it)) for it in m.items)
    return b"\n".join(lines) + b"\n"


# -- annotations ---------------------------------------------------------------

_ANNOTATION_FIELDS = ("item_id", "annotator", "label", "at", "seq", "storage_index", "method")


def _parse_annotation(obj: Any, line: int, source: str) -> AnnotationRecord:
    f = _Fields(obj, line, "annotation", source)
    f.only(_ANNOTATION_FIELDS)
    return AnnotationRecord(
        item_id=f.str("item_id", nonempty=True),
        annotator=f.str("annotator"),
        label=f.str("label"),
        at=f.timestamp("at"),
        seq=f.int("seq", minimum=0),
        storage_index=f.int("storage_index", minimum=0),
        method=f.enum("method", ANNOTATION_METHODS),
    )


_ANNOTATION_KEYS = frozenset(_ANNOTATION_FIELDS)
_METHOD_SET = frozenset(ANNOTATION_METHODS)


@lru_cache(maxsize=4096)
def _cached_timestamp_ok(value: str) -> bool:
    return is_utc_timestamp(value)


def _fast_annotation(obj: Any) -> AnnotationRecord | None:
    if type(obj) is not dict or obj.keys() != _ANNOTATION_KEYS:
        return None
    item_id, annotator, label, at = obj["item_id"], obj["annotator"], obj["label"], obj["at"]
    seq, pos, method = obj["seq"], obj["storage_index"], obj["method"]
    if not (
        type(item_id) is str and item_id and type(annotator) is str and type(label) is str
        and type(at) is str and _cached_timestamp_ok(at) and type(seq) is int and seq >= 0
        and type(pos) is int and pos >= 0 and method in _METHOD_SET
    ):
        return None
    return _trusted(AnnotationRecord, {"item_id": item_id, "annotator": annotator, "label": label, "at": at,
                                       "seq": seq, "storage_index": pos, "method": method})


def load_annotations(src: ByteSource, source_name: str = "") -> AnnotationSet:
    return _load_checked(_load_annotations, src, source_name)


def _load_annotations(data: bytes, source_name: str, strict: bool, keys: list[int]) -> AnnotationSet:
    records: list[AnnotationRecord] = []
    seen: set[tuple[str, str]] = set()
    n_fast = 0
    for lineno, obj in _decode_lines(data, source_name, strict):
        rec = _fast_annotation(obj)
        if rec is None:
            keys[0] += _key_count(obj)
            rec = _parse_annotation(obj, lineno, source_name)
        else:
            n_fast += 1
        key = (rec.annotator, rec.item_id)
        if key in seen:
            raise DuplicateAnnotation(rec.annotator, rec.item_id)
        seen.add(key)
        records.append(rec)
    keys[0] += n_fast * len(_ANNOTATION_KEYS)
    return AnnotationSet(tuple(records))


def annotation_to_dict(r: AnnotationRecord) -> dict[str, Any]:
    return {k: getattr(r, k) for k in _ANNOTATION_FIELDS}


def dump_annotations(annotations: Iterable[AnnotationRecord]) -> bytes:
    return b"".join(_canonical_line(annotation_to_dict(r)) + b"\n" for r in annotations)


# -- attestations --------------------------------------------------------------


def parse_attestations(data: Any, allowed_recs: Iterable[int] | None = None, source_name: str = "") -> list[AttestationRecord]:
    if not isinstance(data, list):
        raise ParseError(1, "attestations file must be a JSON array", source_name)
    allowed = set(allowed_recs) if allowed_recs is not None else None
    out = []
    for i, obj in enumerate(data):
        f = _Fields(obj, 1, f"attestation[{i}]", source_name)
        f.only(["rec_id", "status", "by", "date"], ["note"])
        rec_id = f.int("rec_id")
        if not 1 <= rec_id <= 44:
            raise f.fail(f"rec_id {rec_id} outside 1..44")
        if allowed is not None and rec_id not in allowed:
            raise f.fail(f"REC {rec_id} is not an attestable recommendation")
        status = f.enum("status", ATTESTATION_STATUSES)
        note = f.str("note", optional=True) or ""
        if status != "attested_pass" and not note.strip():
            raise f.fail(f"a note is required for status {status}")
        out.append(
            AttestationRecord(
                rec_id=rec_id,
                status=status,
                by=f.str("by", nonempty=True),
                date=f.timestamp("date"),
                note=note,
            )
        )
    return out


def load_attestations(src: ByteSource, allowed_recs: Iterable[int] | None = None, source_name: str = "") -> list[AttestationRecord]:
    return parse_attestations(read_json(src, source_name), allowed_recs, source_name)


# -- checks --------------------------------------------------------------------


def _lineage_problems(item: DataItem, known_ids: Mapping[str, Any]) -> list[str]:
    lin = item.lineage
    problems = []
    if lin.is_raw:
        if lin.transforms:
            problems.append("raw item lists transforms")
    else:
        if not lin.raw_uri:
            problems.append("derived item has no raw_uri")
        if not lin.transforms:
            problems.append("derived item records no transforms")
    for step in lin.transforms:
        if not step.tool_version:
            problems.append(f"transform {step.op_name!r} has no tool_version")
        parent = step.params.get("parent_id")
        if parent is None:
            if step.op_name.startswith("augment"):
                problems.append(f"augmentation {step.op_name!r} has no parent_id")
        elif not isinstance(parent, str) or parent not in known_ids:
            problems.append(f"dangling parent {parent!r}")
        elif parent == item.id:
            problems.append("item names itself as parent")
    return problems


def check_lineage(manifest: Manifest) -> list[Finding]:
    """REC 8 (recorded ability to regenerate) and REC 9 (versioned sources).

    Only lineage metadata is inspected; transforms are never executed.
    """
    findings: list[Finding] = []
    known = manifest.by_id
    for item in sorted(manifest.items, key=lambda it: it.id):
        problems = _lineage_problems(item, known)
        if problems:
            findings.append(Finding(8, Status.FAIL, f"{item.id}: " + "; ".join(problems), (item.id,)))
    if not any(f.rec_id == 8 for f in findings):
        findings.append(
            Finding(
                8,
                Status.PASS,
                "lineage metadata complete for all items (recorded, not re-executed)",
                metrics={"items": len(manifest.items)},
            )
        )
    unversioned = sorted(s.source_id for s in manifest.header.sources if not s.acquisition_config_version)
    for sid in unversioned:
        findings.append(Finding(9, Status.FAIL, f"source {sid} has no acquisition_config_version", (sid,)))
    if not unversioned:
        findings.append(
            Finding(9, Status.PASS, "all sources carry an acquisition configuration version",
                    metrics={"sources": len(manifest.header.sources)})
        )
    return findings


def check_annotation_traceability(annotations: AnnotationSet, manifest: Manifest | None = None) -> list[Finding]:
    """REC 38: every annotation names its annotator (and, given a manifest, a known item)."""
    findings: list[Finding] = []
    anonymous = [r for r in annotations if not r.annotator.strip()]
    if anonymous:
        ids = sorted({r.item_id for r in anonymous})
        findings.append(
            Finding(38, Status.FAIL, f"{len(anonymous)} annotation(s) not attributed to an annotator",
                    tuple(ids), {"count": len(anonymous)})
        )
    if manifest is not None:
        known = manifest.by_id
        dangling = Counter(r.item_id for r in annotations if r.item_id not in known)
        if dangling:
            findings.append(
                Finding(38, Status.FAIL,
                        f"{sum(dangling.values())} annotation(s) reference items absent from the manifest",
                        tuple(sorted(dangling)), {"dangling": sum(dangling.values())})
            )
    if not findings:
        findings.append(
            Finding(38, Status.PASS, "all annotations attributed", metrics={"records": len(annotations)})
        )
    return findings
