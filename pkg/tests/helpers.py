"""Small builders for hand-made manifests, annotation sets and schemas."""

from __future__ import annotations

import hashlib
import json
from typing import Any, Iterable

from dds_gate.manifest import AnnotationSet, Manifest, load_annotations, load_manifest
from dds_gate.odd import OddSchema, parse_schema

CREATED = "2024-01-01T00:00:00Z"


def digest_of(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def header(sources: Iterable[str] = ("cam",), versioned: bool = True, dataset_id: str = "ds") -> dict[str, Any]:
    return {
        "schema_version": "1.0",
        "dataset_id": dataset_id,
        "created": CREATED,
        "sources": [
            {"source_id": s, "acquisition_config_version": "v1" if versioned else None} for s in sources
        ],
    }


def item(item_id: str, split: str = "train", **fields: Any) -> dict[str, Any]:
    """Raw item record; the digest defaults to the hash of the id's bytes."""
    rec: dict[str, Any] = {
        "id": item_id,
        "digest": digest_of(item_id.encode()),
        "source_id": "cam",
        "split": split,
        "lineage": {"is_raw": True, "raw_uri": f"raw://{item_id}"},
    }
    rec.update(fields)
    return rec


def augmented(item_id: str, parent: str, split: str = "train", **fields: Any) -> dict[str, Any]:
    lineage = {
        "is_raw": False,
        "raw_uri": f"raw://{parent}",
        "transforms": [{"op_name": "augment_hflip", "params": {"parent_id": parent}, "tool_version": "1.0"}],
    }
    return item(item_id, split, lineage=lineage, **fields)


def jsonl(rows: Iterable[dict[str, Any]]) -> bytes:
    return b"".join(json.dumps(r, sort_keys=True).encode() + b"\n" for r in rows)


def manifest_bytes(items: Iterable[dict[str, Any]], **header_kw: Any) -> bytes:
    items = list(items)
    sources = header_kw.pop("sources", None) or sorted({it["source_id"] for it in items} or {"cam"})
    return jsonl([header(sources, **header_kw), *items])


def make_manifest(items: Iterable[dict[str, Any]], **header_kw: Any) -> Manifest:
    return load_manifest(manifest_bytes(items, **header_kw))


def ann(item_id: str, annotator: str, label: str, seq: int = 0, storage_index: int = 0,
        method: str = "manual", at: str = CREATED) -> dict[str, Any]:
    return {"item_id": item_id, "annotator": annotator, "label": label, "at": at, "seq": seq,
            "storage_index": storage_index, "method": method}


def make_annotations(rows: Iterable[dict[str, Any]]) -> AnnotationSet:
    return load_annotations(jsonl(rows))


def series(annotator: str, labels: Iterable[str], storage: Iterable[int] | None = None) -> list[dict[str, Any]]:
    """One annotator's records in processing order; storage positions default to seq."""
    labels = list(labels)
    positions = list(storage) if storage is not None else list(range(len(labels)))
    return [ann(f"i{pos}", annotator, lab, seq=k, storage_index=pos)
            for k, (lab, pos) in enumerate(zip(labels, positions))]


def schema(*dims: dict[str, Any]) -> OddSchema:
    return parse_schema({"dimensions": list(dims)})


def categorical(name: str, *levels: str, kind: str = "categorical") -> dict[str, Any]:
    return {"name": name, "kind": kind, "levels": list(levels)}


def numeric(name: str, lo: float, hi: float, bins: list[float] | None = None) -> dict[str, Any]:
    d: dict[str, Any] = {"name": name, "kind": "numeric", "range": [lo, hi]}
    if bins is not None:
        d["bins"] = bins
    return d


def statuses(findings: Iterable[Any], rec_id: int | None = None) -> list[str]:
    return [f.status.value for f in findings if rec_id is None or f.rec_id == rec_id]
