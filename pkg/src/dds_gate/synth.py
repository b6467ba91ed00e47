"""Synthetic datasets for tests, benchmarks and demos.

:func:`golden` builds a clean fixture that passes every automated check when
paired with a full set of attestations. :data:`DEFECTS` plants exactly one
problem each, keyed by the REC id that must then fail.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .integrity import append_entry, commitment_for, dump_audit_log, sha256_digest, AuditLogEntry
from .registry import DEFAULT_REGISTRY

LABELS = ("main_signal", "distant_signal", "shunting_signal")
ODD_SCHEMA = {
    "name": "synthetic-railway",
    "currency_notes": "re-validate proportions after each acquisition campaign",
    "dimensions": [
        {"name": "weather", "kind": "categorical", "levels": ["sun", "rain", "fog"]},
        {"name": "light", "kind": "ordinal", "levels": ["day", "dusk", "night"]},
        {"name": "location", "kind": "categorical", "levels": ["station", "open_track", "tunnel"]},
    ],
}
EXPECTED = {
    "weather": {"sun": 0.5, "rain": 0.3, "fog": 0.2},
    "light": {"day": 0.6, "dusk": 0.2, "night": 0.2},
}
RULES = [
    {"rule_id": "label-known", "kind": "in_set", "params": {"field": "label", "values": list(LABELS)}},
    {"rule_id": "distance-plausible", "kind": "in_range", "params": {"field": "distance", "lo": 0, "hi": 1000}},
    {"rule_id": "birthday-per-object", "kind": "same_object_same_value",
     "params": {"object_key_field": "object_id", "value_field": "birthday"}},
    {"rule_id": "annotation-label-known", "kind": "in_set", "target": "annotations",
     "params": {"field": "label", "values": list(LABELS)}},
]
CREATED = "2024-03-01T08:00:00Z"
SEALED_AT = "2024-03-02T08:00:00Z"
ATTESTED_AT = "2024-03-03T08:00:00Z"


@dataclass
class FixtureConfig:
    n_items: int = 2000
    n_test: int = 600
    n_validation: int = 200
    n_annotators: int = 3
    group_size: int = 3
    agreement: float = 0.95
    ambiguous_fraction: float = 0.01
    augmented_fraction: float = 0.02
    seed: int = 0


@dataclass
class Fixture:
    header: dict[str, Any]
    items: list[dict[str, Any]]
    contents: dict[str, bytes]
    annotations: list[dict[str, Any]]
    audit: list[AuditLogEntry]
    attestations: list[dict[str, Any]]
    schema: dict[str, Any] = field(default_factory=lambda: copy.deepcopy(ODD_SCHEMA))
    expected: dict[str, Any] = field(default_factory=lambda: copy.deepcopy(EXPECTED))
    rules: list[dict[str, Any]] = field(default_factory=lambda: copy.deepcopy(RULES))

    def copy(self) -> "Fixture":
        return copy.deepcopy(self)

    def item(self, item_id: str) -> dict[str, Any]:
        return next(it for it in self.items if it["id"] == item_id)

    def seal(self, split: str = "test") -> dict[str, Any]:
        digests = [it["digest"] for it in self.items if it["split"] == split]
        return {"split": split, "item_count": len(digests), "commitment": commitment_for(digests),
                "sealed_at": SEALED_AT}


def _stratified(levels: dict[str, float], n: int, rng: np.random.Generator) -> list[str]:
    """Exactly proportional level assignment (largest remainder), shuffled."""
    names = list(levels)
    raw = np.array([levels[k] for k in names]) * n
    counts = np.floor(raw).astype(int)
    for i in np.argsort(-(raw - counts), kind="stable")[: n - counts.sum()]:
        counts[i] += 1
    out = [name for name, c in zip(names, counts) for _ in range(c)]
    rng.shuffle(out)
    return out


def _full_attestations() -> list[dict[str, Any]]:
    return [{"rec_id": r, "status": "attested_pass", "by": "qa-lead", "date": ATTESTED_AT,
             "note": "reviewed against the dataset specification"}
            for r in DEFAULT_REGISTRY.attestable]


def golden(cfg: FixtureConfig = FixtureConfig()) -> Fixture:
    rng = np.random.default_rng(cfg.seed)
    n_train = cfg.n_items - cfg.n_test - cfg.n_validation
    if n_train < cfg.group_size:
        raise ValueError("fixture too small for the requested test and validation splits")
    header = {
        "schema_version": "1.0",
        "dataset_id": f"synthetic-{cfg.seed}",
        "created": CREATED,
        "sources": [
            {"source_id": "cam-front", "description": "front camera", "acquisition_config_version": "acq-2.1"},
            {"source_id": "cam-roof", "description": "roof camera", "acquisition_config_version": "acq-1.4"},
        ],
    }
    # Train items come in groups (frames of one sighting); held-out items stand alone.
    splits = ["train"] * n_train + ["validation"] * cfg.n_validation + ["test"] * cfg.n_test
    test_weather = iter(_stratified(EXPECTED["weather"], cfg.n_test, rng))
    test_light = iter(_stratified(EXPECTED["light"], cfg.n_test, rng))
    levels = {d["name"]: d["levels"] for d in ODD_SCHEMA["dimensions"]}
    n = cfg.n_items
    simhashes = rng.integers(0, 2**64, size=n, dtype=np.uint64)
    payload = rng.integers(0, 2**63, size=n, dtype=np.int64)
    distances = rng.uniform(50.0, 500.0, size=n).round(1)
    weather = rng.choice(levels["weather"], size=n, p=[0.5, 0.3, 0.2])
    light = rng.choice(levels["light"], size=n, p=[0.6, 0.2, 0.2])
    location = rng.choice(levels["location"], size=n)
    years = rng.integers(2000, 2024, size=n)
    months = rng.integers(1, 13, size=n)
    labels = rng.integers(0, len(LABELS), size=n)
    ambiguous = rng.random(n) < cfg.ambiguous_fraction

    items: list[dict[str, Any]] = []
    contents: dict[str, bytes] = {}
    obj: dict[str, Any] = {}
    for idx, split in enumerate(splits):
        item_id = f"img-{idx:06d}"
        if split != "train" or idx % cfg.group_size == 0:
            obj = {
                "object_id": f"obj-{idx:06d}",
                "birthday": f"{years[idx]}-{months[idx]:02d}-15",
                "label": LABELS[labels[idx]],
                "group": f"seq-{idx:06d}" if split == "train" else None,
            }
        if split == "test":
            odd = {"weather": next(test_weather), "light": next(test_light)}
        else:
            odd = {"weather": str(weather[idx]), "light": str(light[idx])}
        odd["location"] = str(location[idx])
        content = f"{item_id}:{int(payload[idx]):x}".encode()
        contents[item_id] = content
        items.append({
            "id": item_id,
            "digest": sha256_digest(content),
            "source_id": "cam-front" if idx % 2 == 0 else "cam-roof",
            "split": split,
            "group_id": obj["group"],
            "odd": odd,
            "lineage": {"is_raw": True, "raw_uri": f"s3://raw/{item_id}.png", "transforms": []},
            "ambiguous": bool(ambiguous[idx]),
            "simhash64": int(simhashes[idx]),
            "label": obj["label"],
            "attrs": {"object_id": obj["object_id"], "birthday": obj["birthday"],
                      "distance": {"value": float(distances[idx]), "unit": "m"}},
        })

    # Augmented copies of some grouped train items (in-split, chained to the parent).
    train_ids = [it for it in items if it["split"] == "train" and it["group_id"] is not None]
    for parent in train_ids[: int(cfg.augmented_fraction * len(train_ids))]:
        child = copy.deepcopy(parent)
        child["id"] = parent["id"] + "-flip"
        content = contents[parent["id"]] + b":flip"
        contents[child["id"]] = content
        child["digest"] = sha256_digest(content)
        child["simhash64"] = int(rng.integers(0, 2**64, dtype=np.uint64))
        child["lineage"] = {"is_raw": False, "raw_uri": parent["lineage"]["raw_uri"], "transforms": [
            {"op_name": "augment_hflip", "params": {"parent_id": parent["id"]}, "tool_version": "imgaug-0.4.0"}]}
        items.append(child)

    # Storage order is shuffled so neighbouring items are unrelated.
    order = rng.permutation(len(items))
    items = [items[i] for i in order]

    annotators = [f"annotator-{chr(ord('a') + i)}" for i in range(cfg.n_annotators)]
    per: dict[str, list[dict[str, Any]]] = {a: [] for a in annotators}
    slips = rng.random((len(items), 2)) > cfg.agreement
    shifts = rng.integers(1, len(LABELS), size=(len(items), 2))
    for pos, it in enumerate(items):
        pair = [annotators[pos % len(annotators)], annotators[(pos + 1) % len(annotators)]] \
            if len(annotators) > 1 else annotators
        for j, a in enumerate(pair):
            label = it["label"]
            if slips[pos, j]:
                label = LABELS[(LABELS.index(label) + shifts[pos, j]) % len(LABELS)]
            per[a].append({"item_id": it["id"], "annotator": a, "label": label, "at": CREATED,
                           "seq": 0, "storage_index": pos, "method": "manual"})
    annotations = []
    for a in annotators:
        recs = per[a]
        for seq, j in enumerate(rng.permutation(len(recs))):
            recs[j]["seq"] = seq
        annotations.extend(recs)

    audit: list[AuditLogEntry] = []
    edits = [("2024-02-10T09:00:00Z", "alice", "add", [items[0]["id"]], "initial import of campaign 7"),
             ("2024-02-11T10:30:00Z", "bob", "modify", [items[1]["id"]], "relabel after expert review"),
             ("2024-02-12T14:00:00Z", "alice", "modify", [items[2]["id"]], "fix exposure metadata"),
             ("2024-02-20T16:45:00Z", "carol", "add", [items[3]["id"]], "add tunnel exit frames")]
    for ts, user, action, ids, why in edits:
        audit = append_entry(audit, ts, user, action, ids, why)

    return Fixture(header, items, contents, annotations, audit, _full_attestations())



def scale(n_items: int = 100_000, seed: int = 0) -> Fixture:
    """Large clean fixture (3 annotators) for the throughput benchmark."""
    return golden(FixtureConfig(n_items=n_items, n_test=n_items // 5, n_validation=n_items // 10, seed=seed))

# -- planted defects ------------------------------------------------------------------


def _first(fx: Fixture, split: str, pred: Callable[[dict[str, Any]], bool] = lambda it: True) -> dict[str, Any]:
    return next(it for it in sorted(fx.items, key=lambda x: x["id"]) if it["split"] == split and pred(it))


def cross_split_duplicate(fx: Fixture) -> None:
    """A test item carries the same content as a train item (simhash left distinct)."""
    train = _first(fx, "train", lambda it: it["lineage"]["is_raw"])
    test = _first(fx, "test")
    fx.contents[test["id"]] = fx.contents[train["id"]]
    test["digest"] = train["digest"]


def split_spanning_group(fx: Fixture) -> None:
    train = _first(fx, "train", lambda it: it["group_id"] is not None)
    _first(fx, "test")["group_id"] = train["group_id"]


def inconsistent_birthday(fx: Fixture) -> None:
    train = _first(fx, "train", lambda it: it["group_id"] is not None)
    train["attrs"]["birthday"] = "1999-12-31"


def unit_kind_mix(fx: Fixture) -> None:
    it = _first(fx, "train")
    it["attrs"]["distance"] = {"value": it["attrs"]["distance"]["value"], "unit": "ft"}


def unattributed_annotation(fx: Fixture) -> None:
    fx.annotations[0]["annotator"] = ""


def sequential_assignment(fx: Fixture) -> None:
    """One annotator processes items exactly in storage order."""
    who = fx.annotations[0]["annotator"]
    recs = sorted((r for r in fx.annotations if r["annotator"] == who), key=lambda r: r["storage_index"])
    for seq, r in enumerate(recs):
        r["seq"] = seq


def odd_value_outside_levels(fx: Fixture) -> None:
    _first(fx, "train")["odd"]["weather"] = "hail"


def broken_audit_chain(fx: Fixture) -> None:
    """Rewrite an entry's justification after the fact; the next link breaks."""
    e = fx.audit[1]
    fx.audit[1] = AuditLogEntry(e.ts, e.user, e.action, e.item_ids, "silently edited", e.prev_digest)


DEFECTS: dict[str, tuple[int, Callable[[Fixture], None]]] = {
    "cross_split_duplicate": (39, cross_split_duplicate),
    "split_spanning_group": (43, split_spanning_group),
    "inconsistent_birthday": (16, inconsistent_birthday),
    "unit_kind_mix": (17, unit_kind_mix),
    "unattributed_annotation": (38, unattributed_annotation),
    "sequential_assignment": (37, sequential_assignment),
    "odd_value_outside_levels": (4, odd_value_outside_levels),
    "broken_audit_chain": (19, broken_audit_chain),
}


def planted(fx: Fixture, defect: str) -> Fixture:
    out = fx.copy()
    DEFECTS[defect][1](out)
    return out


# -- writing ----------------------------------------------------------------------------


@dataclass(frozen=True)
class FixturePaths:
    root: Path
    manifest: Path
    odd: Path
    expected: Path
    annotations: Path
    attestations: Path
    audit_log: Path
    rules: Path
    seal: Path
    content_dir: Path | None

    def check_args(self) -> list[str]:
        args = ["--manifest", str(self.manifest), "--odd", str(self.odd), "--expected", str(self.expected),
                "--annotations", str(self.annotations), "--attestations", str(self.attestations),
                "--audit-log", str(self.audit_log), "--rules", str(self.rules), "--seal", str(self.seal)]
        if self.content_dir is not None:
            args += ["--content-dir", str(self.content_dir)]
        return args


def _jsonl(rows: list[dict[str, Any]]) -> bytes:
    return b"".join(json.dumps(r, sort_keys=True, separators=(",", ":")).encode() + b"\n" for r in rows)


def write_fixture(fx: Fixture, root: str | Path, with_content: bool = True) -> FixturePaths:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    content_dir = root / "content" if with_content else None
    paths = FixturePaths(root, root / "manifest.jsonl", root / "odd.json", root / "expected.json",
                         root / "annotations.jsonl", root / "attestations.json", root / "audit.jsonl",
                         root / "rules.json", root / "seal.json", content_dir)
    paths.manifest.write_bytes(_jsonl([fx.header, *fx.items]))
    paths.annotations.write_bytes(_jsonl(fx.annotations))
    paths.audit_log.write_bytes(dump_audit_log(fx.audit))
    for path, obj in ((paths.odd, fx.schema), (paths.expected, fx.expected), (paths.rules, fx.rules),
                      (paths.attestations, fx.attestations), (paths.seal, fx.seal())):
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if content_dir is not None:
        content_dir.mkdir(exist_ok=True)
        for item_id, data in fx.contents.items():
            (content_dir / item_id).write_bytes(data)
    return paths
