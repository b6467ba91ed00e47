"""Declarative consistency rules, representation uniformity, exact duplicates, outliers."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidParameter, ParseError, UnknownField
from .findings import Finding, Status
from .manifest import AnnotationSet, ByteSource, DataItem, Manifest, _Fields, read_json

RULE_KINDS = {
    "unique": ("field",),
    "same_object_same_value": ("object_key_field", "value_field"),
    "in_set": ("field", "values"),
    "in_range": ("field", "lo", "hi"),
    "implies": ("field_a", "value_a", "field_b", "allowed"),
}
RULE_TARGETS = ("items", "annotations")
ITEM_CORE_FIELDS = frozenset(("id", "digest", "source_id", "split", "group_id", "label", "ambiguous", "simhash64"))
ANNOTATION_FIELDS = ("item_id", "annotator", "label", "at", "seq", "storage_index", "method")

_ABSENT = object()


@dataclass(frozen=True)
class ConsistencyRule:
    rule_id: str
    kind: str
    params: Mapping[str, Any]
    target: str = "items"

    @property
    def rec_id(self) -> int:
        return 16 if self.kind == "same_object_same_value" else 15

    def fields(self) -> list[str]:
        names = {"unique": ["field"], "same_object_same_value": ["object_key_field", "value_field"],
                 "in_set": ["field"], "in_range": ["field"], "implies": ["field_a", "field_b"]}[self.kind]
        return [self.params[n] for n in names]


def parse_rules(obj: Any, source_name: str = "") -> list[ConsistencyRule]:
    if not isinstance(obj, list):
        raise ParseError(1, "rules file must be a JSON array", source_name)
    rules = []
    seen: set[str] = set()
    for i, raw in enumerate(obj):
        f = _Fields(raw, 1, f"rule[{i}]", source_name)
        f.only(["rule_id", "kind", "params"], ["target", "description"])
        rule_id = f.str("rule_id", nonempty=True)
        if rule_id in seen:
            raise f.fail(f"duplicate rule_id {rule_id!r}")
        seen.add(rule_id)
        kind = f.enum("kind", RULE_KINDS)
        params = f.dict("params")
        p = _Fields(params, 1, f"rule {rule_id} params", source_name)
        p.only(RULE_KINDS[kind])
        for key in ("field", "object_key_field", "value_field", "field_a", "field_b"):
            if key in params:
                p.str(key, nonempty=True)
        if kind == "in_set":
            p.list("values")
        if kind == "implies":
            p.list("allowed")
        if kind == "in_range":
            lo, hi = params["lo"], params["hi"]
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (lo, hi)) or lo > hi:
                raise p.fail("in_range needs numeric lo <= hi")
        target = raw.get("target", "items")
        if target not in RULE_TARGETS:
            raise f.fail(f"target must be one of {list(RULE_TARGETS)}")
        rules.append(ConsistencyRule(rule_id, kind, dict(params), target))
    return rules


def load_rules(src: ByteSource, source_name: str = "") -> list[ConsistencyRule]:
    return parse_rules(read_json(src, source_name), source_name)


def unwrap(value: Any) -> Any:
    """Strip a ``{"value": x, "unit": u}`` wrapper."""
    if isinstance(value, dict) and set(value) == {"value", "unit"}:
        return value["value"]
    return value


def item_value(item: DataItem, name: str) -> Any:
    """Attribute lookup order: core field, free-form attrs, ODD value."""
    if name in ITEM_CORE_FIELDS:
        v = getattr(item, name)
        return _ABSENT if v is None else v
    if name in item.attrs:
        return unwrap(item.attrs[name])
    if name in item.odd:
        return item.odd[name]
    return _ABSENT


def _records(manifest: Manifest, annotations: AnnotationSet | None, target: str) -> list[tuple[str, Any]]:
    """(evidence id, record) pairs with a value accessor-compatible record."""
    if target == "annotations":
        return [(r.item_id, r) for r in (annotations or ())]
    return [(it.id, it) for it in manifest.items]


def _getter(name: str, target: str) -> Callable[[Any], Any]:
    """Value accessor for one field of an item or annotation record; absent values give ``_ABSENT``."""
    if target == "annotations" or name in ITEM_CORE_FIELDS:
        absent_none = target != "annotations"

        def get(rec: Any) -> Any:
            v = getattr(rec, name)
            return _ABSENT if absent_none and v is None else v
        return get

    def get_item(item: Any) -> Any:
        v = item.attrs.get(name, _ABSENT)
        if v is not _ABSENT:
            return unwrap(v) if type(v) is dict else v
        return item.odd.get(name, _ABSENT)
    return get_item


def _field_known(manifest: Manifest, name: str, target: str) -> bool:
    if target == "annotations":
        return name in ANNOTATION_FIELDS
    return name in ITEM_CORE_FIELDS or any(name in it.attrs or name in it.odd for it in manifest.items)


def _show(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


def _key(value: Any) -> Any:
    """Hashable identity of a JSON value; 1, 1.0, True and "1" stay distinct."""
    t = type(value)
    if t is str or t is int or t is float or t is bool or value is None:
        return t, value
    return dict, _show(value)


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def check_rules(
    manifest: Manifest, annotations: AnnotationSet | None, rules: Sequence[ConsistencyRule]
) -> list[Finding]:
    """REC 14 (rules expressed), REC 15 (rules verified), REC 16 (object-level consistency)."""
    for rule in rules:
        for name in rule.fields():
            if not _field_known(manifest, name, rule.target):
                raise UnknownField(rule.rule_id, name)

    findings: list[Finding] = []
    if rules:
        findings.append(Finding(14, Status.PASS, f"{len(rules)} consistency rule(s) expressed",
                                metrics={"rules": len(rules)}))
    else:
        findings.append(Finding(14, Status.FAIL, "no consistency rules expressed"))
    if not any(r.kind == "same_object_same_value" for r in rules):
        findings.append(Finding(16, Status.WARN, "no object-level consistency rule declared"))

    for rule in sorted(rules, key=lambda r: r.rule_id):
        violations = _evaluate(rule, _records(manifest, annotations, rule.target))
        if violations:
            findings.extend(Finding(rule.rec_id, Status.FAIL, f"{rule.rule_id}: {msg}", tuple(sorted(set(ids))))
                            for msg, ids in sorted(violations))
        else:
            findings.append(Finding(rule.rec_id, Status.PASS, f"{rule.rule_id}: satisfied"))
    return findings


def _evaluate(rule: ConsistencyRule, records: list[tuple[str, Any]]) -> list[tuple[str, list[str]]]:
    p = rule.params
    out: list[tuple[str, list[str]]] = []
    if rule.kind == "unique":
        groups: dict[Any, list[str]] = defaultdict(list)
        shown: dict[Any, Any] = {}
        get = _getter(p["field"], rule.target)
        for rid, rec in records:
            v = get(rec)
            if v is not _ABSENT:
                k = _key(v)
                groups[k].append(rid)
                shown.setdefault(k, v)
        for k, ids in groups.items():
            if len(ids) > 1:
                out.append((f"{p['field']}={_show(shown[k])} shared by {len(ids)} records", ids))
    elif rule.kind == "same_object_same_value":
        values: dict[Any, dict[Any, list[str]]] = defaultdict(lambda: defaultdict(list))
        raw: dict[Any, Any] = {}
        get_obj = _getter(p["object_key_field"], rule.target)
        get = _getter(p["value_field"], rule.target)
        for rid, rec in records:
            obj = get_obj(rec)
            v = get(rec)
            if obj is not _ABSENT and v is not _ABSENT:
                ko, kv = _key(obj), _key(v)
                values[ko][kv].append(rid)
                raw.setdefault(ko, obj)
                raw.setdefault(kv, v)
        for ko, by_value in values.items():
            if len(by_value) > 1:
                ids = [i for group in by_value.values() for i in group]
                conflicting = sorted(_show(raw[kv]) for kv in by_value)
                out.append((f"{p['object_key_field']}={_show(raw[ko])} has conflicting {p['value_field']} values "
                            f"{conflicting}", ids))
    elif rule.kind == "in_set":
        allowed = {_key(v) for v in p["values"]}
        get = _getter(p["field"], rule.target)
        for rid, rec in records:
            v = get(rec)
            if v is not _ABSENT and _key(v) not in allowed:
                out.append((f"{p['field']}={_show(v)} not in allowed set", [rid]))
    elif rule.kind == "in_range":
        lo, hi = p["lo"], p["hi"]
        get = _getter(p["field"], rule.target)
        for rid, rec in records:
            v = get(rec)
            if v is _ABSENT:
                continue
            if not (type(v) is int or type(v) is float) or not lo <= v <= hi:
                out.append((f"{p['field']}={_show(v)} outside [{lo}, {hi}]", [rid]))
    elif rule.kind == "implies":
        trigger = _key(p["value_a"])
        allowed = {_key(v) for v in p["allowed"]}
        get_a, get_b = _getter(p["field_a"], rule.target), _getter(p["field_b"], rule.target)
        for rid, rec in records:
            a = get_a(rec)
            if a is _ABSENT or _key(a) != trigger:
                continue
            b = get_b(rec)
            if b is _ABSENT or _key(b) not in allowed:
                shown_b = "absent" if b is _ABSENT else _show(b)
                out.append((f"{p['field_a']}={_show(p['value_a'])} but {p['field_b']}={shown_b}", [rid]))
    return out


_KINDS = {bool: "boolean", int: "number", float: "number", str: "string", list: "array", dict: "object"}


def value_kind(value: Any) -> tuple[str, str | None] | None:
    """(kind, unit tag) of an attribute value; None for null."""
    unit = None
    if type(value) is dict and set(value) == {"value", "unit"}:
        unit = value["unit"] if isinstance(value["unit"], str) else _show(value["unit"])
        value = value["value"]
    if value is None:
        return None
    return _KINDS.get(type(value), "object"), unit


def check_representation(manifest: Manifest) -> list[Finding]:
    """REC 17: one value kind and at most one declared unit per attribute."""
    variants: dict[str, dict[tuple[str, str | None], set[str]]] = defaultdict(lambda: defaultdict(set))
    seen_at: dict[tuple[str, str, tuple[str, str | None]], set[str]] = {}
    for item in manifest.items:
        src = item.source_id
        for ns, mapping in (("attrs", item.attrs), ("odd", item.odd)):
            for name, value in mapping.items():
                kind = _KINDS.get(type(value))
                if kind is None or kind == "object":
                    vk = value_kind(value)
                    if vk is None:
                        continue
                else:
                    vk = (kind, None)
                srcs = seen_at.get((ns, name, vk))
                if srcs is None:
                    seen_at[(ns, name, vk)] = {src}
                else:
                    srcs.add(src)
    for (ns, name, vk), srcs in seen_at.items():
        variants[f"{ns}.{name}"][vk] = srcs
    findings = []
    for name in sorted(variants):
        seen = variants[name]
        kinds = {k for k, _ in seen}
        units = {u for _, u in seen if u is not None}
        if len(kinds) > 1 or len(units) > 1:
            detail = "; ".join(
                f"{k}{f' [{u}]' if u else ''} from {sorted(srcs)}" for (k, u), srcs in sorted(seen.items(), key=str)
            )
            sources = sorted(set().union(*seen.values()))
            findings.append(Finding(17, Status.FAIL, f"{name}: inconsistent representation: {detail}", tuple(sources)))
    if not findings:
        findings.append(Finding(17, Status.PASS, f"{len(variants)} attribute(s) consistently represented",
                                metrics={"attributes": len(variants)}))
    return findings


@dataclass(frozen=True)
class DuplicateGroup:
    digest: str
    item_ids: tuple[str, ...]


def group_exact_duplicates(manifest: Manifest) -> list[DuplicateGroup]:
    by_digest: dict[str, list[str]] = defaultdict(list)
    for it in manifest.items:
        by_digest[it.digest].append(it.id)
    groups = [DuplicateGroup(d, tuple(sorted(ids))) for d, ids in by_digest.items() if len(ids) > 1]
    return sorted(groups, key=lambda g: g.item_ids)


def duplicate_findings(groups: Iterable[DuplicateGroup], manifest: Manifest | None = None) -> list[Finding]:
    """Repeats are legal but need a documented rationale, hence warnings.

    Given the manifest, groups spanning several splits are skipped: those are
    split-overlap failures reported under REC 39.
    """
    split = {it.id: it.split for it in manifest.items} if manifest is not None else {}
    return [
        Finding(15, Status.WARN, f"{len(g.item_ids)} items share content {g.digest}; repetition needs a rationale",
                g.item_ids, {"group_size": len(g.item_ids)})
        for g in groups
        if len({split.get(i) for i in g.item_ids}) <= 1
    ]


@dataclass(frozen=True)
class OutlierPolicy:
    fields: tuple[str, ...] | None = None
    threshold: float = 3.5
    rel_epsilon: float = 1e-9
    min_values: int = 5

    def __post_init__(self) -> None:
        if not self.threshold > 0:
            raise InvalidParameter("outlier threshold must be > 0")


def numeric_columns(manifest: Manifest) -> dict[str, tuple[list[str], list[float]]]:
    """Numeric values per attribute name; a free-form attribute shadows an ODD value."""
    cols: dict[str, tuple[list[str], list[float]]] = {}
    for it in manifest.items:
        attrs = it.attrs
        for mapping in (attrs, it.odd):
            for name, v in mapping.items():
                t = type(v)
                if t is dict:
                    v = unwrap(v)
                    t = type(v)
                if t is not int and t is not float:
                    continue
                if mapping is not attrs and name in attrs:
                    continue
                col = cols.get(name)
                if col is None:
                    col = cols[name] = ([], [])
                col[0].append(it.id)
                col[1].append(v)
    return cols


def numeric_fields(manifest: Manifest, min_values: int = 5) -> list[str]:
    return sorted(n for n, (ids, _) in numeric_columns(manifest).items() if len(ids) >= min_values)


def modified_z_flags(xs: Sequence[float], threshold: float = 3.5, rel_epsilon: float = 1e-9) -> np.ndarray:
    """Boolean mask of outliers by modified z-score, with a MAD = 0 fallback."""
    x = np.asarray(xs, dtype=float)
    m = np.median(x)
    dev = np.abs(x - m)
    mad = np.median(dev)
    if mad == 0:
        return dev > rel_epsilon * max(1.0, abs(m))
    return 0.6745 * dev / mad > threshold


def detect_outliers(manifest: Manifest, policy: OutlierPolicy = OutlierPolicy()) -> list[Finding]:
    """REC 12: flag (never remove) robust outliers per numeric field."""
    cols = numeric_columns(manifest)
    if policy.fields is not None:
        names = list(policy.fields)
    else:
        names = [n for n, (ids, _) in cols.items() if len(ids) >= policy.min_values]
    if not names:
        return [Finding(12, Status.WARN, "no numeric attributes to screen for outliers")]
    findings = []
    screened = 0
    for name in sorted(names):
        ids, xs = cols.get(name, ([], []))
        if len(xs) < policy.min_values:
            findings.append(Finding(12, Status.WARN, f"{name}: only {len(xs)} numeric values, outlier screen skipped"))
            continue
        screened += 1
        mask = modified_z_flags(np.asarray(xs, dtype=float), policy.threshold, policy.rel_epsilon)
        flagged = sorted(i for i, f in zip(ids, mask) if f)
        if flagged:
            findings.append(Finding(12, Status.WARN, f"{name}: {len(flagged)} outlier(s) by modified z-score",
                                    tuple(flagged), {"flagged": len(flagged)}))
    if not any(f.status is Status.WARN for f in findings):
        findings.append(Finding(12, Status.PASS, f"{screened} numeric field(s) screened, no outliers",
                                metrics={"fields": screened}))
    return findings
