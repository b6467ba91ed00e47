"""Operational design domain: schema, item traceability, coverage and proportions."""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterable, Mapping, Sequence

from .errors import EmptySplit, InvalidParameter, ParseError, UnknownDimension
from .findings import Finding, Status
from .manifest import ByteSource, DataItem, Manifest, _Fields, read_json

KINDS = ("categorical", "ordinal", "numeric")
DEFAULT_MIN_COUNT = 30
DEFAULT_TV_THRESHOLD = 0.05


@dataclass(frozen=True)
class OddDimension:
    name: str
    kind: str
    levels: tuple[str, ...] = ()
    range: tuple[float, float] | None = None
    bins: tuple[float, ...] | None = None

    def boundaries(self) -> list[float]:
        assert self.range is not None
        lo, hi = self.range
        return sorted({lo, hi, *(self.bins or ())})

    def cells(self) -> list[str]:
        if self.kind != "numeric":
            return list(self.levels)
        b = self.boundaries()
        return [_interval_label(b[i], b[i + 1], i == len(b) - 2) for i in range(len(b) - 1)]

    def value_problem(self, value: Any) -> str | None:
        if self.kind == "numeric":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return f"{value!r} is not numeric"
            lo, hi = self.range or (-math.inf, math.inf)
            if not lo <= value <= hi:
                return f"value {value!r} outside range [{lo:g}, {hi:g}]"
            return None
        if value not in self.levels:
            return f"value {value!r} not in levels"
        return None

    def cell_of(self, value: Any) -> str | None:
        """Coverage cell of a value, or None when the value is not traceable."""
        if self.value_problem(value) is not None:
            return None
        if self.kind != "numeric":
            return value
        b = self.boundaries()
        for i in range(len(b) - 1):
            last = i == len(b) - 2
            if b[i] <= value < b[i + 1] or (last and value == b[i + 1]):
                return _interval_label(b[i], b[i + 1], last)
        return None


class CellMemo(dict):
    """``memo.cell(value)`` equals ``dim.cell_of(value)``, computed once per distinct value.

    Keys carry the value's type so that ``True``, ``1`` and ``1.0`` stay apart.
    """

    def __init__(self, dim: "OddDimension") -> None:
        super().__init__()
        self.dim = dim

    def cell(self, value: Any) -> str | None:
        key = (type(value), value)
        try:
            return self[key]
        except KeyError:
            cell = self[key] = self.dim.cell_of(value)
            return cell
        except TypeError:  # unhashable value
            return self.dim.cell_of(value)


def _interval_label(lo: float, hi: float, closed: bool) -> str:
    return f"[{lo:g}, {hi:g}{']' if closed else ')'}"


@dataclass(frozen=True)
class OddSchema:
    dimensions: tuple[OddDimension, ...]
    name: str = ""
    currency_notes: str = ""

    @property
    def by_name(self) -> dict[str, OddDimension]:
        out: dict[str, OddDimension] = {}
        for d in self.dimensions:
            out.setdefault(d.name, d)
        return out

    def dimension(self, name: str) -> OddDimension:
        try:
            return self.by_name[name]
        except KeyError:
            raise UnknownDimension(name) from None


def parse_schema(obj: Any, source_name: str = "") -> OddSchema:
    """Structural parse only; semantic problems are left to :func:`validate_schema`."""
    f = _Fields(obj, 1, "odd schema", source_name)
    f.only(["dimensions"], ["name", "currency_notes", "description"])
    dims = []
    for i, raw in enumerate(f.list("dimensions")):
        d = _Fields(raw, 1, f"dimension[{i}]", source_name)
        d.only(["name", "kind"], ["levels", "range", "bins", "description"])
        levels = d.list("levels", [])
        if not all(isinstance(x, str) for x in levels):
            raise d.fail("levels must be strings")
        rng = raw.get("range")
        if rng is not None:
            if not (isinstance(rng, list) and len(rng) == 2 and all(_is_number(x) for x in rng)):
                raise d.fail("range must be [lo, hi]")
            rng = (rng[0], rng[1])
        bins = raw.get("bins")
        if bins is not None:
            if not (isinstance(bins, list) and all(_is_number(x) for x in bins)):
                raise d.fail("bins must be a list of numbers")
            bins = tuple(bins)
        dims.append(OddDimension(d.str("name"), d.str("kind"), tuple(levels), rng, bins))
    return OddSchema(
        dimensions=tuple(dims),
        name=f.str("name", optional=True) or "",
        currency_notes=f.str("currency_notes", optional=True) or "",
    )


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def load_schema(src: ByteSource, source_name: str = "") -> OddSchema:
    return parse_schema(read_json(src, source_name), source_name)


def load_builtin_schema(name: str = "railway") -> OddSchema:
    """Schemas shipped with the package (``railway``: environmental conditions table)."""
    ref = resources.files("dds_gate") / "data" / f"odd_{name}.json"
    return load_schema(ref.read_bytes(), f"builtin:{name}")


def validate_schema(schema: OddSchema) -> list[Finding]:
    problems: list[str] = []
    if not schema.dimensions:
        problems.append("no dimensions declared")
    seen: set[str] = set()
    for d in schema.dimensions:
        if not d.name:
            problems.append("dimension with empty name")
        if d.name in seen:
            problems.append(f"duplicate dimension {d.name!r}")
        seen.add(d.name)
        if d.kind not in KINDS:
            problems.append(f"{d.name}: unknown kind {d.kind!r}")
            continue
        if d.kind in ("categorical", "ordinal"):
            if not d.levels:
                problems.append(f"{d.name}: no levels")
            elif len(set(d.levels)) != len(d.levels):
                problems.append(f"{d.name}: duplicate levels")
            continue
        if d.range is None:
            problems.append(f"{d.name}: numeric dimension without range")
            continue
        lo, hi = d.range
        if not lo < hi:
            problems.append(f"{d.name}: range [{lo:g}, {hi:g}] violates lo < hi")
        if d.bins is not None:
            if any(b >= c for b, c in zip(d.bins, d.bins[1:])):
                problems.append(f"{d.name}: bin edges not strictly increasing")
            if any(not lo <= b <= hi for b in d.bins):
                problems.append(f"{d.name}: bin edges outside range")
    if problems:
        return [Finding(3, Status.FAIL, p) for p in problems]
    return [Finding(3, Status.PASS, f"{len(schema.dimensions)} ODD dimensions declared",
                    metrics={"dimensions": len(schema.dimensions)})]


def check_traceability(manifest: Manifest, schema: OddSchema, missing: str = "warn") -> list[Finding]:
    """REC 4 per untraceable item; REC 7 per schema dimension absent from items.

    ``missing`` is the status for absent dimensions (``warn`` or ``fail``).
    """
    if missing not in ("warn", "fail"):
        raise InvalidParameter(f"missing policy must be warn or fail, not {missing!r}")
    dims = schema.by_name
    memos = {name: CellMemo(d) for name, d in dims.items()}
    n_dims = len(dims)
    failed: list[tuple[str, list[str]]] = []
    absent: dict[str, list[str]] = {name: [] for name in dims}
    for item in manifest.items:
        odd = item.odd
        problems = None
        for key, value in odd.items():
            memo = memos.get(key)
            if memo is not None and memo.cell(value) is not None:
                continue
            problems = problems or []
            problems.append((key, f"{key!r} is not an ODD dimension" if memo is None
                             else f"{key}: {memo.dim.value_problem(value)}"))
        if problems:
            failed.append((item.id, [msg for _, msg in sorted(problems)]))
        if len(odd) < n_dims or problems:
            for name in dims:
                if name not in odd:
                    absent[name].append(item.id)
    findings = [Finding(4, Status.FAIL, f"{item_id}: " + "; ".join(msgs), (item_id,))
                for item_id, msgs in sorted(failed)]
    if not any(f.rec_id == 4 for f in findings):
        findings.append(Finding(4, Status.PASS, "all items traceable to the ODD", metrics={"items": len(manifest.items)}))
    status = Status(missing)
    for name in sorted(absent):
        ids = absent[name]
        if ids:
            findings.append(Finding(7, status, f"{len(ids)} item(s) lack ODD dimension {name!r}", tuple(sorted(ids)),
                                    {"missing": len(ids)}))
    if not any(f.rec_id == 7 for f in findings):
        findings.append(Finding(7, Status.PASS, "every item records every ODD dimension"))
    return findings


@dataclass
class CoverageTable:
    counts: dict[tuple[str, ...], dict[tuple[str, ...], int]] = field(default_factory=dict)
    total: int = 0
    min_count: int = DEFAULT_MIN_COUNT

    def cells(self, *dims: str) -> dict[tuple[str, ...], int]:
        return self.counts[tuple(dims)]


def _dim_key(d: str | Sequence[str]) -> tuple[str, ...]:
    return (d,) if isinstance(d, str) else tuple(d)


def coverage(
    manifest: Manifest,
    schema: OddSchema,
    dims: Iterable[str | Sequence[str]] | None = None,
    min_count: int = DEFAULT_MIN_COUNT,
) -> tuple[CoverageTable, list[Finding]]:
    """REC 5: count items per ODD cell (single dimensions or requested tuples)."""
    keys = [_dim_key(d) for d in dims] if dims is not None else [(d.name,) for d in schema.dimensions]
    resolved = [[schema.dimension(n) for n in key] for key in keys]
    table = CoverageTable(total=len(manifest.items), min_count=min_count)
    findings = []
    excluded: set[str] = set()
    for key, dlist in zip(keys, resolved):
        counts = {cell: 0 for cell in itertools.product(*(d.cells() for d in dlist))}
        memos = [CellMemo(d) for d in dlist]
        for item in manifest.items:
            odd = item.odd
            cell = []
            for memo in memos:
                if memo.dim.name not in odd:
                    break
                cell.append(memo.cell(odd[memo.dim.name]))
            else:
                if None in cell:
                    excluded.add(item.id)
                else:
                    counts[tuple(cell)] += 1
        table.counts[key] = counts
        for cell, n in counts.items():
            if n < min_count:
                label = ", ".join(f"{k}={v}" for k, v in zip(key, cell))
                findings.append(Finding(5, Status.FAIL, f"{label}: {n} < {min_count} items",
                                        metrics={"count": n, "min_count": min_count}))
    # Untraceable values are already REC 4 failures; here they are only counted.
    note = f" ({len(excluded)} untraceable item(s) excluded)" if excluded else ""
    if not findings:
        n_cells = sum(len(c) for c in table.counts.values())
        findings.append(Finding(5, Status.PASS, f"all {n_cells} coverage cells have >= {min_count} items{note}",
                                metrics={"cells": n_cells, "min_count": min_count, "excluded": len(excluded)}))
    elif excluded:
        findings[0] = dataclasses.replace(findings[0], message=findings[0].message + note,
                                          metrics={**findings[0].metrics, "excluded": len(excluded)})
    return table, findings


@dataclass(frozen=True)
class ExpectedDistribution:
    dims: Mapping[str, Mapping[str, float]]

    def __post_init__(self) -> None:
        for dim, probs in self.dims.items():
            if not probs:
                raise InvalidParameter(f"{dim}: empty distribution")
            if any(p < 0 for p in probs.values()):
                raise InvalidParameter(f"{dim}: negative probability")
            total = math.fsum(probs.values())
            if abs(total - 1.0) > 1e-9:
                raise InvalidParameter(f"{dim}: probabilities sum to {total!r}, not 1")


def parse_expected(obj: Any, source_name: str = "") -> ExpectedDistribution:
    if not isinstance(obj, dict):
        raise ParseError(1, "expected distribution must be an object", source_name)
    dims: dict[str, dict[str, float]] = {}
    for dim, probs in obj.items():
        if not isinstance(probs, dict) or not all(_is_number(p) for p in probs.values()):
            raise ParseError(1, f"{dim}: expected an object of level -> probability", source_name)
        dims[dim] = dict(probs)
    return ExpectedDistribution(dims)


def load_expected(src: ByteSource, source_name: str = "") -> ExpectedDistribution:
    return parse_expected(read_json(src, source_name), source_name)


def total_variation(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    """Half the L1 distance between two distributions over the union of their supports."""
    support = sorted(set(p) | set(q))
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in support)


def _level(item: DataItem, dim: str, schema: OddSchema | None) -> Any:
    value = item.odd[dim]
    if schema is not None:
        d = schema.by_name[dim]
        if d.kind == "numeric":
            return d.cell_of(value) or f"out-of-range:{value!r}"
    return value if isinstance(value, str) else repr(value)


def proportion_check(
    manifest: Manifest,
    split: str,
    expected: ExpectedDistribution,
    tv_threshold: float | Mapping[str, float] = DEFAULT_TV_THRESHOLD,
    schema: OddSchema | None = None,
) -> list[Finding]:
    """REC 6: total variation distance between observed and declared proportions."""
    items = manifest.split_items(split)
    if not items:
        raise EmptySplit(split)
    findings = []
    for dim in sorted(expected.dims):
        if schema is not None and dim not in schema.by_name:
            raise UnknownDimension(dim)
        if isinstance(tv_threshold, Mapping):
            thr = tv_threshold.get(dim, tv_threshold.get("default", DEFAULT_TV_THRESHOLD))
        else:
            thr = tv_threshold
        exp = expected.dims[dim]
        levels = [_level(it, dim, schema) for it in items if dim in it.odd]
        n = len(levels)
        if n == 0:
            findings.append(Finding(6, Status.FAIL, f"{dim}: not recorded on any {split} item"))
            continue
        counts: dict[str, int] = {}
        for lv in levels:
            counts[lv] = counts.get(lv, 0) + 1
        observed = {k: c / n for k, c in counts.items()}
        tv = total_variation(observed, exp)
        worst = max(sorted(set(observed) | set(exp)), key=lambda k: abs(observed.get(k, 0.0) - exp.get(k, 0.0)))
        metrics = {"tv_distance": tv, "tv_threshold": thr, "n": n}
        detail = (f"{dim}: TV={tv:.6f} over {n} {split} items (worst level {worst!r}: "
                  f"observed {observed.get(worst, 0.0):.4f} vs expected {exp.get(worst, 0.0):.4f})")
        outside = sorted(set(observed) - set(exp))
        if outside:
            findings.append(Finding(6, Status.FAIL, f"{dim}: level outside expected support {outside}; {detail}",
                                    metrics=metrics))
        elif tv > thr:
            findings.append(Finding(6, Status.FAIL, detail + f" exceeds {thr:g}", metrics=metrics))
        else:
            findings.append(Finding(6, Status.PASS, detail, metrics=metrics))
    return findings
