"""``dds`` command line: validate, check, seal, verify-seal, size, report.

Exit codes: 0 when no report entry is worse than ``warn``, 1 on any blocking
status (or a failed validation/seal check), 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .config import load_config
from .consistency import load_rules
from .errors import DDSError
from .findings import Finding, sort_findings
from .integrity import DirectoryResolver, load_audit_log, load_seal, seal_split, verify_seal
from .manifest import is_utc_timestamp, paused_gc, load_annotations, load_attestations, load_manifest, read_json
from .odd import load_builtin_schema, load_expected, load_schema
from .pipeline import GROUPS, GateInputs, run_checks
from .registry import DEFAULT_REGISTRY
from .report import assemble, canonical_json, render
from .splits import bound, required_test_size


class UsageError(Exception):
    pass


def _timestamp(explicit: str | None) -> str:
    """Explicit flag, then SOURCE_DATE_EPOCH, then the wall clock."""
    if explicit:
        if not is_utc_timestamp(explicit):
            raise UsageError(f"--generated-at {explicit!r} is not YYYY-MM-DDTHH:MM:SSZ")
        return explicit
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def _load_schema_arg(value: str):
    if value.startswith("builtin:"):
        return load_builtin_schema(value.split(":", 1)[1])
    return load_schema(value, value)


def _write(data: bytes, output: str | None) -> None:
    if output:
        Path(output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _add_input_flags(p: argparse.ArgumentParser, manifest_required: bool = True) -> None:
    p.add_argument("--manifest", required=manifest_required, help="manifest JSON Lines file")
    p.add_argument("--odd-schema", dest="odd_schema", help="ODD schema JSON (or builtin:railway)")
    p.add_argument("--annotations", help="annotation records, JSON Lines")
    p.add_argument("--attestations", help="attestation records, JSON array")
    p.add_argument("--audit-log", dest="audit_log", help="hash-chained audit log, JSON Lines")
    p.add_argument("--rules", help="consistency rules, JSON array")
    p.add_argument("--expected", help="expected operational distribution, JSON object")
    p.add_argument("--seal", help="seal file produced by `dds seal`")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dds", description="Dataset certification gate")
    parser.add_argument("--version", action="version", version=f"dds-gate {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse inputs without running checks")
    _add_input_flags(p)
    p.add_argument("--odd", dest="odd_path", help="ODD schema JSON (same as --odd-schema)")

    p = sub.add_parser("check", help="run checks and emit a compliance report")
    _add_input_flags(p)
    p.add_argument("--odd", dest="odd_flag", nargs="?", const=True, default=None, metavar="SCHEMA",
                   help="select ODD checks; an optional argument supplies the schema")
    p.add_argument("--content-dir", dest="content_dir", help="directory holding item content as <dir>/<item id>")
    for g in ("integrity", "consistency", "annotation", "splits"):
        p.add_argument(f"--{g}", action="store_true", help=f"run the {g} checks")
    p.add_argument("--all", action="store_true", help="run every check group (default when none is selected)")
    p.add_argument("--config", help=f"JSON config of thresholds (default ${'{'}DDS_CONFIG{'}'})")
    p.add_argument("--max-distance", dest="max_distance", type=int)
    p.add_argument("--bands", type=int)
    p.add_argument("--purity-threshold", dest="purity_threshold", type=float)
    p.add_argument("--min-support", dest="min_support", type=int)
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--tv-threshold", dest="tv_threshold", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--target-bound", dest="target_bound", type=float)
    p.add_argument("--p-hat", dest="p_hat", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--lenient", action="store_true", help="manual_pending entries do not block")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--output", help="report path (default stdout)")
    p.add_argument("--findings-out", dest="findings_out", help="also save raw findings for `dds report`")
    p.add_argument("--generated-at", dest="generated_at", help="report timestamp (default SOURCE_DATE_EPOCH or now)")

    p = sub.add_parser("seal", help="commit to a split's content")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=("train", "validation", "test", "unassigned"))
    p.add_argument("--output", help="seal path (default stdout)")
    p.add_argument("--sealed-at", dest="sealed_at")

    p = sub.add_parser("verify-seal", help="check a split against its seal")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seal", required=True)

    p = sub.add_parser("size", help="test-set size bound calculator")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--target", type=float, help="required upper bound on the true error rate")
    p.add_argument("--p-hat", dest="p_hat", type=float, default=0.0, help="observed error rate")
    p.add_argument("--n", type=int, help="evaluate the bound for this test-set size instead")

    p = sub.add_parser("report", help="merge saved findings and attestations")
    p.add_argument("--findings", required=True, help="file written by `dds check --findings-out`")
    p.add_argument("--attestations")
    p.add_argument("--dataset-id", dest="dataset_id")
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--output")
    p.add_argument("--generated-at", dest="generated_at")
    return parser


def _cmd_validate(args: argparse.Namespace) -> int:
    loaders: list[tuple[str, str | None, Callable[[str], Any]]] = [
        ("manifest", args.manifest, lambda p: load_manifest(p, p)),
        ("odd schema", args.odd_schema or args.odd_path, _load_schema_arg),
        ("annotations", args.annotations, lambda p: load_annotations(p, p)),
        ("attestations", args.attestations, lambda p: load_attestations(p, DEFAULT_REGISTRY.attestable, p)),
        ("audit log", args.audit_log, lambda p: load_audit_log(p, p)),
        ("rules", args.rules, lambda p: load_rules(p, p)),
        ("expected distribution", args.expected, lambda p: load_expected(p, p)),
        ("seal", args.seal, lambda p: load_seal(p, p)),
    ]
    ok = True
    for what, path, load in loaders:
        if path is None:
            continue
        try:
            load(path)
        except (DDSError, OSError) as exc:
            ok = False
            print(f"error  {what} {path}: {exc}")
        else:
            print(f"ok     {what} {path}")
    return 0 if ok else 1


def _inputs_from_args(args: argparse.Namespace) -> GateInputs:
    schema_path = args.odd_schema or (args.odd_flag if isinstance(args.odd_flag, str) else None)
    return GateInputs(
        manifest=load_manifest(args.manifest, args.manifest),
        schema=_load_schema_arg(schema_path) if schema_path else None,
        annotations=load_annotations(args.annotations, args.annotations) if args.annotations else None,
        attestations=tuple(load_attestations(args.attestations, DEFAULT_REGISTRY.attestable, args.attestations))
        if args.attestations else (),
        audit_log=load_audit_log(args.audit_log, args.audit_log) if args.audit_log else None,
        rules=load_rules(args.rules, args.rules) if args.rules else None,
        expected=load_expected(args.expected, args.expected) if args.expected else None,
        resolver=DirectoryResolver(args.content_dir) if args.content_dir else None,
        seal=load_seal(args.seal, args.seal) if args.seal else None,
    )


def _cmd_check(args: argparse.Namespace) -> int:
    with paused_gc():
        return _check(args)


def _check(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    cfg = cfg.updated(
        max_distance=args.max_distance, bands=args.bands, purity_threshold=args.purity_threshold,
        min_support=args.min_support, min_count=args.min_count, tv_threshold=args.tv_threshold,
        delta=args.delta, target_bound=args.target_bound, p_hat=args.p_hat, seed=args.seed,
    )
    if args.lenient:
        cfg = cfg.updated(lenient=True)
    if args.content_dir and not Path(args.content_dir).is_dir():
        raise UsageError(f"--content-dir {args.content_dir} is not a directory")
    selected = {g for g in ("integrity", "consistency", "annotation", "splits") if getattr(args, g)}
    if args.odd_flag is not None:
        selected.add("odd")
    if args.all or not selected:
        selected = set(GROUPS)
    generated_at = _timestamp(args.generated_at)
    inputs = _inputs_from_args(args)
    findings = sort_findings(run_checks(inputs, cfg, selected))
    if args.findings_out:
        payload = {"dataset_id": inputs.manifest.dataset_id, "findings": [f.to_dict() for f in findings]}
        Path(args.findings_out).write_text(canonical_json(payload), encoding="ascii")
    report = assemble(findings, inputs.attestations, DEFAULT_REGISTRY, inputs.manifest.dataset_id,
                      generated_at, cfg.lenient)
    _write(render(report, args.format), args.output)
    return report.exit_code


def _cmd_seal(args: argparse.Namespace) -> int:
    sealed_at = _timestamp(args.sealed_at)
    seal = seal_split(load_manifest(args.manifest, args.manifest), args.split, sealed_at)
    _write(canonical_json(seal.to_dict()).encode("ascii"), args.output)
    return 0


def _cmd_verify_seal(args: argparse.Namespace) -> int:
    finding = verify_seal(load_manifest(args.manifest, args.manifest), load_seal(args.seal, args.seal))
    print(f"{finding.status.value}: {finding.message}")
    return 0 if finding.status.value == "pass" else 1


def _cmd_size(args: argparse.Namespace) -> int:
    if (args.target is None) == (args.n is None):
        raise UsageError("give exactly one of --target (solve for n) or --n (evaluate the bound)")
    if args.n is not None:
        print(f"{bound(args.p_hat, args.n, args.delta):.9g}")
    else:
        print(required_test_size(args.p_hat, args.target, args.delta))
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    data = read_json(args.findings, args.findings)
    if not isinstance(data, dict) or not isinstance(data.get("findings"), list):
        raise UsageError(f"{args.findings} is not a findings file")
    findings = [Finding.from_dict(f) for f in data["findings"]]
    attestations = load_attestations(args.attestations, DEFAULT_REGISTRY.attestable, args.attestations) \
        if args.attestations else []
    report = assemble(findings, attestations, DEFAULT_REGISTRY, args.dataset_id or str(data.get("dataset_id", "")),
                      _timestamp(args.generated_at), args.lenient)
    _write(render(report, args.format), args.output)
    return report.exit_code


_COMMANDS = {
    "validate": _cmd_validate,
    "check": _cmd_check,
    "seal": _cmd_seal,
    "verify-seal": _cmd_verify_seal,
    "size": _cmd_size,
    "report": _cmd_report,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, DDSError, OSError, ValueError, KeyError) as exc:
        print(f"dds {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
