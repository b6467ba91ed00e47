"""Exception types raised by loaders and checks.

Checks report data problems as findings; exceptions are reserved for inputs
that cannot be interpreted at all or for violated preconditions.
"""

from __future__ import annotations


class DDSError(Exception):
    """Base class for all gate errors."""


class ParseError(DDSError):
    def __init__(self, line: int, reason: str, source: str = "") -> None:
        self.line = line
        self.reason = reason
        self.source = source
        where = f"{source}:" if source else "line "
        super().__init__(f"{where}{line}: {reason}")


class DuplicateId(DDSError):
    def __init__(self, item_id: str) -> None:
        self.item_id = item_id
        super().__init__(f"duplicate item id {item_id!r}")


class UnknownSource(DDSError):
    def __init__(self, item_id: str, source_id: str) -> None:
        self.item_id = item_id
        self.source_id = source_id
        super().__init__(f"item {item_id!r} references undeclared source {source_id!r}")


class SchemaVersionUnsupported(DDSError):
    def __init__(self, version: str) -> None:
        self.version = version
        super().__init__(f"unsupported manifest schema_version {version!r}")


class DuplicateAnnotation(DDSError):
    def __init__(self, annotator: str, item_id: str) -> None:
        self.annotator = annotator
        self.item_id = item_id
        super().__init__(f"annotator {annotator!r} labelled item {item_id!r} more than once")


class EmptySplit(DDSError):
    def __init__(self, split: str) -> None:
        self.split = split
        super().__init__(f"split {split!r} has no items")


class UnknownDimension(DDSError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"unknown ODD dimension {name!r}")


class UnknownField(DDSError):
    def __init__(self, rule_id: str, field: str) -> None:
        self.rule_id = rule_id
        self.field = field
        super().__init__(f"rule {rule_id!r} references unknown field {field!r}")


class InvalidParameter(DDSError, ValueError):
    pass


class InsufficientOverlap(DDSError):
    pass


class InsufficientData(DDSError):
    pass


class InvalidBanding(DDSError, ValueError):
    pass


class MissingLabels(DDSError):
    pass


class RegistryViolation(DDSError):
    pass
