from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import InvalidParameter

CONFIG_ENV = "DDS_CONFIG"


@dataclass
class GateConfig:
    # odd
    min_count: int = 30
    coverage_dims: list[Any] | None = None
    tv_threshold: float = 0.05
    tv_thresholds: dict[str, float] = field(default_factory=dict)
    proportion_split: str = "test"
    missing_dimension: str = "warn"
    # consistency
    outlier_fields: list[str] | None = None
    outlier_threshold: float = 3.5
    outlier_rel_epsilon: float = 1e-9
    # annotation
    object_key: str = "object_id"
    min_kappa: float = 0.6
    run_test_alpha: float = 0.01
    mc_draws: int = 100_000
    seed: int = 0
    rho_threshold: float = 0.5
    randomness_alpha: float = 0.01
    permutations: int = 10_000
    min_records: int = 10
    audit_delta: float = 0.05
    audit_target: float = 0.01
    # splits
    max_distance: int = 3
    bands: int = 4
    purity_threshold: float = 0.99
    min_support: int = 30
    bias_split: str | None = "train"
    p_hat: float = 0.0
    delta: float = 0.05
    target_bound: float = 0.01
    # report
    lenient: bool = False
    severity: dict[str, str] = field(default_factory=dict)

    def severity_overrides(self) -> dict[int, str]:
        """``severity`` keyed by integer REC id (JSON object keys are strings)."""
        try:
            return {int(k): v for k, v in self.severity.items()}
        except ValueError:
            raise InvalidParameter(f"severity keys must be REC ids, got {sorted(self.severity)}") from None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "GateConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise InvalidParameter(f"unknown config key(s): {unknown}")
        return cls(**data)

    def updated(self, **overrides: Any) -> "GateConfig":
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})


def load_config(path: str | os.PathLike[str] | None = None) -> GateConfig:
    """Read a JSON config; falls back to ``$DDS_CONFIG`` and then to defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return GateConfig()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise InvalidParameter("config file must hold a JSON object")
    return GateConfig.from_mapping(data)
