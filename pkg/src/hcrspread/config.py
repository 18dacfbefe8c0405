"""Run configuration, loaded from JSON and overridden by command-line flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .basis import BasisSpec
from .errors import ConfigError

HL_RANGE = "(H-L)/P"
ROLES = ("P", "V", "H", "L", "R")


@dataclass
class Config:
    """Everything a pipeline run depends on.

    ``features`` entries are column names, role names from ``columns`` or the
    derived feature ``"(H-L)/P"``.  The target is either ``spread_column`` or
    computed from ``ask_column``/``bid_column``.
    """

    input: str = ""
    output: str = "hcr_out"
    entity_column: str | None = "entity"
    ask_column: str | None = "ask"
    bid_column: str | None = "bid"
    spread_column: str | None = None
    columns: dict[str, str] = field(default_factory=lambda: {r: r for r in ROLES})
    features: list[str] = field(default_factory=lambda: ["P", "V", HL_RANGE])
    basis_x: str = "B((4,4,4),5,3)"
    basis_y: str = "B((8),8,1)"
    folds: int = 10
    seed: int = 0
    threshold: float = 0.03
    resolution: int = 100
    normalization: str = "global"
    min_rows: int = 2000
    allow_small: bool = False
    sweep_moments: int = 0
    prune: bool = False
    group: bool = False
    group_cv: bool = False
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.normalization not in ("global", "train-only"):
            raise ConfigError(f"normalization must be 'global' or 'train-only', not {self.normalization!r}")
        if self.spread_column is None and not (self.ask_column and self.bid_column):
            raise ConfigError("need spread_column or both ask_column and bid_column")
        if not self.features:
            raise ConfigError("no feature columns configured")
        spec_x, spec_y = self.spec_x, self.spec_y
        if spec_x.dimension != len(self.features):
            raise ConfigError(
                f"basis_x {spec_x} has dimension {spec_x.dimension} but {len(self.features)} features"
            )
        if spec_y.dimension != 1:
            raise ConfigError("basis_y must be one-dimensional")
        if self.folds < 2 or self.resolution < 2 or not self.threshold > 0:
            raise ConfigError("folds >= 2, resolution >= 2 and threshold > 0 required")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    @property
    def spec_x(self) -> BasisSpec:
        return BasisSpec.parse(self.basis_x)

    @property
    def spec_y(self) -> BasisSpec:
        return BasisSpec.parse(self.basis_y)

    def column_for(self, name: str) -> str:
        return self.columns.get(name, name)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "columns" in d:
            d["columns"] = {**{r: r for r in ROLES}, **d["columns"]}
        return cls(**d)

    @classmethod
    def load(cls, path, **overrides) -> "Config":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)
