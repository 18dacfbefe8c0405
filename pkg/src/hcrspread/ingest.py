"""Delimited-text ingestion into per-entity datasets, and the internal dataset format."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import HL_RANGE, Config
from .errors import IngestError

log = logging.getLogger(__name__)

DEFAULT_ENTITY = "all"


@dataclass(eq=False)
class Dataset:
    """Raw (unnormalized) context features and spread target of one entity."""

    entity: str
    feature_names: tuple[str, ...]
    features: np.ndarray
    target: np.ndarray | None
    lines: np.ndarray
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.lines)


@dataclass
class IngestResult:
    datasets: dict[str, Dataset]
    rejected: list[tuple[int, str]]
    small: list[str]


def sniff_delimiter(header: str) -> str:
    return "\t" if header.count("\t") > header.count(",") else ","


def _required_columns(config: Config, require_target: bool) -> list[str]:
    cols = []
    for feat in config.features:
        if feat == HL_RANGE:
            cols += [config.column_for(r) for r in ("H", "L", "P")]
        else:
            cols.append(config.column_for(feat))
    if require_target:
        if config.spread_column:
            cols.append(config.spread_column)
        else:
            cols += [config.ask_column, config.bid_column]
    return list(dict.fromkeys(cols))


def _row_problem(values: dict[str, float], config: Config) -> str | None:
    role = {r: values.get(config.column_for(r)) for r in ("P", "V", "H", "L")}
    for r in ("P", "V", "H", "L"):
        if role[r] is not None and not role[r] > 0:
            return f"{r}={role[r]} must be positive"
    if role["H"] is not None and role["L"] is not None and role["H"] < role["L"]:
        return f"high {role['H']} below low {role['L']}"
    ask = values.get(config.ask_column) if config.ask_column else None
    bid = values.get(config.bid_column) if config.bid_column else None
    if ask is not None and bid is not None and not ask >= bid > 0:
        return f"ask {ask} / bid {bid} violate ask >= bid > 0"
    spread = values.get(config.spread_column) if config.spread_column else None
    if spread is not None and spread < 0:
        return f"negative spread {spread}"
    return None


def ingest_detailed(path, config: Config, *, require_target: bool = True) -> IngestResult:
    """Read ``path`` and split its rows into per-entity datasets.

    Rows breaking record invariants (non-positive prices or volume, high below
    low, crossed quotes) are dropped and reported with their line numbers.
    Entities with fewer than ``config.min_rows`` rows are dropped unless
    ``config.allow_small`` is set.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise IngestError(f"{path} is empty")
    delim = sniff_delimiter(lines[0])
    reader = csv.reader(lines, delimiter=delim)
    header = [h.strip() for h in next(reader)]
    index = {h: i for i, h in enumerate(header)}

    numeric = _required_columns(config, require_target)
    # every role column present in the file is parsed for validation and baselines
    numeric += [c for c in (config.column_for(r) for r in ("P", "V", "H", "L", "R"))
                if c in index and c not in numeric]
    for opt in (config.ask_column, config.bid_column, config.spread_column):
        if opt and opt in index and opt not in numeric:
            numeric.append(opt)
    missing = [c for c in numeric if c not in index]
    if config.entity_column and config.entity_column not in index:
        missing.append(config.entity_column)
    if missing:
        raise IngestError(f"{path}: missing columns {missing}")

    rows: dict[str, list[tuple[int, dict[str, float]]]] = {}
    rejected = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise IngestError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        values = {}
        for c in numeric:
            raw = row[index[c]].strip()
            try:
                v = float(raw)
            except ValueError:
                raise IngestError(f"{path}:{lineno}: column {c!r} value {raw!r} is not numeric") from None
            if not math.isfinite(v):
                raise IngestError(f"{path}:{lineno}: column {c!r} is not finite")
            values[c] = v
        problem = _row_problem(values, config)
        if problem:
            log.warning("%s:%d rejected: %s", path, lineno, problem)
            rejected.append((lineno, problem))
            continue
        entity = row[index[config.entity_column]].strip() if config.entity_column else DEFAULT_ENTITY
        rows.setdefault(entity, []).append((lineno, values))
    if not rows:
        raise IngestError(f"{path}: no valid data rows")

    datasets, small = {}, []
    for entity in sorted(rows):
        recs = rows[entity]
        if len(recs) < config.min_rows:
            small.append(entity)
            log.warning("entity %s has %d rows (< %d)%s", entity, len(recs), config.min_rows,
                        "" if config.allow_small else "; skipped, use allow_small to keep it")
            if not config.allow_small:
                continue
        datasets[entity] = _build_dataset(entity, recs, config, require_target)
    return IngestResult(datasets, rejected, small)


def ingest(path, config: Config, *, require_target: bool = True) -> dict[str, Dataset]:
    return ingest_detailed(path, config, require_target=require_target).datasets


def _build_dataset(entity, recs, config: Config, require_target: bool) -> Dataset:
    col = lambda c: np.array([v[c] for _, v in recs])
    feats = []
    for feat in config.features:
        if feat == HL_RANGE:
            P, H, L = (col(config.column_for(r)) for r in ("P", "H", "L"))
            feats.append((H - L) / P)
        else:
            feats.append(col(config.column_for(feat)))
    target = None
    if require_target:
        if config.spread_column:
            target = col(config.spread_column)
        else:
            ask, bid = col(config.ask_column), col(config.bid_column)
            target = (ask - bid) / ((ask + bid) / 2.0)
    extra = {r: col(config.column_for(r)) for r in ("P", "V", "H", "L", "R")
             if config.column_for(r) in recs[0][1]}
    return Dataset(entity, tuple(config.features), np.column_stack(feats), target,
                   np.array([ln for ln, _ in recs]), extra)


def write_dataset(ds: Dataset, path) -> None:
    """Write the internal dataset format: one row per record, floats in round-trip repr."""
    extra_names = sorted(ds.extra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entity", "line", "target", *[f"feature:{n}" for n in ds.feature_names],
                    *[f"extra:{n}" for n in extra_names]])
        for i in range(len(ds)):
            t = "" if ds.target is None else repr(float(ds.target[i]))
            w.writerow([ds.entity, int(ds.lines[i]), t,
                        *[repr(float(v)) for v in ds.features[i]],
                        *[repr(float(ds.extra[n][i])) for n in extra_names]])


def read_dataset(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = list(reader)
    feat_idx = [i for i, h in enumerate(header) if h.startswith("feature:")]
    extra_idx = [i for i, h in enumerate(header) if h.startswith("extra:")]
    targets = [r[2] for r in body]
    target = None if any(t == "" for t in targets) else np.array(targets, dtype=float)
    return Dataset(
        body[0][0] if body else DEFAULT_ENTITY,
        tuple(header[i].split(":", 1)[1] for i in feat_idx),
        np.array([[float(r[i]) for i in feat_idx] for r in body]).reshape(len(body), len(feat_idx)),
        target,
        np.array([int(r[1]) for r in body]),
        {header[i].split(":", 1)[1]: np.array([float(r[i]) for r in body]) for i in extra_idx},
    )
