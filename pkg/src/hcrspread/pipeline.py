"""End-to-end run: ingest, normalize, fit, cross-validate, optional searches, write artifacts."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import plotdata
from .baselines import ami, hlr
from .basis import enumerate_basis
from .config import Config
from .errors import HcrError
from .evaluation import EvalReport, cross_validate, make_folds
from .grouping import ScoreParams, build_tree
from .ingest import Dataset, ingest
from .model import HcrModel, fit, save_model
from .normalize import EdfMap, fit_edf, normalize
from .selection import selective_removal, sweep_moments

log = logging.getLogger(__name__)


@dataclass
class EntityResult:
    entity: str
    status: int = 0
    error: str = ""
    report: EvalReport | None = None
    model: HcrModel | None = None

    def summary(self) -> dict:
        d = {"status": self.status}
        if self.error:
            d["error"] = self.error
        if self.report is not None:
            d.update(self.report.summary())
        if self.model is not None:
            d["n_basis_x"] = len(self.model.basis_x)
            d["n_basis_y"] = len(self.model.basis_y)
            d["n_coefficients"] = (len(self.model.basis_y) - 1) * len(self.model.basis_x)
        return d


@dataclass
class PipelineResult:
    output: Path
    entities: dict[str, EntityResult] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return max((r.status for r in self.entities.values()), default=0)


def normalize_dataset(ds: Dataset) -> tuple[np.ndarray, np.ndarray, list[EdfMap], EdfMap]:
    edfs = [fit_edf(ds.features[:, i]) for i in range(ds.features.shape[1])]
    xn = np.column_stack([normalize(e, ds.features[:, i]) for i, e in enumerate(edfs)])
    edf_y = fit_edf(ds.target)
    return xn, normalize(edf_y, ds.target), edfs, edf_y


def write_edfs(path, names, edfs: list[EdfMap], edf_y: EdfMap | None) -> None:
    doc = {"features": {n: e.to_dict() for n, e in zip(names, edfs)}}
    if edf_y is not None:
        doc["target"] = edf_y.to_dict()
    Path(path).write_text(json.dumps(doc) + "\n")


def read_edfs(path) -> tuple[dict[str, EdfMap], EdfMap | None]:
    doc = json.loads(Path(path).read_text())
    feats = {n: EdfMap.from_dict(d) for n, d in doc["features"].items()}
    target = EdfMap.from_dict(doc["target"]) if "target" in doc else None
    return feats, target


def _write_normalized(path, ds: Dataset, xn, yn) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["line", *ds.feature_names, "spread"])
        for line, row, y in zip(ds.lines, xn, yn):
            w.writerow([int(line), *[repr(float(v)) for v in row], repr(float(y))])


def _write_predictions(path, ds: Dataset, yn, report: EvalReport) -> None:
    expectation = np.empty(len(ds))
    expectation[report.index] = report.expectation
    cols = {"line": ds.lines, "spread": ds.target, "y": yn, "hcr_expectation": expectation}
    if all(k in ds.extra for k in ("R", "P", "V")):
        cols["ami"] = ami(ds.extra["R"], ds.extra["P"], ds.extra["V"])
    if all(k in ds.extra for k in ("H", "L")):
        cols["hlr"] = hlr(ds.extra["H"], ds.extra["L"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", *cols])
        for i in range(len(ds)):
            w.writerow([i, int(ds.lines[i]), *[repr(float(cols[c][i])) for c in list(cols)[1:]]])


def process_entity(ds: Dataset, config: Config, outdir: Path) -> EntityResult:
    """Run every per-entity stage and write its artifacts under ``outdir``."""
    res = EntityResult(ds.entity)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        basis_x, basis_y = enumerate_basis(config.spec_x), enumerate_basis(config.spec_y)
        xn, yn, edfs, edf_y = normalize_dataset(ds)
        write_edfs(outdir / "edf.json", ds.feature_names, edfs, edf_y)
        _write_normalized(outdir / "normalized.csv", ds, xn, yn)

        res.model = fit(basis_x, basis_y, xn, yn, variable_names=(*ds.feature_names, "spread"))
        save_model(res.model, outdir / "model.json")

        folds = make_folds(len(ds), config.folds, config.seed)
        if config.normalization == "global":
            report = cross_validate(xn, yn, basis_x, basis_y, folds,
                                    resolution=config.resolution, threshold=config.threshold)
        else:
            report = cross_validate(ds.features, ds.target, basis_x, basis_y, folds,
                                    resolution=config.resolution, threshold=config.threshold,
                                    refit_edf=True)
        res.report = report
        report.write_csv(outdir / "report.csv")
        report.write_summary(outdir / "summary.json")
        plotdata.emit_plot_data("sorted-densities", report, path=outdir / "sorted_densities.csv")
        _write_predictions(outdir / "predictions.csv", ds, yn, report)

        if config.sweep_moments:
            sweep = sweep_moments(xn, yn, basis_x, config.sweep_moments, folds, prefix_sizes="all",
                                  resolution=config.resolution, threshold=config.threshold)
            sweep.write_csv(outdir / "sweep.csv")
        if config.prune:
            removal = selective_removal(xn, yn, basis_x, basis_y, folds,
                                        resolution=config.resolution, threshold=config.threshold)
            removal.write_csv(outdir / "removal.csv")
    except HcrError as exc:
        log.error("entity %s failed: %s", ds.entity, exc)
        res.status, res.error = exc.exit_code, str(exc)
    return res


def run_pipeline(config: Config, datasets: dict[str, Dataset] | None = None) -> PipelineResult:
    """Process every entity of ``config.input`` and write the summary index last."""
    if datasets is None:
        datasets = ingest(config.input, config)
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    result = PipelineResult(out)
    names = sorted(datasets)
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = {e: pool.submit(process_entity, datasets[e], config, out / e) for e in names}
        for e in names:
            result.entities[e] = futures[e].result()

    index = {"entities": {e: result.entities[e].summary() for e in names}}
    if config.group:
        ok = [e for e in names if result.entities[e].status == 0]
        if len(ok) >= 2:
            normalized = {e: normalize_dataset(datasets[e])[:2] for e in ok}
            tree = build_tree(normalized, enumerate_basis(config.spec_x), enumerate_basis(config.spec_y),
                              ScoreParams(cv=config.group_cv, k=config.folds, seed=config.seed,
                                          resolution=config.resolution, threshold=config.threshold))
            tree.write_json(out / "group_tree.json")
            tree.write_levels_csv(out / "group_levels.csv")
            index["group_tree"] = "group_tree.json"
    (out / "summary.json").write_text(json.dumps(index, indent=1, sort_keys=True) + "\n")
    return result
