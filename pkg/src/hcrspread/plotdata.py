"""Long-format CSV tables for external plotting.

=====================  ==========================================================
kind                   columns
=====================  ==========================================================
sorted-densities       rank_fraction, density, fold
ll-table               entity, model, log_likelihood, exp_ll
beta-heatmap           row, row_label, col, col_label, value
group-tree             entity, level, log_likelihood
comparison-scatter     index, predictor, actual, prediction
=====================  ==========================================================
"""

from __future__ import annotations

import csv
import math
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, InsufficientDataError
from .evaluation import EvalReport, sorted_density_curve
from .model import HcrModel
from .normalize import fit_edf, normalize

KINDS = ("sorted-densities", "ll-table", "beta-heatmap", "group-tree", "comparison-scatter")


def sorted_densities(report: EvalReport):
    header = ["rank_fraction", "density", "fold"]
    return header, [list(row) for row in sorted_density_curve(report)]


def ll_table(summaries: Mapping[str, Mapping[str, dict]]):
    """``summaries[entity][model_name]`` holds a report summary dict."""
    rows = []
    for entity in summaries:
        for model_name, s in summaries[entity].items():
            ll = s["log_likelihood"]
            rows.append([entity, model_name, ll, math.exp(ll)])
    return ["entity", "model", "log_likelihood", "exp_ll"], rows


def beta_heatmap(model: HcrModel):
    row_labels = [str(m[0]) for m in model.basis_y.members]
    col_labels = model.basis_x.labels()
    rows = [[j, row_labels[j], k, col_labels[k], float(model.beta[j, k])]
            for j in range(model.beta.shape[0]) for k in range(model.beta.shape[1])]
    return ["row", "row_label", "col", "col_label", "value"], rows


def _walk(node: dict, path: list[dict], out: list):
    if "entity" in node:
        out.append((node["entity"], node["log_likelihood"], path))
        return
    for child in node["children"]:
        _walk(child, [node] + path, out)


def group_tree(tree: dict):
    """Levels along each leaf's root path from a nested tree (``GroupTree.to_nested``)."""
    leaves = []
    _walk(tree, [], leaves)
    rows = []
    for entity, ll, path in leaves:
        rows.append([entity, 0, ll])
        for level, node in enumerate(path, start=1):
            rows.append([entity, level, node["entity_log_likelihood"][entity]])
    return ["entity", "level", "log_likelihood"], rows


def comparison_scatter(actual: Iterable[float], predictors: Mapping[str, Iterable[float]]):
    """Pair EDF-normalized predictions with the EDF-normalized actual values."""
    actual = np.asarray(list(actual), dtype=float)
    if actual.size < 2:
        raise InsufficientDataError("need at least two points for a comparison scatter")
    actual_n = normalize(fit_edf(actual), actual)
    rows = []
    for name, values in predictors.items():
        values = np.asarray(list(values), dtype=float)
        pred_n = normalize(fit_edf(values), values)
        rows += [[i, name, float(a), float(p)] for i, (a, p) in enumerate(zip(actual_n, pred_n))]
    return ["index", "predictor", "actual", "prediction"], rows


_DISPATCH = {
    "sorted-densities": sorted_densities,
    "ll-table": ll_table,
    "beta-heatmap": beta_heatmap,
    "group-tree": group_tree,
    "comparison-scatter": comparison_scatter,
}


def emit_plot_data(kind: str, *args, path=None, **kwargs):
    """Build the table for ``kind``; write it to ``path`` if given. Returns ``(header, rows)``."""
    if kind not in _DISPATCH:
        raise ConfigError(f"unknown plot kind {kind!r}; choose from {', '.join(KINDS)}")
    header, rows = _DISPATCH[kind](*args, **kwargs)
    if path is not None:
        write_table(path, header, rows)
    return header, rows


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
