"""Agglomerate per-entity models into shared models.

Entities are merged greedily: at each step the pair of clusters whose common
model loses the least log-likelihood relative to the members' individual
models is joined, until one cluster remains.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .basis import BasisSet, design_matrix
from .errors import InsufficientDataError, InvalidSpecError
from .evaluation import DEFAULT_FOLDS, make_folds, score_points
from .model import DEFAULT_RESOLUTION, DEFAULT_THRESHOLD, HcrModel, fit

Datasets = Mapping[str, tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ScoreParams:
    cv: bool = False
    k: int = DEFAULT_FOLDS
    seed: int = 0
    resolution: int = DEFAULT_RESOLUTION
    threshold: float = DEFAULT_THRESHOLD


def _points(data) -> tuple[np.ndarray, np.ndarray]:
    x, y = data
    x = np.asarray(x, dtype=float)
    return (x[:, None] if x.ndim == 1 else x), np.asarray(y, dtype=float).ravel()


def fit_common(datasets: Datasets, basis_x: BasisSet, basis_y: BasisSet,
               params: ScoreParams = ScoreParams()) -> tuple[HcrModel, dict[str, float]]:
    """Fit one model on the pooled data of all entities and score each entity under it.

    Without ``params.cv`` every entity is scored in-sample under the pooled
    model.  With it, each entity gets its own fold plan and fold ``f`` is
    scored by a model trained on all data except every entity's fold ``f``.
    """
    if not datasets:
        raise InsufficientDataError("need at least one entity")
    names = list(datasets)
    pts = {e: _points(datasets[e]) for e in names}
    feats = {e: design_matrix(basis_x, pts[e][0]) for e in names}
    all_feats = np.vstack([feats[e] for e in names])
    all_y = np.concatenate([pts[e][1] for e in names])
    model = fit(basis_x, basis_y, np.vstack([pts[e][0] for e in names]), all_y)

    scores = {}
    if not params.cv:
        for e in names:
            dens = score_points(all_feats, all_y, feats[e], pts[e][1], basis_y,
                                params.resolution, params.threshold)[0]
            scores[e] = float(np.mean(np.log(dens)))
        return model, scores

    plans = {e: make_folds(len(pts[e][1]), params.k, params.seed) for e in names}
    logs = {e: np.empty(len(pts[e][1])) for e in names}
    for f in range(params.k):
        train_f = np.vstack([feats[e][plans[e].assignment != f] for e in names])
        train_y = np.concatenate([pts[e][1][plans[e].assignment != f] for e in names])
        for e in names:
            test = plans[e].assignment == f
            dens = score_points(train_f, train_y, feats[e][test], pts[e][1][test], basis_y,
                                params.resolution, params.threshold)[0]
            logs[e][test] = np.log(dens)
    return model, {e: float(logs[e].mean()) for e in names}


@dataclass(frozen=True)
class Merge:
    left: tuple[str, ...]
    right: tuple[str, ...]
    criterion: float
    common_ll: float
    individual_ll: float
    entity_ll: dict[str, float]

    @property
    def members(self) -> tuple[str, ...]:
        return self.left + self.right


@dataclass
class GroupTree:
    leaves: tuple[str, ...]
    merges: list[Merge]
    individual: dict[str, float]
    basis_x: BasisSet
    basis_y: BasisSet
    params: ScoreParams = field(default_factory=ScoreParams)

    def to_nested(self) -> dict:
        """Nested dict form: leaves are ``{"entity", "log_likelihood"}``."""
        nodes = {(e,): {"entity": e, "log_likelihood": self.individual[e]} for e in self.leaves}
        for m in self.merges:
            nodes[m.members] = {
                "members": list(m.members),
                "criterion": m.criterion,
                "common_log_likelihood": m.common_ll,
                "individual_log_likelihood": m.individual_ll,
                "entity_log_likelihood": m.entity_ll,
                "children": [nodes.pop(m.left), nodes.pop(m.right)],
            }
        (root,) = nodes.values()
        return root

    def levels(self) -> list[tuple[str, int, float]]:
        """``(entity, level, log-likelihood)`` along each entity's path to the root.

        Level 0 is the individual model; level ``i`` is the ``i``-th merge the
        entity takes part in.
        """
        rows = []
        for e in self.leaves:
            rows.append((e, 0, self.individual[e]))
            level = 0
            for m in self.merges:
                if e in m.entity_ll:
                    level += 1
                    rows.append((e, level, m.entity_ll[e]))
        return rows

    def write_json(self, path) -> None:
        doc = {
            "basis_x": self.basis_x.description,
            "basis_y": self.basis_y.description,
            "cv": self.params.cv,
            "seed": self.params.seed,
            "tree": self.to_nested(),
        }
        Path(path).write_text(json.dumps(doc, indent=1) + "\n")

    def write_levels_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["entity", "level", "log_likelihood"])
            for e, level, ll in self.levels():
                w.writerow([e, level, repr(ll)])


def _criterion(common: float, individual: float, use_ratio: bool) -> float:
    return common / individual if use_ratio else common - individual


def build_tree(datasets: Datasets, basis_x: BasisSet, basis_y: BasisSet,
               params: ScoreParams = ScoreParams()) -> GroupTree:
    """Greedy agglomeration maximizing common / average-individual log-likelihood.

    When any candidate pair in a step has a non-positive average individual
    log-likelihood, that step ranks pairs by the difference instead.
    """
    names = tuple(datasets)
    if len(names) < 2:
        raise InsufficientDataError("grouping needs at least two entities")
    cache: dict[frozenset, dict[str, float]] = {}

    def scores(members: tuple[str, ...]) -> dict[str, float]:
        key = frozenset(members)
        if key not in cache:
            cache[key] = fit_common({e: datasets[e] for e in members}, basis_x, basis_y, params)[1]
        return cache[key]

    individual = {e: scores((e,))[e] for e in names}
    clusters = [(e,) for e in names]
    merges = []
    while len(clusters) > 1:
        candidates = []
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                union = clusters[a] + clusters[b]
                sc = scores(union)
                common = float(np.mean([sc[e] for e in union]))
                indiv = float(np.mean([individual[e] for e in union]))
                candidates.append((a, b, common, indiv, sc))
        use_ratio = all(c[3] > 0 for c in candidates)
        a, b, common, indiv, sc = max(
            candidates, key=lambda c: _criterion(c[2], c[3], use_ratio)
        )
        left, right = clusters[a], clusters[b]
        merges.append(Merge(left, right, _criterion(common, indiv, use_ratio), common, indiv,
                            {e: sc[e] for e in left + right}))
        clusters = [c for i, c in enumerate(clusters) if i not in (a, b)]
        clusters.insert(a, left + right)
    return GroupTree(names, merges, individual, basis_x, basis_y, params)


@dataclass
class Cluster:
    members: tuple[str, ...]
    model: HcrModel | None = None
    entity_ll: dict[str, float] | None = None


def cut_tree(tree: GroupTree, k: int, datasets: Datasets | None = None) -> list[Cluster]:
    """Undo the last ``k - 1`` merges; with ``datasets`` also fit each cluster's common model."""
    if not 1 <= k <= len(tree.leaves):
        raise InvalidSpecError(f"k={k} outside 1..{len(tree.leaves)}")
    clusters = [(e,) for e in tree.leaves]
    for m in tree.merges[: len(tree.leaves) - k]:
        clusters = [c for c in clusters if c not in (m.left, m.right)] + [m.members]
    order = {e: i for i, e in enumerate(tree.leaves)}
    clusters.sort(key=lambda c: min(order[e] for e in c))
    out = []
    for c in clusters:
        cluster = Cluster(c)
        if datasets is not None:
            cluster.model, cluster.entity_ll = fit_common(
                {e: datasets[e] for e in c}, tree.basis_x, tree.basis_y, tree.params
            )
        out.append(cluster)
    return out
