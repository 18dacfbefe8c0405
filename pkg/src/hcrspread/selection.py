"""Search over basis structures scored by cross-validated log-likelihood."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import BasisSet, BasisSpec, canonical_key, design_matrix, enumerate_basis
from .errors import HcrError, InvalidSpecError
from .evaluation import FoldPlan, cross_validate_features
from .model import DEFAULT_RESOLUTION, DEFAULT_THRESHOLD

log = logging.getLogger(__name__)


def target_basis(moments: int) -> BasisSet:
    """Target basis predicting the first ``moments`` moments, ``B((q), q, 1)``."""
    return enumerate_basis(BasisSpec((moments,), moments, 1))


@dataclass
class SweepResult:
    grid: list[tuple[str, int, int, float]] = field(default_factory=list)
    seed: int = 0

    def best(self) -> tuple[str, int, int, float]:
        return max(self.grid, key=lambda row: row[3])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["basis_x", "moments", "n_features", "log_likelihood"])
            for desc, q, k, ll in self.grid:
                w.writerow([desc, q, k, repr(ll)])


def _score(features, y, basis_y, folds, resolution, threshold) -> float:
    return cross_validate_features(features, y, basis_y, folds, resolution=resolution,
                                   threshold=threshold).log_likelihood


def sweep_moments(x, y, basis_x: BasisSet, max_moments: int, folds: FoldPlan, *,
                  min_moments: int = 1, prefix_sizes=None,
                  resolution: int = DEFAULT_RESOLUTION,
                  threshold: float = DEFAULT_THRESHOLD) -> SweepResult:
    """Score every number of predicted moments, optionally for prefixes of ``basis_x``.

    ``prefix_sizes`` lists how many leading members of ``basis_x`` to use;
    ``None`` uses only the full basis, ``"all"`` every size from 1 to ``|basis_x|``.
    """
    if prefix_sizes is None:
        prefix_sizes = [len(basis_x)]
    elif prefix_sizes == "all":
        prefix_sizes = range(1, len(basis_x) + 1)
    features = design_matrix(basis_x, x)
    result = SweepResult(seed=folds.seed)
    for q in range(min_moments, max_moments + 1):
        basis_y = target_basis(q)
        for size in prefix_sizes:
            desc = basis_x.description if size == len(basis_x) else f"{basis_x.description}[:{size}]"
            ll = _score(features[:, :size], y, basis_y, folds, resolution, threshold)
            result.grid.append((desc, q, int(size), ll))
    return result


@dataclass
class RemovalResult:
    basis: BasisSet
    trace: list[tuple[tuple[int, ...] | None, float]]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "removed", "n_features", "log_likelihood"])
            n = len(self.basis) + len(self.trace) - 1
            for step, (removed, ll) in enumerate(self.trace):
                label = "" if removed is None else "".join(str(v) for v in removed)
                w.writerow([step, label, n - step, repr(ll)])


def selective_removal(x, y, basis_x: BasisSet, basis_y: BasisSet, folds: FoldPlan, *,
                      min_improvement: float = 0.0, max_steps: int | None = None,
                      resolution: int = DEFAULT_RESOLUTION,
                      threshold: float = DEFAULT_THRESHOLD) -> RemovalResult:
    """Greedy backward elimination of context members.

    Each round scores the removal of every remaining non-zero member and drops
    the one giving the highest log-likelihood, as long as that beats the
    current score by more than ``min_improvement``.  The trace starts with
    ``(None, baseline)`` followed by one ``(removed member, score)`` per round.
    """
    features = design_matrix(basis_x, x)
    keep = list(range(len(basis_x)))
    current = _score(features, y, basis_y, folds, resolution, threshold)
    trace = [(None, current)]
    steps = 0
    while len(keep) > 1 and (max_steps is None or steps < max_steps):
        best_ll, best_pos = -np.inf, None
        for pos in range(1, len(keep)):
            cols = keep[:pos] + keep[pos + 1:]
            try:
                ll = _score(features[:, cols], y, basis_y, folds, resolution, threshold)
            except HcrError as exc:
                log.debug("skipping removal of %s: %s", basis_x.members[keep[pos]], exc)
                continue
            if ll > best_ll:
                best_ll, best_pos = ll, pos
        if best_pos is None or not best_ll > current + min_improvement:
            break
        removed = keep.pop(best_pos)
        current = best_ll
        trace.append((basis_x.members[removed], best_ll))
        steps += 1
    return RemovalResult(basis_x.subset(keep), trace)


def order_by_norm(basis: BasisSet, p: float) -> BasisSet:
    """Reorder non-zero members ascending by ``sum_i j_i**p``; ties keep canonical order."""
    if not p > 0:
        raise InvalidSpecError("p must be positive")
    rest = sorted(basis.members[1:], key=lambda j: (sum(v ** p for v in j), canonical_key(j)))
    return BasisSet(basis.dimension, (basis.members[0], *rest), basis.spec)


@dataclass
class SearchStep:
    spec: BasisSpec
    moments: int
    log_likelihood: float


def _neighbours(spec: BasisSpec):
    fields = [("m", i) for i in range(spec.dimension)] + [("s", None), ("r", None)]
    for kind, i in fields:
        for delta in (1, -1):
            ms, s, r = list(spec.max_per_var), spec.max_sum, spec.max_interacting
            if kind == "m":
                ms[i] += delta
            elif kind == "s":
                s += delta
            else:
                r += delta
            try:
                yield BasisSpec(tuple(ms), s, r)
            except HcrError:
                continue


def neighbourhood_search(x, y, start: BasisSpec, folds: FoldPlan, *, moments: int = 8,
                         max_steps: int = 50, resolution: int = DEFAULT_RESOLUTION,
                         threshold: float = DEFAULT_THRESHOLD) -> list[SearchStep]:
    """Coordinate ascent over ``(m_1..m_d, s, r)``, changing one parameter by one per step.

    Stops when no neighbour improves the cross-validated log-likelihood.
    Returns the accepted path, starting with ``start``.
    """
    basis_y = target_basis(moments)
    cache: dict[BasisSpec, float] = {}

    def score(spec: BasisSpec) -> float:
        if spec not in cache:
            try:
                feats = design_matrix(enumerate_basis(spec), x)
                cache[spec] = _score(feats, y, basis_y, folds, resolution, threshold)
            except HcrError:
                cache[spec] = -np.inf
        return cache[spec]

    path = [SearchStep(start, moments, score(start))]
    for _ in range(max_steps):
        current = path[-1]
        best = max(_neighbours(current.spec), key=lambda sp: (score(sp), str(sp)), default=None)
        if best is None or not score(best) > current.log_likelihood:
            break
        path.append(replace(current, spec=best, log_likelihood=score(best)))
    return path
