"""Cross-validated log-likelihood of predicted conditional densities."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import BasisSet, design_matrix
from .errors import HcrError, InsufficientDataError, InvalidDensityError
from .model import (
    DEFAULT_RESOLUTION,
    DEFAULT_THRESHOLD,
    calibrate_many,
    cell_index,
    expectations_and_variances,
    fit_features,
)
from .normalize import apply_columns, fit_edf, normalize

DEFAULT_FOLDS = 10


@dataclass(frozen=True, eq=False)
class FoldPlan:
    n: int
    k: int
    seed: int
    assignment: np.ndarray

    def test_mask(self, fold: int) -> np.ndarray:
        return self.assignment == fold

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def make_folds(n: int, k: int = DEFAULT_FOLDS, seed: int = 0) -> FoldPlan:
    """Shuffle ``0..n-1`` with ``seed`` and deal the permutation round-robin into ``k`` folds."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n < k:
        raise InsufficientDataError(f"cannot split {n} points into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=int)
    assignment[perm] = np.arange(n) % k
    assignment.setflags(write=False)
    return FoldPlan(n, k, seed, assignment)


def log_likelihood(densities) -> float:
    """Mean natural logarithm of the densities at the observed values."""
    d = np.asarray(densities, dtype=float)
    if d.size == 0:
        raise InsufficientDataError("no densities to score")
    if not np.all(d > 0):
        raise InvalidDensityError("densities must be strictly positive")
    return float(np.mean(np.log(d)))


@dataclass(frozen=True, eq=False)
class EvalReport:
    index: np.ndarray
    fold: np.ndarray
    y: np.ndarray
    density: np.ndarray
    expectation: np.ndarray
    variance: np.ndarray
    log_likelihood: float
    seed: int
    k: int
    basis_x: str = ""
    basis_y: str = ""
    normalizers: np.ndarray = field(default=None, repr=False)

    @property
    def exp_ll(self) -> float:
        return math.exp(self.log_likelihood)

    @property
    def per_point(self) -> list[tuple[int, float, float]]:
        return list(zip(self.fold.tolist(), self.y.tolist(), self.density.tolist()))

    def summary(self) -> dict:
        return {
            "log_likelihood": self.log_likelihood,
            "log_likelihood_2dp": f"{self.log_likelihood:.2f}",
            "exp_ll": self.exp_ll,
            "n": int(len(self.index)),
            "folds": self.k,
            "seed": self.seed,
            "basis_x": self.basis_x,
            "basis_y": self.basis_y,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "fold", "y", "density", "expectation", "variance"])
            for row in zip(self.index, self.fold, self.y, self.density, self.expectation, self.variance):
                w.writerow([int(row[0]), int(row[1])] + [repr(float(v)) for v in row[2:]])

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def read_csv(cls, path, summary: dict | None = None) -> "EvalReport":
        cols = {k: [] for k in ("index", "fold", "y", "density", "expectation", "variance")}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                for k in cols:
                    cols[k].append(row[k])
        density = np.array(cols["density"], dtype=float)
        summary = summary or {}
        return cls(
            np.array(cols["index"], dtype=int),
            np.array(cols["fold"], dtype=int),
            np.array(cols["y"], dtype=float),
            density,
            np.array(cols["expectation"], dtype=float),
            np.array(cols["variance"], dtype=float),
            log_likelihood(density),
            summary.get("seed", 0),
            summary.get("folds", 0),
            summary.get("basis_x", ""),
            summary.get("basis_y", ""),
        )


def score_points(features_train, y_train, features_test, y_test, basis_y: BasisSet,
                 resolution: int, threshold: float):
    """Fit on a training split and return density, expectation, variance, normalizer at test points."""
    beta, _ = fit_features(features_train, y_train, basis_y)
    coeffs = features_test @ beta.T
    coeffs[:, 0] = 1.0
    orders = [m[0] for m in basis_y.members]
    lattices, norm = calibrate_many(coeffs, orders, resolution, threshold)
    dens = lattices[np.arange(len(y_test)), cell_index(y_test, resolution)]
    mean, var = expectations_and_variances(lattices)
    return dens, mean, var, norm


def cross_validate_features(features, y, basis_y: BasisSet, folds: FoldPlan, *,
                            resolution: int = DEFAULT_RESOLUTION,
                            threshold: float = DEFAULT_THRESHOLD,
                            basis_x_label: str = "") -> EvalReport:
    """Cross-validate on a precomputed context design matrix."""
    y = np.asarray(y, dtype=float).ravel()
    parts = []
    for f in range(folds.k):
        test = folds.test_mask(f)
        try:
            res = score_points(features[~test], y[~test], features[test], y[test], basis_y,
                               resolution, threshold)
        except HcrError as exc:
            raise type(exc)(f"fold {f}: {exc}") from exc
        parts.append((f, np.flatnonzero(test), res))
    return _assemble(parts, y, folds, basis_x_label, basis_y.description)


def _assemble(parts, y, folds: FoldPlan, bx: str, by: str) -> EvalReport:
    index = np.concatenate([p[1] for p in parts])
    fold = np.concatenate([np.full(len(p[1]), p[0]) for p in parts])
    dens, mean, var, norm = (np.concatenate([p[2][i] for p in parts]) for i in range(4))
    return EvalReport(index, fold, y[index], dens, mean, var, log_likelihood(dens),
                      folds.seed, folds.k, bx, by, norm)


def cross_validate(x, y, basis_x: BasisSet, basis_y: BasisSet, folds: FoldPlan, *,
                   resolution: int = DEFAULT_RESOLUTION,
                   threshold: float = DEFAULT_THRESHOLD,
                   refit_edf: bool = False) -> EvalReport:
    """k-fold cross-validated log-likelihood of the model ``(basis_x, basis_y)``.

    By default ``x`` and ``y`` are already normalized to (0, 1).  With
    ``refit_edf`` they are raw values and each fold fits its own EDFs on the
    training split, applying them to the held-out points.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if not refit_edf:
        return cross_validate_features(design_matrix(basis_x, x), y, basis_y, folds,
                                       resolution=resolution, threshold=threshold,
                                       basis_x_label=basis_x.description)
    parts = []
    y_report = np.empty_like(y)
    for f in range(folds.k):
        test = folds.test_mask(f)
        try:
            edfs = [fit_edf(x[~test, i]) for i in range(x.shape[1])]
            edf_y = fit_edf(y[~test])
            xn_train, xn_test = apply_columns(edfs, x[~test]), apply_columns(edfs, x[test])
            yn_train, yn_test = normalize(edf_y, y[~test]), normalize(edf_y, y[test])
            res = score_points(design_matrix(basis_x, xn_train), yn_train,
                               design_matrix(basis_x, xn_test), yn_test, basis_y,
                               resolution, threshold)
        except HcrError as exc:
            raise type(exc)(f"fold {f}: {exc}") from exc
        y_report[test] = yn_test
        parts.append((f, np.flatnonzero(test), res))
    return _assemble(parts, y_report, folds, basis_x.description, basis_y.description)


def sorted_density_curve(report: EvalReport) -> list[tuple[float, float, int]]:
    """Per-point densities sorted ascending as ``(rank fraction, density, fold)``.

    The rank fraction of the ``i``-th smallest of ``n`` is ``(i - 0.5) / n``.
    """
    n = len(report.density)
    if n == 0:
        raise InsufficientDataError("empty report")
    order = np.argsort(report.density, kind="stable")
    frac = (np.arange(1, n + 1) - 0.5) / n
    return [(float(f), float(report.density[i]), int(report.fold[i])) for f, i in zip(frac, order)]
