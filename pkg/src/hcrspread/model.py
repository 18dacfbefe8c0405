"""Moment regression: fit the coefficient matrix, predict and calibrate densities.

A model predicts the conditional density of a normalized target ``y`` as

    rho~(y | x) = sum_j f_j(y) a_j(x),    a_j(x) = sum_k beta[j, k] f_k(x),

with ``j`` running over the target basis and ``k`` over the context basis.
Each row of ``beta`` is an independent least-squares regression of ``f_j(y)``
on the context features ``f_k(x)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .basis import BasisSet, BasisSpec, design_matrix, legendre_table
from .errors import (
    DimensionError,
    InsufficientDataError,
    InvalidDataError,
    SingularFitError,
    UnderdeterminedError,
)

DEFAULT_RESOLUTION = 100
DEFAULT_THRESHOLD = 0.03
RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class HcrModel:
    basis_x: BasisSet
    basis_y: BasisSet
    beta: np.ndarray
    variable_names: tuple[str, ...] = ()
    rank: int | None = None

    def __post_init__(self):
        if self.basis_y.dimension != 1:
            raise DimensionError("target basis must be one-dimensional")
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (len(self.basis_y), len(self.basis_x)):
            raise DimensionError(
                f"beta has shape {beta.shape}, expected {(len(self.basis_y), len(self.basis_x))}"
            )
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if not self.variable_names:
            names = tuple(f"x{i + 1}" for i in range(self.basis_x.dimension)) + ("y",)
            object.__setattr__(self, "variable_names", names)
        elif len(self.variable_names) != self.basis_x.dimension + 1:
            raise DimensionError("variable_names must list every context variable and the target")

    @property
    def orders_y(self) -> np.ndarray:
        return np.array([m[0] for m in self.basis_y.members])

    @property
    def n_coefficients(self) -> int:
        return self.beta.size


@dataclass(frozen=True, eq=False)
class RawDensity:
    """Polynomial density coefficients ``a_j`` over target orders ``orders``."""

    coeffs: np.ndarray
    orders: tuple[int, ...]

    def __call__(self, y):
        table = legendre_table(y, max(self.orders))
        return table[..., list(self.orders)] @ self.coeffs


@dataclass(frozen=True, eq=False)
class CalibratedDensity:
    """Piecewise-constant density on ``L`` cells centered at ``(i - 0.5) / L``."""

    lattice: np.ndarray
    threshold: float = DEFAULT_THRESHOLD
    normalizer: float = 1.0
    raw: RawDensity | None = field(default=None, repr=False)

    @property
    def resolution(self) -> int:
        return len(self.lattice)

    @property
    def positions(self) -> np.ndarray:
        return lattice_positions(self.resolution)


def lattice_positions(resolution: int) -> np.ndarray:
    return (np.arange(1, resolution + 1) - 0.5) / resolution


def _as_points(x, dimension: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and dimension == 1 and x.shape[0] != 1:
        x = x[:, None]
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dimension:
        raise DimensionError(f"points of shape {x.shape} do not match dimension {dimension}")
    return x


def _check_unit(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise InvalidDataError(f"{what} must lie within [0, 1]")


def estimate_moments(basis: BasisSet, data) -> np.ndarray:
    """Average of every basis function over ``data``."""
    data = _as_points(data, basis.dimension)
    if data.shape[0] == 0:
        raise InsufficientDataError("cannot estimate moments of an empty sample")
    return design_matrix(basis, data).mean(axis=0)


def solve_rows(features: np.ndarray, targets: np.ndarray, *, allow_rank_deficient: bool = True):
    """Least-squares solution of ``features @ B.T ~ targets`` for each target column.

    Returns ``(B, rank)``; ``B`` has one row per target column.  Singular values
    below ``RCOND`` times the largest are discarded, giving the minimum-norm
    solution when the features are collinear.
    """
    n, p = features.shape
    if n < p:
        raise UnderdeterminedError(f"{n} points cannot determine {p} coefficients per row")
    coef, _, rank, _ = np.linalg.lstsq(features, targets, rcond=RCOND)
    if rank < p and not allow_rank_deficient:
        raise SingularFitError(f"feature matrix has rank {rank} < {p}")
    return coef.T, int(rank)


def fit(
    basis_x: BasisSet,
    basis_y: BasisSet,
    x,
    y,
    *,
    variable_names: Sequence[str] = (),
    allow_rank_deficient: bool = True,
) -> HcrModel:
    """Fit ``beta`` by least squares on normalized training pairs ``(x, y)``.

    Row 0 is fixed to the normalization row (coefficient 1 on the all-zeros
    context index); every other row regresses ``f_j(y)`` on the context features.
    """
    x = _as_points(x, basis_x.dimension)
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"{x.shape[0]} context rows but {y.shape[0]} targets")
    _check_unit(x, "context values")
    _check_unit(y, "target values")
    features = design_matrix(basis_x, x)
    beta, rank = fit_features(features, y, basis_y, allow_rank_deficient=allow_rank_deficient)
    return HcrModel(basis_x, basis_y, beta, tuple(variable_names), rank)


def fit_features(features: np.ndarray, y: np.ndarray, basis_y: BasisSet, *, allow_rank_deficient=True):
    """``fit`` on a precomputed context design matrix; returns ``(beta, rank)``."""
    targets = design_matrix(basis_y, np.asarray(y, dtype=float).ravel()[:, None])
    beta = np.zeros((len(basis_y), features.shape[1]))
    beta[0, 0] = 1.0
    rank = features.shape[1]
    if len(basis_y) > 1:
        beta[1:], rank = solve_rows(features, targets[:, 1:], allow_rank_deficient=allow_rank_deficient)
    elif features.shape[0] < features.shape[1]:
        raise UnderdeterminedError(
            f"{features.shape[0]} points cannot determine {features.shape[1]} coefficients per row"
        )
    return beta, rank


def predict_coefficients(model: HcrModel, x) -> np.ndarray:
    """Density coefficients ``a(x)`` for many points; shape ``(n, |basis_y|)``."""
    x = _as_points(x, model.basis_x.dimension)
    a = design_matrix(model.basis_x, x) @ model.beta.T
    a[:, 0] = 1.0
    return a


def predict_raw(model: HcrModel, x) -> RawDensity:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != model.basis_x.dimension:
        raise DimensionError(f"point of length {x.shape[0]}, model expects {model.basis_x.dimension}")
    a = predict_coefficients(model, x[None, :])[0]
    return RawDensity(a, tuple(int(o) for o in model.orders_y))


def lattice_table(orders: Sequence[int], resolution: int) -> np.ndarray:
    """``f_j`` at the lattice centers for each order; shape ``(L, len(orders))``."""
    return legendre_table(lattice_positions(resolution), max(orders))[:, list(orders)]


def calibrate_many(coeffs: np.ndarray, orders: Sequence[int], resolution: int = DEFAULT_RESOLUTION,
                   threshold: float = DEFAULT_THRESHOLD) -> tuple[np.ndarray, np.ndarray]:
    """Clip and renormalize many polynomial densities at once.

    Returns ``(lattices, normalizers)`` with ``lattices`` of shape ``(n, L)``.
    """
    if resolution < 2:
        raise ValueError("lattice resolution must be at least 2")
    if not threshold > 0:
        raise ValueError("calibration threshold must be positive")
    values = np.atleast_2d(coeffs) @ lattice_table(orders, resolution).T
    np.maximum(values, threshold, out=values)
    norm = values.mean(axis=1)
    return values / norm[:, None], norm


def calibrate(raw: RawDensity, resolution: int = DEFAULT_RESOLUTION,
              threshold: float = DEFAULT_THRESHOLD) -> CalibratedDensity:
    """Sample the polynomial on the lattice, clip below ``threshold``, rescale to mean 1."""
    lattice, norm = calibrate_many(raw.coeffs[None, :], raw.orders, resolution, threshold)
    return CalibratedDensity(lattice[0], threshold, float(norm[0]), raw)


def cell_index(y, resolution: int) -> np.ndarray:
    """Zero-based lattice cell holding ``y``: ``ceil(L*y) - 1`` clamped to ``[0, L-1]``."""
    # rounding guards against L*y landing a hair above an integer, e.g. 0.07 * 100
    scaled = np.round(np.asarray(y, dtype=float) * resolution, 9)
    return np.clip(np.ceil(scaled).astype(int), 1, resolution) - 1


def density_at(density, y):
    lattice = density.lattice if isinstance(density, CalibratedDensity) else np.asarray(density)
    values = lattice[cell_index(y, len(lattice))]
    return float(values) if np.ndim(values) == 0 else values


def density_expectation(density) -> float:
    lattice = np.asarray(getattr(density, "lattice", density))
    return float(np.mean(lattice_positions(len(lattice)) * lattice))


def density_variance(density) -> float:
    lattice = np.asarray(getattr(density, "lattice", density))
    pos = lattice_positions(len(lattice))
    mean = np.mean(pos * lattice)
    return float(max(np.mean((pos - mean) ** 2 * lattice), 0.0))


def expectations_and_variances(lattices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pos = lattice_positions(lattices.shape[1])
    mean = (lattices * pos).mean(axis=1)
    var = (lattices * (pos[None, :] - mean[:, None]) ** 2).mean(axis=1)
    return mean, np.maximum(var, 0.0)


def density_modes(density) -> list[tuple[float, float]]:
    """Local maxima of the lattice as ``(position, value)`` pairs.

    A run of equal cells counts as one maximum when both neighbours are
    strictly lower (lattice ends count as lower); the run reports its first cell.
    """
    lattice = np.asarray(getattr(density, "lattice", density), dtype=float)
    pos = lattice_positions(len(lattice))
    modes = []
    i = 0
    L = len(lattice)
    while i < L:
        j = i
        while j + 1 < L and lattice[j + 1] == lattice[i]:
            j += 1
        left_lower = i == 0 or lattice[i - 1] < lattice[i]
        right_lower = j == L - 1 or lattice[j + 1] < lattice[i]
        if left_lower and right_lower and not (i == 0 and j == L - 1):
            modes.append((float(pos[i]), float(lattice[i])))
        i = j + 1
    return modes


def model_to_dict(model: HcrModel) -> dict:
    return {
        "format": "hcrspread-model/1",
        "variable_names": list(model.variable_names),
        "basis_x": {
            "spec": str(model.basis_x.spec) if model.basis_x.spec else None,
            "members": [list(m) for m in model.basis_x.members],
        },
        "basis_y": {
            "spec": str(model.basis_y.spec) if model.basis_y.spec else None,
            "members": [list(m) for m in model.basis_y.members],
        },
        "shape": list(model.beta.shape),
        # json writes floats with repr(), which round-trips every double exactly
        "beta": model.beta.ravel().tolist(),
        "rank": model.rank,
    }


def _basis_from_dict(d: dict) -> BasisSet:
    spec = BasisSpec.parse(d["spec"]) if d.get("spec") else None
    members = tuple(tuple(m) for m in d["members"])
    return BasisSet(len(members[0]), members, spec)


def model_from_dict(d: dict) -> HcrModel:
    beta = np.array(d["beta"], dtype=float).reshape(d["shape"])
    return HcrModel(
        _basis_from_dict(d["basis_x"]),
        _basis_from_dict(d["basis_y"]),
        beta,
        tuple(d["variable_names"]),
        d.get("rank"),
    )


def save_model(model: HcrModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> HcrModel:
    return model_from_dict(json.loads(Path(path).read_text()))
