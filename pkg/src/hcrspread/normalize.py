"""Empirical-distribution normalization of variables to quantiles in (0, 1)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidDataError


def _finite_array(raw) -> np.ndarray:
    arr = np.asarray(raw, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise InvalidDataError("non-finite value in data to normalize")
    return arr


@dataclass(frozen=True, eq=False)
class EdfMap:
    """Sorted copy of the values an empirical distribution was fitted on."""

    sorted_values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.sorted_values)

    def to_dict(self) -> dict:
        return {"n": self.n, "sorted_values": self.sorted_values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "EdfMap":
        return fit_edf(d["sorted_values"])


@dataclass(frozen=True, eq=False)
class NormalizedSeries:
    values: np.ndarray
    edf: EdfMap


def fit_edf(raw) -> EdfMap:
    arr = _finite_array(raw)
    if arr.size < 2:
        raise InsufficientDataError(f"need at least 2 values to fit an EDF, got {arr.size}")
    values = np.sort(arr)
    values.setflags(write=False)
    return EdfMap(values)


def normalize(edf: EdfMap, raw) -> np.ndarray:
    """Map values to midrank quantiles ``(q - 0.5) / n`` under ``edf``.

    A value equal to ``c`` stored values receives the average of their ranks.
    Values between or beyond the stored ones land at ``#{stored < v} / n`` and
    are clamped into ``[0.5/n, 1 - 0.5/n]``.
    """
    arr = _finite_array(raw)
    n = edf.n
    below = np.searchsorted(edf.sorted_values, arr, side="left")
    upto = np.searchsorted(edf.sorted_values, arr, side="right")
    # midrank q = (below + 1 + upto) / 2, so (q - 0.5) / n = (below + upto) / (2n)
    u = (below + upto) / (2.0 * n)
    return np.clip(u, 0.5 / n, 1.0 - 0.5 / n)


def normalize_series(raw) -> NormalizedSeries:
    """Fit an EDF on ``raw`` and return its in-sample quantiles."""
    edf = fit_edf(raw)
    return NormalizedSeries(normalize(edf, raw), edf)


def normalize_columns(data) -> tuple[np.ndarray, list[EdfMap]]:
    """Normalize each column of an ``(n, d)`` array independently."""
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    edfs = [fit_edf(data[:, i]) for i in range(data.shape[1])]
    out = np.column_stack([normalize(e, data[:, i]) for i, e in enumerate(edfs)])
    return out, edfs


def apply_columns(edfs: list[EdfMap], data) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    return np.column_stack([normalize(e, data[:, i]) for i, e in enumerate(edfs)])


def denormalize_density(edf: EdfMap, density) -> tuple[np.ndarray, np.ndarray]:
    """Transfer a calibrated density on (0, 1) to the sorted original values.

    The density is read at the lattice ``(i - 0.5) / n`` of the EDF and the
    resulting weights are renormalized to probabilities.  Returns
    ``(values, probabilities)``, both of length ``n``.
    """
    from .model import density_at

    n = edf.n
    grid = (np.arange(1, n + 1) - 0.5) / n
    weights = density_at(density, grid) / n
    return edf.sorted_values.copy(), weights / weights.sum()
