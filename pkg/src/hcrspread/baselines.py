"""Spread target and classical point predictors of spread.

All functions accept scalars or numpy arrays and validate element-wise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDataError, InvalidQuoteError


def _arr(*values):
    return [np.asarray(v, dtype=float) for v in values]


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def relative_spread(ask, bid):
    """Quoted spread relative to the midpoint, ``(ask - bid) / ((ask + bid) / 2)``."""
    ask, bid = _arr(ask, bid)
    if np.any(bid <= 0) or np.any(ask < bid):
        raise InvalidQuoteError("quotes need ask >= bid > 0")
    return _out((ask - bid) / ((ask + bid) / 2.0))


def ami(R, P, V):
    """Amihud-style illiquidity ``ln(1 + |R| / (P V))``."""
    R, P, V = _arr(R, P, V)
    pv = P * V
    if np.any(pv <= 0):
        raise InvalidDataError("ami needs P * V > 0")
    return _out(np.log1p(np.abs(R) / pv))


def hlr(H, L):
    """High-low range ``2 (H - L) / (H + L)``."""
    H, L = _arr(H, L)
    if np.any(L <= 0) or np.any(H < L):
        raise InvalidDataError("hlr needs H >= L > 0")
    return _out(2.0 * (H - L) / (H + L))


@dataclass
class RawRecord:
    P: float
    V: float
    H: float
    L: float
    R: float = 0.0
    ask: float | None = None
    bid: float | None = None
    extra: dict[str, float] = field(default_factory=dict)

    def validate(self) -> None:
        if not (self.P > 0 and self.V > 0 and self.H > 0 and self.L > 0):
            raise InvalidDataError("P, V, H, L must be positive")
        if self.H < self.L:
            raise InvalidDataError(f"high {self.H} below low {self.L}")
        if self.ask is not None and self.bid is not None and not self.ask >= self.bid > 0:
            raise InvalidQuoteError(f"ask {self.ask} / bid {self.bid} violate ask >= bid > 0")


def feature_vector_123(record: RawRecord) -> tuple[float, float, float]:
    """Basic context features: price, volume and the high-low range over price."""
    record.validate()
    return record.P, record.V, (record.H - record.L) / record.P


def features_123(P, V, H, L) -> np.ndarray:
    """Vectorized :func:`feature_vector_123`; returns an ``(n, 3)`` array."""
    P, V, H, L = _arr(P, V, H, L)
    return np.column_stack([P, V, (H - L) / P])
