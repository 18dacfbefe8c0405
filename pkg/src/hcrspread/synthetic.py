"""Synthetic data with known conditional structure, for tests and experiments."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .basis import legendre_eval

# A term (c, j_y, j_x) contributes c * f_{j_y}(y) * prod_i f_{j_x[i]}(x_i).
Term = tuple[float, int, Sequence[int]]


def conditional_density(terms: Sequence[Term], x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Unclipped ``1 + sum c f_jy(y) f_jx(x)`` for paired rows of ``x`` and ``y``."""
    out = np.ones(len(y))
    for c, jy, jx in terms:
        term = c * legendre_eval(jy, y)
        for i, order in enumerate(jx):
            if order:
                term = term * legendre_eval(order, x[:, i])
        out += term
    return out


def _envelope(terms: Sequence[Term]) -> float:
    # |f_k| <= sqrt(2k + 1) on [0, 1]
    bound = 1.0
    for c, jy, jx in terms:
        bound += abs(c) * np.sqrt(2 * jy + 1) * np.prod([np.sqrt(2 * j + 1) for j in jx])
    return float(bound)


def sample_conditional(rng: np.random.Generator, n: int, d: int, terms: Sequence[Term]):
    """Draw ``x`` uniform on ``[0,1]^d`` and ``y | x`` by rejection from ``max(rho, 0)``.

    Returns ``(x, y)`` with shapes ``(n, d)`` and ``(n,)``.
    """
    x = rng.random((n, d))
    y = np.empty(n)
    pending = np.arange(n)
    bound = _envelope(terms)
    while pending.size:
        proposal = rng.random(pending.size)
        dens = np.maximum(conditional_density(terms, x[pending], proposal), 0.0)
        accept = rng.random(pending.size) * bound < dens
        y[pending[accept]] = proposal[accept]
        pending = pending[~accept]
    return x, y


def market_table(rng: np.random.Generator, n: int, *, price_effect: float = 0.5,
                 volume_effect: float = -0.6, range_effect: float = 0.8,
                 noise: float = 0.3, extra: int = 0) -> dict[str, np.ndarray]:
    """Daily records whose log-spread depends on price, volume and intraday range.

    Returns a column dict with ``P, V, H, L, R, ask, bid`` and ``extra``
    opaque columns ``X1..Xk``.
    """
    logp = np.cumsum(rng.normal(0, 0.02, n)) + np.log(50.0)
    P = np.exp(logp)
    V = np.exp(rng.normal(13.0, 0.6, n))
    rng_rel = np.exp(rng.normal(np.log(0.02), 0.4, n))
    H = P * (1 + rng_rel * rng.uniform(0.2, 0.8, n))
    L = H / (1 + rng_rel)
    R = np.concatenate([[0.0], np.diff(logp)])
    z = lambda v: (v - v.mean()) / v.std()
    log_spread = (np.log(1e-3) + 0.4 * (price_effect * z(logp) + volume_effect * z(np.log(V))
                  + range_effect * z(np.log(rng_rel))) + noise * rng.normal(size=n))
    spread = np.exp(log_spread)
    mid = P
    ask = mid * (1 + spread / 2)
    bid = mid * (1 - spread / 2)
    cols = {"P": P, "V": V, "H": H, "L": L, "R": R, "ask": ask, "bid": bid}
    for i in range(extra):
        cols[f"X{i + 1}"] = rng.normal(size=n) + 0.3 * z(log_spread)
    return cols


def write_market_csv(path, entities: dict[str, dict[str, np.ndarray]], delimiter: str = ",") -> None:
    """Write several entities' columns to one delimited file with an ``entity`` column."""
    names = list(next(iter(entities.values())))
    with open(path, "w") as fh:
        fh.write(delimiter.join(["entity", *names]) + "\n")
        for ent, cols in entities.items():
            for row in zip(*(cols[c] for c in names)):
                fh.write(delimiter.join([ent, *(repr(float(v)) for v in row)]) + "\n")
