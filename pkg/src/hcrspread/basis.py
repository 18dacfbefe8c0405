"""Orthonormal Legendre polynomials on [0, 1] and product-basis families.

The single-variable functions are rescaled shifted Legendre polynomials,
``f_k(x) = sqrt(2k + 1) * P_k(2x - 1)``, which satisfy
``int_0^1 f_j f_k dx = delta_jk``.  Multi-variable functions are products
``f_j(x) = f_{j_1}(x_1) * ... * f_{j_d}(x_d)`` indexed by a multi-index ``j``.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, InvalidSpecError, UnsupportedOrderError

MAX_ORDER = 10


def _shifted_legendre_coefficients(n: int) -> tuple[float, ...]:
    # P_n(2x - 1) = (-1)^n sum_k C(n, k) C(n + k, k) (-x)^k, exact in integers
    ints = [(-1) ** (n + k) * math.comb(n, k) * math.comb(n + k, k) for k in range(n + 1)]
    scale = math.sqrt(2 * n + 1)
    return tuple(scale * c for c in ints)


# COEFFS[k][p] is the coefficient of x**p in f_k, ascending powers.
COEFFS: tuple[tuple[float, ...], ...] = tuple(
    _shifted_legendre_coefficients(n) for n in range(MAX_ORDER + 1)
)


def _check_order(order: int) -> None:
    if not 0 <= order <= MAX_ORDER:
        raise UnsupportedOrderError(
            f"polynomial order {order} outside supported range 0..{MAX_ORDER}"
        )


def legendre_eval(order: int, x):
    """Evaluate the orthonormal polynomial ``f_order`` at ``x`` (scalar or array)."""
    _check_order(order)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c in reversed(COEFFS[order]):
        out = out * x + c
    return float(out) if out.ndim == 0 else out


def legendre_table(x, max_order: int) -> np.ndarray:
    """Values of ``f_0 .. f_max_order`` at every entry of ``x``.

    Returns an array of shape ``x.shape + (max_order + 1,)``.
    """
    _check_order(max_order)
    x = np.asarray(x, dtype=float)
    return np.stack([legendre_eval(k, x) for k in range(max_order + 1)], axis=-1)


@dataclass(frozen=True)
class BasisSpec:
    """Parameters of the family ``B((m_1..m_d), s, r)``.

    Members are multi-indices ``j`` with ``j_i <= m_i``, ``sum(j) <= s`` and at
    most ``r`` nonzero entries.
    """

    max_per_var: tuple[int, ...]
    max_sum: int
    max_interacting: int

    def __post_init__(self):
        object.__setattr__(self, "max_per_var", tuple(int(m) for m in self.max_per_var))
        if not self.max_per_var:
            raise InvalidSpecError("basis spec needs at least one variable")
        if any(m < 0 for m in self.max_per_var) or self.max_sum < 0:
            raise InvalidSpecError(f"negative bound in {self}")
        if not 1 <= self.max_interacting <= self.dimension:
            raise InvalidSpecError(
                f"max_interacting={self.max_interacting} must lie in 1..{self.dimension}"
            )
        if max(min(m, self.max_sum) for m in self.max_per_var) > MAX_ORDER:
            raise UnsupportedOrderError(f"{self} needs polynomial orders above {MAX_ORDER}")

    @property
    def dimension(self) -> int:
        return len(self.max_per_var)

    def __str__(self) -> str:
        ms = ",".join(str(m) for m in self.max_per_var)
        return f"B(({ms}),{self.max_sum},{self.max_interacting})"

    @classmethod
    def parse(cls, text: str) -> "BasisSpec":
        """Parse the textual form ``B((m1,...,md),s,r)``; whitespace is ignored."""
        compact = re.sub(r"\s+", "", text)
        match = re.fullmatch(r"B\(\((\d+(?:,\d+)*),?\),(\d+),(\d+)\)", compact)
        if match is None:
            raise InvalidSpecError(f"cannot parse basis spec {text!r}")
        ms = tuple(int(v) for v in match.group(1).split(","))
        return cls(ms, int(match.group(2)), int(match.group(3)))


def canonical_key(index: Sequence[int]) -> tuple[int, ...]:
    """Sort key of the canonical member order.

    Indices compare from the last variable to the first, so for two variables
    the order is ``(0,0), (1,0), (0,1), (1,1)``.
    """
    return tuple(reversed(index))


@dataclass(frozen=True)
class BasisSet:
    """Ordered set of multi-indices, the all-zeros index first."""

    dimension: int
    members: tuple[tuple[int, ...], ...]
    spec: BasisSpec | None = None

    def __post_init__(self):
        members = tuple(tuple(int(v) for v in m) for m in self.members)
        object.__setattr__(self, "members", members)
        if self.dimension < 1:
            raise InvalidSpecError("basis dimension must be positive")
        zero = (0,) * self.dimension
        if not members or members[0] != zero:
            raise InvalidSpecError("basis must start with the all-zeros index")
        if len(set(members)) != len(members):
            raise InvalidSpecError("duplicate members in basis")
        for m in members:
            if len(m) != self.dimension:
                raise DimensionError(f"member {m} has wrong dimension, expected {self.dimension}")
            if min(m) < 0:
                raise InvalidSpecError(f"negative moment order in {m}")
            if max(m) > MAX_ORDER:
                raise UnsupportedOrderError(f"member {m} exceeds order {MAX_ORDER}")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def max_order(self) -> int:
        return max(max(m) for m in self.members)

    @property
    def description(self) -> str:
        return str(self.spec) if self.spec is not None else f"custom[{len(self)}]"

    @classmethod
    def from_members(cls, members: Iterable[Sequence[int]], spec: BasisSpec | None = None) -> "BasisSet":
        """Build a basis from arbitrary members, sorted canonically with zeros first."""
        members = sorted({tuple(int(v) for v in m) for m in members}, key=canonical_key)
        if not members:
            raise InvalidSpecError("empty basis")
        return cls(len(members[0]), tuple(members), spec)

    def subset(self, keep: Sequence[int]) -> "BasisSet":
        """Members at positions ``keep``, in the given order; position 0 must be kept first."""
        return BasisSet(self.dimension, tuple(self.members[i] for i in keep))

    def labels(self) -> list[str]:
        """Compact string labels such as ``'010'``; comma-separated if any order exceeds 9."""
        sep = "," if self.max_order > 9 else ""
        return [sep.join(str(v) for v in m) for m in self.members]


def enumerate_basis(spec: BasisSpec | str) -> BasisSet:
    """All multi-indices of the family described by ``spec``, in canonical order."""
    if isinstance(spec, str):
        spec = BasisSpec.parse(spec)
    members = []
    for j in itertools.product(*(range(min(m, spec.max_sum) + 1) for m in spec.max_per_var)):
        if sum(j) <= spec.max_sum and sum(1 for v in j if v) <= spec.max_interacting:
            members.append(j)
    members.sort(key=canonical_key)
    return BasisSet(spec.dimension, tuple(members), spec)


def product_eval(j: Sequence[int], x: Sequence[float]) -> float:
    """Evaluate the product function ``prod_i f_{j_i}(x_i)`` at a single point."""
    if len(j) != len(x):
        raise DimensionError(f"index of length {len(j)} used with point of length {len(x)}")
    value = 1.0
    for order, xi in zip(j, x):
        value *= legendre_eval(order, xi)
    return value


def design_matrix(basis: BasisSet, data) -> np.ndarray:
    """Matrix with entry ``(i, k) = f_{members[k]}(data[i])``.

    ``data`` has shape ``(n, d)``; a 1-D array is accepted when ``d == 1``.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1 and basis.dimension == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[1] != basis.dimension:
        raise DimensionError(
            f"data of shape {data.shape} does not match basis dimension {basis.dimension}"
        )
    table = legendre_table(data, basis.max_order)  # (n, d, order)
    members = np.asarray(basis.members)  # (K, d)
    out = np.ones((data.shape[0], len(basis)))
    for var in range(basis.dimension):
        orders = members[:, var]
        if orders.any():
            out *= table[:, var, :][:, orders]
    return out
