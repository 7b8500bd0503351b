"""Uniform B-spline and Chebyshev tensor-product bases.

The order-``m`` B-spline ``B(x)`` has knots ``-m*d, ..., -d, 0``.  Shift
``i`` (``1 <= i <= N_d``) is ``B(x - i*d)``, supported on
``((i - m) d, i d)``; these are exactly the shifts not vanishing on
``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import ConfigurationError

__all__ = [
    "bspline_eval",
    "basis_count",
    "BSplineBasis",
    "ChebyshevBasis",
    "TensorBasis",
    "RestrictedBasis",
    "chebyshev_tensor_eval",
    "restrict",
]


def bspline_eval(m: int, d: float, x) -> np.ndarray:
    """Order-``m`` uniform B-spline with knots ``{-m d, ..., 0}`` at ``x``.

    Cox-de Boor recursion on the normalised variable ``u = x/d + m``.
    The order-1 spline is the indicator of ``(-d, 0]``.
    """
    if m < 1 or d <= 0:
        raise ConfigurationError(f"need m >= 1 and d > 0, got m={m}, d={d}")
    u = np.asarray(x, dtype=float) / d + m
    # b[j] holds B_{j,p}(u) for knots j, j+1, ..., j+p
    b = [((u > j) & (u <= j + 1)).astype(float) for j in range(m)]
    for p in range(2, m + 1):
        b = [
            ((u - j) * b[j] + (j + p - u) * b[j + 1]) / (p - 1)
            for j in range(m - p + 1)
        ]
    return b[0]


def basis_count(d: float, m: int) -> int:
    """Number of order-``m`` shifts meeting ``[0, 1]``: ``1/d + m - 1``."""
    inv = 1.0 / d
    if abs(inv - round(inv)) > 1e-9:
        raise ConfigurationError(f"1/d must be an integer, got d={d!r}")
    return int(round(inv)) + m - 1


@dataclass(frozen=True)
class BSplineBasis:
    """Univariate shifts ``B(x - i d)``, ``i = 1..N_d``."""

    m: int
    d: float

    def __post_init__(self) -> None:
        basis_count(self.d, self.m)

    @property
    def count(self) -> int:
        return basis_count(self.d, self.m)

    @property
    def order(self) -> int:
        return self.m

    def __call__(self, x) -> np.ndarray:
        """Matrix of shape ``(len(x), count)``."""
        x = np.asarray(x, dtype=float).ravel()
        shifts = np.arange(1, self.count + 1) * self.d
        return bspline_eval(self.m, self.d, x[:, None] - shifts[None, :])

    def describe(self) -> str:
        return f"bspline m={self.m} d={self.d!r}"


@dataclass(frozen=True)
class ChebyshevBasis:
    """Chebyshev polynomials ``T_0..T_n`` of ``2x - 1`` on ``[0, 1]``."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ConfigurationError(f"degree must be >= 0, got {self.n}")

    @property
    def count(self) -> int:
        return self.n + 1

    @property
    def order(self) -> int:
        return self.n + 1

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return C.chebvander(2.0 * x - 1.0, self.n)

    def describe(self) -> str:
        return f"chebyshev n={self.n}"


def chebyshev_tensor_eval(n: int, point) -> np.ndarray:
    """All products ``T_a(xi) T_b(eta) ...`` with degrees ``0..n`` per axis.

    ``point`` lies in ``[0, 1]^dim``; the index order is lexicographic.
    """
    point = np.atleast_1d(np.asarray(point, dtype=float))
    rows = [ChebyshevBasis(n)(np.array([p]))[0] for p in point]
    return reduce(np.multiply.outer, rows).ravel()


@dataclass(frozen=True)
class TensorBasis:
    """Tensor product of one univariate basis per axis.

    Element ``(i, j[, l])`` is the product of the univariate factors;
    flat indices are lexicographic with the last axis fastest.
    """

    factor: BSplineBasis | ChebyshevBasis
    dim: int

    @property
    def kind(self) -> str:
        return "bspline_tensor" if isinstance(self.factor, BSplineBasis) else "chebyshev_tensor"

    @property
    def per_axis(self) -> int:
        return self.factor.count

    @property
    def size(self) -> int:
        return self.per_axis**self.dim

    @property
    def order(self) -> int:
        return self.factor.order

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(flat, (self.per_axis,) * self.dim))

    def axis_matrices(self, axes) -> list[np.ndarray]:
        """Univariate basis matrices for per-axis coordinate vectors."""
        if isinstance(axes, np.ndarray) and axes.ndim == 1:
            axes = [axes] * self.dim
        return [self.factor(a) for a in axes]

    def grid_matrix(self, axes) -> np.ndarray:
        """Values at all nodes of a tensor grid, shape ``(n_nodes, size)``."""
        mats = self.axis_matrices(axes)
        return reduce(np.kron, mats)

    def __call__(self, points) -> np.ndarray:
        """Values at scattered points ``(P, dim)``, shape ``(P, size)``."""
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        mats = [self.factor(points[:, a]) for a in range(self.dim)]
        out = mats[0]
        for m in mats[1:]:
            out = (out[:, :, None] * m[:, None, :]).reshape(len(points), -1)
        return out

    def contract_grid(self, coef: np.ndarray, axes) -> np.ndarray:
        """Evaluate ``sum coef * basis`` on a tensor grid without forming products."""
        mats = self.axis_matrices(axes)
        out = np.asarray(coef).reshape((self.per_axis,) * self.dim)
        for a, m in enumerate(mats):
            out = np.tensordot(m, out, axes=([1], [a]))
            out = np.moveaxis(out, 0, a)
        return out

    def describe(self) -> str:
        return f"{self.factor.describe()} dim={self.dim}"


@dataclass(frozen=True)
class RestrictedBasis:
    """Basis values on the grid nodes of one region, zero elsewhere.

    ``values`` has shape ``(n_nodes, size)``; row order is row-major over
    the interior grid.  Padding is implicit zero.
    """

    base: TensorBasis
    region: int
    values: np.ndarray

    @property
    def zero_columns(self) -> np.ndarray:
        return np.flatnonzero(~np.any(self.values != 0.0, axis=0))


def restrict(base: TensorBasis, labeling, region: int, grid_values: np.ndarray | None = None) -> RestrictedBasis:
    """Restrict ``base`` to the grid nodes carrying label ``region``.

    ``labeling`` is anything with an integer ``labels`` array over the
    interior grid.  ``grid_values`` may pass a precomputed grid matrix.
    """
    labels = np.asarray(labeling.labels).ravel()
    if grid_values is None:
        N = labeling.labels.shape[0]
        axis = np.arange(N) / (N - 1)
        grid_values = base.grid_matrix(axis)
    if grid_values.shape[0] != labels.size:
        raise ConfigurationError("labeling does not cover the grid")
    mask = (labels == region).astype(float)
    return RestrictedBasis(base, region, grid_values * mask[:, None])
