"""Signature operators on zero-padded grid data.

A signature is a difference operator applied to the padded samples.  Where
the data is smooth its entries are ``O(h^k)``; next to the domain boundary
and next to a singularity they are ``O(1)``.  Three operators are provided:

* k-th forward differences of a 1-D sequence,
* the 13-point discrete biharmonic (two composed 5-point Laplacians) in 2-D,
* m-th forward differences taken along every axis (any dimension, used in 3-D).

Each operator is available as a direct stencil on arrays and as a sparse
matrix acting on the flattened interior samples; the two must agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, SizeError
from .grid import GridFunction, GridSpec, write_grid_csv

__all__ = [
    "SignatureSpec",
    "Signature",
    "forward_diff",
    "signature_1d",
    "biharmonic",
    "per_axis_signature",
    "apply_signature",
    "signature_operator",
    "invert_differences",
    "sigma_matrix",
]

KINDS = ("forward_diff", "biharmonic", "per_axis_diff")


@dataclass(frozen=True)
class SignatureSpec:
    """Which difference operator defines the signature.

    ``order`` is the difference order ``k`` for ``forward_diff`` and
    ``per_axis_diff``; the biharmonic is always of order 4 (reach 2).
    ``scaling="h_power"`` divides by ``h**order``.
    """

    kind: str = "forward_diff"
    order: int = 5
    scaling: str = "raw"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown signature kind {self.kind!r}")
        if self.kind == "biharmonic":
            object.__setattr__(self, "order", 4)
        if self.order < 1:
            raise ConfigurationError(f"signature order must be >= 1, got {self.order}")
        if self.scaling not in ("raw", "h_power"):
            raise ConfigurationError(f"unknown scaling {self.scaling!r}")

    @property
    def reach(self) -> int:
        """Padding layers the stencil needs to see every sample touching data."""
        return 2 if self.kind == "biharmonic" else self.order

    def check_dim(self, dim: int) -> None:
        if self.kind == "forward_diff" and dim != 1:
            raise ConfigurationError("forward_diff signatures are 1-D; use per_axis_diff")
        if self.kind == "biharmonic" and dim != 2:
            raise ConfigurationError("the biharmonic signature is 2-D only")


@dataclass(frozen=True)
class Signature:
    """Signature values; one block per difference direction."""

    spec: SignatureSpec
    blocks: tuple[np.ndarray, ...]

    @property
    def values(self) -> np.ndarray:
        if len(self.blocks) == 1:
            return self.blocks[0]
        return self.vector()

    def vector(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self.blocks])

    @property
    def size(self) -> int:
        return sum(b.size for b in self.blocks)

    def to_csv(self, path, h: float, block: int = 0) -> None:
        """Write one block using the grid CSV layout (``pad`` is 0)."""
        b = self.blocks[block]
        if len(set(b.shape)) != 1:
            raise SizeError(f"block shape {b.shape} is not square; cannot use grid CSV")
        spec = _RawSpec(b.ndim, b.shape[0], h)
        write_grid_csv(path, spec, b)


@dataclass(frozen=True)
class _RawSpec:
    dim: int
    N: int
    h: float
    pad: int = 0


def forward_diff(values: np.ndarray, k: int, axis: int = -1) -> np.ndarray:
    """k-th forward differences along ``axis``.

    ``out[i] = sum_j (-1)**(k-j) * C(k, j) * values[i + j]``, computed as
    ``k`` successive first differences.  The output is ``k`` shorter.
    """
    values = np.asarray(values, dtype=float)
    if k < 0:
        raise SizeError(f"difference order must be >= 0, got {k}")
    if values.shape[axis] <= k:
        raise SizeError(
            f"need more than {k} samples for a {k}-th difference, got {values.shape[axis]}"
        )
    out = np.moveaxis(values, axis, -1)
    for _ in range(k):
        out = out[..., 1:] - out[..., :-1]
    return np.moveaxis(out, -1, axis)


def _laplace5(u: np.ndarray) -> np.ndarray:
    # valid-mode 5-point Laplacian over the last two axes
    return (
        u[..., :-2, 1:-1]
        + u[..., 2:, 1:-1]
        + u[..., 1:-1, :-2]
        + u[..., 1:-1, 2:]
        - 4.0 * u[..., 1:-1, 1:-1]
    )


def _scale(out, spec: SignatureSpec, h: float):
    if spec.scaling == "h_power":
        return out / h**spec.order
    return out


def _need_pad(g: GridFunction, reach: int) -> None:
    if g.spec.pad < reach:
        raise ConfigurationError(
            f"signature needs padding >= {reach}, grid has pad={g.spec.pad}"
        )


def signature_1d(g: GridFunction, k: int, scaling: str = "raw") -> Signature:
    """k-th forward differences of the padded 1-D samples."""
    spec = SignatureSpec("forward_diff", k, scaling)
    if g.dim != 1:
        raise ConfigurationError("signature_1d needs 1-D data")
    _need_pad(g, k)
    return Signature(spec, (_scale(forward_diff(g.values, k), spec, g.spec.h),))


def biharmonic(g: GridFunction, scaling: str = "raw") -> Signature:
    """13-point discrete biharmonic of the padded 2-D samples (valid mode)."""
    spec = SignatureSpec("biharmonic", 4, scaling)
    if g.dim != 2:
        raise ConfigurationError("biharmonic needs 2-D data")
    _need_pad(g, 2)
    return Signature(spec, (_scale(_laplace5(_laplace5(g.values)), spec, g.spec.h),))


def _per_axis_blocks(padded: np.ndarray, dim: int, m: int, pad: int, N: int):
    # differences along one axis; other axes cropped to the lines through data
    lead = padded.ndim - dim
    blocks = []
    for a in range(dim):
        idx = [slice(None)] * padded.ndim
        for b in range(dim):
            if b != a:
                idx[lead + b] = slice(pad, pad + N)
        blocks.append(forward_diff(padded[tuple(idx)], m, axis=lead + a))
    return blocks


def per_axis_signature(g: GridFunction, m: int, scaling: str = "raw") -> Signature:
    """m-th forward differences along each axis, stacked x, y, z."""
    spec = SignatureSpec("per_axis_diff", m, scaling)
    _need_pad(g, m)
    blocks = _per_axis_blocks(g.values, g.dim, m, g.spec.pad, g.spec.N)
    return Signature(spec, tuple(_scale(b, spec, g.spec.h) for b in blocks))


def apply_signature(g: GridFunction, spec: SignatureSpec) -> Signature:
    spec.check_dim(g.dim)
    if spec.kind == "forward_diff":
        return signature_1d(g, spec.order, spec.scaling)
    if spec.kind == "biharmonic":
        return biharmonic(g, spec.scaling)
    return per_axis_signature(g, spec.order, spec.scaling)


def apply_signature_batch(
    padded: np.ndarray, spec: SignatureSpec, grid: GridSpec
) -> np.ndarray:
    """Signature vectors of a stack of padded arrays (leading batch axis).

    Returns an array of shape ``(batch, signature_length)``.
    """
    dim = grid.dim
    nb = padded.shape[0]
    if spec.kind == "biharmonic":
        out = [_laplace5(_laplace5(padded)).reshape(nb, -1)]
    elif spec.kind == "forward_diff":
        out = [forward_diff(padded, spec.order, axis=-1).reshape(nb, -1)]
    else:
        out = [
            b.reshape(nb, -1)
            for b in _per_axis_blocks(padded, dim, spec.order, grid.pad, grid.N)
        ]
    return _scale(np.concatenate(out, axis=1), spec, grid.h)


def _diff_matrix(n: int, k: int) -> sp.csr_matrix:
    coeffs = np.array([(-1) ** (k - j) * comb(k, j) for j in range(k + 1)], dtype=float)
    return sp.diags(coeffs, offsets=np.arange(k + 1), shape=(n - k, n), format="csr")


def signature_operator(spec: SignatureSpec, grid: GridSpec) -> sp.csr_matrix:
    """Sparse matrix mapping flattened interior samples to the signature vector.

    Rows follow ``Signature.vector()`` ordering; columns follow row-major
    interior node ordering.  Padding is implicit (zero).
    """
    spec.check_dim(grid.dim)
    if grid.pad < spec.reach:
        raise ConfigurationError(
            f"signature needs padding >= {spec.reach}, grid has pad={grid.pad}"
        )
    n, N, p, dim = grid.N + 2 * grid.pad, grid.N, grid.pad, grid.dim
    inner = slice(p, p + N)
    if spec.kind == "biharmonic":
        def lap(size):
            s2 = _diff_matrix(size, 2)
            e = sp.eye(size - 2, size, k=1, format="csr")
            return sp.kron(s2, e) + sp.kron(e, s2)

        full = (lap(n - 2) @ lap(n)).tocsc()
        cols = (np.arange(n)[inner][:, None] * n + np.arange(n)[inner][None, :]).ravel()
        op = full[:, cols]
    else:
        d = _diff_matrix(n, spec.order).tocsc()[:, inner]
        eye = sp.identity(N, format="csr")
        blocks = []
        for a in range(dim):
            factors = [d if b == a else eye for b in range(dim)]
            m = factors[0]
            for f in factors[1:]:
                m = sp.kron(m, f)
            blocks.append(m)
        op = sp.vstack(blocks)
    op = sp.csr_matrix(op)
    if spec.scaling == "h_power":
        op = op / grid.h**spec.order
    return op


def invert_differences(d: np.ndarray, k: int) -> np.ndarray:
    """Undo ``k`` forward differences assuming ``k`` leading zeros.

    Returns ``g`` of length ``len(d) + k`` with ``g[:k] == 0`` and
    ``forward_diff(g, k) == d``.  Each step is a cumulative sum, so
    ``|d| <= C h^a`` gives ``|g| <= n^k C h^a`` over ``n`` nodes.
    """
    g = np.asarray(d, dtype=float)
    for _ in range(k):
        g = np.concatenate(([0.0], np.cumsum(g)))
    return g


def sigma_matrix(N: int, k: int = 3) -> np.ndarray:
    """Square banded matrix of the k-th difference signature.

    For ``k = 3`` the column ``i`` holds ``-1, 3, -3, 1`` in rows
    ``i-2 .. i+1``.
    """
    if N <= k:
        raise SizeError(f"N must exceed k, got N={N}, k={k}")
    shift = (k - 1) // 2
    S = np.zeros((N, N))
    for j in range(k + 1):
        c = (-1) ** j * comb(k, j)
        S += c * np.eye(N, k=j - shift)
    return S
