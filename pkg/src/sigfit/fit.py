"""First stage: per-region expansions whose signature matches the data.

Minimise ``||sigma(f) - sigma(S)||_2^2`` over ``S = sum_r sum_i a_ri B_i|P_r``.
The columns of the least-squares matrix ``C`` are the signatures of the
restricted basis functions.  The normal matrix ``A = C^T C`` is never
inverted directly: ``[C | sigma(f)]`` is reduced to its triangular QR factor
(streamed over row blocks when ``C`` is large), and the truncated
pseudoinverse of ``A`` is applied through the SVD of that factor.  This
keeps the accuracy of an orthogonal factorisation while solving the same
normal equations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
import scipy.sparse as sp

from .basis import BSplineBasis, ChebyshevBasis, TensorBasis
from .detect import LevelSetSpline, RegionLabeling
from .errors import ConfigurationError, RefinementWarning, SizeError, SolverError
from .grid import GridFunction, GridSpec
from .signature import (
    Signature,
    SignatureSpec,
    apply_signature,
    apply_signature_batch,
    signature_operator,
)

__all__ = [
    "SignatureColumns",
    "build_columns",
    "build_columns_direct",
    "NormalSystem",
    "assemble",
    "solve",
    "PiecewiseApproximant",
    "first_stage",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-20
FORMAT_VERSION = 1
_DEFAULT_BLOCK_BYTES = 256 * 2**20


@dataclass
class SignatureColumns:
    """Signatures of the region-restricted basis functions.

    Column ``r * size + i`` belongs to region ``r + 1`` and basis element
    ``i`` (lexicographic multi-index).  ``op`` is the sparse signature
    operator acting on interior samples and ``values`` the unrestricted
    basis values at the grid nodes; columns are formed on demand so that
    large problems can be streamed in row blocks.
    """

    op: sp.csr_matrix
    values: np.ndarray
    masks: np.ndarray
    base: TensorBasis

    @property
    def n_regions(self) -> int:
        return self.masks.shape[0]

    @property
    def n_cols(self) -> int:
        return self.n_regions * self.values.shape[1]

    @property
    def n_rows(self) -> int:
        return self.op.shape[0]

    def index(self, region: int, multi) -> int:
        """Flat column index of ``(region, i, j[, l])``; regions start at 1."""
        flat = np.ravel_multi_index(tuple(multi), (self.base.per_axis,) * self.base.dim)
        return (region - 1) * self.base.size + int(flat)

    def row_blocks(self, max_bytes: int = _DEFAULT_BLOCK_BYTES) -> Iterator[tuple[slice, np.ndarray]]:
        rows = max(1, int(max_bytes // (8 * max(self.n_cols, 1))))
        for start in range(0, self.n_rows, rows):
            sl = slice(start, min(start + rows, self.n_rows))
            blk = self.op[sl]
            parts = [(blk @ sp.diags(m.astype(float))) @ self.values for m in self.masks]
            yield sl, np.hstack(parts)

    def dense(self) -> np.ndarray:
        return np.vstack([b for _, b in self.row_blocks(max_bytes=2**62)])

    def matvec(self, a: np.ndarray) -> np.ndarray:
        """``C @ a`` without forming ``C``."""
        return self.op @ self.grid_values(a)

    def grid_values(self, a: np.ndarray) -> np.ndarray:
        """Flattened interior values of the expansion with coefficients ``a``."""
        a = np.asarray(a).reshape(self.n_regions, -1)
        return sum(m * (self.values @ ar) for m, ar in zip(self.masks, a))


def _grid_basis(base: TensorBasis, N: int) -> np.ndarray:
    return base.grid_matrix(np.arange(N) / (N - 1))


def build_columns(
    base: TensorBasis, labeling: RegionLabeling, sigspec: SignatureSpec, grid: GridSpec
) -> SignatureColumns:
    """Signature columns for every region of ``labeling``."""
    sigspec.check_dim(grid.dim)
    if labeling.labels.shape != grid.interior_shape:
        raise SizeError("labeling does not match the grid")
    op = signature_operator(sigspec, grid)
    labels = labeling.labels.ravel()
    masks = np.stack([labels == r for r in range(1, labeling.n_regions + 1)])
    return SignatureColumns(op, _grid_basis(base, grid.N), masks, base)


def build_columns_direct(
    base: TensorBasis, labeling: RegionLabeling, sigspec: SignatureSpec, grid: GridSpec
) -> np.ndarray:
    """Dense column matrix built by applying the stencils to each padded column.

    Independent of the sparse operator route; used to cross-check it.
    """
    V = _grid_basis(base, grid.N)
    labels = labeling.labels.ravel()
    cols = []
    for r in range(1, labeling.n_regions + 1):
        Vr = V * (labels == r)[:, None]
        tens = np.zeros((Vr.shape[1],) + grid.shape)
        tens[(slice(None),) + grid.interior] = Vr.T.reshape((-1,) + grid.interior_shape)
        cols.append(apply_signature_batch(tens, sigspec, grid).T)
    return np.hstack(cols)


@dataclass
class NormalSystem:
    """Normal equations ``A a = b`` with ``A = C^T C`` and ``b = C^T s``.

    ``factor`` is the triangular QR factor ``R`` of ``[C | s]`` split as
    ``(R_C, z, rho)`` so that ``A = R_C^T R_C``, ``b = R_C^T z`` and
    ``rho**2`` is the part of ``||s||^2`` outside the column span.
    ``rank`` and ``tol`` are filled in by :func:`solve`.
    """

    A: np.ndarray
    b: np.ndarray
    factor: tuple[np.ndarray, np.ndarray, float] | None = None
    residual_fn: Callable[[np.ndarray], np.ndarray] | None = None
    rank: int | None = None
    tol: float | None = None

    @property
    def n(self) -> int:
        return len(self.b)


def _streamed_r(blocks: Iterator[np.ndarray], ncols: int) -> np.ndarray:
    R = None
    for blk in blocks:
        stack = blk if R is None else np.vstack([R, blk])
        R = np.linalg.qr(stack, mode="r")
    out = np.zeros((ncols, ncols))
    if R is not None:
        out[: R.shape[0]] = R
    return out


def assemble(cols, data_sig, max_block_bytes: int = _DEFAULT_BLOCK_BYTES) -> NormalSystem:
    """Form the normal system for columns ``cols`` and data signature.

    ``cols`` is a :class:`SignatureColumns` or a dense matrix.
    """
    if isinstance(data_sig, Signature):
        data_sig = data_sig.vector()
    s = np.asarray(data_sig, dtype=float).ravel()
    if isinstance(cols, SignatureColumns):
        n_rows, n = cols.n_rows, cols.n_cols
        blocks = (np.column_stack([blk, s[sl]]) for sl, blk in cols.row_blocks(max_block_bytes))
    else:
        cols = np.asarray(cols, dtype=float)
        if cols.ndim != 2:
            raise SizeError("column matrix must be 2-D")
        n_rows, n = cols.shape
        blocks = iter([np.column_stack([cols, s])]) if len(s) == n_rows else None
    if len(s) != n_rows:
        raise SizeError(f"data signature length {len(s)} != column length {n_rows}")
    R = _streamed_r(blocks, n + 1)
    Rc, z, rho = R[:n, :n], R[:n, n], abs(R[n, n])
    A = Rc.T @ Rc
    A = 0.5 * (A + A.T)
    return NormalSystem(A, Rc.T @ z, factor=(Rc, z, float(rho)))


def _warn_refine(k: int) -> None:
    warnings.warn(f"refinement stalled after {k} iteration(s); returning best iterate", RefinementWarning, stacklevel=3)


def solve(sys: NormalSystem, tol: float = DEFAULT_TOL, refine_iters: int = 3) -> np.ndarray:
    """Truncated-pseudoinverse solution of the normal equations.

    Eigenvalues of ``A`` below ``tol`` times the largest are discarded.
    Without a stored factor the cut is raised to the eigenvalue roundoff
    level ``n * eps`` when that is larger.
    Then up to ``refine_iters`` rounds of ``a <- a + pinv(A) (b - A a)``
    are taken while the residual keeps decreasing.
    """
    try:
        if sys.factor is not None:
            Rc, z, _ = sys.factor
            U, s, Vt = np.linalg.svd(Rc)
            keep = s**2 > tol * s[0] ** 2 if s.size and s[0] > 0 else np.zeros(s.size, bool)
            Uk, sk, Vk = U[:, keep], s[keep], Vt[keep].T

            def apply(rhs_z):
                return Vk @ ((Uk.T @ rhs_z) / sk)

            def resid(a):
                return z - Rc @ a

            def norm_res(rz):
                return np.linalg.norm(Rc.T @ rz)

            a = apply(z)
        else:
            w, V = np.linalg.eigh(sys.A)
            wmax = w.max(initial=0.0)
            # eigenvalues of A carry roundoff near n*eps*wmax; nothing below that is resolved
            cut = max(tol, w.size * np.finfo(float).eps)
            keep = w > cut * wmax if wmax > 0 else np.zeros(w.size, bool)
            Vk, wk = V[:, keep], w[keep]

            def apply(r):
                return Vk @ ((Vk.T @ r) / wk)

            def resid(a):
                return sys.residual_fn(a) if sys.residual_fn else sys.b - sys.A @ a

            norm_res = np.linalg.norm
            a = apply(sys.b)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"decomposition failed: {exc}") from exc
    sys.rank, sys.tol = int(keep.sum()), tol
    r = resid(a)
    best, best_norm = a, norm_res(r)
    # stalling below this level is ordinary roundoff, not a failure
    floor = 1e-10 * np.linalg.norm(sys.b)
    for k in range(refine_iters):
        a = best + apply(r)
        r = resid(a)
        nr = norm_res(r)
        if not nr < best_norm:
            if best_norm > floor:
                _warn_refine(k + 1)
            break
        best, best_norm = a, nr
    return best


# ---------------------------------------------------------------------------


@dataclass
class PiecewiseApproximant:
    """Per-region expansions over a tensor basis plus the labeling.

    Grid nodes take the region of their label; other points are
    classified with the labeling (or with explicit region ids).
    """

    base: TensorBasis
    labeling: RegionLabeling
    coef: np.ndarray
    residual: float = float("nan")
    sigspec: SignatureSpec | None = None
    rank: int | None = None
    tol: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.coef = np.asarray(self.coef, dtype=float).reshape(self.labeling.n_regions, self.base.size)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def n_regions(self) -> int:
        return self.coef.shape[0]

    def piece(self, region: int, points) -> np.ndarray:
        """Expansion of ``region`` evaluated everywhere (no restriction)."""
        return self.base(points) @ self.coef[region - 1]

    def piece_grid(self, region: int, axes) -> np.ndarray:
        return self.base.contract_grid(self.coef[region - 1], axes)

    def on_grid(self) -> np.ndarray:
        """Values at the interior grid nodes of the labeling."""
        N = self.labeling.N
        axes = np.arange(N) / (N - 1)
        out = np.zeros(self.labeling.labels.shape)
        for r in range(1, self.n_regions + 1):
            m = self.labeling.labels == r
            out[m] = self.piece_grid(r, axes)[m]
        return out

    def __call__(self, points, regions=None) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if regions is None:
            regions = self.labeling.classify(points)
        regions = np.asarray(regions).ravel()
        out = np.zeros(len(points))
        for r in range(1, self.n_regions + 1):
            m = regions == r
            if np.any(m):
                out[m] = self.piece(r, points[m])
        return out

    def on_tensor_grid(self, axes, regions: np.ndarray) -> np.ndarray:
        """Values on a tensor grid given the region id of every node."""
        out = np.zeros(regions.shape)
        for r in range(1, self.n_regions + 1):
            m = regions == r
            if np.any(m):
                out[m] = self.piece_grid(r, axes)[m]
        return out

    # -- serialisation ------------------------------------------------------

    def dumps(self) -> str:
        lab = self.labeling
        lines = [f"sigfit-approximant {FORMAT_VERSION}"]
        f = self.base.factor
        if isinstance(f, BSplineBasis):
            lines.append(f"basis bspline {self.base.dim} {f.m} {float(f.d).hex()}")
        else:
            lines.append(f"basis chebyshev {self.base.dim} {f.n}")
        if self.sigspec is not None:
            s = self.sigspec
            lines.append(f"signature {s.kind} {s.order} {s.scaling}")
        lines.append(f"residual {float(self.residual).hex()}")
        lines.append(f"labels {lab.N} {float(lab.h).hex()} {lab.n_regions} " + " ".join(map(str, lab.labels.ravel())))
        lines.append("breakpoints " + " ".join(float(b).hex() for b in lab.breakpoints))
        if lab.levelset is not None:
            ls = lab.levelset
            lines.append(f"levelset {float(ls.d).hex()} {ls.order} " + " ".join(float(c).hex() for c in ls.coef))
        for r, c in enumerate(self.coef, start=1):
            lines.append(f"coef {r} " + " ".join(float(v).hex() for v in c))
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "PiecewiseApproximant":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows or rows[0][0] != "sigfit-approximant":
            raise ConfigurationError("not a sigfit approximant file")
        if int(rows[0][1]) != FORMAT_VERSION:
            raise ConfigurationError(f"unsupported format version {rows[0][1]}")
        rec = {}
        coefs = {}
        for row in rows[1:]:
            if row[0] == "coef":
                coefs[int(row[1])] = [float.fromhex(v) for v in row[2:]]
            else:
                rec[row[0]] = row[1:]
        b = rec["basis"]
        dim = int(b[1])
        if b[0] == "bspline":
            factor = BSplineBasis(int(b[2]), float.fromhex(b[3]))
        else:
            factor = ChebyshevBasis(int(b[2]))
        base = TensorBasis(factor, dim)
        sigspec = None
        if "signature" in rec:
            s = rec["signature"]
            sigspec = SignatureSpec(s[0], int(s[1]), s[2])
        lb = rec["labels"]
        N, h = int(lb[0]), float.fromhex(lb[1])
        labels = np.array([int(v) for v in lb[3:]]).reshape((N,) * dim)
        levelset = None
        if "levelset" in rec:
            ls = rec["levelset"]
            levelset = LevelSetSpline(
                float.fromhex(ls[0]), dim, np.array([float.fromhex(v) for v in ls[2:]]), int(ls[1])
            )
        bps = tuple(float.fromhex(v) for v in rec.get("breakpoints", []))
        labeling = RegionLabeling(labels, h, levelset=levelset, breakpoints=bps)
        coef = np.array([coefs[r] for r in sorted(coefs)])
        return cls(base, labeling, coef, float.fromhex(rec["residual"][0]), sigspec)

    @classmethod
    def load(cls, path: str | Path) -> "PiecewiseApproximant":
        return cls.loads(Path(path).read_text())


def first_stage(
    g: GridFunction,
    labeling: RegionLabeling,
    base: TensorBasis,
    sigspec: SignatureSpec,
    tol: float = DEFAULT_TOL,
    refine_iters: int = 3,
    max_block_bytes: int = _DEFAULT_BLOCK_BYTES,
) -> PiecewiseApproximant:
    """Fit the per-region expansion minimising the signature mismatch."""
    if labeling.n_regions < 1:
        raise ConfigurationError("labeling has no regions")
    cols = build_columns(base, labeling, sigspec, g.spec)
    data = apply_signature(g, sigspec).vector()
    system = assemble(cols, data, max_block_bytes)
    a = solve(system, tol=tol, refine_iters=refine_iters)
    res = float(np.sum((data - cols.matvec(a)) ** 2))
    return PiecewiseApproximant(
        base, labeling, a, res, sigspec, rank=system.rank, tol=tol,
        meta={"columns": cols.n_cols, "rows": cols.n_rows},
    )
