"""Second stage: smooth correction of the first-stage residual and error reports.

The residual ``e = f - S*`` on the grid nodes is smooth across the
singular set, so any good smooth approximation ``e~`` of it gives the
corrected approximant ``f~ = S* + e~``.  Two operators are provided:
tensor-product spline interpolation of odd degree (not-a-knot ends) and a
tensor quasi-interpolant ``sum_i e_i phi(x/h - i)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import BSpline, NdBSpline, make_interp_spline
from scipy.spatial import cKDTree

from .basis import bspline_eval
from .detect import RegionLabeling, classify
from .errors import ConfigurationError, SizeError
from .fit import PiecewiseApproximant
from .grid import GridFunction, GridSpec, TestFunction

__all__ = [
    "CorrectionOperator",
    "TensorSplineInterpolant",
    "QuasiInterpolant",
    "residual",
    "interpolate",
    "CorrectedApproximant",
    "corrected",
    "classify_grid",
    "exact_region_map",
    "ErrorField",
    "error_report",
]

ZONES = ("boundary", "singular", "elsewhere")


@dataclass(frozen=True)
class CorrectionOperator:
    """How the residual is turned into a smooth function.

    ``kind="spline"``: tensor spline interpolation of ``degree``.
    ``kind="quasi"``: quasi-interpolation with ``kernel`` ``"cubic"``
    (reproduces cubics) or ``"linear"`` (reproduces linears).
    """

    kind: str = "spline"
    degree: int = 3
    kernel: str = "cubic"

    def __post_init__(self) -> None:
        if self.kind not in ("spline", "quasi"):
            raise ConfigurationError(f"unknown correction kind {self.kind!r}")
        if self.kind == "spline" and (self.degree < 1 or self.degree % 2 == 0):
            raise ConfigurationError(f"spline degree must be odd and positive, got {self.degree}")
        if self.kind == "quasi" and self.kernel not in _KERNELS:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")

    @property
    def reproduces(self) -> int:
        """Polynomial degree reproduced exactly."""
        if self.kind == "spline":
            return self.degree
        return _KERNELS[self.kernel][1]


def _contract(coef: np.ndarray, mats) -> np.ndarray:
    out = coef
    for a, m in enumerate(mats):
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [a])), 0, a)
    return out


class TensorSplineInterpolant:
    """Tensor spline of odd degree interpolating data on a uniform grid."""

    def __init__(self, data: np.ndarray, degree: int = 3):
        data = np.asarray(data, dtype=float)
        N = data.shape[0]
        if N <= degree:
            raise SizeError(f"need more than {degree} nodes per axis, got {N}")
        x = np.linspace(0.0, 1.0, N)
        # one interpolation per axis; the identity gives the data -> coefficient map
        spl = make_interp_spline(x, np.eye(N), k=degree)
        self.degree = degree
        self.knots = spl.t
        self.coef = _contract(data, [spl.c] * data.ndim)

    @property
    def dim(self) -> int:
        return self.coef.ndim

    def on_tensor_grid(self, axes) -> np.ndarray:
        if isinstance(axes, np.ndarray) and axes.ndim == 1:
            axes = [axes] * self.dim
        mats = [BSpline.design_matrix(np.asarray(a, float), self.knots, self.degree).toarray() for a in axes]
        return _contract(self.coef, mats)

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        spl = NdBSpline((self.knots,) * self.dim, self.coef, self.degree)
        return spl(points)


def _cubic_kernel(t):
    b = lambda s: bspline_eval(4, 1.0, s - 2.0)  # centred cubic B-spline
    return (8.0 * b(t) - b(t - 1.0) - b(t + 1.0)) / 6.0


def _hat_kernel(t):
    return np.maximum(0.0, 1.0 - np.abs(t))


# kernel, reproduced degree, half support
_KERNELS = {"cubic": (_cubic_kernel, 3, 3), "linear": (_hat_kernel, 1, 1)}


def _extend(data: np.ndarray, ghosts: int, degree: int) -> np.ndarray:
    """Append ``ghosts`` nodes per side by polynomial extrapolation."""
    out = data
    q = degree + 1
    for a in range(data.ndim):
        out = np.moveaxis(out, a, -1)
        n = out.shape[-1]
        src = np.arange(q)
        left_t = -np.arange(ghosts, 0, -1)
        right_t = n - 1 + np.arange(1, ghosts + 1)
        L = _lagrange(src, left_t)
        Rm = _lagrange(src, right_t - (n - q))
        left = out[..., :q] @ L.T
        right = out[..., n - q :] @ Rm.T
        out = np.moveaxis(np.concatenate([left, out, right], axis=-1), -1, a)
    return out


def _lagrange(nodes: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Matrix of Lagrange basis values ``L[p, j] = l_j(t_p)``."""
    nodes = nodes.astype(float)
    M = np.ones((len(t), len(nodes)))
    for j, xj in enumerate(nodes):
        for i, xi in enumerate(nodes):
            if i != j:
                M[:, j] *= (t - xi) / (xj - xi)
    return M


class QuasiInterpolant:
    """``e~(x) = sum_i e_i prod_a phi(x_a/h - i_a)`` with ghost nodes.

    Ghost values outside the grid come from polynomial extrapolation of
    the reproduced degree, so polynomial reproduction holds up to the
    boundary.
    """

    def __init__(self, data: np.ndarray, kernel: str = "cubic"):
        data = np.asarray(data, dtype=float)
        self.phi, self.ell, self.support = _KERNELS[kernel]
        self.N = data.shape[0]
        self.h = 1.0 / (self.N - 1)
        self.ghosts = self.support - 1
        if self.N <= self.ell:
            raise SizeError(f"need more than {self.ell} nodes per axis")
        self.ext = _extend(data, self.ghosts, self.ell)

    @property
    def dim(self) -> int:
        return self.ext.ndim

    def _matrix(self, x) -> np.ndarray:
        idx = np.arange(-self.ghosts, self.N + self.ghosts)
        return self.phi(np.asarray(x, float)[:, None] / self.h - idx[None, :])

    def on_tensor_grid(self, axes) -> np.ndarray:
        if isinstance(axes, np.ndarray) and axes.ndim == 1:
            axes = [axes] * self.dim
        return _contract(self.ext, [self._matrix(a) for a in axes])

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        mats = [self._matrix(points[:, a]) for a in range(self.dim)]
        flat = self.ext.reshape(-1)
        out = np.zeros(len(points))
        # row-wise tensor contraction, chunked to bound memory
        for s in range(0, len(points), 256):
            rows = [m[s : s + 256] for m in mats]
            w = rows[0]
            for m in rows[1:]:
                w = (w[:, :, None] * m[:, None, :]).reshape(len(w), -1)
            out[s : s + 256] = w @ flat
        return out


def residual(g: GridFunction, S: PiecewiseApproximant) -> GridFunction:
    """Residual ``e = f - S*`` on the interior nodes (padding zero)."""
    if S.labeling.labels.shape != g.spec.interior_shape:
        raise SizeError("approximant and data live on different grids")
    return GridFunction.from_interior(g.spec, g.interior - S.on_grid())


def interpolate(e: GridFunction, op: CorrectionOperator):
    """Smooth function built from the interior residual values."""
    if op.kind == "spline":
        return TensorSplineInterpolant(e.interior, op.degree)
    return QuasiInterpolant(e.interior, op.kernel)


def classify_grid(labeling: RegionLabeling, axes) -> np.ndarray:
    """Region ids on a tensor grid, evaluating the level set separably."""
    dim = labeling.dim
    if isinstance(axes, np.ndarray) and axes.ndim == 1:
        axes = [axes] * dim
    shape = tuple(len(a) for a in axes)
    if labeling.levelset is None or labeling.n_regions == 1:
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, dim)
        return classify(labeling, mesh).reshape(shape)
    D = labeling.levelset.grid(axes)
    out = np.where(D >= 0.0, 1, 2)
    if labeling.n_regions > 2 and np.any(out != 1):
        neg = np.argwhere(out != 1)
        pts = np.stack([np.asarray(axes[a])[neg[:, a]] for a in range(dim)], 1)
        out[tuple(neg.T)] = classify(labeling, pts)
    return out


def exact_region_map(tf: TestFunction, labeling: RegionLabeling) -> dict[int, int]:
    """Detected label of each exact region, by majority over grid nodes."""
    N = labeling.N
    spec = GridSpec(labeling.dim, N)
    exact = tf.region_points(spec.points())
    labs = labeling.labels.ravel()
    out = {}
    for q in np.unique(exact):
        vals, counts = np.unique(labs[exact == q], return_counts=True)
        out[int(q)] = int(vals[np.argmax(counts)])
    return out


@dataclass
class CorrectedApproximant:
    """``f~ = S* + e~``; ``correction=None`` gives the first stage alone.

    ``mode="exact"`` evaluates ``S*`` with the true region predicate of
    ``tf`` (mapped onto the detected labels); ``"detected"`` uses the
    labeling's own classifier.
    """

    first: PiecewiseApproximant
    correction: object | None = None
    mode: str = "detected"
    tf: TestFunction | None = None
    _map: dict = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.mode not in ("detected", "exact"):
            raise ConfigurationError(f"unknown evaluation mode {self.mode!r}")
        if self.mode == "exact":
            if self.tf is None:
                raise ConfigurationError("exact mode needs the test function")
            self._map = exact_region_map(self.tf, self.first.labeling)

    @property
    def dim(self) -> int:
        return self.first.dim

    def _mapped(self, exact: np.ndarray) -> np.ndarray:
        out = np.ones_like(exact)
        for q, r in self._map.items():
            out[exact == q] = r
        return out

    def regions(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.mode == "exact":
            return self._mapped(self.tf.region_points(points))
        return self.first.labeling.classify(points)

    def regions_grid(self, axes) -> np.ndarray:
        if self.mode == "exact":
            if isinstance(axes, np.ndarray) and axes.ndim == 1:
                axes = [axes] * self.dim
            mesh = np.meshgrid(*axes, indexing="ij")
            return self._mapped(np.asarray(self.tf.region(*mesh)))
        return classify_grid(self.first.labeling, axes)

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        out = self.first(points, self.regions(points))
        if self.correction is not None:
            out = out + self.correction(points)
        return out

    def on_tensor_grid(self, axes) -> np.ndarray:
        if isinstance(axes, np.ndarray) and axes.ndim == 1:
            axes = [axes] * self.dim
        out = self.first.on_tensor_grid(axes, self.regions_grid(axes))
        if self.correction is not None:
            out = out + self.correction.on_tensor_grid(axes)
        return out


def corrected(
    g: GridFunction,
    S: PiecewiseApproximant,
    op: CorrectionOperator | None = None,
    mode: str = "detected",
    tf: TestFunction | None = None,
) -> CorrectedApproximant:
    """Build ``S* + e~`` from the data and the first stage."""
    if op is None:
        op = CorrectionOperator("spline", 3)
    e = residual(g, S)
    return CorrectedApproximant(S, interpolate(e, op), mode, tf)


@dataclass
class ErrorField:
    """Pointwise error ``f - f~`` on a tensor evaluation grid, with zones.

    ``zone`` holds 0 (near boundary), 1 (near the singular set) or 2
    (elsewhere); boundary takes precedence.
    """

    axes: list
    error: np.ndarray
    zone: np.ndarray
    width: float

    @property
    def dim(self) -> int:
        return self.error.ndim

    def summary(self) -> dict:
        a = np.abs(self.error)
        k = np.unravel_index(int(np.argmax(a)), a.shape)
        out = {
            "max_abs": float(a[k]),
            "argmax": [float(self.axes[i][k[i]]) for i in range(self.dim)],
            "zone_width": float(self.width),
            "points": int(a.size),
        }
        for z, name in enumerate(ZONES):
            m = self.zone == z
            out[f"max_{name}"] = float(a[m].max()) if np.any(m) else 0.0
        return out

    def to_csv(self, path: str | Path) -> None:
        names = list("xyz"[: self.dim])
        mesh = np.meshgrid(*self.axes, indexing="ij")
        cols = [m.ravel() for m in mesh]
        err, zone = self.error.ravel(), self.zone.ravel()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names + ["error", "zone"])
            for i in range(err.size):
                w.writerow([repr(float(c[i])) for c in cols] + [repr(float(err[i])), ZONES[zone[i]]])

    def summary_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _zones(axes, singular: np.ndarray, width: float) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    dist_b = np.minimum.reduce([np.minimum(m, 1.0 - m) for m in mesh])
    zone = np.full(dist_b.shape, 2, dtype=np.int8)
    if len(singular):
        pts = np.stack([m.ravel() for m in mesh], 1)
        d, _ = cKDTree(singular).query(pts, distance_upper_bound=width * (1 + 1e-12))
        zone[(np.isfinite(d)).reshape(zone.shape)] = 1
    zone[dist_b <= width] = 0
    return zone


def error_report(
    tf: TestFunction,
    approx: CorrectedApproximant,
    fine_factor: int = 4,
    zone_width: float | None = None,
) -> ErrorField:
    """Error of ``approx`` against ``tf`` on a grid ``fine_factor`` times finer.

    Zones use the detected singular set (breakpoints or crossing cloud)
    and a width of ``basis order * h`` unless ``zone_width`` is given.
    """
    if fine_factor < 1:
        raise ConfigurationError("fine_factor must be >= 1")
    lab = approx.first.labeling
    N = lab.N
    h = 1.0 / (N - 1)
    M = (N - 1) * int(fine_factor) + 1
    ax = np.linspace(0.0, 1.0, M)
    axes = [ax] * approx.dim
    exact = np.asarray(tf(*np.meshgrid(*axes, indexing="ij")), dtype=float)
    err = exact - approx.on_tensor_grid(axes)
    if zone_width is None:
        zone_width = approx.first.base.order * h
    zone = _zones(axes, lab.singular_points(), zone_width)
    return ErrorField(axes, err, zone, zone_width)
