"""Locating singular points, curves and surfaces of gridded data.

Pipeline for 2-D and 3-D data:

1. every axis-parallel grid line is scanned for intervals that contain a
   singularity; interval midpoints form the crossing cloud;
2. grid edges carrying a cloud point are cut and the grid graph is split
   into connected components (the regions ``P_1 .. P_R``);
3. a tensor cubic spline ``D`` is least-squares fitted to signed distances
   from a coarse net of grid points to the cloud, and zero at the cloud.
   ``D >= 0`` marks region 1.

In 1-D the detected interval midpoints are simply the breakpoints.
"""

from __future__ import annotations

import csv
import itertools
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .basis import BSplineBasis, TensorBasis
from .errors import ConfigurationError, DetectionError, DomainError, SolverError
from .grid import GridFunction, GridSpec

__all__ = [
    "critical_spacing",
    "detect_interval_1d",
    "detect_intervals_1d",
    "CrossingCloud",
    "collect_crossings",
    "label_regions",
    "refine_labels",
    "LevelSetSpline",
    "fit_levelset",
    "RegionLabeling",
    "classify",
    "detect_regions",
]

# absolute floor of the detection threshold, relative to the line's scale
_TAU_FLOOR = 1e-10


def critical_spacing(jump: float, sup_deriv: float) -> float:
    """Largest spacing at which a jump of size ``jump`` is detectable."""
    if sup_deriv <= 0:
        raise DomainError(f"sup |f'| must be positive, got {sup_deriv}")
    return abs(jump) / (4.0 * sup_deriv)


def _indicator(line: np.ndarray, order: int) -> np.ndarray:
    # |Delta^k| over windows; entry j covers nodes j .. j+k
    if order < 1:
        raise ConfigurationError(f"detection order must be >= 1, got {order}")
    if line.size <= order + 2:
        raise ConfigurationError(f"need more than {order + 2} samples for order {order}")
    return np.abs(np.diff(line, order))


def _default_tau(ind: np.ndarray, line: np.ndarray, order: int = 1) -> float:
    # For first differences and h < h_c the jump difference exceeds
    # 3 h sup|f'| >= 3 * median, so 3 keeps the detectability guarantee.
    rel = 3.0 if order == 1 else 10.0
    floor = _TAU_FLOOR * max(1.0, float(np.max(np.abs(line))))
    return max(rel * float(np.median(ind)), floor)


def _halfwidth(order: int) -> int:
    # indicator entries next to a peak that belong to the same singularity
    return max(1, order // 2)


def _peak_to_interval(line: np.ndarray, ind: np.ndarray, p: int, order: int) -> int:
    """Interval index (between nodes j and j+1) for indicator peak ``p``.

    A step between nodes ``i`` and ``i+1`` gives ``|Delta^k|`` proportional
    to ``C(k-1, i-j)`` on window ``j``: one central maximum for odd ``k``,
    two equal ones for even ``k`` (resolved by the larger neighbour).
    """
    if order % 2 == 1:
        return min(p + (order - 1) // 2, line.size - 2)
    half = order // 2
    left = ind[p - 1] if p - 1 >= 0 else None
    right = ind[p + 1] if p + 1 < len(ind) else None
    if left is not None and right is not None:
        return p + half if right > left else p + half - 1
    # at a line end only one neighbour exists; fall back to first differences
    d1 = np.abs(np.diff(line))
    hi = min(p + half, d1.size - 1)
    lo = max(p + half - 1, 0)
    return hi if d1[hi] > d1[lo] else lo


def detect_interval_1d(
    line, tau: float | None = None, order: int = 1, ratio: float = 2.0, h: float = 1.0
) -> tuple[int, float] | None:
    """Find the single interval of a line that contains a singularity.

    The indicator is ``|Delta^k f|`` with ``k = order``.  With ``order=1``
    the candidate is the interval with the largest first difference;
    higher orders also respond to jumps in derivatives and separate a
    jump from the smooth background better on coarse grids.  The candidate
    is accepted when its indicator exceeds ``tau`` (default three times
    the line median for ``order=1``, ten times otherwise) and ``ratio``
    times every indicator value not adjacent to it.

    Returns ``(j, (j + 0.5) * h)`` or ``None``.
    """
    line = np.asarray(line, dtype=float)
    if line.size < 4:
        raise ConfigurationError(f"need at least 4 samples, got {line.size}")
    ind = _indicator(line, order)
    if tau is None:
        tau = _default_tau(ind, line, order)
    p = int(np.argmax(ind))
    peak = ind[p]
    w = _halfwidth(order)
    rest = ind.copy()
    rest[max(p - w, 0) : p + w + 1] = 0.0
    if peak <= tau or peak <= ratio * rest.max(initial=0.0):
        return None
    j = _peak_to_interval(line, ind, p, order)
    return j, (j + 0.5) * h


def detect_intervals_1d(
    line,
    tau: float | None = None,
    order: int = 2,
    ratio: float = 2.0,
    max_hits: int = 4,
    h: float = 1.0,
) -> list[tuple[int, float]]:
    """All singular intervals of a line, for lines crossing several curves.

    Peaks are visited in decreasing order; a peak is kept when it exceeds
    ``tau`` and ``ratio`` times the indicator just outside its own
    footprint on either side.  The footprint is then suppressed, so two
    hits are never adjacent.
    """
    line = np.asarray(line, dtype=float)
    if line.size < 4:
        raise ConfigurationError(f"need at least 4 samples, got {line.size}")
    if max_hits == 1:
        hit = detect_interval_1d(line, tau, order, ratio, h)
        return [] if hit is None else [hit]
    ind = _indicator(line, order)
    if tau is None:
        tau = _default_tau(ind, line, order)
    w = _halfwidth(order)
    live = ind.copy()
    hits: list[int] = []
    n = len(ind)
    while len(hits) < max_hits:
        p = int(np.argmax(live))
        if live[p] <= tau:
            break
        probe = (p - w - 2, p - w - 1, p + w + 1, p + w + 2)
        bg = max((ind[q] for q in probe if 0 <= q < n), default=0.0)
        if ind[p] > ratio * bg:
            j = _peak_to_interval(line, ind, p, order)
            if all(abs(j - other) > 1 for other in hits):
                hits.append(j)
        live[max(p - w, 0) : p + w + 1] = 0.0
    return [(j, (j + 0.5) * h) for j in sorted(hits)]


@dataclass(frozen=True)
class CrossingCloud:
    """Midpoints of grid edges detected to straddle a singularity.

    ``node[p]`` is the lower grid node of the cut edge and ``axis[p]`` its
    direction, so ``points[p] = (node[p] + 0.5 * e_axis) * h``.
    """

    points: np.ndarray
    axis: np.ndarray
    node: np.ndarray
    h: float

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def empty(cls, dim: int, h: float) -> "CrossingCloud":
        return cls(np.zeros((0, dim)), np.zeros(0, dtype=int), np.zeros((0, dim), dtype=int), h)

    @classmethod
    def from_points(cls, points, h: float) -> "CrossingCloud":
        """Rebuild provenance from coordinates lying on edge midpoints."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        t = points / h
        frac = np.abs(t - np.round(t))
        axis = np.argmax(frac, axis=1)
        node = np.round(t).astype(int)
        rows = np.arange(len(points))
        node[rows, axis] = np.floor(t[rows, axis]).astype(int)
        return cls(points, axis, node, h)

    def to_csv(self, path: str | Path) -> None:
        names = "xyz"[: self.dim]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(names))
            for p in self.points:
                w.writerow([repr(float(v)) for v in p])


def collect_crossings(
    g: GridFunction,
    tau: float | None = None,
    order: int = 2,
    max_hits: int = 1,
    ratio: float = 2.0,
) -> CrossingCloud:
    """Scan every axis-parallel line of ``g`` and gather interval midpoints."""
    if g.dim not in (2, 3):
        raise ConfigurationError("collect_crossings needs 2-D or 3-D data")
    data, h, N, dim = g.interior, g.spec.h, g.spec.N, g.dim
    pts, axes, nodes = [], [], []
    for a in range(dim):
        lines = np.moveaxis(data, a, -1).reshape(-1, N)
        others = [b for b in range(dim) if b != a]
        for li, idx in enumerate(itertools.product(range(N), repeat=dim - 1)):
            for j, _ in detect_intervals_1d(lines[li], tau, order, ratio, max_hits):
                node = np.zeros(dim, dtype=int)
                node[others] = idx
                node[a] = j
                p = node * h
                p[a] += 0.5 * h
                pts.append(p)
                axes.append(a)
                nodes.append(node)
    if not pts:
        return CrossingCloud.empty(dim, h)
    return CrossingCloud(np.array(pts), np.array(axes), np.array(nodes), h)


# ---------------------------------------------------------------------------
# region labeling


def _edges(N: int, dim: int):
    """Grid edges as (lower node, upper node, axis) flat-index arrays."""
    ids = np.arange(N**dim).reshape((N,) * dim)
    us, vs, ax = [], [], []
    for a in range(dim):
        lo = [slice(None)] * dim
        hi = [slice(None)] * dim
        lo[a] = slice(0, N - 1)
        hi[a] = slice(1, N)
        u = ids[tuple(lo)].ravel()
        us.append(u)
        vs.append(ids[tuple(hi)].ravel())
        ax.append(np.full(u.size, a))
    return np.concatenate(us), np.concatenate(vs), np.concatenate(ax)


def _cut_mask(cloud: CrossingCloud, N: int, dim: int, u, ax) -> np.ndarray:
    if len(cloud) == 0:
        return np.zeros(u.size, dtype=bool)
    ok = np.all((cloud.node >= 0) & (cloud.node < N), axis=1)
    ok &= cloud.node[np.arange(len(cloud)), cloud.axis] < N - 1
    flat = np.ravel_multi_index(tuple(cloud.node[ok].T), (N,) * dim)
    keys = set(zip(flat.tolist(), cloud.axis[ok].tolist()))
    return np.fromiter(((a, b) in keys for a, b in zip(u.tolist(), ax.tolist())), bool, u.size)


def _graph(n: int, u, v) -> sp.csr_matrix:
    w = np.ones(u.size)
    return sp.csr_matrix((w, (u, v)), shape=(n, n))


def _partition(n, u, v, cut, band, min_size, coords):
    """Components of the uncut graph outside ``band``, grown back into it."""
    keep = ~cut & ~band[u] & ~band[v]
    ncomp, comp = csgraph.connected_components(_graph(n, u[keep], v[keep]), directed=False)
    sizes = np.bincount(comp, minlength=ncomp)
    big = (sizes >= min_size) & (np.bincount(comp, weights=(~band).astype(float), minlength=ncomp) > 0)
    seed_nodes = np.flatnonzero(big[comp] & ~band)
    if seed_nodes.size == 0:
        return np.zeros(n, dtype=int)
    label = np.full(n, -1)
    label[seed_nodes] = comp[seed_nodes]
    if np.any(label < 0):
        g = _graph(n, u[~cut], v[~cut])
        _, _, src = csgraph.dijkstra(
            g, directed=False, indices=seed_nodes, unweighted=True, min_only=True,
            return_predecessors=True,
        )
        reached = src >= 0
        label[reached] = comp[src[reached]]
        missing = np.flatnonzero(label < 0)
        if missing.size:
            have = np.flatnonzero(label >= 0)
            _, nn = cKDTree(coords[have]).query(coords[missing])
            label[missing] = label[have[nn]]
    _, label = np.unique(label, return_inverse=True)
    return label


def _order_labels(label, u, v, n):
    ncomp = label.max() + 1
    sizes = np.bincount(label, minlength=ncomp)
    cross = label[u] != label[v]
    adj = np.zeros((ncomp, ncomp), dtype=bool)
    adj[label[u][cross], label[v][cross]] = True
    adj |= adj.T
    first = np.full(ncomp, n)
    np.minimum.at(first, label, np.arange(n))
    order = sorted(range(ncomp), key=lambda c: (-adj[c].sum(), -sizes[c], first[c]))
    remap = np.empty(ncomp, dtype=int)
    remap[order] = np.arange(1, ncomp + 1)
    return remap[label]


def label_regions(
    grid: GridSpec | GridFunction,
    cloud: CrossingCloud,
    max_regions: int = 3,
    min_consistency: float = 0.9,
    band_radii=(2, 3, 4, 6, 8, 12, 16),
    min_region_fraction: float = 1e-3,
) -> np.ndarray:
    """Split the interior grid into regions separated by the cloud.

    Grid edges carrying a cloud point are removed and the connected
    components of what remains are the regions.  Where detection missed a
    stretch of the singular set the components leak into each other;
    this is recognised by cut edges whose two ends share a label.  The
    fallback then removes a band of nodes around the cloud (radius in
    units of ``h``, growing), splits what remains and grows the labels
    back into the band without crossing cut edges.

    Labels run ``1..R``: components touching the most other components
    first, then by size.
    """
    spec = grid.spec if isinstance(grid, GridFunction) else grid
    N, dim, h = spec.N, spec.dim, spec.h
    n = N**dim
    if len(cloud) == 0:
        return np.ones((N,) * dim, dtype=int)
    u, v, ax = _edges(N, dim)
    cut = _cut_mask(cloud, N, dim, u, ax)
    if not np.any(cut):
        return np.ones((N,) * dim, dtype=int)
    coords = spec.points()
    min_size = max(dim + 1, int(min_region_fraction * n))
    tree = cKDTree(cloud.points)
    best = None
    for r in (0,) + tuple(band_radii):
        if r == 0:
            band = np.zeros(n, dtype=bool)
        else:
            dist, _ = tree.query(coords, distance_upper_bound=r * h * (1 + 1e-9))
            band = np.isfinite(dist)
        label = _partition(n, u, v, cut, band, min_size, coords)
        R = label.max() + 1
        consistency = float(np.mean(label[u[cut]] != label[v[cut]]))
        if best is None or consistency > best[0]:
            best = (consistency, label)
        if R >= 2 and consistency >= min_consistency:
            break
    consistency, label = best
    if label.max() == 0:
        warnings.warn("cloud does not separate the grid; using a single region")
    label = _order_labels(label, u, v, n)
    R = int(label.max())
    if R > max_regions:
        raise DetectionError(f"found {R} regions, more than max_regions={max_regions}")
    return label.reshape((N,) * dim)


# one-sided cubic extrapolation to t = 0 from samples at t = 1, 2, 3, 4
_EXTRAP = np.array([4.0, -6.0, 4.0, -1.0])


def _extrapolation_errors(data: np.ndarray, labels: np.ndarray, R: int) -> np.ndarray:
    """Per region, the best one-sided extrapolation error at every node.

    ``err[r - 1]`` is the smallest ``|f(x) - p|`` over axis-parallel
    one-sided cubic predictions ``p`` whose four source nodes all carry
    label ``r``; ``inf`` where no such stencil exists.
    """
    q = len(_EXTRAP)
    dim = data.ndim
    fp = np.pad(data, q, constant_values=np.nan)
    lp = np.pad(labels, q, constant_values=0)
    core = tuple(slice(q, q + n) for n in data.shape)
    err = np.full((R,) + data.shape, np.inf)
    for a in range(dim):
        for sgn in (1, -1):
            pred = np.zeros(data.shape)
            src = None
            for t, c in enumerate(_EXTRAP, start=1):
                sl = list(core)
                sl[a] = slice(q + sgn * t, q + sgn * t + data.shape[a])
                pred += c * fp[tuple(sl)]
                lab_t = lp[tuple(sl)]
                src = lab_t if src is None else np.where(src == lab_t, src, 0)
            e = np.abs(data - pred)
            for r in range(1, R + 1):
                m = (src == r) & np.isfinite(e)
                err[r - 1][m] = np.minimum(err[r - 1][m], e[m])
    return err


def refine_labels(data, labels: np.ndarray, sweeps: int = 5, factor: float = 0.25) -> np.ndarray:
    """Move nodes near a label interface to the region that predicts them.

    A node within two grid steps of another label is relabelled when a
    one-sided cubic extrapolation from a neighbouring region predicts its
    value ``1/factor`` times better than every extrapolation from its own
    region.  This repairs nodes left on the wrong side where the jump is
    too small for line detection but still large against the smooth
    background.
    """
    from scipy import ndimage

    data = np.asarray(data, dtype=float)
    labels = np.array(labels, dtype=int)
    R = int(labels.max())
    if R < 2:
        return labels
    struct = ndimage.generate_binary_structure(labels.ndim, labels.ndim)
    for _ in range(sweeps):
        err = _extrapolation_errors(data, labels, R)
        own = np.take_along_axis(err, labels[None] - 1, axis=0)[0]
        smooth = float(np.median(own[np.isfinite(own)])) if np.any(np.isfinite(own)) else 0.0
        best = np.argmin(err, axis=0) + 1
        best_err = np.min(err, axis=0)
        near = np.zeros(labels.shape, dtype=bool)
        for r in range(1, R + 1):
            near |= (best == r) & ndimage.binary_dilation(labels == r, struct, iterations=2)
        take = near & (best != labels) & (best_err < factor * own)
        # without an own-side stencil, demand a prediction at background level
        take &= np.isfinite(own) | (best_err <= 10.0 * smooth)
        changed = int(take.sum())
        new = np.where(take, best, labels)
        labels = new
        if changed == 0:
            break
    return labels


# ---------------------------------------------------------------------------
# level-set spline


@dataclass(frozen=True)
class LevelSetSpline:
    """Tensor cubic spline whose zero set approximates the singular set."""

    d: float
    dim: int
    coef: np.ndarray
    order: int = 4

    @property
    def basis(self) -> TensorBasis:
        return TensorBasis(BSplineBasis(self.order, self.d), self.dim)

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return self.basis(points) @ self.coef

    def grid(self, axes) -> np.ndarray:
        return self.basis.contract_grid(self.coef, axes)

    def zero_set(self, resolution: int = 401) -> list[np.ndarray]:
        """Zero level set inside the unit cube.

        2-D: list of polylines ``(P, 2)``.  3-D: one ``(P, 3)`` array of
        marching-cubes vertices.
        """
        from skimage import measure

        ax = np.linspace(0.0, 1.0, resolution)
        vals = self.grid(ax)
        if vals.min() > 0 or vals.max() < 0:
            return []
        step = ax[1] - ax[0]
        if self.dim == 2:
            return [c * step for c in measure.find_contours(vals, 0.0)]
        if self.dim == 3:
            verts, *_ = measure.marching_cubes(vals, 0.0, spacing=(step,) * 3)
            return [verts]
        raise ConfigurationError("zero_set is defined for 2-D and 3-D splines")

    def zero_set_to_csv(self, path: str | Path, resolution: int = 401) -> None:
        names = "xyz"[: self.dim]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["curve", *names])
            for ci, poly in enumerate(self.zero_set(resolution)):
                for p in poly:
                    w.writerow([ci, *(repr(float(v)) for v in p)])


def fit_levelset(
    cloud: CrossingCloud,
    labels: np.ndarray,
    net_size: int = 9,
    d: float = 0.25,
    q0_weight: float = 1.0,
) -> LevelSetSpline:
    """Least-squares cubic spline through signed distances to the cloud.

    A net of ``net_size`` grid nodes per axis gets the Euclidean distance
    to the nearest cloud point, positive on region 1 and negative
    elsewhere; cloud points get the value 0 with weight ``q0_weight``.
    """
    labels = np.asarray(labels)
    dim = labels.ndim
    N = labels.shape[0]
    if d <= 1.0 / net_size:
        raise ConfigurationError(
            f"knot spacing d={d} must exceed 1/net_size={1.0 / net_size:.4g}"
        )
    if len(cloud) == 0:
        raise ConfigurationError("cannot fit a level set to an empty cloud")
    idx = np.round(np.linspace(0, N - 1, net_size)).astype(int)
    net_nodes = np.stack(np.meshgrid(*([idx] * dim), indexing="ij"), -1).reshape(-1, dim)
    net = net_nodes / (N - 1)
    dist = np.concatenate(
        [cdist(chunk, cloud.points).min(axis=1) for chunk in np.array_split(net, max(1, len(net) // 512))]
    )
    sign = np.where(labels[tuple(net_nodes.T)] == 1, 1.0, -1.0)
    basis = TensorBasis(BSplineBasis(4, d), dim)
    rows = np.vstack([basis(net), np.sqrt(q0_weight) * basis(cloud.points)])
    rhs = np.concatenate([sign * dist, np.zeros(len(cloud))])
    try:
        coef, _, rank, sv = np.linalg.lstsq(rows, rhs, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"level-set least squares failed: {exc}") from exc
    if rank < basis.size:
        raise SolverError(
            f"level-set system is rank deficient ({rank} < {basis.size}); "
            f"smallest singular value {sv.min():.3g}"
        )
    return LevelSetSpline(d, dim, coef)


# ---------------------------------------------------------------------------


@dataclass
class RegionLabeling:
    """Partition of the interior grid nodes into regions ``1..R``.

    ``labels`` covers the interior grid; ``padded_labels`` adds the
    sentinel ``0`` on padding.  Off-grid points are classified with the
    level-set spline (2-D/3-D) or the breakpoints (1-D).
    """

    labels: np.ndarray
    h: float
    levelset: LevelSetSpline | None = None
    breakpoints: tuple[float, ...] = ()
    cloud: CrossingCloud | None = None
    _tree: object = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.labels.ndim

    @property
    def n_regions(self) -> int:
        return int(self.labels.max())

    @property
    def N(self) -> int:
        return self.labels.shape[0]

    @classmethod
    def single(cls, spec: GridSpec) -> "RegionLabeling":
        return cls(np.ones(spec.interior_shape, dtype=int), spec.h)

    @classmethod
    def from_breakpoints(cls, spec: GridSpec, breakpoints) -> "RegionLabeling":
        bps = tuple(sorted(float(b) for b in breakpoints))
        labels = 1 + np.searchsorted(np.asarray(bps), spec.axis(), side="right")
        return cls(labels.astype(int), spec.h, breakpoints=bps)

    def mask(self, region: int) -> np.ndarray:
        return self.labels == region

    def padded_labels(self, pad: int) -> np.ndarray:
        return np.pad(self.labels, pad, constant_values=0)

    def singular_points(self) -> np.ndarray:
        """Detected singular set as points (breakpoints or cloud)."""
        if self.dim == 1:
            return np.asarray(self.breakpoints, dtype=float).reshape(-1, 1)
        if self.cloud is None:
            return np.zeros((0, self.dim))
        return self.cloud.points

    def classify(self, points) -> np.ndarray:
        return classify(self, points)


def classify(labeling: RegionLabeling, points) -> np.ndarray:
    """Region id of arbitrary points in the unit cube.

    1-D: count of breakpoints ``<= x`` plus one.  Two regions: ``D >= 0``
    gives region 1.  More regions: ``D >= 0`` gives region 1, otherwise the
    label of the nearest grid node outside region 1.
    """
    dim = labeling.dim
    points = np.asarray(points, dtype=float).reshape(-1, dim)
    R = labeling.n_regions
    if dim == 1 and labeling.levelset is None:
        bps = np.asarray(labeling.breakpoints)
        return 1 + np.searchsorted(bps, points[:, 0], side="right")
    if R == 1 or labeling.levelset is None:
        return np.ones(len(points), dtype=int)
    out = np.where(labeling.levelset(points) >= 0.0, 1, 2)
    if R > 2:
        neg = out != 1
        if np.any(neg):
            if labeling._tree is None:
                nodes = np.argwhere(labeling.labels != 1)
                labeling._tree = (cKDTree(nodes * labeling.h), labeling.labels[tuple(nodes.T)])
            tree, labs = labeling._tree
            _, nn = tree.query(points[neg])
            out[neg] = labs[nn]
    return out


def detect_regions(
    g: GridFunction,
    *,
    order: int = 2,
    tau: float | None = None,
    max_hits: int = 1,
    ratio: float = 2.0,
    net_size: int = 9,
    d_levelset: float = 0.25,
    q0_weight: float = 1.0,
    max_regions: int = 3,
    refine: bool = True,
) -> RegionLabeling:
    """Full detection: cloud, flood-fill labels and level-set spline."""
    spec = g.spec
    if g.dim == 1:
        hits = detect_intervals_1d(g.interior, tau, order, ratio, max_hits, h=spec.h)
        if len(hits) + 1 > max_regions:
            raise DetectionError(f"{len(hits) + 1} regions exceed max_regions={max_regions}")
        return RegionLabeling.from_breakpoints(spec, [m for _, m in hits])
    cloud = collect_crossings(g, tau, order, max_hits, ratio)
    labels = label_regions(spec, cloud, max_regions=max_regions)
    if refine:
        labels = refine_labels(g.interior, labels)
    labeling = RegionLabeling(labels, spec.h, cloud=cloud)
    if labeling.n_regions > 1:
        labeling.levelset = fit_levelset(cloud, labels, net_size, d_levelset, q0_weight)
    return labeling
