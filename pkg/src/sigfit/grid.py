"""Uniform grids, zero padding and the built-in piecewise-smooth test functions.

A grid on ``[0, 1]^dim`` has ``N`` samples per axis at ``i * h``,
``0 <= i <= N - 1``, with ``h = 1 / (N - 1)``.  Samples are stored in one
dense array that also holds ``pad`` layers of zeros on every side, so that
difference stencils reduce to slicing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "GridSpec",
    "GridFunction",
    "TestFunction",
    "sample",
    "pad_widths_for",
    "make_expression",
    "two_curve_function",
    "get_test_function",
    "TEST_FUNCTIONS",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the unit cube with zero padding.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1, 2 or 3.
    N : int
        Samples per axis.  The spacing is ``h = 1 / (N - 1)``.
    pad : int
        Layers of zeros appended on every side.
    """

    dim: int
    N: int
    pad: int = 1

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.N < 2:
            raise ConfigurationError(f"N must be at least 2, got {self.N}")
        if self.pad < 1:
            raise ConfigurationError(f"pad must be at least 1, got {self.pad}")

    @classmethod
    def from_spacing(cls, dim: int, h: float, pad: int = 1) -> "GridSpec":
        n = 1.0 / h + 1.0
        if abs(n - round(n)) > 1e-9 * n:
            raise ConfigurationError(f"1/h must be an integer, got h={h!r}")
        return cls(dim, int(round(n)), pad)

    @property
    def h(self) -> float:
        return 1.0 / (self.N - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N + 2 * self.pad,) * self.dim

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def interior(self) -> tuple[slice, ...]:
        s = slice(self.pad, self.pad + self.N)
        return (s,) * self.dim

    @property
    def size(self) -> int:
        return self.N**self.dim

    def axis(self) -> np.ndarray:
        """Interior node coordinates along one axis."""
        return np.arange(self.N) * self.h

    def padded_axis(self) -> np.ndarray:
        return np.arange(-self.pad, self.N + self.pad) * self.h

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of the interior nodes, ``ij`` indexing."""
        ax = self.axis()
        return tuple(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    def points(self) -> np.ndarray:
        """Interior nodes as a ``(N**dim, dim)`` array in row-major order."""
        return np.stack([c.ravel() for c in self.mesh()], axis=1)

    def with_pad(self, pad: int) -> "GridSpec":
        return GridSpec(self.dim, self.N, pad)


@dataclass(frozen=True)
class GridFunction:
    """Samples of a scalar field on a padded uniform grid.

    ``values`` has extent ``N + 2 * pad`` per axis; every entry outside the
    interior block is exactly zero.  The array is made read-only.
    """

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != self.spec.shape:
            raise ConfigurationError(
                f"values shape {values.shape} does not match grid {self.spec.shape}"
            )
        outside = np.ones(values.shape, dtype=bool)
        outside[self.spec.interior] = False
        if np.any(values[outside] != 0.0):
            raise ConfigurationError("padding entries must be exactly zero")
        values[outside] = 0.0  # clears any -0.0
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_interior(cls, spec: GridSpec, interior: np.ndarray) -> "GridFunction":
        interior = np.asarray(interior, dtype=float)
        if interior.shape != spec.interior_shape:
            raise ConfigurationError(
                f"interior shape {interior.shape} does not match {spec.interior_shape}"
            )
        values = np.zeros(spec.shape)
        values[spec.interior] = interior
        return cls(spec, values)

    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridFunction":
        return cls(spec, np.zeros(spec.shape))

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.spec.interior]

    @property
    def dim(self) -> int:
        return self.spec.dim

    def repad(self, pad: int) -> "GridFunction":
        """Same samples with a different padding width."""
        return GridFunction.from_interior(self.spec.with_pad(pad), self.interior)

    def to_csv(self, path: str | Path) -> None:
        write_grid_csv(path, self.spec, self.interior)

    @classmethod
    def from_csv(cls, path: str | Path, pad: int | None = None) -> "GridFunction":
        spec, interior = read_grid_csv(path)
        if pad is not None:
            spec = spec.with_pad(pad)
        return cls.from_interior(spec, interior)


def write_grid_csv(path: str | Path, spec: GridSpec, interior: np.ndarray) -> None:
    """Header ``dim,N,h,pad``, its values, then one interior value per line."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dim", "N", "h", "pad"])
        w.writerow([spec.dim, spec.N, repr(spec.h), spec.pad])
        for v in np.asarray(interior, dtype=float).ravel():
            fh.write(repr(float(v)) + "\n")


def read_grid_csv(path: str | Path) -> tuple[GridSpec, np.ndarray]:
    with open(path, newline="") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if not rows:
        raise ConfigurationError(f"{path}: empty grid file")
    head = rows[0].split(",")
    if head[0].strip() == "dim":
        meta, data = rows[1].split(","), rows[2:]
    else:
        meta, data = head, rows[1:]
    dim, N, h, pad = int(meta[0]), int(meta[1]), float(meta[2]), int(meta[3])
    spec = GridSpec(dim, N, pad)
    if not math.isclose(h, spec.h, rel_tol=1e-12):
        raise ConfigurationError(f"{path}: h={h} inconsistent with N={N}")
    values = np.array([float(v) for v in data])
    if values.size != spec.size:
        raise ConfigurationError(
            f"{path}: expected {spec.size} values, found {values.size}"
        )
    return spec, values.reshape(spec.interior_shape)


def pad_widths_for(
    k_signature: int, basis_order: int | None = None, display_pad: int = 0
) -> int:
    """Padding width needed by a signature stencil of reach ``k_signature``.

    The basis order does not influence the width; it is accepted so call
    sites can pass their whole configuration.
    """
    if k_signature < 1:
        raise ConfigurationError(f"signature order must be >= 1, got {k_signature}")
    return max(int(k_signature), int(display_pad))


# ---------------------------------------------------------------------------
# Test functions


@dataclass(frozen=True)
class TestFunction:
    """Closed-form piecewise-smooth function with its exact region map.

    ``branches[r - 1]`` is the smooth function used on region ``r``;
    ``region(*coords)`` returns the integer region id of each point.
    """

    __test__ = False  # not a pytest class

    name: str
    dim: int
    branches: tuple[Callable[..., np.ndarray], ...]
    region: Callable[..., np.ndarray]
    description: str = ""
    params: dict = field(default_factory=dict)

    @property
    def n_regions(self) -> int:
        return len(self.branches)

    def __call__(self, *coords: np.ndarray) -> np.ndarray:
        coords = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
        if len(coords) != self.dim:
            raise ConfigurationError(
                f"{self.name} takes {self.dim} coordinates, got {len(coords)}"
            )
        reg = np.asarray(self.region(*coords))
        out = np.zeros(coords[0].shape)
        for r, branch in enumerate(self.branches, start=1):
            m = reg == r
            if np.any(m):
                out[m] = branch(*(c[m] for c in coords))
        return out

    def evaluate_points(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return self(*points.T)

    def region_points(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.asarray(self.region(*points.T))


def sample(tf: TestFunction, spec: GridSpec) -> GridFunction:
    """Sample ``tf`` at the interior nodes of ``spec``; padding stays zero."""
    if tf.dim != spec.dim:
        raise ConfigurationError(
            f"test function {tf.name!r} is {tf.dim}-D but the grid is {spec.dim}-D"
        )
    return GridFunction.from_interior(spec, tf(*spec.mesh()))


_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in (
        "sin cos tan exp log sqrt abs arctan arctan2 sinh cosh tanh "
        "minimum maximum where pi e"
    ).split()
}


def make_expression(expr: str, variables: Sequence[str] = ("x", "y", "z")):
    """Compile a numpy expression string such as ``"sin(4*(x+y))"``.

    Only numpy elementwise functions are visible to the expression.
    """
    code = compile(expr, "<expression>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMESPACE and name not in variables:
            raise ConfigurationError(f"unknown name {name!r} in expression {expr!r}")

    def fn(*coords):
        env = dict(_EXPR_NAMESPACE)
        env.update(zip(variables, coords))
        val = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(val, dtype=float), np.shape(coords[0])).copy()

    fn.__doc__ = expr
    return fn


def _example1d() -> TestFunction:
    def right(x):
        return 1.0 / (1.0 + (x - 1.0) ** 2)

    def left(x):
        return right(x) + (x + 1.5) * np.cos(4.0 * x)

    return TestFunction(
        "example1d",
        1,
        (left, right),
        lambda x: np.where(np.asarray(x) >= 0.5, 2, 1),
        "jump at s=0.5",
        {"breakpoints": (0.5,)},
    )


def _example2d() -> TestFunction:
    def outside(x, y):
        return (x + y + 2.0) * np.cos(4.0 * x) + np.sin(4.0 * (x + y))

    def inside(x, y):
        return np.sin(4.0 * (x + y))

    def region(x, y):
        return np.where((x + 1.0) ** 4 + (y + 1.0) ** 4 >= 10.0, 1, 2)

    return TestFunction(
        "example2d",
        2,
        (outside, inside),
        region,
        "jump across (x+1)^4+(y+1)^4=10",
        {"level": lambda x, y: (x + 1.0) ** 4 + (y + 1.0) ** 4 - 10.0},
    )


DEFAULT_TWO_CURVE_BRANCHES = (
    "sin(2*x + y)",
    "sin(2*x + y) + 1 + 0.5*x*y",
    "0.5*cos(x - 2*y) - 2",
)
DEFAULT_TWO_CURVES = (
    "x**2 + y**2 - 0.45**2",
    "(x - 1)**2 + (y - 1)**2 - 0.5**2",
)


def two_curve_function(
    branches: Sequence[str | Callable] = DEFAULT_TWO_CURVE_BRANCHES,
    curves: Sequence[str | Callable] = DEFAULT_TWO_CURVES,
    name: str = "twocurves2d",
) -> TestFunction:
    """Three-region 2-D function separated by two disjoint level curves.

    Region 2 is ``{curves[0] < 0}``, region 3 is ``{curves[1] < 0}`` and
    region 1 is the rest, which borders both.  Branches and curves may be
    callables of ``(x, y)`` or numpy expression strings.
    """
    if len(branches) != 3 or len(curves) != 2:
        raise ConfigurationError("need exactly three branches and two curves")
    fb = tuple(make_expression(b, ("x", "y")) if isinstance(b, str) else b for b in branches)
    g1, g2 = (make_expression(c, ("x", "y")) if isinstance(c, str) else c for c in curves)

    def region(x, y):
        r = np.ones(np.shape(x), dtype=int)
        r[np.asarray(g1(x, y)) < 0] = 2
        r[np.asarray(g2(x, y)) < 0] = 3
        return r

    return TestFunction(name, 2, fb, region, "two disjoint curves", {"curves": (g1, g2)})


def _example3d() -> TestFunction:
    def outside(x, y, z):
        return (np.exp((x + y) / 2.0) - 1.0) * np.sin(2.0 * x)

    def inside(x, y, z):
        return np.sin(4.0 * (x**2 + y**2 + z**2)) * np.sin(2.0 * (x - y))

    def level(x, y, z):
        return (x - 0.5) ** 4 + (y - 0.5) ** 4 + (z - 0.5) ** 4 - 0.33**4

    return TestFunction(
        "example3d",
        3,
        (outside, inside),
        lambda x, y, z: np.where(level(x, y, z) <= 0.0, 2, 1),
        "jump across the 4-norm sphere of radius 0.33",
        {"level": level},
    )


def _poly1d() -> TestFunction:
    # degree 5: inside the order-6 spline space
    return TestFunction(
        "poly1d",
        1,
        (lambda x: 1.0 + x - 2.0 * x**3 + 0.5 * x**5,),
        lambda x: np.ones(np.shape(x), dtype=int),
        "smooth quintic",
    )


def _smooth1d() -> TestFunction:
    return TestFunction(
        "smooth1d",
        1,
        (lambda x: np.exp(x) * np.sin(3.0 * x) + 1.0 / (1.0 + (x - 1.0) ** 2),),
        lambda x: np.ones(np.shape(x), dtype=int),
        "smooth analytic function",
    )


def _zero(dim: int) -> TestFunction:
    return TestFunction(
        f"zero{dim}d",
        dim,
        (lambda *c: np.zeros(np.shape(c[0])),),
        lambda *c: np.ones(np.shape(c[0]), dtype=int),
        "identically zero",
    )


TEST_FUNCTIONS: dict[str, Callable[[], TestFunction]] = {
    "example1d": _example1d,
    "example2d": _example2d,
    "twocurves2d": two_curve_function,
    "example3d": _example3d,
    "poly1d": _poly1d,
    "smooth1d": _smooth1d,
    "zero1d": lambda: _zero(1),
    "zero2d": lambda: _zero(2),
}


def get_test_function(name: str) -> TestFunction:
    try:
        return TEST_FUNCTIONS[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown test function {name!r}; choose from {sorted(TEST_FUNCTIONS)}"
        ) from None
