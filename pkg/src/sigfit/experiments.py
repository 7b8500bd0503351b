"""Experiment configuration, presets and the end-to-end driver.

Configurations are flat ``key = value`` text; every key has a default,
so a file only needs the keys it changes.  :func:`run_experiment` writes
all artifacts of one run into a directory together with a manifest.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .basis import BSplineBasis, ChebyshevBasis, TensorBasis
from .correct import CorrectedApproximant, CorrectionOperator, corrected, error_report
from .detect import RegionLabeling, detect_regions
from .errors import ConfigurationError
from .fit import first_stage
from .grid import GridFunction, GridSpec, get_test_function, pad_widths_for, sample
from .signature import SignatureSpec, forward_diff

__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "preset",
    "build_inputs",
    "run_pipeline",
    "run_experiment",
    "convergence_sweep",
    "fitted_orders",
    "fitted_slope",
    "format_table",
]


@dataclass
class ExperimentConfig:
    """All parameters of one run.  ``"auto"`` values are derived."""

    name: str = "custom"
    function: str = "example1d"
    input: str = ""
    N: int = 101
    pad: str = "auto"
    signature: str = "forward_diff"
    signature_order: int = 5
    basis: str = "bspline"
    basis_order: int = 6
    knot_spacing: float = 0.1
    cheb_degree: int = 8
    detect_order: int = 2
    tau: str = "auto"
    max_hits: int = 1
    net_size: int = 9
    levelset_spacing: float = 0.25
    q0_weight: float = 1.0
    max_regions: int = 3
    refine_labels: bool = True
    correction: str = "spline"
    correction_degree: int = 3
    quasi_kernel: str = "cubic"
    tol: float = 1e-20
    refine_iters: int = 3
    fine_factor: int = 4
    eval_mode: str = "exact"
    zone_width: str = "auto"
    write_fields: bool = True

    # -- text form ----------------------------------------------------------

    @classmethod
    def parse(cls, text: str, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        cfg = dataclasses.replace(base) if base is not None else cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"line {lineno}: expected key = value, got {raw!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            cfg.set(key, value)
        cfg.validate()
        return cfg

    def set(self, key: str, value: str) -> None:
        types = {f.name: f.type for f in fields(self)}
        if key not in types:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        kind = types[key]
        try:
            if kind == "bool":
                low = value.lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                val = low in ("true", "1", "yes")
            elif kind == "int":
                val = int(value)
            elif kind == "float":
                val = float(value)
            else:
                val = value
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {value!r}") from exc
        setattr(self, key, val)

    def emit(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    # -- derived values -----------------------------------------------------

    def validate(self) -> None:
        if self.N < 5:
            raise ConfigurationError(f"N must be at least 5, got {self.N}")
        if self.signature not in ("forward_diff", "biharmonic", "per_axis_diff"):
            raise ConfigurationError(f"unknown signature {self.signature!r}")
        if self.basis not in ("bspline", "chebyshev"):
            raise ConfigurationError(f"unknown basis {self.basis!r}")
        if self.eval_mode not in ("exact", "detected"):
            raise ConfigurationError(f"unknown eval_mode {self.eval_mode!r}")
        if self.fine_factor < 1:
            raise ConfigurationError("fine_factor must be >= 1")
        for key in ("pad", "tau", "zone_width"):
            v = getattr(self, key)
            if v != "auto":
                try:
                    float(v)
                except ValueError as exc:
                    raise ConfigurationError(f"{key} must be 'auto' or a number, got {v!r}") from exc
        self.sigspec()
        self.correction_op()

    def sigspec(self) -> SignatureSpec:
        return SignatureSpec(self.signature, self.signature_order)

    def pad_width(self) -> int:
        if self.pad != "auto":
            return int(self.pad)
        return pad_widths_for(self.sigspec().reach)

    def tensor_basis(self, dim: int) -> TensorBasis:
        if self.basis == "bspline":
            return TensorBasis(BSplineBasis(self.basis_order, self.knot_spacing), dim)
        return TensorBasis(ChebyshevBasis(self.cheb_degree), dim)

    def correction_op(self) -> CorrectionOperator:
        return CorrectionOperator(self.correction, self.correction_degree, self.quasi_kernel)

    def tau_value(self) -> float | None:
        return None if self.tau == "auto" else float(self.tau)

    def zone_width_value(self, h: float) -> float:
        if self.zone_width != "auto":
            return float(self.zone_width)
        # B-splines: basis support; Chebyshev: stencil of the signature
        if self.basis == "bspline":
            return self.basis_order * h
        return self.sigspec().order * h


PRESETS: dict[str, dict] = {
    "paper-1d": dict(
        name="paper-1d", function="example1d", N=101, signature="forward_diff",
        signature_order=5, basis="bspline", basis_order=6, knot_spacing=0.1,
        detect_order=1, correction_degree=3, fine_factor=10,
    ),
    "paper-2d": dict(
        name="paper-2d", function="example2d", N=101, signature="biharmonic",
        basis="bspline", basis_order=6, knot_spacing=0.1, detect_order=2,
        net_size=9, levelset_spacing=0.25, q0_weight=1.0, correction_degree=5,
        fine_factor=4,
    ),
    "paper-2curves": dict(
        name="paper-2curves", function="twocurves2d", N=101, signature="biharmonic",
        basis="bspline", basis_order=6, knot_spacing=0.1, detect_order=2,
        max_hits=4, net_size=11, levelset_spacing=0.2, q0_weight=100.0,
        correction_degree=5, fine_factor=4,
    ),
    "paper-3d": dict(
        name="paper-3d", function="example3d", N=41, signature="per_axis_diff",
        signature_order=4, basis="chebyshev", cheb_degree=8, detect_order=2,
        max_hits=4, net_size=11, levelset_spacing=0.2, correction_degree=3,
        fine_factor=2,
    ),
    "smoke": dict(
        name="smoke", function="poly1d", N=21, signature="forward_diff",
        signature_order=5, basis="bspline", basis_order=6, knot_spacing=0.1,
        detect_order=1, correction_degree=3, fine_factor=10,
    ),
}

REDUCED_3D = dict(N=33, cheb_degree=6)


def preset(name: str, reduced: bool = False) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    values = dict(PRESETS[name])
    if reduced:
        if name != "paper-3d":
            raise ConfigurationError("--reduced applies to paper-3d only")
        values.update(REDUCED_3D, name="paper-3d-reduced")
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def build_inputs(cfg: ExperimentConfig):
    """Test function (or ``None``) and the padded grid data."""
    pad = cfg.pad_width()
    if cfg.input:
        g = GridFunction.from_csv(cfg.input, pad=pad)
        return None, g
    tf = get_test_function(cfg.function)
    dim = tf.dim
    cfg.sigspec().check_dim(dim)
    return tf, sample(tf, GridSpec(dim, cfg.N, pad))


def run_pipeline(cfg: ExperimentConfig, tf=None, g: GridFunction | None = None) -> dict:
    """Detection, first stage and correction; returns the pieces."""
    if g is None:
        tf, g = build_inputs(cfg)
    t0 = time.perf_counter()
    labeling = detect_regions(
        g, order=cfg.detect_order, tau=cfg.tau_value(), max_hits=cfg.max_hits,
        net_size=cfg.net_size, d_levelset=cfg.levelset_spacing,
        q0_weight=cfg.q0_weight, max_regions=cfg.max_regions, refine=cfg.refine_labels,
    )
    t1 = time.perf_counter()
    S = first_stage(g, labeling, cfg.tensor_basis(g.dim), cfg.sigspec(), cfg.tol, cfg.refine_iters)
    t2 = time.perf_counter()
    mode = cfg.eval_mode if tf is not None else "detected"
    fc = corrected(g, S, cfg.correction_op(), mode, tf)
    t3 = time.perf_counter()
    return dict(
        tf=tf, g=g, labeling=labeling, first=S, corrected=fc,
        first_only=CorrectedApproximant(S, None, mode, tf),
        timings=dict(detect=t1 - t0, fit=t2 - t1, correct=t3 - t2),
    )


def _write_breakpoints(path: Path, labeling: RegionLabeling) -> None:
    with open(path, "w") as fh:
        fh.write("x\n")
        for b in labeling.breakpoints:
            fh.write(f"{b!r}\n")


def run_experiment(cfg: ExperimentConfig, out: str | Path) -> dict:
    """Run the full pipeline and write every artifact into ``out``.

    Returns the manifest dictionary.  Runtime is reported separately in
    ``timing.json`` so that all other files are reproducible byte for byte.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": cfg.as_dict(), "status": "running"}
    (out / "config.txt").write_text(cfg.emit())
    t0 = time.perf_counter()
    try:
        res = run_pipeline(cfg)
    except Exception as exc:
        manifest.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        raise
    lab, S, g, tf = res["labeling"], res["first"], res["g"], res["tf"]
    artifacts = ["config.txt"]
    if g.dim == 1:
        _write_breakpoints(out / "cloud.csv", lab)
        artifacts.append("cloud.csv")
    elif lab.cloud is not None:
        lab.cloud.to_csv(out / "cloud.csv")
        artifacts.append("cloud.csv")
        if lab.levelset is not None:
            lab.levelset.zero_set_to_csv(out / "zero_set.csv", resolution=201 if g.dim == 3 else 401)
            artifacts.append("zero_set.csv")
    S.save(out / "approximant.txt")
    artifacts.append("approximant.txt")
    grid_err = float(np.max(np.abs(S.on_grid() - g.interior)))
    summaries = {}
    if tf is not None:
        width = cfg.zone_width_value(g.spec.h)
        for key, approx in (("first_stage", res["first_only"]), ("corrected", res["corrected"])):
            field = error_report(tf, approx, cfg.fine_factor, zone_width=width)
            summaries[key] = field.summary()
            field.summary_json(out / f"{key}_summary.json")
            artifacts.append(f"{key}_summary.json")
            if cfg.write_fields:
                field.to_csv(out / f"{key}_error.csv")
                artifacts.append(f"{key}_error.csv")
    manifest.update(
        status="ok",
        dim=g.dim,
        h=g.spec.h,
        pad=g.spec.pad,
        regions=lab.n_regions,
        cloud_points=0 if lab.cloud is None else len(lab.cloud),
        breakpoints=list(lab.breakpoints),
        columns=S.meta.get("columns"),
        rank=S.rank,
        signature_residual=S.residual,
        first_stage_grid_max=grid_err,
        summaries=summaries,
        artifacts=artifacts + ["manifest.json"],
    )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    timing = dict(res["timings"], total=time.perf_counter() - t0)
    (out / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    return manifest


def fitted_orders(hs, values) -> list[float]:
    """``log2`` ratios of successive values for halving ``h``."""
    out = []
    for (h0, v0), (h1, v1) in zip(zip(hs, values), zip(hs[1:], values[1:])):
        if v0 > 0 and v1 > 0:
            out.append(float(np.log(v0 / v1) / np.log(h0 / h1)))
        else:
            out.append(float("nan"))
    return out


def fitted_slope(hs, values) -> float:
    """Least-squares slope of ``log(value)`` against ``log(h)``."""
    hs, values = np.asarray(hs, float), np.asarray(values, float)
    ok = values > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(hs[ok]), np.log(values[ok]), 1)[0])


def _interior_signature_max(g: GridFunction, cfg: ExperimentConfig, labeling) -> float:
    # differences whose stencil lies inside the data and inside one region
    k = cfg.sigspec().order
    lab = np.asarray(labeling.labels)
    best = 0.0
    for a in range(g.dim):
        d = forward_diff(g.interior, k, axis=a)
        n = d.shape[a]

        def window(t):
            sl = [slice(None)] * g.dim
            sl[a] = slice(t, t + n)
            return lab[tuple(sl)]

        same = np.logical_and.reduce([window(t) == window(0) for t in range(1, k + 1)])
        if np.any(same):
            best = max(best, float(np.max(np.abs(d[same]))))
    return best


def convergence_sweep(cfg: ExperimentConfig, levels: int = 3) -> dict:
    """Repeat the pipeline on ``h, h/2, h/4, ...`` and fit orders.

    Each row holds the interior signature maximum (stencils within one
    region, away from the padding), the achieved signature residual and
    the corrected error maxima per zone.
    """
    if levels < 2:
        raise ConfigurationError("a sweep needs at least two levels")
    if cfg.input:
        raise ConfigurationError("sweeps need a test function, not input data")
    rows = []
    for lvl in range(levels):
        c = dataclasses.replace(cfg, N=(cfg.N - 1) * 2**lvl + 1)
        res = run_pipeline(c)
        h = res["g"].spec.h
        width = c.zone_width_value(h)
        summ = error_report(res["tf"], res["corrected"], c.fine_factor, zone_width=width).summary()
        rows.append(dict(
            N=c.N, h=h,
            signature_max=_interior_signature_max(res["g"], c, res["labeling"]),
            residual=res["first"].residual,
            corrected_max=summ["max_abs"],
            boundary=summ["max_boundary"],
            singular=summ["max_singular"],
            elsewhere=summ["max_elsewhere"],
        ))
    hs = [r["h"] for r in rows]
    orders = {
        key: fitted_orders(hs, [r[key] for r in rows])
        for key in ("signature_max", "corrected_max", "boundary", "singular", "elsewhere")
    }
    slopes = {key: fitted_slope(hs, [r[key] for r in rows]) for key in orders}
    return {"rows": rows, "orders": orders, "slopes": slopes}


def format_table(sweep: dict) -> str:
    keys = ["N", "h", "signature_max", "residual", "corrected_max", "boundary", "singular", "elsewhere"]
    lines = [",".join(keys)]
    for r in sweep["rows"]:
        lines.append(",".join(str(r[k]) if k == "N" else f"{r[k]:.6e}" for k in keys))
    lines.append("")
    lines.append("pairwise_order," + ",".join(
        f"{k}={'/'.join(f'{v:.3f}' for v in vals)}" for k, vals in sweep["orders"].items()
    ))
    lines.append("fitted_order," + ",".join(f"{k}={v:.3f}" for k, v in sweep["slopes"].items()))
    return "\n".join(lines) + "\n"
