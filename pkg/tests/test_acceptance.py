"""Acceptance criteria, one test per criterion.

Each test prints ``criterion <n>: PASS|FAIL <numbers>`` and the same lines
are repeated in the pytest terminal summary.  Tolerances are the stated
ones; nothing here is loosened to make a criterion pass.
"""

from __future__ import annotations

import resource
import time

import numpy as np
from scipy.linalg import lstsq
from scipy.spatial import cKDTree
from threadpoolctl import threadpool_limits

from sigfit.basis import BSplineBasis, TensorBasis
from sigfit.correct import CorrectionOperator, error_report, exact_region_map, interpolate
from sigfit.detect import RegionLabeling, classify, detect_regions
from sigfit.experiments import build_inputs, convergence_sweep, preset, run_pipeline
from sigfit.fit import assemble, build_columns, first_stage, solve
from sigfit.grid import GridFunction, GridSpec, get_test_function, sample
from sigfit.signature import (
    SignatureSpec,
    apply_signature,
    biharmonic,
    forward_diff,
    invert_differences,
    sigma_matrix,
    signature_1d,
)


def _run(cfg):
    res = run_pipeline(cfg)
    width = cfg.zone_width_value(res["g"].spec.h)
    first = error_report(res["tf"], res["first_only"], cfg.fine_factor, zone_width=width).summary()
    corr = error_report(res["tf"], res["corrected"], cfg.fine_factor, zone_width=width).summary()
    return res, first, corr


def _peak_rss_gb() -> float:
    # ru_maxrss is in kilobytes on Linux
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1e6


def test_criterion_1_one_dimensional(record):
    cfg = preset("paper-1d")
    t0 = time.perf_counter()
    with threadpool_limits(limits=1):
        res, _, corr = _run(cfg)
    elapsed = time.perf_counter() - t0
    S, g = res["first"], res["g"]
    grid_err = float(np.max(np.abs(S.on_grid() - g.interior)))
    ratio = grid_err / corr["max_abs"]
    ok = 5e-5 <= grid_err <= 5e-4 and corr["max_abs"] <= 1e-6 and ratio >= 10 and elapsed <= 30
    record(
        1, ok,
        f"first-stage grid max {grid_err:.3e} in [5e-5, 5e-4]; corrected {corr['max_abs']:.3e} <= 1e-6; "
        f"ratio {ratio:.2e} >= 10; {elapsed:.2f} s <= 30 s (1 thread; rank {S.rank} of {S.meta['columns']})",
    )
    assert ok


def test_criterion_2_two_dimensional(record):
    cfg = preset("paper-2d")
    t0 = time.perf_counter()
    _, _, corr = _run(cfg)
    elapsed = time.perf_counter() - t0
    b, c, e = corr["max_boundary"], corr["max_singular"], corr["max_elsewhere"]
    ok = corr["max_abs"] <= 1e-5 and b >= c >= e and elapsed <= 600
    record(
        2, ok,
        f"corrected {corr['max_abs']:.3e} <= 1e-5; zones boundary {b:.2e} >= curve {c:.2e} >= elsewhere {e:.2e}; "
        f"{elapsed:.1f} s <= 600 s",
    )
    assert ok


def _example2d_curve(n: int) -> np.ndarray:
    # (x+1)^4 + (y+1)^4 = 10 inside the unit square, n points by arc length
    t = np.linspace(0.0, np.pi / 2, 200_001)
    r = 10.0**0.25
    pts = np.stack([r * np.sqrt(np.cos(t)) - 1.0, r * np.sqrt(np.sin(t)) - 1.0], 1)
    pts = pts[np.all((pts >= 0.0) & (pts <= 1.0), axis=1)]
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    u = np.linspace(0.0, s[-1], n)
    return np.stack([np.interp(u, s, pts[:, 0]), np.interp(u, s, pts[:, 1])], 1)


def test_criterion_3_curve_recovery(record):
    tf = get_test_function("example2d")
    spec = GridSpec(2, 41, pad=2)
    h = spec.h
    lab = detect_regions(sample(tf, spec), net_size=9, d_levelset=0.25)
    gamma = _example2d_curve(1000)
    zero = np.vstack(lab.levelset.zero_set(resolution=801))
    dense = _example2d_curve(200_000)
    hausdorff = max(cKDTree(zero).query(gamma)[0].max(), cKDTree(dense).query(zero)[0].max())
    pts = spec.points()
    far = cKDTree(dense).query(pts)[0] > h
    mapping = exact_region_map(tf, lab)
    exact = np.vectorize(mapping.get)(tf.region_points(pts))
    frac = float(np.mean(classify(lab, pts[far]) == exact[far]))
    ok = hausdorff <= 2 * h and frac >= 0.99
    record(3, ok, f"Hausdorff {hausdorff / h:.3f} h <= 2 h; classified {100 * frac:.2f}% >= 99% off the h-band")
    assert ok


def test_criterion_4_two_curves(record):
    cfg = preset("paper-2curves")
    res, _, corr = _run(cfg)
    lab, tf = res["labeling"], res["tf"]
    mapping = exact_region_map(tf, lab)
    # exact region 1 is the band touching both curves
    middle = mapping[1]
    ok = corr["max_abs"] <= 1e-4 and lab.n_regions == 3 and middle == 1 and len(set(mapping.values())) == 3
    record(
        4, ok,
        f"corrected {corr['max_abs']:.3e} <= 1e-4; components {lab.n_regions} == 3; middle region labeled P{middle}",
    )
    assert ok


def test_criterion_5_three_dimensional(record):
    t0 = time.perf_counter()
    red = preset("paper-3d", reduced=True)
    _, _, corr = _run(red)
    t_red = time.perf_counter() - t0
    mem = _peak_rss_gb()
    s, b, e = corr["max_singular"], corr["max_boundary"], corr["max_elsewhere"]
    ok_red = corr["max_abs"] <= 1e-3 and mem <= 8.0 and s >= b >= e
    t0 = time.perf_counter()
    _, _, full = _run(preset("paper-3d"))
    t_full = time.perf_counter() - t0
    ok_full = full["max_abs"] <= 5e-5
    record(
        5, ok_red and ok_full,
        f"reduced: corrected {corr['max_abs']:.3e} <= 1e-3, zones surface {s:.2e} >= boundary {b:.2e} >= "
        f"elsewhere {e:.2e}, {t_red:.1f} s; full: corrected {full['max_abs']:.3e} <= 5e-5, {t_full:.1f} s; "
        f"peak memory {_peak_rss_gb():.2f} GB <= 8 GB",
    )
    assert ok_red and ok_full


# --- criterion 6: property suite ------------------------------------------


def _sub_signature():
    rng = np.random.default_rng(11)
    spec = GridSpec(1, 40, pad=5)
    f, g = rng.standard_normal(40), rng.standard_normal(40)
    lin = np.max(np.abs(
        signature_1d(GridFunction.from_interior(spec, 2 * f - 3 * g), 5).values
        - 2 * signature_1d(GridFunction.from_interior(spec, f), 5).values
        + 3 * signature_1d(GridFunction.from_interior(spec, g), 5).values
    ))
    x = np.linspace(0, 1, 60)
    ann1 = np.max(np.abs(forward_diff(1 - 2 * x + 3 * x**2 - x**3 + 0.5 * x**4, 5)))
    s2 = GridSpec(2, 20, pad=2)
    X, Y = s2.mesh()
    ann2 = np.max(np.abs(biharmonic(GridFunction.from_interior(s2, X**3 - 2 * X * Y**2 + Y + 1)).values[4:-4, 4:-4]))
    tf = get_test_function("smooth1d")
    maxima = [np.max(np.abs(forward_diff(sample(tf, GridSpec(1, N, pad=5)).interior, 5))) for N in (51, 101, 201)]
    ratios = [maxima[i] / maxima[i + 1] for i in range(2)]
    ok = lin <= 1e-12 and ann1 <= 1e-12 and ann2 <= 1e-12 and min(ratios) >= 2**4.5
    return ok, f"signature linearity {lin:.1e}, annihilation {max(ann1, ann2):.1e}, decay ratios {ratios[0]:.1f}/{ratios[1]:.1f} >= {2**4.5:.1f}"


def _sub_partition():
    worst = 0.0
    x = np.linspace(0, 1, 20_001)
    for m in (2, 4, 6):
        for d in (0.05, 0.1, 0.25):
            worst = max(worst, np.max(np.abs(BSplineBasis(m, d)(x).sum(axis=1) - 1.0)))
    return worst <= 1e-12, f"partition of unity {worst:.1e} <= 1e-12"


def _sub_quasi():
    N = 21
    x = np.linspace(0, 1, N)
    t = np.linspace(0, 1, 401)
    worst = 0.0
    for deg in range(4):
        p = np.polynomial.Polynomial(np.random.default_rng(deg).standard_normal(deg + 1))
        q = interpolate(GridFunction.from_interior(GridSpec(1, N), p(x)), CorrectionOperator("quasi", kernel="cubic"))
        worst = max(worst, np.max(np.abs(q.on_tensor_grid(t) - p(t))))
    return worst <= 1e-10, f"quasi-interpolation reproduction {worst:.1e} <= 1e-10"


def _sub_inversion():
    rng = np.random.default_rng(12)
    rt = 0.0
    growth_ok = True
    for k in (1, 3, 5):
        g = np.concatenate([np.zeros(k), rng.standard_normal(50)])
        rt = max(rt, np.max(np.abs(invert_differences(forward_diff(g, k), k) - g)))
        for N in (50, 100, 200):
            h = 1.0 / N
            d = h**6 * rng.uniform(-1, 1, N)
            gg = invert_differences(d, k)
            j = np.arange(len(gg))
            # one order lost per step: |g_j| <= j^k C h^alpha with C = 1
            growth_ok &= bool(np.all(np.abs(gg) <= np.maximum(j, 1) ** k * h**6 * (1 + 1e-12)))
    return rt <= 1e-9 and growth_ok, f"difference inversion round-trip {rt:.1e}, growth bound {'holds' if growth_ok else 'violated'}"


def _sub_lsq():
    cfg = preset("paper-1d")
    tf, g = build_inputs(cfg)
    lab = detect_regions(g, order=1)
    sig = cfg.sigspec()
    cols = build_columns(cfg.tensor_basis(1), lab, sig, g.spec)
    s = apply_signature(g, sig).vector()
    system = assemble(cols, s)
    a = solve(system)
    C = cols.dense()
    ref = lstsq(C, s, lapack_driver="gelsd")[0]
    A = C.T @ C
    rel = np.linalg.norm(A @ a - A @ ref) / np.linalg.norm(A @ ref)
    return rel <= 1e-10, f"pseudoinverse vs LSQ oracle A*a {rel:.1e} <= 1e-10"


def _sub_exact_space():
    worst = 0.0
    rng = np.random.default_rng(13)
    for dim, N, sig in ((1, 101, SignatureSpec("forward_diff", 5)), (2, 41, SignatureSpec("biharmonic"))):
        spec = GridSpec(dim, N, pad=sig.reach)
        base = TensorBasis(BSplineBasis(6, 0.1), dim)
        coef = rng.standard_normal(base.size)
        vals = base.contract_grid(coef, spec.axis())
        S = first_stage(GridFunction.from_interior(spec, vals), RegionLabeling.single(spec), base, sig)
        worst = max(worst, np.max(np.abs(S.on_grid() - vals)))
    return worst <= 1e-8, f"exact-space recovery {worst:.1e} <= 1e-8"


def _banded_sigma(N: int) -> np.ndarray:
    # entries (i-2, i) = -1, (i-1, i) = 3, (i, i) = -3, (i+1, i) = 1, truncated to N x N
    S = np.zeros((N, N))
    for i in range(N):
        for r, v in ((i - 2, -1.0), (i - 1, 3.0), (i, -3.0), (i + 1, 1.0)):
            if 0 <= r < N:
                S[r, i] = v
    return S


def _sub_sigma():
    Ns = (16, 32, 64)
    same = all(np.array_equal(sigma_matrix(N, 3), _banded_sigma(N)) for N in Ns)
    norms = [np.linalg.norm(np.linalg.inv(sigma_matrix(N, 3)), 1) for N in Ns]
    ratios = [norms[i + 1] / norms[i] for i in range(2)]
    ok = same and all(4 / 1.5 <= r <= 4 * 1.5 for r in ratios)
    expo = np.polyfit(np.log(Ns), np.log(norms), 1)[0]
    return ok, (
        f"inverse 1-norm {norms[0]:.0f}/{norms[1]:.0f}/{norms[2]:.0f}, doubling ratios "
        f"{ratios[0]:.2f}/{ratios[1]:.2f} vs 4 within x1.5 (fitted exponent {expo:.2f})"
    )


def test_criterion_6_property_suite(record):
    t0 = time.perf_counter()
    subs = [f() for f in (_sub_signature, _sub_partition, _sub_quasi, _sub_inversion, _sub_lsq, _sub_exact_space, _sub_sigma)]
    elapsed = time.perf_counter() - t0
    ok = all(s[0] for s in subs) and elapsed < 60
    failed = [d for s_ok, d in subs if not s_ok]
    detail = f"{len(subs) - len(failed)}/{len(subs)} sub-checks in {elapsed:.1f} s < 60 s"
    if failed:
        detail += "; FAILED: " + "; ".join(failed)
    for s_ok, d in subs:
        print(f"  [{'ok' if s_ok else 'FAIL'}] {d}")
    record(6, ok, detail)
    assert ok, detail


def test_criterion_7_convergence_orders(record):
    cfg = preset("paper-1d")
    cfg.set("function", "smooth1d")
    sweep = convergence_sweep(cfg, levels=3)
    k = cfg.signature_order
    ell = CorrectionOperator("spline", cfg.correction_degree).reproduces
    sig, off = sweep["slopes"]["signature_max"], sweep["slopes"]["elsewhere"]
    ok = sig >= k - 0.5 and off >= ell + 0.5
    pair = sweep["orders"]["elsewhere"]
    record(
        7, ok,
        f"fitted signature order {sig:.3f} >= {k - 0.5}; off-singularity correction order {off:.3f} >= {ell + 0.5} "
        f"(pairwise {pair[0]:.2f}/{pair[1]:.2f})",
    )
    assert ok
