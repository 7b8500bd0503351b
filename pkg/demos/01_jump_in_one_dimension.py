"""
A jump in one dimension
=======================

Sample a function with a jump at x = 0.5 on 101 points, locate the jump,
fit one spline per side by matching fifth differences, then correct the
fit with a cubic spline of the residual.
"""

import numpy as np

from sigfit import (
    BSplineBasis,
    GridSpec,
    SignatureSpec,
    TensorBasis,
    apply_signature,
    corrected,
    detect_regions,
    error_report,
    first_stage,
    get_test_function,
    sample,
)
from sigfit.correct import CorrectedApproximant

# zero padding of width 5 lets the fifth differences run over the ends
tf = get_test_function("example1d")
spec = GridSpec(1, 101, pad=5)
g = sample(tf, spec)

# The signature is small where f is smooth and O(1) at the ends and the jump
sig = SignatureSpec("forward_diff", 5)
s = apply_signature(g, sig).values
print("largest |signature| entries at padded windows", np.argsort(-np.abs(s))[:6])

# first differences single out the interval holding the jump
lab = detect_regions(g, order=1)
print("breakpoint", lab.breakpoints)

# order-6 splines with knot spacing 0.1, one set per region
base = TensorBasis(BSplineBasis(6, 0.1), 1)
S = first_stage(g, lab, base, sig)
print(f"rank {S.rank} of {S.meta['columns']} columns, signature residual {S.residual:.2e}")
print(f"first stage, max grid error {np.max(np.abs(S.on_grid() - g.interior)):.3e}")

# the residual f - S is smooth across x = 0.5, so a spline of it fixes S
F = corrected(g, S, mode="exact", tf=tf)
before = error_report(tf, CorrectedApproximant(S, None, "exact", tf), fine_factor=10).summary()
after = error_report(tf, F, fine_factor=10).summary()
print(f"max error on a 10x finer grid: {before['max_abs']:.3e} -> {after['max_abs']:.3e}")
