"""
Three regions separated by two curves
=====================================

Lines may now cross the singular set twice, so every line keeps all
peaks that stand out from their neighbourhood.  Flood fill then finds
three components; the one touching both others is numbered 1.
"""

import numpy as np

from sigfit.correct import error_report
from sigfit.experiments import preset, run_pipeline

cfg = preset("paper-2curves")
res = run_pipeline(cfg)
lab = res["labeling"]
sizes = [int(np.sum(lab.labels == r)) for r in range(1, lab.n_regions + 1)]
print(f"{lab.n_regions} regions with {sizes} nodes")

s = error_report(res["tf"], res["corrected"], cfg.fine_factor).summary()
print(f"corrected max error {s['max_abs']:.2e}")
