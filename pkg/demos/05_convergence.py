"""
Convergence under grid refinement
=================================

Halve h twice and watch the orders: the interior signature behaves like
h^5 for fifth differences, and away from the singularity the corrected
error follows the cubic correction.
"""

import sys

from sigfit.experiments import convergence_sweep, format_table, preset

name = sys.argv[1] if len(sys.argv) > 1 else "example1d"
cfg = preset("paper-1d")
cfg.set("function", name)
print(format_table(convergence_sweep(cfg, levels=3)), end="")
