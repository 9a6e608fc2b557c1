"""Reduce one cloud of weighted particles with each scheme and check the moments.

Run with ``python3 demos/01_single_group_reduction.py``.
"""

import numpy as np

from swpm_reduction import (
    DistParams,
    SchemeConfig,
    moment_vector,
    reduce_with_report,
    sample_swpm_like,
)

# %% a skewed sample, 2000 particles with non-uniform weights
params = DistParams(alpha=(0.75, 0.0, 0.0), beta=(0.02, 0.0, 0.0), v_R=5.0)
cloud = sample_swpm_like(params, 2000, seed=7)
print(f"{len(cloud)} particles, mass {cloud.mass:.6f}")

# %% each scheme keeps the moments up to its order
for variant in ("K1", "K2", "K2.5", "K3"):
    out, rep = reduce_with_report(cloud, SchemeConfig(variant=variant))
    speed = "-" if rep.s is None else f"{rep.s:.6f}"
    print(f"{variant:5s} -> {len(out):3d} particles  speed {speed:>9}  "
          f"max discrepancy {rep.max_discrepancy:.2e}")

# %% moments side by side for K3
out, _ = reduce_with_report(cloud, SchemeConfig(variant="K3"))
before, after = moment_vector(cloud, 3), moment_vector(out, 3)
for (k, a), b in zip(before.items(), after.values):
    print(f"  {k.label}  {a: .10f}  {b: .10f}")

# %% all weights stay positive
print("min weight after K3:", np.min(out.weights))
