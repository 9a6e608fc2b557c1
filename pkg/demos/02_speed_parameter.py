"""How the K3 weights depend on the speed parameter.

Below the minimal speed some weight turns negative.  Above it the reduced
particles spread out further from the center.
"""

import numpy as np

from swpm_reduction import (
    FixedSpeed,
    SchemeConfig,
    SpeedTooSmall,
    moment_vector,
    reduce,
    sample_swpm_like,
    select_min_speed,
    standardize,
    DistParams,
)

cloud = sample_swpm_like(DistParams(alpha=(0.5, 0.2, 0.0)), 500, seed=3)
std, _ = standardize(cloud)
mu = moment_vector(std, 3)

cfg = SchemeConfig(variant="K3")
s_min = select_min_speed(mu, cfg)
print(f"minimal speed in the standardized frame: {s_min:.6f}")

# %% scan fixed speeds around the minimum
for factor in (0.9, 1.0, 1.2, 2.0, 4.0):
    s = factor * s_min
    try:
        out = reduce(cloud, SchemeConfig(variant="K3", speed=FixedSpeed(s)))
        spread = np.linalg.norm(out.velocities - out.velocities.mean(axis=0), axis=1).max()
        print(f"s = {s:8.4f}: {len(out)} particles, min weight {out.weights.min():.3e}, spread {spread:.3f}")
    except SpeedTooSmall as exc:
        print(f"s = {s:8.4f}: rejected ({exc})")
