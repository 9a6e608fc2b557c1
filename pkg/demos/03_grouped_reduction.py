"""Reduce a large ensemble box by box and look at the tail of the speed distribution."""

from swpm_reduction import (
    DistParams,
    GroupingConfig,
    SchemeConfig,
    reduce_grouped,
    reference_tail,
    sample_swpm_like,
    tail_functional,
)

params = DistParams(v_R=7.0)
cloud = sample_swpm_like(params, 20_000, seed=11)

for variant, n_group in (("K1", 2), ("K2", 11), ("K3", 39)):
    cfg = GroupingConfig(params.v_R, n_group, SchemeConfig(variant=variant), seed=0)
    out, rep = reduce_grouped(cloud, cfg)
    print(f"{variant}: {len(cloud)} -> {len(out)} particles in {rep.boxes_occupied} boxes "
          f"({rep.groups_passed} passed through), max discrepancy {rep.max_discrepancy:.1e}")
    for R in (2.0, 4.0, 5.0):
        ref = reference_tail(params, R)
        print(f"    tail R={R}: before {tail_functional(cloud, R):.3e}  "
              f"after {tail_functional(out, R):.3e}  reference {ref:.3e}")
