"""A small seeded experiment: relative error of M300 and a tail before and after K2 reduction."""

from swpm_reduction import ExperimentConfig, SchemeConfig, run_experiment, summarize_errors
from swpm_reduction.distributions import DistParams
from swpm_reduction.ensemble import MomentKey

cfg = ExperimentConfig(
    dist=DistParams(alpha=(0.75, 0.0, 0.0), beta=(0.02, 0.0, 0.0), v_R=5.0),
    n_orig=(100, 1000),
    n_ensembles=20,
    scheme=SchemeConfig(variant="K2"),
    grouping=True,
    moments=(MomentKey(3, 0, 0),),
    tails=(3.0,),
    seed=1,
)
records = run_experiment(cfg)
for r in records:
    print(f"{r.quantity:8s} N={r.n_orig:5d} {r.stage:4s} mean {r.mean: .4e}  ref {r.reference: .4e}  "
          f"rel err {r.e_rel_mean: .3e} +- {r.e_rel_std:.3e}")

print()
for key, row in summarize_errors(records).items():
    print(key, row)
