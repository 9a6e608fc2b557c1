import numpy as np
import pytest

from swpm_reduction import DistParams, ExperimentConfig, SchemeConfig, run_experiment, summarize_errors
from swpm_reduction.ensemble import MomentKey
from swpm_reduction.harness import (
    ensemble_seed,
    parse_config,
    records_to_csv,
    summary_to_csv,
    with_threads,
)

from conftest import SKEWED

FAST = dict(quadrature_points=16)


def test_smallest_run():
    cfg = ExperimentConfig(n_orig=(10,), n_ensembles=2, **FAST)
    recs = run_experiment(cfg)
    assert len(recs) == 5 + 6
    assert all(r.stage == "pre" and r.scheme == "none" for r in recs)
    assert all(np.isfinite(r.mean) and r.std >= 0 for r in recs)


def test_k1_grouped_tail_records():
    cfg = ExperimentConfig(dist=SKEWED, n_orig=(20, 100), n_ensembles=3, scheme=SchemeConfig("K1"),
                           grouping=True, **FAST)
    recs = run_experiment(cfg)
    for n in (20, 100):
        tails = [r for r in recs if r.n_orig == n and r.stage == "post" and r.quantity.startswith("Tail")]
        assert len(tails) == 6


def test_preserved_rows_have_tiny_errors():
    moms = tuple(MomentKey.parse(k) for k in ("M100", "M200", "M110", "M300", "M400"))
    for sampler in ("swpm", "dsmc"):
        for grouping in (False, True):
            cfg = ExperimentConfig(dist=SKEWED, n_orig=(200,), n_ensembles=3, sampler=sampler,
                                   scheme=SchemeConfig("K3"), grouping=grouping, n_group=60,
                                   moments=moms, tails=(), **FAST)
            table = summarize_errors(run_experiment(cfg))
            for k in ("M100", "M200", "M110", "M300"):
                assert table[("K3", 200, k)]["post_e_abs"] < 1e-9


def test_summary_shape():
    assert summarize_errors([]) == {}
    cfg = ExperimentConfig(n_orig=(10, 20), n_ensembles=2, scheme=SchemeConfig("K2"), **FAST)
    table = summarize_errors(run_experiment(cfg))
    assert len(table) == 1 * 2 * 11
    row = next(iter(table.values()))
    assert {"pre_mean", "post_mean", "post_e_abs", "reference"} <= set(row)


def test_relative_error_falls_back_to_absolute():
    cfg = ExperimentConfig(n_orig=(30,), n_ensembles=2, scheme=SchemeConfig("K2"),
                           moments=(MomentKey(0, 0, 0),), tails=(6.9,), **FAST)
    recs = run_experiment(cfg)
    tail_post = [r for r in recs if r.stage == "post" and r.quantity.startswith("Tail")][0]
    # a 30-particle sample essentially never reaches |v| >= 6.9
    assert tail_post.rel_is_abs


def test_seed_and_determinism():
    assert ensemble_seed(1, 10, 0) == ensemble_seed(1, 10, 0)
    assert len({ensemble_seed(1, 10, i) for i in range(50)}) == 50
    cfg = ExperimentConfig(dist=SKEWED, n_orig=(50,), n_ensembles=4, scheme=SchemeConfig("K2"),
                           grouping=True, **FAST)
    a = records_to_csv(run_experiment(cfg))
    b = records_to_csv(run_experiment(with_threads(cfg, 3)))
    assert a == b


def test_permutation_invariance_of_stats():
    # statistics only depend on the set of ensembles, not their order
    cfg = ExperimentConfig(n_orig=(40,), n_ensembles=5, **FAST)
    recs = run_experiment(cfg)
    from swpm_reduction.harness import _one_ensemble

    vals = np.array([_one_ensemble(cfg, 40, i)[0] for i in range(5)])
    perm = vals[[3, 1, 4, 0, 2]]
    for q, r in enumerate(recs):
        assert np.mean(perm[:, q]) == pytest.approx(r.mean, rel=1e-12, abs=1e-15)
        assert np.std(perm[:, q], ddof=1) == pytest.approx(r.std, rel=1e-12, abs=1e-15)


def test_parse_config():
    text = """
    # comment
    alpha = 0.75, 0, 0
    beta = 0.02,0,0
    vr = 7
    n_orig = 10, 1e2
    n_ensembles = 3
    scheme = k2.5
    grouping = rectbox
    ngroup = 20
    l = 0.4,0.5,0.6
    speed = min
    moments = M400, M500
    tails = 5, 6
    seed = 11  # trailing
    """
    cfg = parse_config(text)
    assert cfg.dist == DistParams((0.75, 0, 0), (0.02, 0, 0), 7.0)
    assert cfg.n_orig == (10, 100) and cfg.n_ensembles == 3
    assert cfg.scheme.variant == "K2.5" and cfg.scheme.l == (0.4, 0.5, 0.6)
    assert cfg.grouping and cfg.n_group == 20 and cfg.seed == 11
    assert [k.label for k in cfg.moments] == ["M400", "M500"] and cfg.tails == (5.0, 6.0)
    with pytest.raises(ValueError):
        parse_config("bogus = 1")
    with pytest.raises(ValueError):
        parse_config("alpha 1")
    with pytest.raises(ValueError):
        parse_config("grouping = kdtree")


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(n_ensembles=1)
    with pytest.raises(ValueError):
        ExperimentConfig(sampler="mcmc")
    with pytest.raises(ValueError):
        ExperimentConfig(grouping=True)
    with pytest.raises(ValueError):
        ExperimentConfig(tails=(8.0,))


def test_csv_output():
    cfg = ExperimentConfig(n_orig=(10,), n_ensembles=2, scheme=SchemeConfig("K1"), **FAST)
    recs = run_experiment(cfg)
    text = records_to_csv(recs)
    lines = text.splitlines()
    assert lines[0].startswith("scheme,n_orig,quantity,stage,mean,std,reference")
    assert len(lines) == 1 + len(recs)
    assert summary_to_csv(summarize_errors(recs)).count("\n") == 1 + 11
