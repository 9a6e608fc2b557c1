"""Seeded ensemble experiments: statistics of moments and tails before and after reduction."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .distributions import (
    DistParams,
    QuadratureGrid,
    reference_moment,
    reference_tail,
    sample_dsmc_like,
    sample_swpm_like,
)
from .ensemble import Ensemble, MomentKey, moment, tail_functional
from .grouping import GroupingConfig, reduce_grouped
from .schemes import FixedSpeed, MinimalSpeed, SchemeConfig, reduce_with_report

__all__ = [
    "DEFAULT_SWEEP",
    "DEFAULT_GROUP_SIZE",
    "ExperimentConfig",
    "StatRecord",
    "ensemble_seed",
    "run_experiment",
    "summarize_errors",
    "records_to_csv",
    "summary_to_csv",
    "parse_config",
    "load_config",
    "config_as_dict",
]

DEFAULT_SWEEP = (10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000)
DEFAULT_GROUP_SIZE = {"K1": 2, "K2": 11, "K2.5": 15, "K3": 39}
DEFAULT_MOMENTS = tuple(MomentKey(k, 0, 0) for k in range(1, 6))
DEFAULT_TAILS = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
ZERO_VALUE = 1e-14

PRE, POST = "pre", "post"


@dataclass(frozen=True)
class ExperimentConfig:
    dist: DistParams = field(default_factory=DistParams)
    n_orig: tuple[int, ...] = DEFAULT_SWEEP
    n_ensembles: int = 100
    sampler: str = "swpm"
    scheme: SchemeConfig | None = None
    grouping: bool = False
    n_group: int | None = None
    moments: tuple[MomentKey, ...] = DEFAULT_MOMENTS
    tails: tuple[float, ...] = DEFAULT_TAILS
    seed: int = 0
    threads: int = 1
    quadrature_points: int = 64

    def __post_init__(self):
        if self.n_ensembles < 2:
            raise ValueError("n_ensembles must be at least 2")
        if self.sampler not in ("swpm", "dsmc"):
            raise ValueError(f"sampler must be 'swpm' or 'dsmc', got {self.sampler!r}")
        if not self.n_orig or min(self.n_orig) < 1:
            raise ValueError("n_orig must list positive sizes")
        if any(r > self.dist.v_R for r in self.tails):
            raise ValueError("tail radii must not exceed v_R")
        if self.grouping and self.scheme is None:
            raise ValueError("grouping needs a scheme")
        object.__setattr__(
            self, "moments", tuple(k if isinstance(k, MomentKey) else MomentKey(*k) for k in self.moments)
        )

    @property
    def scheme_name(self) -> str:
        return "none" if self.scheme is None else self.scheme.variant

    def grouping_config(self, seed: int) -> GroupingConfig:
        n_group = self.n_group or DEFAULT_GROUP_SIZE[self.scheme.variant]
        return GroupingConfig(self.dist.v_R, n_group, self.scheme, seed=seed)


@dataclass(frozen=True)
class StatRecord:
    scheme: str
    n_orig: int
    quantity: str
    stage: str
    mean: float
    std: float
    reference: float
    e_abs_mean: float
    e_abs_std: float
    e_rel_mean: float
    e_rel_std: float
    e_rel_abs_mean: float
    rel_is_abs: bool


def ensemble_seed(master: int, n_orig: int, index: int) -> int:
    """Deterministic 64-bit seed for one ensemble."""
    ss = np.random.SeedSequence([int(master), int(n_orig), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _quantities(cfg: ExperimentConfig) -> list[str]:
    return [k.label for k in cfg.moments] + [f"Tail({r:g})" for r in cfg.tails]


def _measure(e: Ensemble, cfg: ExperimentConfig) -> np.ndarray:
    vals = [moment(e, k) for k in cfg.moments] + [tail_functional(e, r) for r in cfg.tails]
    return np.array(vals)


def _one_ensemble(cfg: ExperimentConfig, n_orig: int, index: int) -> tuple[np.ndarray, np.ndarray | None]:
    seed = ensemble_seed(cfg.seed, n_orig, index)
    sampler = sample_swpm_like if cfg.sampler == "swpm" else sample_dsmc_like
    e = sampler(cfg.dist, n_orig, seed)
    pre = _measure(e, cfg)
    if cfg.scheme is None:
        return pre, None
    if cfg.grouping:
        red, _ = reduce_grouped(e, cfg.grouping_config(seed), check=False)
    else:
        red, _ = reduce_with_report(e, cfg.scheme, check=False)
    return pre, _measure(red, cfg)


def _references(cfg: ExperimentConfig) -> np.ndarray:
    grid = QuadratureGrid(cfg.quadrature_points)
    vals = [reference_moment(cfg.dist, k, grid) for k in cfg.moments]
    vals += [reference_tail(cfg.dist, r, grid) for r in cfg.tails]
    return np.array(vals)


def _errors(value: np.ndarray, base: np.ndarray):
    # value, base: (n_ensembles,) ; relative error falls back to absolute for zero bases
    diff = value - base
    zero = np.abs(base) < ZERO_VALUE
    rel = np.where(zero, np.abs(diff), diff / np.where(zero, 1.0, np.abs(base)))
    return np.abs(diff), rel, bool(np.any(zero))


def _std(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


def run_experiment(cfg: ExperimentConfig, references: np.ndarray | None = None) -> list[StatRecord]:
    """Sample ``n_ensembles`` ensembles for each size and summarize every tracked quantity.

    Pre-reduction errors are measured against the quadrature reference;
    post-reduction errors against each ensemble's own pre-reduction value.
    """
    refs = _references(cfg) if references is None else np.asarray(references)
    names = _quantities(cfg)
    records: list[StatRecord] = []
    for n_orig in cfg.n_orig:
        jobs = range(cfg.n_ensembles)
        if cfg.threads > 1:
            with ThreadPoolExecutor(cfg.threads) as pool:
                results = list(pool.map(lambda i: _one_ensemble(cfg, n_orig, i), jobs))
        else:
            results = [_one_ensemble(cfg, n_orig, i) for i in jobs]
        pre = np.array([r[0] for r in results])
        post = None if cfg.scheme is None else np.array([r[1] for r in results])
        for q, name in enumerate(names):
            stages = [(PRE, pre[:, q], np.full(len(pre), refs[q]))]
            if post is not None:
                stages.append((POST, post[:, q], pre[:, q]))
            for stage, val, base in stages:
                ea, er, flag = _errors(val, base)
                records.append(
                    StatRecord(
                        scheme=cfg.scheme_name,
                        n_orig=n_orig,
                        quantity=name,
                        stage=stage,
                        mean=float(np.mean(val)),
                        std=_std(val),
                        reference=float(refs[q]),
                        e_abs_mean=float(np.mean(ea)),
                        e_abs_std=_std(ea),
                        e_rel_mean=float(np.mean(er)),
                        e_rel_std=_std(er),
                        e_rel_abs_mean=float(np.mean(np.abs(er))),
                        rel_is_abs=flag,
                    )
                )
    return records


def summarize_errors(records: Sequence[StatRecord]) -> dict[tuple[str, int, str], dict]:
    """Pivot records into one row per (scheme, n_orig, quantity) with pre/post columns."""
    table: dict[tuple[str, int, str], dict] = {}
    for r in records:
        row = table.setdefault((r.scheme, r.n_orig, r.quantity), {})
        p = r.stage
        row[f"{p}_mean"] = r.mean
        row[f"{p}_std"] = r.std
        row[f"{p}_e_abs"] = r.e_abs_mean
        row[f"{p}_e_rel"] = r.e_rel_mean
        row[f"{p}_e_rel_abs"] = r.e_rel_abs_mean
        row["reference"] = r.reference
    return table


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def records_to_csv(records: Sequence[StatRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = [f.name for f in fields(StatRecord)]
    w.writerow(cols)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def summary_to_csv(table: dict) -> str:
    cols = sorted({c for row in table.values() for c in row})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "n_orig", "quantity"] + cols)
    for key in sorted(table, key=lambda k: (k[0], k[1], k[2])):
        row = table[key]
        w.writerow(list(map(_fmt, key)) + [_fmt(row.get(c, "")) for c in cols])
    return buf.getvalue()


# -- config files -----------------------------------------------------------

def _floats(text: str, n: int | None = None) -> tuple[float, ...]:
    vals = tuple(float(x) for x in text.split(",") if x.strip())
    if n is not None and len(vals) != n:
        raise ValueError(f"expected {n} comma-separated values, got {text!r}")
    return vals


def _speed(text: str):
    t = text.strip().lower()
    if t == "min":
        return MinimalSpeed()
    return FixedSpeed(float(t))


_CONFIG_KEYS = {
    "alpha", "beta", "vr", "n_orig", "n_ensembles", "sampler", "scheme", "grouping",
    "ngroup", "delta", "gamma", "l", "speed", "moments", "tails", "seed", "threads",
    "quadrature_points",
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys are rejected."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value

    dist = DistParams(
        alpha=_floats(raw.get("alpha", "0,0,0"), 3),
        beta=_floats(raw.get("beta", "0,0,0"), 3),
        v_R=float(raw.get("vr", 7.0)),
    )
    scheme = None
    name = raw.get("scheme", "none").strip()
    if name.lower() != "none":
        scheme = SchemeConfig(
            variant=name,
            delta=float(raw.get("delta", math.sqrt(2.0))),
            gamma=float(raw.get("gamma", math.sqrt(3.0))),
            l=_floats(raw.get("l", "0.5,0.5,0.5"), 3),
            speed=_speed(raw.get("speed", "min")),
        )
    grouping = raw.get("grouping", "none").strip().lower()
    if grouping not in ("none", "rectbox"):
        raise ValueError(f"grouping must be none or rectbox, got {grouping!r}")
    kwargs = dict(
        dist=dist,
        scheme=scheme,
        grouping=grouping == "rectbox",
        sampler=raw.get("sampler", "swpm").strip().lower(),
    )
    if "n_orig" in raw:
        kwargs["n_orig"] = tuple(int(float(x)) for x in raw["n_orig"].split(",") if x.strip())
    for key, conv in (("n_ensembles", int), ("seed", int), ("threads", int), ("quadrature_points", int)):
        if key in raw:
            kwargs[key] = conv(raw[key])
    if "ngroup" in raw:
        kwargs["n_group"] = int(raw["ngroup"])
    if "moments" in raw:
        kwargs["moments"] = tuple(MomentKey.parse(k) for k in raw["moments"].split(",") if k.strip())
    if "tails" in raw:
        kwargs["tails"] = _floats(raw["tails"])
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def with_threads(cfg: ExperimentConfig, threads: int) -> ExperimentConfig:
    return replace(cfg, threads=threads)


def config_as_dict(cfg: ExperimentConfig) -> dict:
    """JSON-friendly view of a config; thread count is left out so reports match across runs."""
    d = {
        "alpha": list(cfg.dist.alpha),
        "beta": list(cfg.dist.beta),
        "v_R": cfg.dist.v_R,
        "n_orig": list(cfg.n_orig),
        "n_ensembles": cfg.n_ensembles,
        "sampler": cfg.sampler,
        "scheme": cfg.scheme_name,
        "grouping": "rectbox" if cfg.grouping else "none",
        "moments": [k.label for k in cfg.moments],
        "tails": list(cfg.tails),
        "seed": cfg.seed,
        "quadrature_points": cfg.quadrature_points,
    }
    if cfg.scheme is not None:
        sp = cfg.scheme.speed
        d.update(
            delta=cfg.scheme.delta,
            gamma=cfg.scheme.gamma,
            l=list(cfg.scheme.l),
            speed="min" if isinstance(sp, MinimalSpeed) else sp.s,
        )
        if cfg.grouping:
            d["n_group"] = cfg.n_group or DEFAULT_GROUP_SIZE[cfg.scheme.variant]
    return d
