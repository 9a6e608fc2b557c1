"""Equal-volume rectangular-box grouping and grouped reduction."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ensemble import Ensemble
from .progenitor import ZERO_MOMENT
from .schemes import K1, ReductionReport, SchemeConfig, reduce_with_report

__all__ = [
    "BoxGrid",
    "GroupingConfig",
    "GroupingReport",
    "plan_boxes",
    "box_indices",
    "group_particles",
    "reduce_grouped",
]


@dataclass(frozen=True)
class BoxGrid:
    """Boxes tiling the cube ``[-v_R, v_R]^3``; ``counts`` is boxes per axis."""

    v_R: float
    counts: tuple[int, int, int]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != 3 or min(counts) < 1:
            raise ValueError(f"box counts must be >= 1, got {self.counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def sides(self) -> tuple[float, float, float]:
        return tuple(2.0 * self.v_R / c for c in self.counts)

    @property
    def n_boxes(self) -> int:
        return self.counts[0] * self.counts[1] * self.counts[2]


@dataclass(frozen=True)
class GroupingConfig:
    v_R: float
    n_group: int
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.n_group < 2:
            raise ValueError("n_group must be at least 2")
        if self.n_group <= self.scheme.n_reduced:
            raise ValueError(
                f"n_group = {self.n_group} must exceed the {self.scheme.variant} output size "
                f"{self.scheme.n_reduced}"
            )


def plan_boxes(n_orig: int, config: GroupingConfig) -> BoxGrid:
    """Choose per-axis box counts for about ``n_group`` particles per box.

    ``n_groups = (6/pi) n_orig / n_group`` compensates for the cube corners
    outside the ball.  Two randomly chosen axes get ``floor(n_groups^(1/3))``
    boxes, the third gets ``floor(n_groups / (n_i n_j))``.
    """
    n_groups = 6.0 / math.pi * n_orig / config.n_group
    n_ij = max(1, int(math.floor(n_groups ** (1.0 / 3.0) + 1e-12)))
    n_k = max(1, int(math.floor(n_groups / (n_ij * n_ij))))
    k = int(np.random.default_rng(config.seed).integers(3))
    counts = [n_ij] * 3
    counts[k] = n_k
    return BoxGrid(config.v_R, tuple(counts))


def box_indices(ensemble: Ensemble, grid: BoxGrid) -> tuple[np.ndarray, int]:
    """Linear box index per particle and the number of particles clamped from outside the cube.

    Intervals are half open ``[lo, hi)`` except the last box on each axis,
    which is closed.
    """
    counts = np.array(grid.counts)
    v = ensemble.velocities
    raw = np.floor((v + grid.v_R) / (2.0 * grid.v_R) * counts).astype(np.int64)
    outside = np.any((v < -grid.v_R) | (v > grid.v_R), axis=1)
    idx = np.clip(raw, 0, counts - 1)
    lin = (idx[:, 0] * counts[1] + idx[:, 1]) * counts[2] + idx[:, 2]
    return lin, int(outside.sum())


def group_particles(ensemble: Ensemble, grid: BoxGrid) -> list[Ensemble]:
    """Partition into nonempty boxes, ordered by box index."""
    lin, _ = box_indices(ensemble, grid)
    order = np.argsort(lin, kind="stable")
    boxes, starts = np.unique(lin[order], return_index=True)
    bounds = list(starts) + [len(order)]
    return [ensemble.take(order[bounds[i] : bounds[i + 1]]) for i in range(len(boxes))]


@dataclass
class GroupingReport:
    boxes_total: int
    boxes_occupied: int
    groups_reduced: int
    groups_passed: int
    min_group: int
    max_group: int
    clamped: int
    counts: tuple[int, int, int]
    max_discrepancy: float = 0.0
    groups: list[ReductionReport] = field(default_factory=list, repr=False)

    def as_dict(self, with_groups: bool = False) -> dict:
        d = {
            "boxes_total": self.boxes_total,
            "boxes_occupied": self.boxes_occupied,
            "groups_reduced": self.groups_reduced,
            "groups_passed_through": self.groups_passed,
            "min_group_size": self.min_group,
            "max_group_size": self.max_group,
            "clamped_particles": self.clamped,
            "box_counts": list(self.counts),
            "max_discrepancy": self.max_discrepancy,
        }
        if with_groups:
            d["groups"] = [g.as_dict() for g in self.groups]
        return d


def _grouped_k1(ensemble: Ensemble, lin: np.ndarray, check: bool):
    """K1 for all boxes at once: every box with two or more particles becomes its mean."""
    boxes, inv, counts = np.unique(lin, return_inverse=True, return_counts=True)
    w, v = ensemble.weights, ensemble.velocities
    mass = np.bincount(inv, weights=w)
    first = np.column_stack([np.bincount(inv, weights=w * v[:, d]) for d in range(3)])
    mean = first / mass[:, None]

    single = counts == 1
    order = np.argsort(lin, kind="stable")
    firsts = order[np.concatenate([[0], np.cumsum(counts)[:-1]])]
    out_v = np.where(single[:, None], v[firsts], mean)
    out_w = np.where(single, w[firsts], mass)

    disc = np.zeros(len(boxes))
    if check:
        back = mass[:, None] * mean
        zero = np.abs(first) < ZERO_MOMENT
        err = np.abs(back - first)
        disc = np.where(zero, err, err / np.where(zero, 1.0, np.abs(first))).max(axis=1)
        disc[single] = 0.0
    reports = [
        ReductionReport(int(n), int(n), passed_through=True, reason="too small")
        if n == 1
        else ReductionReport(int(n), 1, max_discrepancy=float(d))
        for n, d in zip(counts, disc)
    ]
    return Ensemble(out_v, out_w), reports, counts.tolist()


def reduce_grouped(
    ensemble: Ensemble, config: GroupingConfig, check: bool = True
) -> tuple[Ensemble, GroupingReport]:
    """Reduce every box independently and concatenate in box order."""
    grid = plan_boxes(len(ensemble), config)
    lin, clamped = box_indices(ensemble, grid)

    if config.scheme.variant == K1 and len(ensemble):
        out, reports, sizes = _grouped_k1(ensemble, lin, check)
    else:
        groups = group_particles(ensemble, grid)

        def work(g):
            return reduce_with_report(g, config.scheme, check=check)

        if config.threads > 1:
            with ThreadPoolExecutor(config.threads) as pool:
                results = list(pool.map(work, groups))
        else:
            results = [work(g) for g in groups]
        out = Ensemble.concatenate([r[0] for r in results])
        reports = [r[1] for r in results]
        sizes = [len(g) for g in groups]
    sizes = sizes or [0]
    report = GroupingReport(
        boxes_total=grid.n_boxes,
        boxes_occupied=len(reports),
        groups_reduced=sum(not r.passed_through for r in reports),
        groups_passed=sum(r.passed_through for r in reports),
        min_group=min(sizes),
        max_group=max(sizes),
        clamped=clamped,
        counts=grid.counts,
        max_discrepancy=max((r.max_discrepancy for r in reports), default=0.0),
        groups=reports,
    )
    return out, report
