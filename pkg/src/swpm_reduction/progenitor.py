"""Progenitor matrices and the dense reference solver.

The progenitor matrix maps reduced-particle weights to moments: row ``i``
belongs to a moment key, column ``j`` to a reduced-particle velocity, and the
entry is the velocity monomial of that key.  This module is deliberately
independent of the closed-form schemes so it can serve as their oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensemble import Ensemble, MomentKey, canonical_keys, moments
from .errors import SingularSystem

__all__ = [
    "ProgenitorSystem",
    "build_progenitor",
    "solve_square",
    "ReductionCheck",
    "verify_reduction",
    "ZERO_MOMENT",
]

PIVOT_RTOL = 1e-12
ZERO_MOMENT = 1e-14


@dataclass(frozen=True)
class ProgenitorSystem:
    keys: tuple[MomentKey, ...]
    velocities: np.ndarray
    matrix: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def apply(self, weights) -> np.ndarray:
        return self.matrix @ np.asarray(weights, dtype=float)


def build_progenitor(keys: Sequence, velocities) -> ProgenitorSystem:
    keys = tuple(k if isinstance(k, MomentKey) else MomentKey(*k) for k in keys)
    v = np.asarray(velocities, dtype=float).reshape(-1, 3)
    if not keys or v.shape[0] == 0:
        raise ValueError("need at least one key and one velocity")
    exps = np.array(keys, dtype=int)
    # 0.0**0 == 1.0 in numpy
    mat = np.prod(v[None, :, :] ** exps[:, None, :], axis=2)
    return ProgenitorSystem(keys, v, mat)


def solve_square(system: ProgenitorSystem | np.ndarray, mu) -> np.ndarray:
    """Solve ``P w = mu`` by Gaussian elimination with partial pivoting.

    A pivot smaller than ``1e-12`` times the largest entry of its original row
    is treated as exact singularity and raises :class:`SingularSystem`.
    """
    a = np.array(getattr(system, "matrix", system), dtype=float)
    b = np.array(getattr(mu, "values", mu), dtype=float)
    n, m = a.shape
    if n != m:
        raise ValueError(f"system is {n}x{m}, not square")
    if b.shape != (n,):
        raise ValueError("right-hand side has the wrong length")
    row_scale = np.max(np.abs(a), axis=1)
    if np.any(row_scale == 0.0):
        raise SingularSystem("progenitor matrix has a zero row")
    for col in range(n):
        cand = np.abs(a[col:, col]) / row_scale[col:]
        piv = col + int(np.argmax(cand))
        if cand[piv - col] <= PIVOT_RTOL:
            raise SingularSystem(f"no usable pivot in column {col}")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
            row_scale[[col, piv]] = row_scale[[piv, col]]
        f = a[col + 1 :, col] / a[col, col]
        a[col + 1 :, col:] -= f[:, None] * a[col, col:]
        b[col + 1 :] -= f * b[col]
    w = np.empty(n)
    for i in range(n - 1, -1, -1):
        w[i] = (b[i] - a[i, i + 1 :] @ w[i + 1 :]) / a[i, i]
    return w


@dataclass(frozen=True)
class ReductionCheck:
    keys: tuple[MomentKey, ...]
    original: np.ndarray
    reduced: np.ndarray
    absolute: np.ndarray
    relative: np.ndarray
    zero_target: np.ndarray

    @property
    def max_absolute(self) -> float:
        return float(np.max(self.absolute)) if len(self.keys) else 0.0

    @property
    def max_relative(self) -> float:
        """Largest discrepancy over nonzero targets (relative) and zero targets (absolute)."""
        return float(np.max(self.relative)) if len(self.keys) else 0.0

    def passes(self, rtol: float = 1e-9, atol_zero: float = 1e-11) -> bool:
        rel_ok = self.relative[~self.zero_target] < rtol
        abs_ok = self.absolute[self.zero_target] < atol_zero
        return bool(np.all(rel_ok) and np.all(abs_ok))

    def worst(self) -> tuple[MomentKey, float]:
        i = int(np.argmax(self.relative))
        return self.keys[i], float(self.relative[i])


def verify_reduction(original: Ensemble, reduced: Ensemble, K: int, keys=None) -> ReductionCheck:
    """Compare moments of order <= K (or an explicit key list) of two ensembles.

    The relative discrepancy is ``|dM| / |M_orig|``; when ``|M_orig| < 1e-14``
    the absolute discrepancy is reported in its place.
    """
    if keys is None:
        if not 0 <= K <= 3:
            raise ValueError(f"K must be in [0, 3], got {K}")
        keys = canonical_keys(K)
    keys = tuple(k if isinstance(k, MomentKey) else MomentKey(*k) for k in keys)
    m0 = moments(original, keys)
    m1 = moments(reduced, keys)
    absolute = np.abs(m1 - m0)
    zero = np.abs(m0) < ZERO_MOMENT
    relative = np.where(zero, absolute, absolute / np.where(zero, 1.0, np.abs(m0)))
    return ReductionCheck(keys, m0, m1, absolute, relative, zero)
