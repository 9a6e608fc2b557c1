"""Weighted particle ensembles, their moments and tail functionals.

Velocities are stored as an ``(N, 3)`` float array and weights as an ``(N,)``
array.  All sums go through :func:`numpy.sum`, which accumulates pairwise, so
reordering the particles perturbs a positive moment by far less than 1e-12
relative.
"""

from __future__ import annotations

import io
import itertools
from functools import lru_cache
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

__all__ = [
    "WeightedParticle",
    "Ensemble",
    "MomentKey",
    "MomentVector",
    "moment",
    "moments",
    "moment_vector",
    "canonical_keys",
    "keys_up_to",
    "n_moments",
    "tail_functional",
    "read_particles",
    "write_particles",
]

PARTICLE_HEADER = "vx,vy,vz,w"


class WeightedParticle(NamedTuple):
    velocity: tuple[float, float, float]
    weight: float


class MomentKey(NamedTuple):
    kx: int
    ky: int
    kz: int

    @property
    def order(self) -> int:
        return self.kx + self.ky + self.kz

    @property
    def label(self) -> str:
        return f"M{self.kx}{self.ky}{self.kz}"

    @classmethod
    def parse(cls, text: str) -> "MomentKey":
        """Parse ``"M120"`` or ``"120"`` or ``"1,2,0"``."""
        t = text.strip().upper().lstrip("M")
        if "," in t:
            parts = [int(p) for p in t.split(",")]
        else:
            parts = [int(c) for c in t]
        if len(parts) != 3 or min(parts) < 0:
            raise ValueError(f"not a moment key: {text!r}")
        return cls(*parts)


@dataclass(frozen=True)
class Ensemble:
    """Ordered collection of weighted particles.

    Particles with weight exactly zero are dropped on construction.
    """

    velocities: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.velocities, dtype=float).reshape(-1, 3)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if v.shape[0] != w.shape[0]:
            raise ValueError(f"{v.shape[0]} velocities but {w.shape[0]} weights")
        if (w < 0).any():
            raise ValueError("weights must be nonnegative")
        if not (np.isfinite(v).all() and np.isfinite(w).all()):
            raise ValueError("velocities and weights must be finite")
        keep = w != 0.0
        if not keep.all():
            v, w = v[keep], w[keep]
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "weights", w)

    @classmethod
    def empty(cls) -> "Ensemble":
        return cls(np.empty((0, 3)), np.empty(0))

    @classmethod
    def from_particles(cls, particles: Iterable[WeightedParticle]) -> "Ensemble":
        ps = list(particles)
        if not ps:
            return cls.empty()
        return cls([p.velocity for p in ps], [p.weight for p in ps])

    @classmethod
    def concatenate(cls, parts: Sequence["Ensemble"]) -> "Ensemble":
        if not parts:
            return cls.empty()
        return cls(
            np.concatenate([p.velocities for p in parts]),
            np.concatenate([p.weights for p in parts]),
        )

    def __len__(self) -> int:
        return self.weights.shape[0]

    def __iter__(self) -> Iterator[WeightedParticle]:
        for v, w in zip(self.velocities, self.weights):
            yield WeightedParticle(tuple(float(c) for c in v), float(w))

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.velocities, axis=1)

    def take(self, index) -> "Ensemble":
        # a subset of a valid ensemble is valid, so skip the checks
        out = object.__new__(Ensemble)
        v, w = self.velocities[index], self.weights[index]
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(out, "velocities", v.reshape(-1, 3))
        object.__setattr__(out, "weights", w.reshape(-1))
        return out


def _key(key) -> MomentKey:
    return key if isinstance(key, MomentKey) else MomentKey(*key)


def _monomial(v: np.ndarray, key: MomentKey) -> np.ndarray:
    # numpy evaluates 0.0**0 as 1.0, which is the convention we need
    return v[:, 0] ** key.kx * v[:, 1] ** key.ky * v[:, 2] ** key.kz


def moment(ensemble: Ensemble, key) -> float:
    """Weighted moment ``sum_j w_j vx^kx vy^ky vz^kz`` (0 for an empty ensemble)."""
    key = _key(key)
    if len(ensemble) == 0:
        return 0.0
    return float(np.sum(ensemble.weights * _monomial(ensemble.velocities, key)))


def moments(ensemble: Ensemble, keys: Sequence) -> np.ndarray:
    """Vector of moments for several keys at once."""
    exps = np.array(keys, dtype=int).reshape(-1, 3)
    if len(ensemble) == 0 or exps.shape[0] == 0:
        return np.zeros(exps.shape[0])
    vt = ensemble.velocities.T
    # pw[p, d, j] = v[j, d] ** p by repeated multiplication
    pw = np.empty((exps.max() + 1,) + vt.shape)
    pw[0] = 1.0
    for p in range(1, pw.shape[0]):
        pw[p] = pw[p - 1] * vt
    mono = pw[exps[:, 0], 0] * pw[exps[:, 1], 1] * pw[exps[:, 2], 2]
    return (mono * ensemble.weights).sum(axis=1)


def n_moments(K: int, dim: int = 3) -> int:
    """Number of moments of order at most ``K`` in ``dim`` velocity dimensions."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    if dim == 2:
        return 1 + 2 * K + K * (K - 1) // 2
    if dim == 3:
        return 1 + 3 * K + 3 * K * (K - 1) // 2 + K * (K - 1) * (K - 2) // 6
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def canonical_keys(K: int) -> list[MomentKey]:
    """Moment keys of order <= K in block order 0, x, y, z, xy, xz, yz, xyz.

    Each mixed pair block lists ``M_{k,m}`` grouped by the first exponent
    ``k = 1..K-1`` and then by the second exponent, e.g. ``M110, M120, M210``
    for the xy block at K=3.  The triple-mixed block is lexicographic.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    return list(_canonical_keys(K))


@lru_cache(maxsize=None)
def _canonical_keys(K: int) -> tuple[MomentKey, ...]:
    keys = [MomentKey(0, 0, 0)]
    for axis in range(3):
        for k in range(1, K + 1):
            e = [0, 0, 0]
            e[axis] = k
            keys.append(MomentKey(*e))
    for a, b in ((0, 1), (0, 2), (1, 2)):
        for k in range(1, K):
            for m in range(1, K - k + 1):
                e = [0, 0, 0]
                e[a], e[b] = k, m
                keys.append(MomentKey(*e))
    triple = [
        MomentKey(i, j, k)
        for i, j, k in itertools.product(range(1, K + 1), repeat=3)
        if 3 <= i + j + k <= K
    ]
    keys.extend(sorted(triple))
    return tuple(keys)


def keys_up_to(K: int) -> list[MomentKey]:
    """All keys of order <= K, grouped by order (used for reports, K may exceed 3)."""
    return [
        MomentKey(i, j, k)
        for order in range(K + 1)
        for i in range(order, -1, -1)
        for j in range(order - i, -1, -1)
        for k in (order - i - j,)
    ]


@dataclass(frozen=True)
class MomentVector:
    """Moments up to order ``K`` in canonical block order."""

    order: int
    keys: tuple[MomentKey, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.keys),):
            raise ValueError("one value per key required")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", {k: i for i, k in enumerate(self.keys)})

    @classmethod
    def from_mapping(cls, K: int, values: dict) -> "MomentVector":
        """Build a vector from ``{key: value}``; missing keys are zero."""
        vals = {_key(k): float(v) for k, v in values.items()}
        keys = canonical_keys(K)
        unknown = set(vals) - set(keys)
        if unknown:
            raise KeyError(f"keys above order {K}: {sorted(unknown)}")
        return cls(K, tuple(keys), np.array([vals.get(k, 0.0) for k in keys]))

    def __len__(self) -> int:
        return len(self.keys)

    def __getitem__(self, key) -> float:
        return float(self.values[self._index[_key(key)]])

    def get(self, key, default: float = 0.0) -> float:
        i = self._index.get(_key(key))
        return default if i is None else float(self.values[i])

    def items(self):
        return zip(self.keys, self.values)

    def as_dict(self) -> dict[str, float]:
        return {k.label: float(v) for k, v in self.items()}


def moment_vector(ensemble: Ensemble, K: int) -> MomentVector:
    if not 0 <= K <= 3:
        raise ValueError(f"moment_vector supports 0 <= K <= 3, got {K}")
    keys = canonical_keys(K)
    return MomentVector(K, tuple(keys), moments(ensemble, keys))


def tail_functional(ensemble: Ensemble, R: float) -> float:
    """Total weight of particles with speed ``|v| >= R``."""
    if R < 0:
        raise ValueError("R must be nonnegative")
    if len(ensemble) == 0:
        return 0.0
    return float(np.sum(ensemble.weights[ensemble.speeds >= R]))


def write_particles(ensemble: Ensemble, path) -> None:
    """Write the ``vx,vy,vz,w`` CSV format at full double precision."""
    buf = io.StringIO()
    buf.write(PARTICLE_HEADER + "\n")
    for row in np.column_stack([ensemble.velocities, ensemble.weights]).tolist():
        # repr of a python float round-trips exactly
        buf.write(",".join(repr(x) for x in row) + "\n")
    with open(path, "w", newline="\n") as fh:
        fh.write(buf.getvalue())


def read_particles(path) -> Ensemble:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip().replace(" ", "") != PARTICLE_HEADER:
        raise ValueError(f"{path}: expected header {PARTICLE_HEADER!r}")
    rows = [ln for ln in lines[1:] if ln.strip()]
    if not rows:
        return Ensemble.empty()
    data = np.array([[float(x) for x in ln.split(",")] for ln in rows])
    if data.shape[1] != 4:
        raise ValueError(f"{path}: expected 4 columns")
    return Ensemble(data[:, :3], data[:, 3])
