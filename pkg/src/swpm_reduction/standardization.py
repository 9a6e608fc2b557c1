"""Affine map to the standardized frame and back.

In the standardized frame a group has unit mass, zero drift and identity
covariance.  The rotation comes from a cyclic Jacobi eigendecomposition of
the 3x3 central covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import Ensemble
from .errors import DegenerateCovariance

__all__ = [
    "StandardizationTransform",
    "symmetric_eig3",
    "standardize",
    "destandardize",
    "DEGENERATE_RTOL",
]

DEGENERATE_RTOL = 1e-10
_JACOBI_SWEEPS = 32
_JACOBI_TOL = 1e-14


def symmetric_eig3(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and a right-handed orthogonal eigenvector matrix.

    Cyclic Jacobi rotations; columns of the returned matrix are eigenvectors,
    so ``m = V @ diag(lam) @ V.T``.  Works on plain floats since every
    rotation touches only a handful of entries.
    """
    m = np.asarray(m, dtype=float).reshape(3, 3)
    a = (0.5 * (m + m.T)).tolist()
    v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    scale = math.sqrt(sum(x * x for row in a for x in row))
    if scale == 0.0:
        return np.zeros(3), np.eye(3)
    for _ in range(_JACOBI_SWEEPS):
        off = math.sqrt(a[0][1] ** 2 + a[0][2] ** 2 + a[1][2] ** 2)
        if off <= _JACOBI_TOL * scale:
            break
        for p, q, r in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
            apq = a[p][q]
            if apq == 0.0:
                continue
            theta = (a[q][q] - a[p][p]) / (2.0 * apq)
            if abs(theta) > 1e150:
                t = 0.5 / theta  # theta^2 would overflow
            else:
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            # a <- R^T a R with R[p][p] = R[q][q] = c, R[p][q] = s, R[q][p] = -s
            arp, arq = a[r][p], a[r][q]
            a[p][p] -= t * apq
            a[q][q] += t * apq
            a[p][q] = a[q][p] = 0.0
            a[r][p] = a[p][r] = c * arp - s * arq
            a[r][q] = a[q][r] = s * arp + c * arq
            for row in v:
                vp, vq = row[p], row[q]
                row[p] = c * vp - s * vq
                row[q] = s * vp + c * vq
    lam = np.array([a[0][0], a[1][1], a[2][2]])
    vec = np.array(v)
    order = np.argsort(-lam, kind="stable")
    lam, vec = lam[order], vec[:, order]
    if np.linalg.det(vec) < 0:
        vec[:, 2] = -vec[:, 2]
    return lam, vec


@dataclass(frozen=True)
class StandardizationTransform:
    mass: float
    mean: np.ndarray
    rotation: np.ndarray
    scales: np.ndarray

    @classmethod
    def identity(cls) -> "StandardizationTransform":
        return cls(1.0, np.zeros(3), np.eye(3), np.ones(3))

    def to_standard(self, ensemble: Ensemble) -> Ensemble:
        """Apply the forward map to any ensemble (e.g. a reduced one)."""
        v = (ensemble.velocities - self.mean) @ self.rotation / self.scales
        return Ensemble(v, ensemble.weights / self.mass)

    def to_lab(self, ensemble: Ensemble) -> Ensemble:
        v = (ensemble.velocities * self.scales) @ self.rotation.T + self.mean
        return Ensemble(v, ensemble.weights * self.mass)


def standardize(ensemble: Ensemble) -> tuple[Ensemble, StandardizationTransform]:
    """Map ``ensemble`` to unit mass, zero mean, identity covariance.

    Raises
    ------
    DegenerateCovariance
        If the mass is not positive or an eigenvalue of the central covariance
        is at most ``1e-10`` times the largest one.
    """
    w = ensemble.weights
    mass = float(np.sum(w))
    if not mass > 0.0:
        raise DegenerateCovariance("group has no mass")
    p = w / mass
    mean = np.sum(p[:, None] * ensemble.velocities, axis=0)
    dv = ensemble.velocities - mean
    cov = (p[:, None] * dv).T @ dv
    lam, rot = symmetric_eig3(cov)
    eps = DEGENERATE_RTOL * max(lam[0], 1e-300)
    if lam[2] <= eps:
        raise DegenerateCovariance(f"covariance eigenvalues {lam} are degenerate")
    t = StandardizationTransform(mass, mean, rot, np.sqrt(lam))
    return t.to_standard(ensemble), t


def destandardize(ensemble: Ensemble, t: StandardizationTransform) -> Ensemble:
    """Inverse of :func:`standardize`: ``v = R diag(scales) v_std + mean``, ``w = mass w_std``."""
    return t.to_lab(ensemble)
