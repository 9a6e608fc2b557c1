"""Skewed, flattened Maxwellian test distributions and their samplers.

The one-dimensional density is ``2 phi(v) Phi(alpha v) exp(-beta v^4 / 4)``
with ``phi``/``Phi`` the standard normal density and cumulative.  The 3-D
density is the product over axes, restricted to the ball ``|v| <= v_R`` and
normalized there.

Reference values come from a spherical product rule: Gauss-Legendre in the
radius and in ``cos(theta)``, the periodic trapezoid rule in ``phi``.  The
integrand is smooth inside the ball, so this converges spectrally and
integrates the ball indicator exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import erfc, ndtr

from .ensemble import Ensemble, MomentKey

__all__ = [
    "DistParams",
    "QuadratureGrid",
    "pdf1d",
    "pdf3d",
    "normalization_constant",
    "reference_moment",
    "reference_tail",
    "maxwell_speed_tail",
    "sample_dsmc_like",
    "sample_swpm_like",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
CDF_NODES = 4096


@dataclass(frozen=True)
class DistParams:
    alpha: tuple[float, float, float] = (0.0, 0.0, 0.0)
    beta: tuple[float, float, float] = (0.0, 0.0, 0.0)
    v_R: float = 7.0

    def __post_init__(self):
        a = tuple(float(x) for x in self.alpha)
        b = tuple(float(x) for x in self.beta)
        if len(a) != 3 or len(b) != 3:
            raise ValueError("alpha and beta need three components")
        if min(b) < 0:
            raise ValueError("beta must be nonnegative")
        if not self.v_R > 0:
            raise ValueError("v_R must be positive")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "v_R", float(self.v_R))


@dataclass(frozen=True)
class QuadratureGrid:
    """Spherical product rule with ``points`` radial and polar nodes and ``2*points`` azimuthal."""

    points: int = 64

    def __post_init__(self):
        if self.points < 8:
            raise ValueError("need at least 8 points per direction")

    def nodes(self, r0: float, r1: float) -> tuple[np.ndarray, np.ndarray]:
        """Cartesian nodes ``(M, 3)`` and weights ``(M,)`` for the shell ``r0 <= |v| <= r1``."""
        return _shell_rule(self.points, float(r0), float(r1))


@lru_cache(maxsize=16)
def _shell_rule(n: int, r0: float, r1: float):
    xr, wr = np.polynomial.legendre.leggauss(n)
    r = 0.5 * (r1 - r0) * xr + 0.5 * (r1 + r0)
    wr = 0.5 * (r1 - r0) * wr * r**2
    ct, wt = np.polynomial.legendre.leggauss(n)
    nphi = 2 * n
    phi = 2.0 * math.pi * np.arange(nphi) / nphi
    wphi = 2.0 * math.pi / nphi
    R, CT, PH = np.meshgrid(r, ct, phi, indexing="ij")
    ST = np.sqrt(1.0 - CT**2)
    pts = np.stack([R * ST * np.cos(PH), R * ST * np.sin(PH), R * CT], axis=-1).reshape(-1, 3)
    w = (wr[:, None, None] * wt[None, :, None] * wphi * np.ones(nphi)).reshape(-1)
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def pdf1d(v, alpha: float, beta: float):
    """Unnormalized 1-D density ``2 phi(v) Phi(alpha v) exp(-beta v^4/4)``."""
    v = np.asarray(v, dtype=float)
    out = 2.0 * _INV_SQRT_2PI * np.exp(-0.5 * v * v) * ndtr(alpha * v) * np.exp(-0.25 * beta * v**4)
    return out if out.ndim else float(out)


def _product_pdf(v: np.ndarray, params: DistParams) -> np.ndarray:
    f = np.ones(v.shape[0])
    for i in range(3):
        f = f * pdf1d(v[:, i], params.alpha[i], params.beta[i])
    return f


def pdf3d(v, params: DistParams, C: float):
    """``C * prod_i pdf1d(v_i)`` inside the ball, 0 outside."""
    v = np.asarray(v, dtype=float)
    flat = v.reshape(-1, 3)
    f = C * _product_pdf(flat, params)
    f = np.where(np.linalg.norm(flat, axis=1) <= params.v_R, f, 0.0)
    return f.reshape(v.shape[:-1]) if v.ndim > 1 else float(f[0])


def _ball_integral(g, params: DistParams, grid: QuadratureGrid, r0: float = 0.0) -> float:
    pts, w = grid.nodes(r0, params.v_R)
    return float(np.sum(w * g(pts) * _product_pdf(pts, params)))


@lru_cache(maxsize=64)
def normalization_constant(params: DistParams, grid: QuadratureGrid = QuadratureGrid()) -> float:
    return 1.0 / _ball_integral(lambda p: 1.0, params, grid)


def reference_moment(params: DistParams, key, grid: QuadratureGrid = QuadratureGrid()) -> float:
    key = key if isinstance(key, MomentKey) else MomentKey(*key)
    C = normalization_constant(params, grid)
    mono = lambda p: p[:, 0] ** key.kx * p[:, 1] ** key.ky * p[:, 2] ** key.kz
    return C * _ball_integral(mono, params, grid)


def reference_tail(params: DistParams, R: float, grid: QuadratureGrid = QuadratureGrid()) -> float:
    """Probability mass at ``R <= |v| <= v_R``."""
    if R > params.v_R:
        raise ValueError(f"R = {R} exceeds v_R = {params.v_R}")
    if R <= 0:
        return 1.0
    C = normalization_constant(params, grid)
    return C * _ball_integral(lambda p: 1.0, params, grid, r0=R)


def maxwell_speed_tail(R):
    """Closed-form ``P(|v| >= R)`` for the standard 3-D Gaussian."""
    R = np.asarray(R, dtype=float)
    return erfc(R / math.sqrt(2.0)) + math.sqrt(2.0 / math.pi) * R * np.exp(-0.5 * R * R)


def _inverse_cdf_table(alpha: float, beta: float, v_R: float):
    x = np.linspace(-v_R, v_R, CDF_NODES)
    cdf = cumulative_trapezoid(pdf1d(x, alpha, beta), x, initial=0.0)
    cdf /= cdf[-1]
    # drop flat stretches so interpolation stays monotone and well defined
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return cdf[keep], x[keep]


def sample_dsmc_like(params: DistParams, N: int, seed: int) -> Ensemble:
    """Equal-weight sample by per-axis inverse transform, rejecting ``|v| > v_R``."""
    if N < 1:
        raise ValueError("N must be positive")
    rng = np.random.default_rng(seed)
    tables = [_inverse_cdf_table(params.alpha[i], params.beta[i], params.v_R) for i in range(3)]

    def draw(n):
        u = rng.random((n, 3))
        return np.column_stack([np.interp(u[:, i], *tables[i]) for i in range(3)])

    v = draw(N)
    bad = np.linalg.norm(v, axis=1) > params.v_R
    while np.any(bad):
        v[bad] = draw(int(bad.sum()))
        bad = np.linalg.norm(v, axis=1) > params.v_R
    return Ensemble(v, np.full(N, 1.0 / N))


def sample_swpm_like(params: DistParams, N: int, seed: int) -> Ensemble:
    """Velocities uniform in the ball, weights proportional to the density, summing to 1."""
    if N < 1:
        raise ValueError("N must be positive")
    rng = np.random.default_rng(seed)
    u = rng.random((N, 3))
    r = params.v_R * np.cbrt(u[:, 0])
    ct = 2.0 * u[:, 1] - 1.0
    st = np.sqrt(1.0 - ct * ct)
    ph = 2.0 * math.pi * u[:, 2]
    v = r[:, None] * np.column_stack([st * np.cos(ph), st * np.sin(ph), ct])
    f = _product_pdf(v, params)
    return Ensemble(v, f / np.sum(f))
