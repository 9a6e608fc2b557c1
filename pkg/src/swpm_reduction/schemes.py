"""Closed-form positive-weight reduction schemes K1, K2, K2.5 and K3.

Every solver works on the moment vector of a group in the standardized frame
(unit mass, zero drift, identity covariance) and returns the reduced particles
in that frame.  :func:`reduce` wraps the round trip through the lab frame.

Layout of the K3 solution (``s`` is the speed parameter):

* a quadruplet at speed ``s / gamma`` carrying ``M111``;
* for each coordinate plane, three twin pairs at speed ``s / delta`` carrying
  the three mixed moments of that plane;
* for each axis a block of two or three particles on the axis at
  ``beta*s, -beta*s, beta*l*s`` carrying the modified pure moments;
* a center particle at the origin closing the mass balance.

K2.5 keeps only the axis blocks and the center; K2 keeps the axis pairs and
the center.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Union

import numpy as np

from .ensemble import Ensemble, MomentKey, MomentVector, canonical_keys, moment_vector
from .errors import (
    DegenerateCovariance,
    NegativeWeight,
    NoFeasibleSpeed,
    SpeedTooSmall,
)
from .progenitor import ZERO_MOMENT, verify_reduction
from .standardization import standardize

logger = logging.getLogger(__name__)

__all__ = [
    "K1",
    "K2",
    "K2_5",
    "K3",
    "VARIANTS",
    "FixedSpeed",
    "MinimalSpeed",
    "SchemeConfig",
    "BacksubParams",
    "axis_signs",
    "compute_backsub_params",
    "center_weight_closed_form",
    "solve_k1",
    "solve_k2",
    "solve_quadruplet",
    "solve_twins",
    "solve_axis_block",
    "solve_k2_5",
    "solve_k3",
    "solve",
    "scheme_weights",
    "is_feasible",
    "speed_lower_bound",
    "select_min_speed",
    "ReductionReport",
    "reduce",
    "reduce_with_report",
]

K1, K2, K2_5, K3 = "K1", "K2", "K2.5", "K3"
VARIANTS = (K1, K2, K2_5, K3)
REDUCED_SIZE = {K1: 1, K2: 7, K2_5: 10, K3: 26}
SCHEME_ORDER = {K1: 1, K2: 2, K2_5: 2, K3: 3}

SQRT3 = math.sqrt(3.0)
WEIGHT_TOL = 1e-14
MAX_SPEED = 1e6



@lru_cache(maxsize=None)
def _e(i: int, p: int, j: int | None = None, q: int = 0) -> tuple[int, int, int]:
    """Exponent triple with ``p`` on axis ``i`` and ``q`` on axis ``j``."""
    e = [0, 0, 0]
    e[i] = p
    if j is not None:
        e[j] += q
    return tuple(e)
_PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class FixedSpeed:
    s: float


@dataclass(frozen=True)
class MinimalSpeed:
    tolerance: float = 1e-6


SpeedPolicy = Union[FixedSpeed, MinimalSpeed]


def _variant(name: str) -> str:
    v = str(name).strip().upper()
    if v not in VARIANTS:
        raise ValueError(f"unknown scheme {name!r}; expected one of {VARIANTS}")
    return v


@dataclass(frozen=True)
class SchemeConfig:
    """Reduction variant and its placement parameters.

    ``delta`` and ``gamma`` scale the twin and quadruplet speeds
    (``s/delta``, ``s/gamma``); ``l`` is the per-axis ratio of the third axis
    particle's speed to ``s``.
    """

    variant: str = K3
    delta: float = math.sqrt(2.0)
    gamma: float = math.sqrt(3.0)
    l: tuple[float, float, float] = (0.5, 0.5, 0.5)
    speed: SpeedPolicy = field(default_factory=MinimalSpeed)

    def __post_init__(self):
        object.__setattr__(self, "variant", _variant(self.variant))
        l = tuple(float(x) for x in np.broadcast_to(np.asarray(self.l, dtype=float), (3,)))
        object.__setattr__(self, "l", l)
        if not all(x > 0 and x != 1.0 for x in l):
            raise ValueError(f"l components must be positive and != 1, got {l}")
        for name in ("delta", "gamma"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and positive, got {val}")
        if isinstance(self.speed, FixedSpeed) and not self.speed.s > 0:
            raise ValueError("fixed speed must be positive")

    @property
    def n_reduced(self) -> int:
        return REDUCED_SIZE[self.variant]

    @property
    def order(self) -> int:
        return SCHEME_ORDER[self.variant]

    def preserved_keys(self) -> list[MomentKey]:
        """Lab-frame moments the scheme reproduces exactly."""
        return canonical_keys(self.order)

    def standard_frame_keys(self) -> list[MomentKey]:
        """Extra moments preserved only in the standardized frame (K2.5 pure thirds)."""
        if self.variant == K2_5:
            return [MomentKey(3, 0, 0), MomentKey(0, 3, 0), MomentKey(0, 0, 3)]
        return []


def _moments(mu: MomentVector) -> dict[tuple[int, int, int], float]:
    """Moment lookup with entries below the pruning threshold set to zero."""
    out = {}
    for k, v in mu.items():
        out[tuple(k)] = 0.0 if abs(v) < ZERO_MOMENT else float(v)
    return out


def _m(mom: dict, e: tuple) -> float:
    return mom.get(e, 0.0)


def _sign(x: float) -> float:
    return 1.0 if x >= 0 else -1.0


@dataclass(frozen=True)
class BacksubParams:
    """Per-axis constants of the K3 axis blocks and the center weight.

    The axis weights are ``(a s - b - c_plus) / 2s^3`` and
    ``(a s - b - c_minus) / 2s^3``; the third is
    ``beta * third / ((l^2 - 1) l s^3)``.  The center weight is
    ``1 + a0 / s^2 + b0 / s^3``.
    """

    a: tuple[float, float, float]
    b: tuple[float, float, float]
    c_plus: tuple[float, float, float]
    c_minus: tuple[float, float, float]
    third: tuple[float, float, float]
    beta: tuple[float, float, float]
    a0: float
    b0: float

    def speed_bound(self, axis: int) -> float:
        """Smallest ``s`` keeping both axis-pair weights of ``axis`` nonnegative."""
        a = self.a[axis]
        hi = max(self.b[axis] + self.c_plus[axis], self.b[axis] + self.c_minus[axis])
        if a <= 0:
            if hi <= 0:
                return 0.0
            raise NoFeasibleSpeed(f"axis {axis}: a = {a} <= 0")
        return hi / a


def _third_numerator(mom: dict, axis: int, delta: float, mixed: bool) -> float:
    # pure third moment corrected for the twin contributions along the axis
    t = _m(mom, _e(axis, 3))
    if mixed:
        x = sum(_m(mom, _e(axis, 1, o, 2)) for o in range(3) if o != axis)
        t += (delta**2 - 1.0) * x
    return t


def axis_signs(mu: MomentVector, config: SchemeConfig, mixed: bool | None = None) -> tuple[float, ...]:
    """Sign per axis that makes the third axis-particle weight nonnegative."""
    if mixed is None:
        mixed = config.variant == K3
    mom = _moments(mu)
    out = []
    for axis in range(3):
        t = _third_numerator(mom, axis, config.delta, mixed)
        l = config.l[axis]
        out.append(_sign(t) * _sign(l * l - 1.0))
    return tuple(out)


def compute_backsub_params(
    mu: MomentVector,
    config: SchemeConfig,
    beta=None,
    mixed: bool | None = None,
) -> BacksubParams:
    """Closed-form constants of the axis blocks for a standardized moment vector.

    With ``mixed=False`` (the K2.5 construction) every mixed moment is treated
    as zero.
    """
    if mixed is None:
        mixed = config.variant == K3
    mom = _moments(mu)
    if beta is None:
        beta = axis_signs(mu, config, mixed)
    d, g = config.delta, config.gamma
    m111 = abs(_m(mom, (1, 1, 1))) if mixed else 0.0

    a, b, cp, cm, third = [], [], [], [], []
    for axis in range(3):
        others = [o for o in range(3) if o != axis]
        l = config.l[axis]
        bx = beta[axis]
        if mixed:
            mix2 = sum(abs(_m(mom, _e(axis, 1, o, 1))) for o in others)
            twin = sum(
                abs(_m(mom, _e(axis, 1, o, 2))) + abs(_m(mom, _e(axis, 2, o, 1)))
                for o in others
            )
            x = sum(_m(mom, _e(axis, 1, o, 2)) for o in others)
        else:
            mix2 = twin = x = 0.0
        m3 = _m(mom, _e(axis, 3))
        a.append(_m(mom, _e(axis, 2)) - mix2)
        b.append(d * twin + g * m111)
        cp.append(bx * (x * (d * d * l - 1.0) + m3) / (l - 1.0))
        cm.append(bx * (m3 - x * (d * d * l + 1.0)) / (l + 1.0))
        third.append(_third_numerator(mom, axis, d, mixed))

    if mixed:
        s2 = sum(abs(_m(mom, _e(i, 1, j, 1))) for i, j in _PAIRS)
        s6 = sum(
            abs(_m(mom, _e(i, 1, j, 2))) + abs(_m(mom, _e(i, 2, j, 1))) for i, j in _PAIRS
        )
    else:
        s2 = s6 = 0.0
    a0 = -sum(_m(mom, _e(i, 2)) for i in range(3)) + (2.0 - d * d) * s2
    b0 = (
        sum(beta[i] * third[i] / config.l[i] for i in range(3))
        + g * (3.0 - g * g) * m111
        + d * (2.0 - d * d) * s6
    )
    return BacksubParams(
        tuple(a), tuple(b), tuple(cp), tuple(cm), tuple(third), tuple(float(x) for x in beta), a0, b0
    )


def center_weight_closed_form(params: BacksubParams, s: float, mass: float = 1.0) -> float:
    return mass + params.a0 / s**2 + params.b0 / s**3


def _finish(parts: list[tuple[np.ndarray, np.ndarray]], what: str) -> Ensemble:
    """Concatenate (velocities, weights) blocks, clip rounding noise, drop zeros."""
    v = np.concatenate([p[0] for p in parts]).reshape(-1, 3)
    w = np.concatenate([p[1] for p in parts]).reshape(-1)
    if np.any(w < -WEIGHT_TOL):
        raise NegativeWeight(f"{what}: negative weight {w.min():.3e}")
    w = np.where(w > 0.0, w, 0.0)
    return Ensemble(v, w)


def solve_k1(mu: MomentVector) -> Ensemble:
    """Reduce to at most four particles preserving mass and drift.

    In the standardized frame this is a single particle at the origin.  For a
    nonzero first moment ``M_a`` a particle is placed on axis ``a`` at
    ``4 M_a / M000`` with weight ``M000 / 4``, so its sign matches the moment
    and the center keeps at least a quarter of the mass.
    """
    mu0 = mu[(0, 0, 0)]
    if not mu0 > 0:
        raise ValueError("K1 needs positive mass")
    vs, ws = [np.zeros(3)], []
    rest = mu0
    for axis in range(3):
        m = mu.get(_e(axis, 1))
        if abs(m) <= ZERO_MOMENT * mu0:
            continue
        v = np.zeros(3)
        v[axis] = 4.0 * m / mu0
        vs.append(v)
        ws.append(0.25 * mu0)
        rest -= 0.25 * mu0
    return Ensemble(np.array(vs), np.array([rest] + ws))


def _axis_pair(axis: int, s: float, w_plus: float, w_minus: float, beta: float = 1.0):
    v = np.zeros((2, 3))
    v[0, axis] = beta * s
    v[1, axis] = -beta * s
    return v, np.array([w_plus, w_minus])


def solve_k2(mu: MomentVector, s: float) -> Ensemble:
    """Center plus six axis particles at ``+-s``; needs ``s >= sqrt(3)``."""
    mom = _moments(mu)
    parts = []
    total = 0.0
    for axis in range(3):
        w = _m(mom, _e(axis, 2)) / (2.0 * s * s)
        parts.append(_axis_pair(axis, s, w, w))
        total += 2.0 * w
    w0 = _m(mom, (0, 0, 0)) - total
    if w0 < -WEIGHT_TOL:
        raise SpeedTooSmall(f"K2 needs s >= sqrt(3); s = {s} gives center weight {w0:.3e}")
    parts.insert(0, (np.zeros((1, 3)), np.array([w0])))
    return _finish(parts, "K2")


def solve_quadruplet(m111: float, s_quad: float) -> Ensemble:
    """Four particles in the octants compatible with ``sign(M111)``."""
    if abs(m111) < ZERO_MOMENT:
        return Ensemble.empty()
    al = _sign(m111)
    v = s_quad * np.array(
        [[al, 1.0, 1.0], [-al, -1.0, 1.0], [-al, 1.0, -1.0], [al, -1.0, -1.0]]
    )
    w = np.full(4, abs(m111) / (4.0 * s_quad**3))
    return Ensemble(v, w)


def solve_twins(axis_pair, moments, s_twin: float) -> Ensemble:
    """Twin pairs for the mixed moments ``(M_11, M_12, M_21)`` of a coordinate plane.

    ``axis_pair`` is ``"xy"``, ``"xz"``, ``"yz"`` or an index pair; within the
    plane ``M_12`` means first coordinate to the power one and second to the
    power two.  Each pair reproduces its own moment and cancels in the others.
    """
    if isinstance(axis_pair, str):
        axis_pair = tuple("xyz".index(c) for c in axis_pair)
    i, j = axis_pair
    m11, m12, m21 = (0.0 if abs(m) < ZERO_MOMENT else float(m) for m in moments)
    st = s_twin
    vs, ws = [], []

    def plane(u, w_):
        v = np.zeros(3)
        v[i], v[j] = u, w_
        return v

    if m11:
        a = _sign(m11)
        vs += [plane(a * st, st), plane(-a * st, -st)]
        ws += [abs(m11) / (2 * st**2)] * 2
    if m12:
        a = _sign(m12)
        vs += [plane(a * st, st), plane(a * st, -st)]
        ws += [abs(m12) / (2 * st**3)] * 2
    if m21:
        a = _sign(m21)
        vs += [plane(st, a * st), plane(-st, a * st)]
        ws += [abs(m21) / (2 * st**3)] * 2
    if not vs:
        return Ensemble.empty()
    return Ensemble(np.array(vs), np.array(ws))


def _axis_weights(axis: int, params: BacksubParams, l: float, s: float) -> np.ndarray:
    a, b = params.a[axis], params.b[axis]
    beta = params.beta[axis]
    w1 = (a * s - b - params.c_plus[axis]) / (2.0 * s**3)
    w2 = (a * s - b - params.c_minus[axis]) / (2.0 * s**3)
    w3 = beta * params.third[axis] / ((l * l - 1.0) * l * s**3)
    return np.array([w1, w2, w3])


def solve_axis_block(axis, params: BacksubParams, l: float, s: float) -> Ensemble:
    """Particles on one axis at ``beta*s``, ``-beta*s`` and ``beta*l*s``.

    Raises :class:`NegativeWeight` when ``s`` is below the axis speed bound.
    """
    if isinstance(axis, str):
        axis = "xyz".index(axis)
    if not (l > 0 and l != 1 and s > 0):
        raise ValueError("need l > 0, l != 1, s > 0")
    w = _axis_weights(axis, params, l, s)
    beta = params.beta[axis]
    v = np.zeros((3, 3))
    v[:, axis] = beta * s * np.array([1.0, -1.0, l])
    return _finish([(v, w)], f"axis block {'xyz'[axis]}")


def _third_order_parts(mu: MomentVector, config: SchemeConfig, s: float, mixed: bool, params=None):
    mom = _moments(mu)
    if params is None:
        params = compute_backsub_params(mu, config, mixed=mixed)
    parts = []
    if mixed:
        q = solve_quadruplet(_m(mom, (1, 1, 1)), s / config.gamma)
        parts.append((q.velocities, q.weights))
        for i, j in _PAIRS:
            mm = (_m(mom, _e(i, 1, j, 1)), _m(mom, _e(i, 1, j, 2)), _m(mom, _e(i, 2, j, 1)))
            t = solve_twins((i, j), mm, s / config.delta)
            parts.append((t.velocities, t.weights))
    for axis in range(3):
        l = config.l[axis]
        w = _axis_weights(axis, params, l, s)
        v = np.zeros((3, 3))
        v[:, axis] = params.beta[axis] * s * np.array([1.0, -1.0, l])
        parts.append((v, w))
    total = sum(float(np.sum(p[1])) for p in parts)
    w0 = _m(mom, (0, 0, 0)) - total
    parts.insert(0, (np.zeros((1, 3)), np.array([w0])))
    return parts, params


def _solve_third(mu: MomentVector, config: SchemeConfig, s: float, mixed: bool, name: str) -> Ensemble:
    parts, params = _third_order_parts(mu, config, s, mixed)
    w0 = float(parts[0][1][0])
    closed = center_weight_closed_form(params, s, mu[(0, 0, 0)])
    if abs(closed - w0) > 1e-10 * max(1.0, abs(w0)):
        logger.warning("%s: center weight %.16g disagrees with closed form %.16g", name, w0, closed)
    return _finish(parts, name)


def solve_k3(mu: MomentVector, config: SchemeConfig, s: float) -> Ensemble:
    """Full third-order reduction: up to 26 particles."""
    if mu.order < 3:
        raise ValueError("K3 needs a moment vector of order 3")
    return _solve_third(mu, config, s, True, "K3")


def solve_k2_5(mu: MomentVector, config: SchemeConfig, s: float) -> Ensemble:
    """Second order plus the three pure third moments: up to 10 particles."""
    if mu.order < 3:
        raise ValueError("K2.5 needs a moment vector of order 3")
    return _solve_third(mu, config, s, False, "K2.5")


def solve(mu: MomentVector, config: SchemeConfig, s: float | None = None) -> Ensemble:
    """Dispatch to the variant's solver (``s`` is ignored by K1)."""
    if config.variant == K1:
        return solve_k1(mu)
    if config.variant == K2:
        return solve_k2(mu, s)
    if config.variant == K2_5:
        return solve_k2_5(mu, config, s)
    return solve_k3(mu, config, s)


def scheme_weights(mu: MomentVector, config: SchemeConfig, s: float, params=None) -> np.ndarray:
    """Every weight the variant would emit at speed ``s``, unclipped (center first).

    ``params`` may carry precomputed :class:`BacksubParams` for K2.5/K3.
    """
    if config.variant == K1:
        return solve_k1(mu).weights
    if config.variant == K2:
        mom = _moments(mu)
        axis = [_m(mom, _e(a, 2)) / (2.0 * s * s) for a in range(3)]
        return np.array([_m(mom, (0, 0, 0)) - 2.0 * sum(axis)] + axis + axis)
    parts, _ = _third_order_parts(mu, config, s, config.variant == K3, params)
    return np.concatenate([p[1] for p in parts])


def is_feasible(mu: MomentVector, config: SchemeConfig, s: float, params=None) -> bool:
    return bool(np.min(scheme_weights(mu, config, s, params)) >= -WEIGHT_TOL)


def speed_lower_bound(mu: MomentVector, config: SchemeConfig, params=None) -> float:
    """Explicit bound: ``sqrt(3)`` and, for K2.5/K3, ``(b + c)/a`` on every axis."""
    lo = SQRT3
    if config.variant in (K2_5, K3):
        if params is None:
            params = compute_backsub_params(mu, config)
        lo = max([lo] + [params.speed_bound(a) for a in range(3)])
    return lo


def select_min_speed(mu: MomentVector, config: SchemeConfig, tolerance: float | None = None) -> float:
    """Smallest speed (to ``tolerance``) at which every weight is nonnegative.

    Starts from :func:`speed_lower_bound`, scans upward geometrically by 1.1
    until the center weight is nonnegative and then bisects the last step.
    """
    if config.variant == K1:
        raise ValueError("K1 has no speed parameter")
    if tolerance is None:
        tolerance = config.speed.tolerance if isinstance(config.speed, MinimalSpeed) else 1e-6
    params = compute_backsub_params(mu, config) if config.variant in (K2_5, K3) else None
    lo = speed_lower_bound(mu, config, params)
    if not math.isfinite(lo) or lo > MAX_SPEED:
        raise NoFeasibleSpeed(f"speed lower bound {lo} exceeds {MAX_SPEED}")
    if is_feasible(mu, config, lo, params):
        return lo
    hi = lo
    while not is_feasible(mu, config, hi, params):
        lo, hi = hi, hi * 1.1
        if hi > MAX_SPEED:
            raise NoFeasibleSpeed(f"no feasible speed up to {MAX_SPEED}")
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if is_feasible(mu, config, mid, params):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class ReductionReport:
    n_in: int
    n_out: int
    s: float | None = None
    passed_through: bool = False
    reason: str = ""
    max_discrepancy: float = 0.0

    def as_dict(self) -> dict:
        return {
            "n_in": self.n_in,
            "n_out": self.n_out,
            "s": self.s,
            "passed_through": self.passed_through,
            "reason": self.reason,
            "max_discrepancy": self.max_discrepancy,
        }


def _reduce_k1(ensemble: Ensemble) -> Ensemble:
    # in the standardized frame K1 is one particle at the origin; mapped back
    # that is the drift velocity carrying the whole mass
    mass = float(np.sum(ensemble.weights))
    mean = np.sum(ensemble.weights[:, None] * ensemble.velocities, axis=0) / mass
    return Ensemble(mean[None, :], np.array([mass]))


def reduce_with_report(
    ensemble: Ensemble, config: SchemeConfig, check: bool = True
) -> tuple[Ensemble, ReductionReport]:
    """Standardize, solve, map back.  Unreducible groups pass through unchanged.

    A group passes through when it has no more particles than the scheme
    emits, when its covariance is degenerate, or when no feasible speed
    exists.  A fixed speed that is too small raises :class:`SpeedTooSmall`.
    """
    n = len(ensemble)
    report = ReductionReport(n_in=n, n_out=n)
    if n <= config.n_reduced:
        report.passed_through, report.reason = True, "too small"
        return ensemble, report
    if not ensemble.mass > 0:
        report.passed_through, report.reason = True, "no mass"
        return ensemble, report

    if config.variant == K1:
        out = _reduce_k1(ensemble)
        std = transform = None
    else:
        try:
            std, transform = standardize(ensemble)
        except DegenerateCovariance:
            report.passed_through, report.reason = True, "degenerate covariance"
            return ensemble, report
        mu = moment_vector(std, 3 if config.variant in (K2_5, K3) else 2)
        if isinstance(config.speed, FixedSpeed):
            s = config.speed.s
            try:
                reduced_std = solve(mu, config, s)
            except NegativeWeight as exc:
                raise SpeedTooSmall(f"fixed speed {s} infeasible: {exc}") from exc
        else:
            try:
                s = select_min_speed(mu, config)
            except NoFeasibleSpeed:
                report.passed_through, report.reason = True, "no feasible speed"
                return ensemble, report
            reduced_std = solve(mu, config, s)
        report.s = s
        out = transform.to_lab(reduced_std)

    report.n_out = len(out)
    if check:
        disc = verify_reduction(ensemble, out, 0, keys=config.preserved_keys()).max_relative
        extra = config.standard_frame_keys()
        if extra:
            chk = verify_reduction(std, transform.to_standard(out), 0, keys=extra)
            disc = max(disc, chk.max_relative)
        report.max_discrepancy = disc
    return out, report


def reduce(ensemble: Ensemble, config: SchemeConfig) -> Ensemble:
    return reduce_with_report(ensemble, config, check=False)[0]


def with_variant(config: SchemeConfig, variant: str) -> SchemeConfig:
    return replace(config, variant=variant)
