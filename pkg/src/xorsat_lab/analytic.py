"""Closed-form and numeric theory for random k-XORSAT decimation.

Central objects: the density-evolution map ``phi(z) = 1 - exp(-lam - d z^(k-1))``
whose extremal fixed points alpha_lo <= alpha_hi drive everything; the free
entropy whose stationary points coincide with those fixed points; the degree
thresholds d_min < d_core < d_sat; the decimation-time window (theta_lo,
theta_hi); and the condensation curve lam_cond characterized both by equal
free-entropy heights and by an ODE in d.

Root finding is bisection-based with monotone fixed-point iteration plus a
guarded Newton polish; everything is plain double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.integrate import quad

from .formula import InvalidParameters


class OutOfRegimeError(ValueError):
    """Raised when parameters leave the regime where a quantity is defined."""


# ---------------------------------------------------------------------------
# parameters and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Mean variable degree d, clause width k, decimation intensity lam."""

    d: float
    k: int
    lam: float = 0.0

    def __post_init__(self):
        if self.k < 3:
            raise InvalidParameters("clause width k must be >= 3")
        if self.d < 0:
            raise InvalidParameters("mean degree d must be >= 0")
        if self.lam < 0:
            raise InvalidParameters("lam must be >= 0")

    @property
    def theta(self) -> float:
        return 1.0 - math.exp(-self.lam)

    @classmethod
    def from_theta(cls, d: float, k: int, theta: float) -> "ModelParams":
        if not (0.0 <= theta < 1.0):
            raise InvalidParameters("theta must lie in [0, 1)")
        return cls(d, k, -math.log1p(-theta))


@dataclass(frozen=True)
class FixedPointReport:
    alpha_lo: float
    alpha_hi: float
    alpha_max: float
    entropy_lo: float
    entropy_hi: float
    lo_stable: bool
    hi_stable: bool
    degenerate: bool    # extremal fixed points numerically indistinguishable
    near_tie: bool      # entropy heights within 1e-12: the condensation point


@dataclass(frozen=True)
class Thresholds:
    k: int
    d_min: float
    d_core: float
    d_sat: float


@dataclass(frozen=True)
class DecimationThresholds:
    """Degree thresholds plus the decimation-time phase boundaries at (d, k)."""

    k: int
    d: float
    d_min: float
    d_core: float
    d_sat: float
    z_lo: float
    z_hi: float
    lam_lo: float       # below this lam a single fixed point (clamped at 0)
    lam_hi: float       # above this lam a single fixed point
    theta_lo: float
    theta_hi: float
    lam_cond: float
    theta_cond: float


# ---------------------------------------------------------------------------
# numba cores
# ---------------------------------------------------------------------------

@njit(cache=True)
def _phi_c(z, d, k, lam):
    return 1.0 - math.exp(-lam - d * z ** (k - 1))


@njit(cache=True)
def _solve_fp(d, k, lam, from_one):
    """Extremal fixed point of the density map by monotone iteration with a
    guarded Newton polish; iteration from 0 gives the smallest fixed point,
    from 1 the largest."""
    z = 1.0 if from_one else 0.0
    budget = 500
    total = 0
    while True:
        done = False
        for _ in range(budget):
            zn = _phi_c(z, d, k, lam)
            total += 1
            if abs(zn - z) < 1e-14:
                z = zn
                done = True
                break
            z = zn
        if done or total >= 400000:
            break
        budget = min(budget * 8, 400000 - total)
    for _ in range(80):
        e = math.exp(-lam - d * z ** (k - 1))
        zeta = 1.0 - e - z
        slope = d * (k - 1) * z ** (k - 2) * e - 1.0 if z > 0.0 else -1.0
        if slope == 0.0:
            break
        zn = z - zeta / slope
        if zn < 0.0:
            zn = 0.0
        elif zn > 1.0:
            zn = 1.0
        if abs(zn - z) < 1e-16:
            z = zn
            break
        z = zn
    return z


@njit(cache=True)
def _max_zeta_lambda0(d, k):
    """max_z (phi(z) - z) at lam = 0, by grid scan plus ternary refinement;
    positive exactly when a positive fixed point exists."""
    best = -1.0
    zb = 0.5
    for i in range(1, 4000):
        z = i / 4000.0
        val = 1.0 - math.exp(-d * z ** (k - 1)) - z
        if val > best:
            best = val
            zb = z
    lo = zb - 1.0 / 4000.0
    hi = zb + 1.0 / 4000.0
    if lo < 0.0:
        lo = 0.0
    if hi > 1.0:
        hi = 1.0
    for _ in range(200):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = 1.0 - math.exp(-d * m1 ** (k - 1)) - m1
        f2 = 1.0 - math.exp(-d * m2 ** (k - 1)) - m2
        if f1 < f2:
            lo = m1
        else:
            hi = m2
    z = 0.5 * (lo + hi)
    return 1.0 - math.exp(-d * z ** (k - 1)) - z


@njit(cache=True)
def _cond_ode_rhs(d, k, lam):
    a_lo = _solve_fp(d, k, lam, False)
    a_hi = _solve_fp(d, k, lam, True)
    if a_hi - a_lo < 1e-12:
        return -a_lo ** (k - 1)
    return -(a_hi ** k - a_lo ** k) / (k * (a_hi - a_lo))


@njit(cache=True)
def _rk4_lambda_cond(k, d_start, d_targets, step):
    """Integrate the condensation ODE from (d_start, lam=0) down through the
    descending targets; returns lam at each target."""
    out = np.empty(d_targets.shape[0])
    d = d_start
    lam = 0.0
    for i in range(d_targets.shape[0]):
        target = d_targets[i]
        while d > target + 1e-15:
            h = step
            if d - target < h:
                h = d - target
            h = -h
            k1 = _cond_ode_rhs(d, k, lam)
            k2 = _cond_ode_rhs(d + 0.5 * h, k, lam + 0.5 * h * k1)
            k3 = _cond_ode_rhs(d + 0.5 * h, k, lam + 0.5 * h * k2)
            k4 = _cond_ode_rhs(d + h, k, lam + h * k3)
            lam += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            d += h
            if lam < 0.0:
                lam = 0.0
        out[i] = lam
    return out


# ---------------------------------------------------------------------------
# maps and fixed points
# ---------------------------------------------------------------------------

def _check_z(z: float):
    if not (0.0 <= z <= 1.0):
        raise InvalidParameters(f"z={z} outside [0, 1]")


def fixed_point_map(z: float, p: ModelParams) -> float:
    """Density-evolution map z -> 1 - exp(-lam - d z^(k-1))."""
    _check_z(z)
    return 1.0 - math.exp(-p.lam - p.d * z ** (p.k - 1))


def fixed_point_map_slope(z: float, p: ModelParams) -> float:
    _check_z(z)
    return p.d * (p.k - 1) * z ** (p.k - 2) * math.exp(-p.lam - p.d * z ** (p.k - 1))


def free_entropy(z: float, p: ModelParams) -> float:
    """exp(-lam - d z^(k-1)) - d(k-1)/k z^k + d z^(k-1) - d/k."""
    _check_z(z)
    d, k, lam = p.d, p.k, p.lam
    return math.exp(-lam - d * z ** (k - 1)) - d * (k - 1) / k * z ** k + d * z ** (k - 1) - d / k


def free_entropy_slope(z: float, p: ModelParams) -> float:
    """d(k-1) z^(k-2) (phi(z) - z); vanishes exactly at fixed points."""
    _check_z(z)
    return p.d * (p.k - 1) * z ** (p.k - 2) * (fixed_point_map(z, p) - z)


def solve_fixed_points(p: ModelParams) -> FixedPointReport:
    """Smallest and largest fixed points of the density map, their entropy
    heights, stability, and the entropy maximizer (ties resolved downward)."""
    a_lo = _solve_fp(p.d, p.k, p.lam, False)
    a_hi = _solve_fp(p.d, p.k, p.lam, True)
    if a_hi < a_lo:  # numerically identical; enforce the ordering
        a_lo = a_hi = 0.5 * (a_lo + a_hi)
    ent_lo = free_entropy(a_lo, p)
    ent_hi = free_entropy(a_hi, p)
    degenerate = abs(a_hi - a_lo) < 1e-8
    near_tie = (not degenerate) and abs(ent_hi - ent_lo) < 1e-12
    alpha_max = a_hi if ent_hi > ent_lo else a_lo
    return FixedPointReport(
        alpha_lo=a_lo,
        alpha_hi=a_hi,
        alpha_max=alpha_max,
        entropy_lo=ent_lo,
        entropy_hi=ent_hi,
        lo_stable=fixed_point_map_slope(a_lo, p) < 1.0,
        hi_stable=fixed_point_map_slope(a_hi, p) < 1.0,
        degenerate=degenerate,
        near_tie=near_tie,
    )


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------

def d_min(k: int) -> float:
    """((k-1)/(k-2))^(k-2), the algorithmic threshold in mean degree."""
    if k < 3:
        raise InvalidParameters("k must be >= 3")
    return ((k - 1) / (k - 2)) ** (k - 2)


def tangency_roots(d: float, k: int) -> tuple[float, float]:
    """The two roots of d(k-1) z^(k-2) (1-z) = 1, bracketing (k-2)/(k-1).

    At d extremely close to d_min the double root is reported as an equal
    pair; below d_min there are no roots.
    """
    dm = d_min(k)
    if d < dm:
        raise OutOfRegimeError(f"d={d} <= d_min({k})={dm}: no roots")
    z_dag = (k - 2) / (k - 1)

    def g(z: float) -> float:
        return d * (k - 1) * z ** (k - 2) * (1.0 - z) - 1.0

    if g(z_dag) <= 0.0:
        return z_dag, z_dag
    lo = _bisect(g, 1e-300, z_dag, increasing=True)
    hi = _bisect(g, z_dag, 1.0 - 1e-16, increasing=False)
    return lo, hi


def _bisect(fn, a, b, increasing, iters=200):
    fa = fn(a)
    if increasing:
        if fa > 0:
            return a
    else:
        if fn(b) > 0:
            return b
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        val = fn(mid)
        pos = val > 0
        if pos == increasing:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)


def _lam_boundary(z: float, k: int) -> float:
    return -math.log1p(-z) - z / ((k - 1) * (1.0 - z))


@lru_cache(maxsize=None)
def d_core(k: int) -> float:
    """Threshold for a positive largest fixed point at lam = 0."""
    def has_core(d: float) -> float:
        return _max_zeta_lambda0(d, k)

    lo, hi = d_min(k), float(k)
    assert has_core(hi) > 0
    return _bisect(has_core, lo, hi, increasing=True)


@lru_cache(maxsize=None)
def d_sat(k: int) -> float:
    """Satisfiability threshold: where the largest fixed point's entropy
    height overtakes the height at zero."""
    dc = d_core(k)

    def overtakes(d: float) -> float:
        p = ModelParams(d, k, 0.0)
        a_hi = _solve_fp(d, k, 0.0, True)
        return free_entropy(a_hi, p) - free_entropy(0.0, p)

    hi = float(k)
    assert overtakes(hi) > 0
    return _bisect(overtakes, dc + 1e-7, hi, increasing=True)


@lru_cache(maxsize=None)
def thresholds(k: int) -> Thresholds:
    return Thresholds(k=k, d_min=d_min(k), d_core=d_core(k), d_sat=d_sat(k))


def lambda_window(d: float, k: int) -> tuple[float, float, float, float]:
    """(lam_lo, lam_hi, z_lo, z_hi): the lam interval with two stable fixed
    points, together with the polynomial roots it derives from."""
    z_lo, z_hi = tangency_roots(d, k)
    lam_hi = _lam_boundary(z_lo, k)
    lam_lo = max(0.0, _lam_boundary(z_hi, k))
    return lam_lo, lam_hi, z_lo, z_hi


def lambda_cond(d: float, k: int, method: str = "both",
                ode_step: float = 1e-3, tol: float = 1e-6) -> tuple[float, float]:
    """The condensation point lam_cond(d, k), as (lam, theta).

    method 'bisect': locate the sign change of the entropy-height difference
    inside the two-fixed-point window.  method 'ode': integrate the
    condensation ODE down from d_sat.  'both' cross-validates to ``tol``.
    """
    ths = thresholds(k)
    if not (ths.d_min < d < ths.d_sat):
        raise OutOfRegimeError(f"d={d} outside (d_min, d_sat) for k={k}")
    lam = None
    if method in ("bisect", "both"):
        lam = _lambda_cond_bisect(d, k)
    if method in ("ode", "both"):
        lam_ode = float(_rk4_lambda_cond(k, ths.d_sat, np.array([d]), ode_step)[0])
        if method == "ode":
            lam = lam_ode
        elif abs(lam - lam_ode) > tol:
            raise ArithmeticError(
                f"lam_cond methods disagree: bisect={lam}, ode={lam_ode}")
    return lam, 1.0 - math.exp(-lam)


def _lambda_cond_bisect(d: float, k: int) -> float:
    lam_lo, lam_hi, _, _ = lambda_window(d, k)

    def height_gap(lam: float) -> float:
        p = ModelParams(d, k, lam)
        a_lo = _solve_fp(d, k, lam, False)
        a_hi = _solve_fp(d, k, lam, True)
        return free_entropy(a_hi, p) - free_entropy(a_lo, p)

    a = lam_lo + 1e-12
    b = lam_hi - 1e-12
    return _bisect(height_gap, a, b, increasing=True)


def lambda_cond_curve(k: int, d_values, ode_step: float = 1e-3,
                      validate: bool = True, tol: float = 1e-6) -> np.ndarray:
    """lam_cond over a grid of d values with one shared ODE integration;
    optionally cross-validated against per-point bisection."""
    ths = thresholds(k)
    ds = np.asarray(sorted(d_values, reverse=True), dtype=float)
    if ds.size and not (ths.d_min < ds.min() and ds.max() < ths.d_sat):
        raise OutOfRegimeError("d grid must lie inside (d_min, d_sat)")
    lams = _rk4_lambda_cond(k, ths.d_sat, ds, ode_step)
    if validate:
        for d, lam in zip(ds, lams):
            lam_b = _lambda_cond_bisect(d, k)
            if abs(lam - lam_b) > tol:
                raise ArithmeticError(
                    f"lam_cond methods disagree at d={d}: ode={lam}, bisect={lam_b}")
    lookup = {float(d): float(l) for d, l in zip(ds, lams)}
    return np.array([lookup[float(d)] for d in d_values])


def thresholds_at(d: float, k: int, ode_step: float = 1e-3) -> DecimationThresholds:
    """Full threshold set at (d, k), lam_cond by the equal-height bisection."""
    ths = thresholds(k)
    if not (ths.d_min < d < ths.d_sat):
        raise OutOfRegimeError(f"d={d} outside (d_min, d_sat) for k={k}")
    lam_lo, lam_hi, z_lo, z_hi = lambda_window(d, k)
    lam_c = _lambda_cond_bisect(d, k)
    return DecimationThresholds(
        k=k, d=d,
        d_min=ths.d_min, d_core=ths.d_core, d_sat=ths.d_sat,
        z_lo=z_lo, z_hi=z_hi,
        lam_lo=lam_lo, lam_hi=lam_hi,
        theta_lo=1.0 - math.exp(-lam_lo),
        theta_hi=1.0 - math.exp(-lam_hi),
        lam_cond=lam_c,
        theta_cond=1.0 - math.exp(-lam_c),
    )


# ---------------------------------------------------------------------------
# success probability and trajectory predictions
# ---------------------------------------------------------------------------

def expected_conflicts(d: float, k: int) -> float:
    """Expected number of conflict events of guided decimation, as the
    closed-form integral over the contraction variable; defined below d_min."""
    dm = d_min(k)
    if d <= 0:
        raise OutOfRegimeError("d must be positive")
    if d >= dm - 1e-9:
        raise OutOfRegimeError(
            f"d={d} too close to or above d_min({k})={dm}")

    def integrand(z: float) -> float:
        return z ** (2 * k - 4) * (1.0 - z) / (1.0 - d * (k - 1) * z ** (k - 2) * (1.0 - z))

    val, _ = quad(integrand, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    return d * d * (k - 1) ** 2 / 4.0 * val


def success_probability(d: float, k: int) -> float:
    """Limiting probability that guided decimation finds a satisfying
    assignment, for 0 < d < d_min."""
    return math.exp(-expected_conflicts(d, k))


def conflict_rate(d: float, k: int, theta: float) -> float:
    """Branching intensity f(theta) = d(k-1)(1-alpha) alpha^(k-2) of the
    unit-propagation cascade at decimation time theta."""
    lam = -math.log1p(-theta)
    a = _solve_fp(d, k, lam, False)
    return d * (k - 1) * (1.0 - a) * a ** (k - 2)


@dataclass(frozen=True)
class TrajectoryPrediction:
    """Limits of the unit-propagation trajectory at decimation time theta."""

    theta: float
    n_frac: float                     # unassigned fraction
    m_frac: tuple                     # clause-density by width, index 0..k
    conflict_rate: float

    def per_step_conflict_probability(self, n: int) -> float:
        f = self.conflict_rate
        return f * f / (4.0 * n * (1.0 - self.theta) * (1.0 - f) ** 2)


def ucp_trajectory_prediction(d: float, k: int, theta: float) -> TrajectoryPrediction:
    """Closed-form trajectory limits; valid for d < d_min at any theta, and
    for d in (d_min, d_sat) strictly before theta_hi."""
    if not (0.0 <= theta < 1.0):
        raise InvalidParameters("theta must lie in [0, 1)")
    dm = d_min(k)
    if d > dm:
        ths = thresholds(k)
        if d >= ths.d_sat:
            raise OutOfRegimeError(f"d={d} >= d_sat({k})")
        lam_lo, lam_hi, _, _ = lambda_window(d, k)
        theta_hi = 1.0 - math.exp(-lam_hi)
        if theta >= theta_hi:
            raise OutOfRegimeError(
                f"theta={theta} >= theta_hi={theta_hi}: trajectory law not established")
    lam = -math.log1p(-theta)
    a = _solve_fp(d, k, lam, False)
    m_frac = tuple(
        d / k * math.comb(k, w) * (1.0 - a) ** w * a ** (k - w) for w in range(k + 1)
    )
    f = d * (k - 1) * (1.0 - a) * a ** (k - 2)
    return TrajectoryPrediction(theta=theta, n_frac=1.0 - a, m_frac=m_frac, conflict_rate=f)


def expected_conflicts_from_trajectory(d: float, k: int) -> float:
    """Expected conflict count as the integral of the per-step conflict
    probability along the trajectory; equals ``expected_conflicts``."""
    dm = d_min(k)
    if not (0 < d < dm):
        raise OutOfRegimeError("trajectory route defined for 0 < d < d_min")

    def integrand(theta: float) -> float:
        f = conflict_rate(d, k, theta)
        return f * f / (4.0 * (1.0 - theta) * (1.0 - f) ** 2)

    val, _ = quad(integrand, 0.0, 1.0, epsabs=1e-11, epsrel=1e-11, limit=200)
    return val


def nullity_prediction(d: float, k: int, theta: float) -> float:
    """Limiting nullity density of the decimated system: the free-entropy
    height at the maximizing fixed point."""
    p = ModelParams.from_theta(d, k, theta)
    report = solve_fixed_points(p)
    return free_entropy(report.alpha_max, p)


def tree_mark_recursion(p: ModelParams, depth: int, mode: str) -> float:
    """Depth-``depth`` value of the branching-tree mark recursion
    p <- 1 - exp(-d (1 - e^-lam (1 - p))^(k-1)), started at 0 ('null' mode)
    or 1 ('frozen' mode)."""
    if depth < 0:
        raise InvalidParameters("depth must be >= 0")
    if mode == "null":
        val = 0.0
    elif mode == "frozen":
        val = 1.0
    else:
        raise InvalidParameters("mode must be 'null' or 'frozen'")
    decay = math.exp(-p.lam)
    for _ in range(depth):
        val = 1.0 - math.exp(-p.d * (1.0 - decay * (1.0 - val)) ** (p.k - 1))
    return val
