"""Fixed points of the shifted return map: regions, stability, bifurcations.

Fixed points of the map shifted by a time offset ``T`` satisfy
``y = exp(-K T)`` together with the level condition

    F(T) = gamma * (1 + k1 * sin(2 omega s)),   F(T) = exp(-K T) - exp(-delta K T).

``F`` is unimodal with peak ``M`` at ``T_peak``; intersecting its level with
the range ``gamma * [1 - k1, 1 + k1]`` of the forcing profile organises the
whole parameter plane: five regions, saddle-node surfaces, a Hopf locus for
``T > T_peak`` and codimension-two points with a double eigenvalue 1 where
saddle-node and Hopf curves meet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .returnmap import CylinderPoint, MapParams, cylinder_step, map_jacobian

__all__ = [
    "FixedPointRecord",
    "Region",
    "BifurcationCurve",
    "BTPoint",
    "PendulumParams",
    "CentreError",
    "forcing_level",
    "forcing_level_slope",
    "forcing_level_curvature",
    "peak_T",
    "peak_level",
    "classify_region",
    "saddle_node_times",
    "fixed_points_at",
    "classify_stability",
    "count_profile",
    "hopf_locus",
    "bt_points",
    "double_eigenvalue_scan",
    "frequency_locked",
    "pendulum_reduction",
    "pendulum_orbit_deviation",
]

#: eigenvalue-modulus band treated as non-hyperbolic
HYPERBOLICITY_TOL = 1e-8

#: relative tolerance for region-boundary detection
BOUNDARY_RTOL = 1e-12


class CentreError(ValueError):
    """No locking centre at the requested period (level condition fails)."""


# ---------------------------------------------------------------------------
# the scalar level function F and its calculus
# ---------------------------------------------------------------------------

def forcing_level(T, mp: MapParams):
    """F(T) = exp(-K T) - exp(-delta K T); forcing level of a fixed point."""
    kt = mp.K * np.asarray(T, dtype=float)
    return np.exp(-kt) - np.exp(-mp.delta * kt)


def forcing_level_slope(T, mp: MapParams):
    """dF/dT = -K exp(-K T) (1 - delta exp(-(delta - 1) K T))."""
    kt = mp.K * np.asarray(T, dtype=float)
    return -mp.K * np.exp(-kt) * (1.0 - mp.delta * np.exp(-(mp.delta - 1.0) * kt))


def forcing_level_curvature(T, mp: MapParams):
    """d2F/dT2 = K^2 exp(-K T) - delta^2 K^2 exp(-delta K T)."""
    kt = mp.K * np.asarray(T, dtype=float)
    return mp.K**2 * np.exp(-kt) - mp.delta**2 * mp.K**2 * np.exp(-mp.delta * kt)


def peak_T(mp: MapParams) -> float:
    """Location of the global maximum of F: ln(delta) / (K (delta - 1))."""
    return math.log(mp.delta) / (mp.K * (mp.delta - 1.0))


def peak_level(mp: MapParams) -> float:
    """Maximum of F: delta^(1/(1-delta)) - delta^(delta/(1-delta)), in (0, 1)."""
    d = mp.delta
    return d ** (1.0 / (1.0 - d)) - d ** (d / (1.0 - d))


# ---------------------------------------------------------------------------
# regions of the (k1, gamma) plane
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """Region label of a (k1, gamma) parameter point with its witnesses."""

    label: str  # 'R1'..'R5' or 'boundary'
    witnesses: dict = field(default_factory=dict)


def classify_region(mp: MapParams) -> Region:
    """Classify (k1, gamma) by the position of gamma*(1 -+ k1) against M.

    Points within ``BOUNDARY_RTOL`` (relative) of one of the separating
    curves ``k1 = 1``, ``gamma (1 - k1) = M``, ``gamma (1 + k1) = M`` are
    labelled ``'boundary'`` rather than tie-broken.
    """
    if not mp.k1 > 0.0 or not mp.gamma > 0.0:
        raise ValueError("region classification needs k1 > 0 and gamma > 0")
    m = peak_level(mp)
    lo = mp.gamma * (1.0 - mp.k1)
    hi = mp.gamma * (1.0 + mp.k1)
    witnesses = {"k1_minus_1": mp.k1 - 1.0, "lo_minus_M": lo - m, "hi_minus_M": hi - m}

    def near(x, ref):
        return abs(x) <= BOUNDARY_RTOL * abs(ref)

    if near(mp.k1 - 1.0, 1.0) or near(lo - m, m) or near(hi - m, m):
        return Region("boundary", witnesses)
    if mp.k1 < 1.0:
        if lo > m:
            return Region("R1", witnesses)
        if hi > m:
            return Region("R2", witnesses)
        return Region("R3", witnesses)
    if hi > m:
        return Region("R4", witnesses)
    return Region("R5", witnesses)


# ---------------------------------------------------------------------------
# saddle-node surfaces
# ---------------------------------------------------------------------------

def _level_roots(level: float, mp: MapParams) -> list[float]:
    """Both solutions of F(T) = level for 0 < level <= M (rising, falling)."""
    m = peak_level(mp)
    t_peak = peak_T(mp)
    if not 0.0 < level <= m:
        return []
    if abs(level - m) <= 1e-12 * m:
        return [t_peak, t_peak]
    lo = t_peak
    while forcing_level(lo, mp) > level:
        lo /= 2.0
    left = brentq(lambda t: forcing_level(t, mp) - level, lo, t_peak,
                  xtol=1e-15, rtol=8.9e-16)
    hi = max(-math.log(level) / mp.K, t_peak) + 1.0
    right = brentq(lambda t: forcing_level(t, mp) - level, t_peak, hi,
                   xtol=1e-15, rtol=8.9e-16)
    return [left, right]


def saddle_node_times(mp: MapParams) -> list[float]:
    """Sorted T values at which fixed-point pairs collide.

    Collisions happen on the levels ``gamma (1 + k1)`` (any ``k1``) and,
    when ``k1 < 1`` so the lower edge of the forcing range is positive,
    also on ``gamma (1 - k1)``.  An empty list means the parameters admit
    no saddle-nodes (region 1 or region 4).
    """
    if not mp.k1 > 0.0 or not mp.gamma > 0.0:
        raise ValueError("saddle-node levels need k1 > 0 and gamma > 0")
    times: list[float] = []
    times += _level_roots(mp.gamma * (1.0 + mp.k1), mp)
    lo = mp.gamma * (1.0 - mp.k1)
    if lo > 0.0:
        times += _level_roots(lo, mp)
    return sorted(times)


# ---------------------------------------------------------------------------
# fixed points at a given shift T and their stability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedPointRecord:
    """Fixed point of the T-shifted map with spectrum and stability class."""

    s: float
    y: float
    T: float
    branch: str  # 'star' (smaller s) or 'diamond' (larger s)
    eigenvalues: tuple[complex, complex]
    stability: str  # 'sink' | 'saddle' | 'source' | 'nonhyperbolic'

    @property
    def point(self) -> CylinderPoint:
        return CylinderPoint(self.s, self.y)


def classify_stability(eigenvalues, tol: float = HYPERBOLICITY_TOL) -> str:
    """Stability class from the eigenvalue moduli against the unit circle."""
    mods = sorted(abs(lam) for lam in eigenvalues)
    if any(1.0 - tol <= m <= 1.0 + tol for m in mods):
        return "nonhyperbolic"
    if mods[1] < 1.0:
        return "sink"
    if mods[0] > 1.0:
        return "source"
    return "saddle"


#: |sin| closer to 1 than this is treated as a tangency (single root)
TANGENCY_TOL = 1e-12


def fixed_points_at(T: float, mp: MapParams) -> list[FixedPointRecord]:
    """All fixed points of the T-shifted map, ordered by s in [0, pi/omega).

    Solves ``sin(2 omega s) = (F(T)/gamma - 1) / k1`` on one period; an
    interior level gives two roots, a tangency one, a level outside
    [-1, 1] none.
    """
    if not T > 0.0:
        raise ValueError(f"requires T > 0, got {T}")
    if mp.gamma <= 0.0 or mp.k1 <= 0.0:
        return []
    y = math.exp(-mp.K * T)
    c = (float(forcing_level(T, mp)) / mp.gamma - 1.0) / mp.k1
    if abs(c) > 1.0 + TANGENCY_TOL:
        return []
    c = min(1.0, max(-1.0, c))
    if c >= 1.0 - TANGENCY_TOL:
        thetas = [0.5 * math.pi]
    elif c <= -1.0 + TANGENCY_TOL:
        thetas = [1.5 * math.pi]
    else:
        t0 = math.asin(c)
        thetas = sorted([t0 % (2.0 * math.pi), (math.pi - t0) % (2.0 * math.pi)])
    labels = ["star", "diamond"] if len(thetas) == 2 else ["star"]
    records = []
    for theta, label in zip(thetas, labels):
        s = theta / (2.0 * mp.omega)
        eig = map_jacobian(s, y, mp).eigenvalues
        records.append(
            FixedPointRecord(
                s=s, y=y, T=T, branch=label,
                eigenvalues=eig, stability=classify_stability(eig),
            )
        )
    return records


def count_profile(T_grid, mp: MapParams) -> np.ndarray:
    """Vectorised fixed-point count over a T grid (0, 1 or 2 per T)."""
    if mp.gamma <= 0.0 or mp.k1 <= 0.0:
        return np.zeros(len(np.asarray(T_grid)), dtype=int)
    c = (forcing_level(np.asarray(T_grid, dtype=float), mp) / mp.gamma - 1.0) / mp.k1
    counts = np.zeros(c.shape, dtype=int)
    counts[np.abs(c) <= 1.0 + TANGENCY_TOL] = 2
    counts[np.abs(np.abs(c) - 1.0) <= TANGENCY_TOL] = 1
    return counts


# ---------------------------------------------------------------------------
# Hopf locus and double-eigenvalue points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BifurcationCurve:
    """A sampled bifurcation locus in the (T, gamma) plane at fixed k1."""

    kind: str  # 'saddle_node' | 'hopf'
    samples: list  # list of dicts with keys T, gamma, s, y (+ extras)
    metadata: dict = field(default_factory=dict)


def _hopf_residual(T: float, mp: MapParams) -> float:
    f = float(forcing_level(T, mp))
    df = float(forcing_level_slope(T, mp))
    return (f - mp.gamma) ** 2 - (mp.k1 * mp.gamma) ** 2 + df * df / (4.0 * mp.omega**2)


def _hopf_residual_slope(T: float, mp: MapParams) -> float:
    f = float(forcing_level(T, mp))
    df = float(forcing_level_slope(T, mp))
    d2f = float(forcing_level_curvature(T, mp))
    return 2.0 * (f - mp.gamma) * df + df * d2f / (2.0 * mp.omega**2)


def _hopf_T(mp: MapParams) -> float | None:
    """Root T > T_peak of the Hopf condition for the given gamma, if any."""
    t_peak = peak_T(mp)
    h_peak = _hopf_residual(t_peak, mp)
    scale = (mp.k1 * mp.gamma) ** 2
    if abs(h_peak) <= 1e-14 * max(scale, 1e-300):
        return t_peak
    t_cap = max(-math.log(1e-6 * mp.gamma) / mp.K, 2.0 * t_peak)
    ts = np.linspace(t_peak, t_cap, 800)
    vals = np.array([_hopf_residual(t, mp) for t in ts])
    sign_change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if len(sign_change) == 0:
        return None
    i = sign_change[0]
    root = brentq(lambda t: _hopf_residual(t, mp), ts[i], ts[i + 1],
                  xtol=1e-15, rtol=8.9e-16)
    # Newton polish with the analytic derivative of the residual
    for _ in range(2):
        slope = _hopf_residual_slope(root, mp)
        if slope == 0.0:
            break
        root -= _hopf_residual(root, mp) / slope
    return root


def hopf_locus(mp: MapParams, gammas) -> BifurcationCurve:
    """Hopf samples (T, gamma) for each gamma in the grid that admits one.

    At each root the fixed point with unit-modulus non-real eigenvalues is
    attached; gammas whose residual has no root beyond the peak, or whose
    eigenvalues come out real, are skipped.
    """
    samples = []
    skipped = []
    for gamma in gammas:
        mpg = mp.with_gamma(float(gamma))
        root = _hopf_T(mpg)
        if root is None:
            skipped.append(float(gamma))
            continue
        match = None
        for rec in fixed_points_at(root, mpg):
            lam1, lam2 = rec.eigenvalues
            on_circle = abs(lam1.imag) > 0.0 and abs(abs(lam1) - 1.0) < 1e-6
            # endpoint of the locus: the eigenvalue pair degenerates to (1, 1)
            double_one = abs(lam1 - 1.0) < 1e-6 and abs(lam2 - 1.0) < 1e-6
            if on_circle or double_one:
                match = rec
                break
        if match is None:
            skipped.append(float(gamma))
            continue
        samples.append({"T": root, "gamma": float(gamma), "s": match.s, "y": match.y})
    return BifurcationCurve(
        kind="hopf",
        samples=samples,
        metadata={"k1": mp.k1, "omega": mp.omega, "skipped": skipped},
    )


@dataclass(frozen=True)
class BTPoint:
    """Codimension-two point where the derivative has a double eigenvalue 1."""

    T: float
    gamma: float
    s: float
    y: float
    trace: float
    det: float
    off_diagonal: float  # upper-right entry; nonzero certifies non-identity


def bt_points(mp: MapParams) -> list[BTPoint]:
    """Double-eigenvalue-1 points: gamma = M/(1+k1), plus M/(1-k1) if k1 < 1.

    Each returned point is verified to carry trace 2 and determinant 1 (to
    1e-8) with a nonvanishing off-diagonal entry, so the derivative is a
    nontrivial Jordan block.
    """
    if not mp.k1 > 0.0:
        raise ValueError("requires k1 > 0")
    m = peak_level(mp)
    t_peak = peak_T(mp)
    out = []
    cases = [(m / (1.0 + mp.k1), 0.25 * math.pi / mp.omega)]
    if mp.k1 < 1.0:
        cases.append((m / (1.0 - mp.k1), 0.75 * math.pi / mp.omega))
    for gamma, s in cases:
        mpg = mp.with_gamma(gamma)
        y = math.exp(-mpg.K * t_peak)
        jac = map_jacobian(s, y, mpg)
        tr, de = jac.trace, jac.det
        if abs(tr - 2.0) > 1e-8 or abs(de - 1.0) > 1e-8:
            raise ArithmeticError(
                f"double-eigenvalue certificate failed: trace={tr}, det={de}"
            )
        off = float(jac.matrix[0, 1])
        if off == 0.0:
            raise ArithmeticError("derivative is the identity; expected a Jordan block")
        out.append(BTPoint(T=t_peak, gamma=gamma, s=s, y=y, trace=tr, det=de,
                           off_diagonal=off))
    return out


def double_eigenvalue_scan(
    mp: MapParams, T_grid, tol: float = 1e-6
) -> list[tuple[float, float]]:
    """(T, s) of fixed points with |trace - 2| < tol and |det - 1| < tol.

    Brute-force certificate used to confirm that double-eigenvalue-1 points
    appear only at the predicted parameter values.
    """
    hits = []
    for T in np.asarray(T_grid, dtype=float):
        if T <= 0.0:
            continue
        for rec in fixed_points_at(float(T), mp):
            jac = map_jacobian(rec.s, rec.y, mp)
            if abs(jac.trace - 2.0) < tol and abs(jac.det - 1.0) < tol:
                hits.append((float(T), rec.s))
    return hits


# ---------------------------------------------------------------------------
# frequency locking and the pendulum reduction
# ---------------------------------------------------------------------------

def frequency_locked(n: int, mp: MapParams) -> list[FixedPointRecord]:
    """Fixed points of the unshifted map whose period locks to n forcing periods.

    Equivalent to ``fixed_points_at`` with ``T = n pi / omega``; the records
    are genuine fixed points of the cylinder map.
    """
    if n < 1:
        raise ValueError(f"requires n >= 1, got {n}")
    return fixed_points_at(n * math.pi / mp.omega, mp)


@dataclass(frozen=True)
class PendulumParams:
    """Constants of the damped-pendulum-with-torque model near a locking centre."""

    A: float
    B: float
    tau_scale: float
    y_c: float
    s_c: float
    ell: int
    valid_pendulum: bool  # B < 1 and gamma < M


def pendulum_reduction(ell: int, mp: MapParams, tol: float = 1e-6) -> PendulumParams:
    """Pendulum constants at the locking centre with period ell * pi / omega.

    Requires F(ell pi / omega) = gamma to ``tol`` (a centre exists there);
    the centre sits at sin(2 omega s) = 0 on the elliptic branch (s = 0
    representative).  ``valid_pendulum`` records whether the reduction is
    meaningful: torque B < 1 and gamma below the peak level.
    """
    if ell < 1:
        raise ValueError(f"requires ell >= 1, got {ell}")
    T = ell * math.pi / mp.omega
    residual = abs(float(forcing_level(T, mp)) - mp.gamma)
    if residual > tol:
        raise CentreError(
            f"|F(ell pi/omega) - gamma| = {residual:.3e} > {tol:.1e}: "
            "no locking centre at this period"
        )
    y_c = math.exp(-mp.K * T)
    a_const = math.sqrt(mp.gamma * mp.K / (2.0 * mp.omega * mp.k1 * y_c))
    b_const = mp.K * ell * math.pi / (mp.omega * mp.k1)
    tau_scale = math.sqrt(2.0 * mp.gamma * mp.omega * mp.k1 / (mp.K * y_c))
    return PendulumParams(
        A=a_const,
        B=b_const,
        tau_scale=tau_scale,
        y_c=y_c,
        s_c=0.0,
        ell=ell,
        valid_pendulum=(b_const < 1.0) and (mp.gamma < peak_level(mp)),
    )


def pendulum_orbit_deviation(
    pp: PendulumParams,
    mp: MapParams,
    x0: float,
    theta0: float,
    n: int,
) -> float:
    """Max gap between the map orbit and the discrete pendulum over n steps.

    Both systems are iterated from the same initial condition in centred
    coordinates ``x = y/y_c - 1`` and ``theta = 2 omega s`` (on the lift);
    the deviation is the max over steps of the larger coordinate gap.
    """
    gamma_hat = mp.gamma / pp.y_c
    s = theta0 / (2.0 * mp.omega)
    y = pp.y_c * (1.0 + x0)
    x_p, th_p = x0, theta0
    th_g = theta0
    dev = 0.0
    for _ in range(n):
        s, y = cylinder_step(s, y, mp)
        th_g = 2.0 * mp.omega * s
        x_g = y / pp.y_c - 1.0
        x_p, th_p = (
            x_p + gamma_hat * (-x_p + mp.k1 * math.sin(th_p)),
            th_p + 2.0 * mp.omega * (pp.ell * math.pi / mp.omega - x_p / mp.K),
        )
        dev = max(dev, abs(x_g - x_p), abs(th_g - th_p))
    return dev
