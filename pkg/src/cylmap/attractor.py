"""Averaged dynamics, invariant curves, invariant manifolds, Lyapunov exponents.

For small forcing the y-dynamics averages to ``g(y) = y**delta + gamma`` with
a stable/unstable fixed-point pair; the full map then carries an attracting
invariant closed curve winding once around the cylinder inside an explicit
annulus around the stable averaged point.  The curve is computed by a forward
graph transform.  Saddle manifolds are grown from eigenvector segments (the
stable side through Newton inversion of the map) and their intersections
bracket the homoclinic-tangle parameter window probed by the Lyapunov
estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .bifurcation import FixedPointRecord, fixed_points_at, peak_level
from .returnmap import MapParams, cylinder_step, map_jacobian

__all__ = [
    "AveragedFixedPoints",
    "InvariantCurve",
    "ManifoldPolyline",
    "LyapunovResult",
    "NoFixedPointsError",
    "GraphTransformError",
    "ConvergenceError",
    "DriftError",
    "averaged_fixed_points",
    "invariant_curve",
    "rotation_number",
    "trace_manifolds",
    "polylines_intersect",
    "homoclinic_window",
    "lyapunov_exponent",
]


class NoFixedPointsError(ValueError):
    """The averaged map has no fixed points (gamma at or above the peak level)."""


class GraphTransformError(RuntimeError):
    """The image of the graph is not a graph (s-image not monotone)."""


class ConvergenceError(RuntimeError):
    """An iteration failed to converge within its budget."""


class DriftError(RuntimeError):
    """An orbit drifted away from the invariant curve."""


# ---------------------------------------------------------------------------
# averaged y-dynamics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AveragedFixedPoints:
    """Fixed-point pair of g(y) = y**delta + gamma with the annulus radius."""

    y_hat: float  # stable
    y_tilde: float  # unstable
    y_star: float  # where g'(y) = 1
    R: float


def averaged_fixed_points(mp: MapParams) -> AveragedFixedPoints:
    """Stable/unstable fixed points of the averaged map, with annulus radius.

    Requires ``0 < gamma < M`` (at gamma = M the pair collides in a
    saddle-node and beyond it no fixed point exists).  The bracketing is
    exact: g - id is positive at gamma, negative at the critical point
    y_star and positive again at 1.
    """
    gamma, delta = mp.gamma, mp.delta
    m = peak_level(mp)
    if not 0.0 < gamma < m:
        raise NoFixedPointsError(
            f"averaged map has fixed points only for 0 < gamma < {m:.6g}; "
            f"got gamma={gamma}"
        )
    y_star = delta ** (1.0 / (1.0 - delta))

    def gap(y):
        return y**delta + gamma - y

    y_hat = brentq(gap, gamma, y_star, xtol=1e-15, rtol=8.9e-16)
    y_tilde = brentq(gap, y_star, 1.0, xtol=1e-15, rtol=8.9e-16)

    assert 0.0 < gamma < y_hat < y_star
    assert y_hat < gamma * delta / (delta - 1.0)
    assert y_tilde > gamma + delta ** (delta / (1.0 - delta))

    r = 2.0 * mp.k1 / (1.0 - delta * y_hat ** (delta - 1.0))
    assert r > 0.0 or mp.k1 == 0.0
    return AveragedFixedPoints(y_hat=y_hat, y_tilde=y_tilde, y_star=y_star, R=r)


# ---------------------------------------------------------------------------
# invariant curve via the graph transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InvariantCurve:
    """Periodic graph y = h(s) sampled on a uniform s-grid."""

    s: np.ndarray
    h: np.ndarray
    residual: float
    iterations: int
    omega: float

    @property
    def period(self) -> float:
        return math.pi / self.omega

    @cached_property
    def _interp(self):
        return _periodic_interp(self.s, self.h, self.period)

    def __call__(self, s):
        return self._interp(np.asarray(s) % self.period)


def _periodic_interp(knots: np.ndarray, values: np.ndarray, period: float):
    ext_x = np.concatenate([knots - period, knots, knots + period])
    ext_y = np.tile(values, 3)
    return PchipInterpolator(ext_x, ext_y)


def invariant_curve(
    mp: MapParams,
    grid_size: int = 512,
    max_iter: int = 2000,
    tol: float = 1e-8,
) -> InvariantCurve:
    """Attracting invariant graph by forward iteration of the graph transform.

    Starting from the flat graph at the stable averaged point, each sweep
    pushes the sampled graph forward through the map and re-samples the
    image onto the uniform grid with monotone cubic interpolation in the
    image s-coordinate.  Convergence is sup-norm stagnation below ``tol``;
    the reported residual is the invariance defect
    sup |h(s'(s, h(s))) - y'(s, h(s))| of the converged graph.
    """
    period = mp.period
    s = np.arange(grid_size) * (period / grid_size)
    h = np.full(grid_size, averaged_fixed_points(mp).y_hat)
    for iteration in range(1, max_iter + 1):
        s_img, y_img = cylinder_step(s, h, mp)
        if np.any(np.diff(s_img) <= 0.0):
            raise GraphTransformError(
                "image of the graph is not a graph over s (fold in the s-image)"
            )
        interp = _periodic_interp(s_img, y_img, period)
        # shift each target point into the window covered by the image knots
        target = s + period * np.ceil((s_img[0] - s) / period)
        h_new = interp(target)
        if np.any(h_new <= 0.0):
            raise ConvergenceError("graph transform produced nonpositive values")
        gap = float(np.max(np.abs(h_new - h)))
        h = h_new
        if gap < tol:
            break
    else:
        raise ConvergenceError(f"graph transform did not settle in {max_iter} sweeps")
    s_img, y_img = cylinder_step(s, h, mp)
    residual = float(
        np.max(np.abs(_periodic_interp(s, h, period)(s_img % period) - y_img))
    )
    return InvariantCurve(s=s, h=h, residual=residual, iterations=iteration, omega=mp.omega)


def rotation_number(
    curve: InvariantCurve,
    mp: MapParams,
    n_iter: int = 4096,
    drift_tol: float | None = None,
) -> float:
    """Average s-advance per iterate on the curve, in units of the period.

    Iterates the full map from a point on the curve on the universal cover;
    raises :class:`DriftError` if the orbit leaves the curve neighbourhood
    (the curve is attracting, so staying nearby certifies the sample).
    """
    if drift_tol is None:
        drift_tol = max(100.0 * curve.residual, 1e-6)
    period = curve.period
    s, y = 0.0, float(curve(0.0))
    s0 = s
    for _ in range(n_iter):
        s, y = cylinder_step(s, y, mp)
        if abs(y - float(curve(s % period))) > drift_tol:
            raise DriftError("orbit left the invariant-curve neighbourhood")
    return (s - s0) / (n_iter * period)


# ---------------------------------------------------------------------------
# stable/unstable manifolds of a saddle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifoldPolyline:
    """One side of an invariant manifold as an ordered polyline on the lift."""

    saddle: FixedPointRecord
    side: str  # 'unstable+', 'unstable-', 'stable+', 'stable-'
    points: np.ndarray  # shape (n, 2): columns s (lift), y
    truncated: bool = False


def _eigen_data(rec: FixedPointRecord, mp: MapParams):
    jac = map_jacobian(rec.s, rec.y, mp)
    lam_u, lam_s = jac.eigenvalues
    if abs(lam_u.imag) > 1e-12 or abs(lam_s.imag) > 1e-12:
        raise ValueError("saddle must have real eigenvalues")
    lam_u, lam_s = float(lam_u.real), float(lam_s.real)
    if lam_u < lam_s:
        lam_u, lam_s = lam_s, lam_u
    if not (lam_u > 1.0 > lam_s > 0.0):
        raise ValueError(
            f"requires eigenvalues lam_u > 1 > lam_s > 0, got {lam_u}, {lam_s}"
        )
    b = float(jac.matrix[0, 1])

    def direction(lam):
        v = np.array([b, lam - 1.0])
        return v / np.linalg.norm(v)

    return lam_u, lam_s, direction(lam_u), direction(lam_s)


def _newton_inverse(target: np.ndarray, guess: np.ndarray, mp: MapParams,
                    shift: float, tol: float = 1e-12, max_iter: int = 40):
    """Solve shifted_map(q) = target by Newton with the analytic Jacobian."""
    q = guess.copy()
    for _ in range(max_iter):
        if q[1] <= 0.0:
            return None
        s_img, y_img = cylinder_step(q[0], q[1], mp)
        res = np.array([s_img - shift - target[0], y_img - target[1]])
        if np.max(np.abs(res)) < tol:
            return q
        jac = map_jacobian(q[0], q[1], mp).matrix
        try:
            q = q - np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            return None
    return None


def trace_manifolds(
    saddle: FixedPointRecord,
    mp: MapParams,
    arc_budget: float = 3.0,
    seed_offset: float = 1e-6,
    seed_count: int = 32,
    max_spacing: float = 5e-3,
    max_points: int = 20000,
) -> list[ManifoldPolyline]:
    """Grow all four manifold sides of a saddle of the T-shifted map.

    Unstable sides iterate a fundamental eigenvector segment forward,
    subdividing seeds wherever consecutive image points separate beyond
    ``max_spacing``; stable sides grow backward through Newton inversion
    of the map.  Growth stops at the arc budget, the point cap, or when
    an image leaves (0, 1] / an inversion fails (flagged as truncated).
    """
    lam_u, lam_s, v_u, v_s = _eigen_data(saddle, mp)
    shift = saddle.T
    base = np.array([saddle.s, saddle.y])
    out = []
    for name, vec, lam, forward in (
        ("unstable+", v_u, lam_u, True),
        ("unstable-", -v_u, lam_u, True),
        ("stable+", v_s, lam_s, False),
        ("stable-", -v_s, lam_s, False),
    ):
        ratio = lam if forward else 1.0 / lam
        ts = list(np.linspace(0.0, 1.0, seed_count, endpoint=False))
        pts = [base + seed_offset * ratio**t * vec for t in ts]
        polyline = [base + seed_offset * np.asarray(vec)]
        truncated = False
        arc = 0.0
        generation = 0
        while arc < arc_budget and len(polyline) < max_points:
            generation += 1
            next_pts = []
            for q in pts:
                if forward:
                    s_img, y_img = cylinder_step(q[0], q[1], mp)
                    img = np.array([s_img - shift, y_img])
                    if img[1] <= 0.0 or img[1] > 1.0:
                        img = None
                else:
                    img = _newton_inverse(q, q.copy(), mp, shift)
                    if img is None:
                        # retry from the linear backward extrapolation
                        img = _newton_inverse(q, base + (q - base) * ratio, mp, shift)
                if img is None:
                    truncated = True
                    break
                next_pts.append(img)
            if truncated:
                break
            # refine seeds where the image spacing exceeds the bound
            refined_ts, refined_pts = [ts[0]], [next_pts[0]]
            for i in range(1, len(next_pts)):
                gap = float(np.linalg.norm(next_pts[i] - next_pts[i - 1]))
                if gap > max_spacing and len(polyline) + len(refined_pts) < max_points:
                    t_mid = 0.5 * (ts[i - 1] + ts[i])
                    q_mid = base + seed_offset * ratio**t_mid * vec
                    img_mid = q_mid
                    bad = False
                    for g in range(generation):
                        if forward:
                            s_img, y_img = cylinder_step(img_mid[0], img_mid[1], mp)
                            img_mid = np.array([s_img - shift, y_img])
                            if img_mid[1] <= 0.0 or img_mid[1] > 1.0:
                                bad = True
                                break
                        else:
                            img_mid = _newton_inverse(
                                img_mid, img_mid.copy(), mp, shift
                            )
                            if img_mid is None:
                                bad = True
                                break
                    if not bad:
                        refined_ts.append(t_mid)
                        refined_pts.append(img_mid)
                refined_ts.append(ts[i])
                refined_pts.append(next_pts[i])
            ts, pts = refined_ts, refined_pts
            seg = np.asarray(pts)
            arc += float(np.sum(np.linalg.norm(np.diff(seg, axis=0), axis=1)))
            polyline.extend(pts)
        out.append(
            ManifoldPolyline(
                saddle=saddle, side=name,
                points=np.asarray(polyline), truncated=truncated,
            )
        )
    return out


def _cross2(ax, ay, bx, by):
    return ax * by - ay * bx


def _segment_sets_cross(p1, p2, q1, q2) -> bool:
    """Vectorised any-pair segment intersection with a bounding-box prefilter."""
    q_lo = np.minimum(q1, q2)
    q_hi = np.maximum(q1, q2)
    d2 = q2 - q1
    for start in range(0, len(p1), 256):
        pp1 = p1[start:start + 256]
        pp2 = p2[start:start + 256]
        p_lo = np.minimum(pp1, pp2)
        p_hi = np.maximum(pp1, pp2)
        boxes = (
            (p_lo[:, None, 0] <= q_hi[None, :, 0])
            & (p_hi[:, None, 0] >= q_lo[None, :, 0])
            & (p_lo[:, None, 1] <= q_hi[None, :, 1])
            & (p_hi[:, None, 1] >= q_lo[None, :, 1])
        )
        ii, jj = np.nonzero(boxes)
        if not len(ii):
            continue
        d1 = pp2[ii] - pp1[ii]
        dq = d2[jj]
        diff = q1[jj] - pp1[ii]
        denom = _cross2(d1[:, 0], d1[:, 1], dq[:, 0], dq[:, 1])
        ok = denom != 0.0
        if not np.any(ok):
            continue
        t = np.full(len(denom), -1.0)
        u = np.full(len(denom), -1.0)
        t[ok] = _cross2(diff[ok, 0], diff[ok, 1], dq[ok, 0], dq[ok, 1]) / denom[ok]
        u[ok] = _cross2(diff[ok, 0], diff[ok, 1], d1[ok, 0], d1[ok, 1]) / denom[ok]
        if np.any((t >= 0.0) & (t <= 1.0) & (u >= 0.0) & (u <= 1.0)):
            return True
    return False


def polylines_intersect(
    a: ManifoldPolyline,
    b: ManifoldPolyline,
    period: float,
    exclude_radius: float = 1e-3,
) -> bool:
    """True when the two polylines cross on the cylinder away from the saddle.

    The polylines live on the universal cover, so the second one is compared
    at every integer period shift that can overlap the first.  Segments with
    an endpoint within ``exclude_radius`` of (any copy of) the saddle are
    ignored: the manifolds always meet at the saddle itself.
    """
    s0, y0 = a.saddle.s, a.saddle.y

    def usable_segments(poly):
        pts = poly.points
        if len(pts) < 2:
            return None
        ds = np.abs((pts[:, 0] - s0 + 0.5 * period) % period - 0.5 * period)
        keep = np.hypot(ds, pts[:, 1] - y0) > exclude_radius
        mask = keep[:-1] & keep[1:]
        return pts[:-1][mask], pts[1:][mask]

    segs_a = usable_segments(a)
    segs_b = usable_segments(b)
    if segs_a is None or segs_b is None or not len(segs_a[0]) or not len(segs_b[0]):
        return False
    p1, p2 = segs_a
    q1, q2 = segs_b
    a_min = min(p1[:, 0].min(), p2[:, 0].min())
    a_max = max(p1[:, 0].max(), p2[:, 0].max())
    b_min = min(q1[:, 0].min(), q2[:, 0].min())
    b_max = max(q1[:, 0].max(), q2[:, 0].max())
    k_lo = math.floor((a_min - b_max) / period)
    k_hi = math.ceil((a_max - b_min) / period)
    for k in range(k_lo, k_hi + 1):
        shift = np.array([k * period, 0.0])
        if _segment_sets_cross(p1, p2, q1 + shift, q2 + shift):
            return True
    return False


def homoclinic_window(
    mp: MapParams,
    T_values,
    arc_budget: float = 2.0,
    **trace_kwargs,
) -> tuple[float, float] | None:
    """Bracket the onset of homoclinic intersection along a T scan.

    For each T with a saddle fixed point, grows the unstable and stable
    manifolds and tests them for a crossing; returns the (T_lo, T_hi)
    bracket of the first indicator flip, or None if the indicator never
    changes.  Values without a saddle are skipped.
    """
    indicator: list[tuple[float, bool]] = []
    for T in T_values:
        saddle = next(
            (r for r in fixed_points_at(float(T), mp) if r.stability == "saddle"),
            None,
        )
        if saddle is None:
            continue
        polys = trace_manifolds(saddle, mp, arc_budget=arc_budget, **trace_kwargs)
        sides = {p.side: p for p in polys}
        hit = any(
            polylines_intersect(sides[u], sides[s], mp.period)
            for u in ("unstable+", "unstable-")
            for s in ("stable+", "stable-")
        )
        indicator.append((float(T), hit))
    for (t0, h0), (t1, h1) in zip(indicator[:-1], indicator[1:]):
        if h0 != h1:
            return (t0, t1)
    return None


# ---------------------------------------------------------------------------
# Lyapunov exponent
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovResult:
    """Largest Lyapunov exponent estimate of a map orbit."""

    value: float
    n_used: int
    truncated: bool


def lyapunov_exponent(
    pt,
    mp: MapParams,
    n_iter: int = 4000,
    n_discard: int = 500,
    T: float = 0.0,
    seed: int = 0,
) -> LyapunovResult:
    """Largest Lyapunov exponent along the orbit of ``pt``.

    Averages the log growth of a tangent vector renormalised every step,
    after discarding a transient.  ``T`` selects the shifted map (the shift
    changes the orbit, not the derivative).  Orbits leaving (0, 1] yield a
    truncated estimate flagged in the result.
    """
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2)
    v /= np.linalg.norm(v)
    s, y = float(pt[0]), float(pt[1])
    total = 0.0
    used = 0
    truncated = False
    for i in range(n_discard + n_iter):
        if i >= n_discard:
            v = map_jacobian(s, y, mp).matrix @ v
            norm = float(np.linalg.norm(v))
            if norm == 0.0:
                truncated = True
                break
            total += math.log(norm)
            v /= norm
            used += 1
        s_next, y_next = cylinder_step(s, y, mp)
        s_next -= T
        if y_next <= 0.0 or y_next > 1.0:
            truncated = True
            break
        s, y = s_next, y_next
    value = total / used if used else math.nan
    return LyapunovResult(value=value, n_used=used, truncated=truncated)
