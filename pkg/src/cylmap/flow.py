"""Numerical integration of the forced system and the measured return map.

The integrator is an explicit embedded Runge-Kutta 5(4) pair with dense
output; section crossings are located by bracketing on the dense interpolant
followed by root polishing, and rejected when the normal velocity is below
the transversality floor.  The measured circuit through all four section
faces is the ground truth against which the analytic cylinder map is checked:
it integrates the full nonlinear field and assumes nothing about the
transition maps between the saddle neighbourhoods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .system import SystemParams, vector_field

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "SectionPoint",
    "ReturnSample",
    "IntegrationError",
    "DivergenceError",
    "SectionTimeoutError",
    "TransversalityError",
    "integrate",
    "next_section_crossing",
    "numerical_return",
    "sphere_drift",
    "section_crossing_log",
    "sphere_point",
]


class IntegrationError(RuntimeError):
    """The integrator failed (step-size underflow or internal error)."""


class DivergenceError(IntegrationError):
    """The state norm exceeded the divergence bound."""


class SectionTimeoutError(RuntimeError):
    """No section crossing within the configured time horizon."""


class TransversalityError(RuntimeError):
    """A located crossing was tangential (normal velocity below the floor)."""


#: crossings with |normal velocity| below this are rejected as grazes
TRANSVERSALITY_FLOOR = 1e-9

#: trajectories whose radius exceeds this are declared divergent
DIVERGENCE_RADIUS = 10.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances, step bound and the section half-width ``eps``."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    eps: float = 0.1
    max_time: float = 200.0

    def __post_init__(self):
        for name, tol in (("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)):
            if not 0.0 < tol <= 1e-3:
                raise ValueError(f"requires 0 < {name} <= 1e-3, got {tol}")
        if not 0.0 < self.eps <= 0.5:
            raise ValueError(f"requires 0 < eps <= 0.5, got {self.eps}")
        if not self.max_step > 0.0:
            raise ValueError(f"requires max_step > 0, got {self.max_step}")
        if not self.max_time > 0.0:
            raise ValueError(f"requires max_time > 0, got {self.max_time}")


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution with the dense interpolant between the nodes."""

    t: np.ndarray
    states: np.ndarray  # shape (n, 3)
    dense: object

    def __call__(self, t):
        return self.dense(t)

    @property
    def radius(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


@dataclass(frozen=True)
class SectionPoint:
    """A transversal crossing of one of the four section faces.

    ``c1`` is the strictly positive in-face coordinate (the one carrying the
    passage dynamics), ``c2`` the radial offset from the sphere pole.
    """

    section: str  # 'in_v' | 'out_v' | 'in_w' | 'out_w'
    c1: float
    c2: float
    time: float
    state: np.ndarray


# section -> (crossing coordinate index, crossing direction, hemisphere sign)
_SECTION_DEFS = {
    "in_v": (0, -1.0, 1.0),
    "out_v": (1, 1.0, 1.0),
    "in_w": (1, -1.0, -1.0),
    "out_w": (0, 1.0, -1.0),
}


def _section_point(name: str, t: float, u: np.ndarray, eps: float) -> SectionPoint:
    axis, _, pole = _SECTION_DEFS[name]
    return SectionPoint(
        section=name, c1=float(u[1 - axis]), c2=float(u[2] - pole),
        time=float(t), state=np.asarray(u, dtype=float),
    )


def _divergence_event(t, u, p):
    return float(np.dot(u, u)) - DIVERGENCE_RADIUS**2


_divergence_event.terminal = True
_divergence_event.direction = 1.0


def integrate(
    u0, t0: float, t1: float, p: SystemParams, cfg: IntegratorConfig
) -> Trajectory:
    """Integrate the forced field from ``u0`` over [t0, t1] with dense output."""
    if not t1 > t0:
        raise ValueError(f"requires t1 > t0, got [{t0}, {t1}]")
    sol = solve_ivp(
        vector_field,
        (t0, t1),
        np.asarray(u0, dtype=float),
        args=(p,),
        method="RK45",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
        dense_output=True,
        events=[_divergence_event],
    )
    if sol.status == 1:
        raise DivergenceError(
            f"state norm exceeded {DIVERGENCE_RADIUS} at t = {sol.t_events[0][0]:.6g}"
        )
    if not sol.success:
        raise IntegrationError(sol.message)
    return Trajectory(t=sol.t, states=sol.y.T, dense=sol.sol)


def sphere_drift(traj: Trajectory) -> float:
    """Max deviation of the sample radii from the unit sphere."""
    return float(np.max(np.abs(traj.radius - 1.0)))


def _nudge(u: np.ndarray, t: float, p: SystemParams) -> tuple[np.ndarray, float]:
    # tiny explicit Euler step so an event at the start point cannot re-fire
    dt = 1e-9
    return u + dt * vector_field(t, u, p), t + dt


def next_section_crossing(
    u, t: float, target: str, p: SystemParams, cfg: IntegratorConfig
) -> SectionPoint:
    """First transversal crossing of ``target`` after time ``t``.

    The crossing coordinate is located by the integrator's bracketing on the
    dense output; the result is rejected (and the search continued) if it
    happens in the wrong hemisphere, and an error is raised if the normal
    velocity is below the transversality floor or the horizon is exhausted.
    """
    if target not in _SECTION_DEFS:
        raise ValueError(f"unknown section {target!r}")
    axis, direction, pole = _SECTION_DEFS[target]

    def crossing(tt, uu, pp):
        return uu[axis] - cfg.eps

    crossing.terminal = True
    crossing.direction = direction

    u_cur = np.asarray(u, dtype=float)
    t_cur = float(t)
    deadline = t_cur + cfg.max_time
    u_cur, t_cur = _nudge(u_cur, t_cur, p)
    while t_cur < deadline:
        sol = solve_ivp(
            vector_field,
            (t_cur, deadline),
            u_cur,
            args=(p,),
            method="RK45",
            rtol=cfg.rel_tol,
            atol=cfg.abs_tol,
            max_step=cfg.max_step,
            dense_output=True,
            events=[crossing, _divergence_event],
        )
        if sol.status == 0:
            raise SectionTimeoutError(
                f"no {target} crossing within horizon {cfg.max_time}"
            )
        if not sol.success and sol.status != 1:
            raise IntegrationError(sol.message)
        if len(sol.t_events[1]):
            raise DivergenceError(
                f"state norm exceeded {DIVERGENCE_RADIUS} before reaching {target}"
            )
        t_ev = float(sol.t_events[0][0])
        u_ev = sol.y_events[0][0]
        if pole * u_ev[2] > 0.0:
            normal_velocity = float(vector_field(t_ev, u_ev, p)[axis])
            if abs(normal_velocity) < TRANSVERSALITY_FLOOR:
                raise TransversalityError(
                    f"tangential {target} crossing at t = {t_ev:.6g} "
                    f"(normal velocity {normal_velocity:.2e})"
                )
            return _section_point(target, t_ev, u_ev, cfg.eps)
        # crossed the same face near the other pole: skip past and continue
        u_cur, t_cur = _nudge(u_ev, t_ev, p)
    raise SectionTimeoutError(f"no {target} crossing within horizon {cfg.max_time}")


@dataclass(frozen=True)
class ReturnSample:
    """One measured circuit of the network: entry face back to entry face."""

    s: float  # arrival time mod pi/omega
    y: float
    w: float
    start_time: float
    return_time: float  # raw arrival time
    crossings: tuple  # the four section points of the circuit

    @property
    def flight_time(self) -> float:
        return self.return_time - self.start_time


_CIRCUIT = ("out_v", "in_w", "out_w", "in_v")


def numerical_return(
    s: float, y: float, w: float, p: SystemParams, cfg: IntegratorConfig
) -> ReturnSample:
    """Measured first-return to the entry face, started at time ``s``.

    ``(y, w)`` are the in-face coordinates; the start point is
    ``(eps, y, 1 + w)`` in ambient coordinates.  The circuit passes through
    all four faces by full nonlinear integration.
    """
    if not 0.0 < y < cfg.eps:
        raise ValueError(f"requires 0 < y < eps, got y={y}")
    if abs(w) >= cfg.eps:
        raise ValueError(f"requires |w| < eps, got w={w}")
    u = np.array([cfg.eps, y, 1.0 + w])
    t = float(s)
    crossings = []
    for target in _CIRCUIT:
        sp = next_section_crossing(u, t, target, p, cfg)
        crossings.append(sp)
        u, t = sp.state, sp.time
    period = math.pi / p.omega
    arrival = crossings[-1]
    return ReturnSample(
        s=arrival.time % period,
        y=arrival.c1,
        w=arrival.c2,
        start_time=float(s),
        return_time=arrival.time,
        crossings=tuple(crossings),
    )


def section_crossing_log(
    traj: Trajectory, p: SystemParams, cfg: IntegratorConfig
) -> list[SectionPoint]:
    """All transversal section crossings along an integrated trajectory.

    Scans the sample intervals for sign changes of the two face coordinates
    and polishes each crossing time on the dense interpolant by bisection.
    """
    out = []
    t = traj.t
    for name, (axis, direction, pole) in _SECTION_DEFS.items():
        vals = traj.states[:, axis] - cfg.eps
        flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        for i in flips:
            lo, hi = t[i], t[i + 1]
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if (traj(mid)[axis] - cfg.eps) * (traj(lo)[axis] - cfg.eps) <= 0.0:
                    hi = mid
                else:
                    lo = mid
            t_ev = 0.5 * (lo + hi)
            u_ev = traj(t_ev)
            velocity = float(vector_field(t_ev, u_ev, p)[axis])
            if pole * u_ev[2] > 0.0 and velocity * direction > TRANSVERSALITY_FLOOR:
                out.append(_section_point(name, t_ev, u_ev, cfg.eps))
    return sorted(out, key=lambda sp: sp.time)


def sphere_point(y: float, eps: float, hemisphere: float = 1.0) -> np.ndarray:
    """Entry-face point (eps, y, z) lying exactly on the unit sphere."""
    z2 = 1.0 - eps * eps - y * y
    if z2 <= 0.0:
        raise ValueError("no sphere point with these face coordinates")
    return np.array([eps, y, hemisphere * math.sqrt(z2)])
