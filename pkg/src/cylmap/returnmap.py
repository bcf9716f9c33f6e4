"""Analytic return maps on the cylinder.

The reduced first-return map acts on points ``(s, y)`` with ``s`` taken modulo
the forcing period ``pi / omega`` and ``0 < y <= 1`` (section coordinate after
normalising the section half-width to 1):

    s' = s - ln(y) / K
    y' = y**delta + gamma * (1 + k1 * sin(2 omega s))

Root finding and continuation work with the lift (unbounded ``s``); reduction
modulo the period happens only when points are presented.  Fixed points of the
time-shifted map satisfy ``y = exp(-K T)``, so the constant ``K`` here is the
one appearing in ``exp(-K T)``; when the map is built from system-level
parameters it is the reciprocal of the return-time slope ``2 alpha /
(alpha + beta)^2``, which keeps the s-advance of the map equal to the physical
return time.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .system import DerivedConstants, SystemParams, derive_constants

__all__ = [
    "MapParams",
    "CylinderPoint",
    "Jacobian2",
    "RangeExitWarning",
    "RangeExitError",
    "exp_sine_integral",
    "local_map_v",
    "local_map_w",
    "unforced_return",
    "composed_return",
    "cylinder_step",
    "cylinder_map",
    "shifted_step",
    "map_jacobian",
    "iterate_map",
]


class RangeExitWarning(UserWarning):
    """The image left the neighbourhood where the map is derived (y' > 1)."""


class RangeExitError(ValueError):
    """The image left the domain of the map entirely (y' <= 0)."""


@dataclass(frozen=True)
class MapParams:
    """Parameter bundle of the cylinder map.

    ``K`` is the constant of the fixed-point relation ``y = exp(-K T)``;
    ``delta > 1`` the contraction exponent; ``gamma`` the (rescaled) forcing
    amplitude and ``k1`` the relative modulation depth of the forcing.
    """

    K: float
    delta: float
    omega: float
    gamma: float
    k1: float

    def __post_init__(self):
        if not self.K > 0.0:
            raise ValueError(f"requires K > 0, got {self.K}")
        if not self.delta > 1.0:
            raise ValueError(f"requires delta > 1, got {self.delta}")
        if not self.omega > 0.0:
            raise ValueError(f"requires omega > 0, got {self.omega}")
        if self.gamma < 0.0:
            raise ValueError(f"requires gamma >= 0, got {self.gamma}")
        if self.k1 < 0.0:
            raise ValueError(f"requires k1 >= 0, got {self.k1}")

    @property
    def period(self) -> float:
        """Forcing period pi / omega; the circumference of the cylinder."""
        return math.pi / self.omega

    @classmethod
    def from_system(
        cls,
        p: SystemParams,
        dc: DerivedConstants | None = None,
        eps: float = 1.0,
        k1_override: float | None = None,
    ) -> "MapParams":
        """Build the map bundle from system-level parameters.

        ``K`` is set to ``(alpha + beta)^2 / (2 alpha)`` so that the map's
        s-advance ``-ln(y)/K`` reproduces the physical return time slope.
        ``gamma`` is rescaled by ``delta_hat * K1 / eps`` (the normalisation
        that fixes the constant forcing coefficient to 1); ``eps`` is the
        section half-width the map is compared against.
        """
        if dc is None:
            dc = derive_constants(p)
        k1 = dc.k1 if k1_override is None else k1_override
        return cls(
            K=1.0 / dc.K,
            delta=dc.delta,
            omega=p.omega,
            gamma=p.gamma * dc.delta_hat * dc.K1 / eps,
            k1=k1,
        )

    def with_gamma(self, gamma: float) -> "MapParams":
        return replace(self, gamma=gamma)


@dataclass(frozen=True)
class CylinderPoint:
    """A point (s, y) of the cylinder phase space; s may live on the lift."""

    s: float
    y: float

    def __post_init__(self):
        if not self.y > 0.0:
            raise ValueError(f"requires y > 0, got {self.y}")

    def canonical(self, omega: float) -> "CylinderPoint":
        """Reduce s into [0, pi/omega)."""
        period = math.pi / omega
        return CylinderPoint(self.s % period, self.y)


def exp_sine_integral(a: float, omega: float, s: float, t: float) -> float:
    """Closed form of ``int_s^t exp(-a (tau - s)) sin(2 omega tau) dtau``.

    Uses the antiderivative available because the forcing profile satisfies
    f'' = -f.  ``a`` must be nonzero; the a = 0 case has a different
    antiderivative and is rejected.
    """
    if a == 0.0:
        raise ValueError("a = 0 is outside the domain of this antiderivative")

    front = -(a * a) / (a * a + 4.0 * omega * omega)

    def anti(tau: float) -> float:
        return (
            front
            * math.exp(-a * (tau - s))
            * (math.sin(2.0 * omega * tau) / a
               + 2.0 * omega * math.cos(2.0 * omega * tau) / (a * a))
        )

    return anti(t) - anti(s)


def local_map_v(
    s: float,
    y1: float,
    w1: float,
    p: SystemParams,
    dc: DerivedConstants,
    eps: float = 1.0,
) -> tuple[float, float, float]:
    """Passage map through the neighbourhood of the north saddle.

    Takes entry data ``(s, y1, w1)`` on the incoming face and returns
    ``(t1, x_out, w_out)``: the exit time and the exit-face coordinates.
    The forcing contributes ``gamma * k_bar * sin(2 omega t1)`` to the
    leading exit coordinate, first order in gamma.
    """
    if not 0.0 < y1 <= eps:
        raise ValueError(f"requires 0 < y1 <= eps; y1={y1} (y1 <= 0 never exits)")
    e_rate = p.alpha + p.beta
    t1 = s + math.log(eps / y1) / e_rate
    x_out = eps ** (1.0 - dc.delta_hat) * y1**dc.delta_hat
    if p.gamma != 0.0:
        x_out += p.gamma * dc.k_bar * math.sin(2.0 * p.omega * t1)
    w_out = w1 * (eps / y1) ** (-2.0 / e_rate)
    return t1, x_out, w_out


def local_map_w(
    s: float,
    x2: float,
    w2: float,
    p: SystemParams,
    dc: DerivedConstants,
    eps: float = 1.0,
) -> tuple[float, float, float]:
    """Passage map through the neighbourhood of the south saddle.

    First order in gamma; the forcing enters through the constant ``K1``
    both in the flight time and in the exit coordinate.
    """
    if not 0.0 < x2 <= eps:
        raise ValueError(f"requires 0 < x2 <= eps; x2={x2}")
    e_rate = p.alpha + p.beta
    t2 = s + math.log(eps / x2) / e_rate
    y_out = eps ** (1.0 - dc.delta_hat) * x2**dc.delta_hat
    if p.gamma != 0.0:
        t2 += p.gamma * dc.K1 / (x2 * e_rate)
        y_out *= 1.0 + p.gamma * dc.K1 * dc.delta_hat / x2
    w_out = w2 * (eps / x2) ** (-2.0 / e_rate)
    return t2, y_out, w_out


def unforced_return(y: float, w: float, dc: DerivedConstants):
    """Unforced first-return map in section coordinates (y, w), eps = 1."""
    return y**dc.delta, w * y ** (2.0 * dc.K)


def composed_return(
    s: float,
    y: float,
    w: float,
    p: SystemParams,
    dc: DerivedConstants,
    eps: float = 1.0,
) -> tuple[float, float, float]:
    """Full composition of the two passage maps with identity transitions.

    Kept unsimplified as a secondary map for error studies; at gamma = 0 its
    (s, y) part coincides with the reduced cylinder map exactly.
    """
    t1, x_out, w_out = local_map_v(s, y, w, p, dc, eps)
    return local_map_w(t1, x_out, w_out, p, dc, eps)


def cylinder_step(s, y, mp: MapParams):
    """One application of the return map on the lift (no mod reduction).

    Accepts scalars or numpy arrays and returns ``(s', y')``.
    """
    s_next = s - np.log(y) / mp.K
    y_next = y**mp.delta + mp.gamma * (1.0 + mp.k1 * np.sin(2.0 * mp.omega * s))
    return s_next, y_next


def shifted_step(s, y, T: float, mp: MapParams):
    """Return map shifted by the auxiliary time offset: lift minus (T, 0)."""
    s_next, y_next = cylinder_step(s, y, mp)
    return s_next - T, y_next


def cylinder_map(pt: CylinderPoint, mp: MapParams) -> CylinderPoint:
    """Return map on the cylinder with s reduced into [0, pi/omega).

    Warns when the image leaves the modelled neighbourhood (y' > 1) and
    raises :class:`RangeExitError` when y' <= 0, which can happen for
    ``k1 > 1`` where the forcing term may turn negative.
    """
    s_next, y_next = cylinder_step(pt.s, pt.y, mp)
    if y_next <= 0.0:
        raise RangeExitError(f"image y' = {y_next} <= 0 left the domain")
    if y_next > 1.0:
        warnings.warn(
            f"image y' = {y_next} > 1 left the modelled neighbourhood",
            RangeExitWarning,
            stacklevel=2,
        )
    return CylinderPoint(s_next % mp.period, y_next)


@dataclass(frozen=True)
class Jacobian2:
    """2x2 derivative with closed-form eigenvalue pair."""

    matrix: np.ndarray

    @property
    def trace(self) -> float:
        return float(self.matrix[0, 0] + self.matrix[1, 1])

    @property
    def det(self) -> float:
        m = self.matrix
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    @property
    def eigenvalues(self) -> tuple[complex, complex]:
        """Roots of lambda^2 - trace*lambda + det via the quadratic formula."""
        tr, de = self.trace, self.det
        root = cmath.sqrt(complex(tr * tr - 4.0 * de, 0.0))
        lam1 = (tr + root) / 2.0
        lam2 = (tr - root) / 2.0
        return lam1, lam2


def map_jacobian(s: float, y: float, mp: MapParams) -> Jacobian2:
    """Derivative of the cylinder map (equals that of any shifted map)."""
    if not y > 0.0:
        raise ValueError(f"requires y > 0, got {y}")
    m = np.array(
        [
            [1.0, -1.0 / (mp.K * y)],
            [
                2.0 * mp.omega * mp.gamma * mp.k1 * math.cos(2.0 * mp.omega * s),
                mp.delta * y ** (mp.delta - 1.0),
            ],
        ]
    )
    return Jacobian2(m)


def iterate_map(mp: MapParams, pt: CylinderPoint, n: int) -> list[CylinderPoint]:
    """Orbit [pt, G(pt), ..., G^n(pt)] on the cylinder.

    Orbits that leave (0, 1] are truncated (the returned list is shorter
    than n + 1) rather than clamped.
    """
    if n < 0:
        raise ValueError(f"requires n >= 0, got {n}")
    orbit = [pt.canonical(mp.omega)]
    current = orbit[0]
    for _ in range(n):
        s_next, y_next = cylinder_step(current.s, current.y, mp)
        if y_next <= 0.0 or y_next > 1.0:
            warnings.warn(
                "orbit left the modelled neighbourhood; truncating",
                RangeExitWarning,
                stacklevel=2,
            )
            break
        current = CylinderPoint(s_next % mp.period, y_next)
        orbit.append(current)
    return orbit
