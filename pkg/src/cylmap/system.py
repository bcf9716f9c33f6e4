"""Parameters, derived constants and the forced vector field on the sphere.

The autonomous part of the field keeps the unit sphere invariant and attracting
and carries a pair of saddles ``v = (0, 0, 1)`` and ``w = (0, 0, -1)`` joined
by a robust heteroclinic network.  A time-periodic term of amplitude ``gamma``
acts on the first component only; its period is ``pi / omega``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ParameterError",
    "SystemParams",
    "DerivedConstants",
    "EquilibriumData",
    "derive_constants",
    "vector_field",
    "equilibria",
    "kappa1",
    "kappa2",
]


class ParameterError(ValueError):
    """A system parameter violates one of the validity constraints."""


#: half-width of the warning band around the resonant value beta - alpha = -2
RESONANCE_WARN_WIDTH = 0.05


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the forced system.

    ``alpha`` and ``beta`` set the saddle spectrum (expanding rate
    ``alpha + beta``, contracting rate ``alpha - beta``), ``gamma`` is the
    forcing amplitude and ``omega`` half the forcing frequency.

    Raises
    ------
    ParameterError
        If any of ``alpha > 0``, ``beta < 0``, ``|beta| < alpha``,
        ``gamma >= 0``, ``omega > 0`` fails, or if ``beta - alpha`` equals
        the resonant value ``-2`` exactly.
    """

    alpha: float
    beta: float
    gamma: float = 0.0
    omega: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ParameterError(f"requires alpha > 0, got alpha={self.alpha}")
        if not self.beta < 0.0:
            raise ParameterError(f"requires beta < 0, got beta={self.beta}")
        if not abs(self.beta) < self.alpha:
            raise ParameterError(
                f"requires |beta| < alpha, got beta={self.beta} with alpha={self.alpha}"
            )
        if self.beta - self.alpha == -2.0:
            raise ParameterError(
                "beta - alpha = -2 is a first-order resonance of the saddle spectrum"
            )
        if abs(self.beta - self.alpha + 2.0) < RESONANCE_WARN_WIDTH:
            warnings.warn(
                "beta - alpha is close to the resonant value -2; the local "
                "linearisation degrades there",
                stacklevel=2,
            )
        if self.gamma < 0.0:
            raise ParameterError(f"requires gamma >= 0, got gamma={self.gamma}")
        if not self.omega > 0.0:
            raise ParameterError(f"requires omega > 0, got omega={self.omega}")

    @property
    def reduction_valid(self) -> bool:
        """True when the section coordinate y dominates the return dynamics.

        Holds iff ``(alpha - beta)^2 < 4 alpha``, the regime in which the
        two-dimensional cylinder reduction of the return map is justified.
        """
        return (self.alpha - self.beta) ** 2 < 4.0 * self.alpha


@dataclass(frozen=True)
class DerivedConstants:
    """Constants derived from :class:`SystemParams`.

    ``delta`` measures the attraction strength of the unperturbed network
    (``delta > 1`` attracts), ``K`` is the slope of the return time against
    ``ln(1/y)``, and ``K_hat = pi / K``.  ``k_bar``, ``K1`` and ``k1`` shape
    the forcing term of the reduced cylinder map.
    """

    delta_hat: float
    delta: float
    K: float
    K_hat: float
    M: float
    T_M: float
    k_bar: float
    K1: float
    k1: float


def derive_constants(p: SystemParams) -> DerivedConstants:
    """Compute every derived constant for a valid parameter set.

    ``K1`` is closed as the improper integral
    ``int_0^inf exp(-(alpha+beta) t) sin(2 omega t) dt
    = 2 omega / ((alpha+beta)^2 + 4 omega^2)``,
    which makes ``k1 = k_bar / K1`` a pure function of (alpha, beta, omega).
    """
    a, b, w = p.alpha, p.beta, p.omega
    e_rate = a + b
    c_rate = a - b
    delta_hat = c_rate / e_rate
    delta = delta_hat**2
    K = 2.0 * a / e_rate**2
    K_hat = math.pi * e_rate**2 / (2.0 * a)
    M = delta ** (1.0 / (1.0 - delta)) - delta ** (delta / (1.0 - delta))
    T_M = math.log(delta) / (K * (delta - 1.0))
    k_bar = 1.0 / math.sqrt(c_rate**2 + 4.0 * w**2)
    K1 = 2.0 * w / (e_rate**2 + 4.0 * w**2)
    return DerivedConstants(
        delta_hat=delta_hat,
        delta=delta,
        K=K,
        K_hat=K_hat,
        M=M,
        T_M=T_M,
        k_bar=k_bar,
        K1=K1,
        k1=k_bar / K1,
    )


def vector_field(t: float, u, p: SystemParams) -> np.ndarray:
    """Right-hand side of the forced system at time ``t`` and state ``u``.

    ``u`` is the ambient state ``(x, y, z)``; the forcing
    ``gamma (1 - x) sin(2 omega t)`` enters the first component only.
    """
    x, y, z = u
    r2 = x * x + y * y + z * z
    a, b = p.alpha, p.beta
    dx = x * (1.0 - r2) - a * x * z + b * x * z * z
    dy = y * (1.0 - r2) + a * y * z + b * y * z * z
    dz = z * (1.0 - r2) - a * (y * y - x * x) - b * z * (x * x + y * y)
    if p.gamma != 0.0:
        dx += p.gamma * (1.0 - x) * math.sin(2.0 * p.omega * t)
    return np.array([dx, dy, dz])


def kappa1(u) -> np.ndarray:
    """Reflection (x, y, z) -> (-x, y, z); a symmetry of the unforced field."""
    return np.array([-u[0], u[1], u[2]])


def kappa2(u) -> np.ndarray:
    """Reflection (x, y, z) -> (x, -y, z); survives the forcing."""
    return np.array([u[0], -u[1], u[2]])


@dataclass(frozen=True)
class EquilibriumData:
    """Spectrum of the unforced field at one of the polar saddles."""

    location: np.ndarray
    expanding: float
    contracting: float
    radial: float = -2.0

    @property
    def rate_ratio(self) -> float:
        """Contracting/expanding rate ratio; equals ``delta_hat``."""
        return self.contracting / self.expanding


def equilibria(p: SystemParams) -> tuple[EquilibriumData, EquilibriumData]:
    """Saddle data at the north and south poles of the unforced field."""
    e = p.alpha + p.beta
    c = p.alpha - p.beta
    v = EquilibriumData(location=np.array([0.0, 0.0, 1.0]), expanding=e, contracting=c)
    w = EquilibriumData(location=np.array([0.0, 0.0, -1.0]), expanding=e, contracting=c)
    return v, w
