"""Named flows and maps: Kirchhoff, Gerstner, the harmonic Koebe map and a steady shear."""

from __future__ import annotations

import math
from typing import Optional

from . import expr as ex
from .errors import DegenerateBoundary, DomainError
from .flows import BetaPath, LinearDependentSpec, RotationalSpec
from .harmonic import Disk, Domain, HarmonicMap, Rectangle

DEFAULT_G_ACCEL = 9.81  # m/s^2
KOEBE_RADIUS = 0.97

KOEBE_F = "(z - z^2/2 + z^3/6)/(1 - z)^3"
KOEBE_G = "(z^2/2 + z^3/6)/(1 - z)^3"


def kirchhoff(A: float = 1.0, k: float = 1.0, lam: float = 0.5, domain: Optional[Domain] = None) -> LinearDependentSpec:
    """``F0' = A e^{ikz}``, ``beta = lam`` constant, ``nu0 = 0``.

    ``F0`` is not univalent when the domain holds two labels on one
    horizontal line a multiple of ``2 pi / k`` apart, so domains at least
    that wide are rejected.
    """
    if A == 0 or k == 0:
        raise ValueError("A and k must be nonzero")
    if not 0 <= lam < 1:
        raise ValueError("lambda must lie in [0, 1)")
    if domain is None:
        domain = Domain(Rectangle(0.0, 3.0, -1.0, 0.0))
    if domain.width >= 2 * math.pi / abs(k):
        raise DomainError(
            f"domain width {domain.width} >= 2*pi/|k| = {2 * math.pi / abs(k)}: F0 would repeat along a row"
        )
    F0 = ex.parse("-(i*A/k)*exp(i*k*z)")
    return LinearDependentSpec(F0=F0, lam=complex(lam), beta=BetaPath.constant(lam), nu0=0.0,
                               domain=domain, params={"A": A, "k": k})


def gerstner(k: float = 1.0, g_accel: float = DEFAULT_G_ACCEL, domain: Optional[Domain] = None) -> RotationalSpec:
    """Gerstner's deep-water wave: ``F0 = z``, ``G0 = -(i/k) e^{-ikz}``, ``xi0 = sqrt(k g)``.

    Particles at depth label ``b < 0`` run round circles of radius
    ``e^{kb}/k`` with angular frequency ``xi0``.
    """
    if not k > 0 or not g_accel > 0:
        raise ValueError("k and g_accel must be positive")
    if domain is None:
        domain = Domain(Rectangle(0.0, 2 * math.pi / k, -2.0, -0.1))
    if domain.bounds[3] >= 0:
        raise DegenerateBoundary("Gerstner labels need Im z < 0; the Jacobian 1 - e^{2kb} vanishes at b = 0")
    return RotationalSpec(F0=ex.parse("z"), G0=ex.parse("-(i/k)*exp(-i*k*z)"), nu0=0.0,
                          xi0=math.sqrt(k * g_accel), domain=domain, params={"k": k})


def harmonic_koebe(mu: complex = 1.0, radius: float = KOEBE_RADIUS, n: int = 41) -> HarmonicMap:
    """``f + conj(mu g)`` on a disk grid; ``mu = 1`` is the harmonic Koebe map."""
    mu = complex(mu)
    if abs(abs(mu) - 1) > 1e-12:
        raise ValueError("|mu| must be 1")
    if not 0 < radius <= KOEBE_RADIUS:
        raise ValueError(f"grid radius must lie in (0, {KOEBE_RADIUS}]")
    G = ex.mul(ex.Const(mu), ex.parse(KOEBE_G))
    return HarmonicMap(ex.parse(KOEBE_F), G, Domain(Disk(0, radius), n, n))


def steady_shear(lam: float = 0.5, domain: Optional[Domain] = None) -> LinearDependentSpec:
    """``F0 = z``, ``beta = lam``: the time-independent shear ``z + lam conj(z)``."""
    if domain is None:
        domain = Domain(Rectangle(-1.0, 1.0, -1.0, 1.0))
    return LinearDependentSpec(F0=ex.parse("z"), lam=complex(lam), beta=BetaPath.constant(lam),
                               nu0=0.0, domain=domain)


PRESETS = {
    "Kirchhoff": kirchhoff,
    "Gerstner": gerstner,
    "HarmonicKoebe": harmonic_koebe,
    "SteadyShear": steady_shear,
}

FLOW_PRESETS = ("Kirchhoff", "Gerstner", "SteadyShear")


def resolve(preset_id: str, **kwargs):
    try:
        factory = PRESETS[preset_id]
    except KeyError:
        raise KeyError(f"unknown preset {preset_id!r}; choose from {sorted(PRESETS)}") from None
    return factory(**kwargs)
