"""Planar harmonic maps ``z -> F(z) + conj(G(z))`` on sampled label domains."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Optional, Union

import numpy as np
from scipy.spatial import cKDTree

from . import expr as ex
from .errors import DomainError, OrientationError, PoleError

DEGENERACY_TOL = 1e-12
DEFAULT_SEPARATION_TOL = 0.5
MIN_UNIVALENCE_GRID = 32


@dataclass(frozen=True)
class Rectangle:
    a_min: float
    a_max: float
    b_min: float
    b_max: float

    def __post_init__(self):
        if not (self.a_max > self.a_min and self.b_max > self.b_min):
            raise DomainError("rectangle needs positive extents")


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if not self.radius > 0:
            raise DomainError("disk needs a positive radius")


Shape = Union[Rectangle, Disk]


@dataclass(frozen=True)
class Domain:
    """A simply connected label domain together with its sampling grid.

    Grids are laid out b-major: row ``j`` holds all labels with ``b = b_j``
    in increasing ``a``.  Disks are sampled on their bounding-box lattice and
    masked to the closed disk.
    """

    shape: Shape
    n_a: int = 41
    n_b: int = 41

    def __post_init__(self):
        if self.n_a < 2 or self.n_b < 2:
            raise DomainError("grid needs at least 2 points per axis")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        s = self.shape
        if isinstance(s, Rectangle):
            return s.a_min, s.a_max, s.b_min, s.b_max
        c, r = s.center, s.radius
        return c.real - r, c.real + r, c.imag - r, c.imag + r

    @property
    def spacing(self) -> tuple[float, float]:
        a0, a1, b0, b1 = self.bounds
        return (a1 - a0) / (self.n_a - 1), (b1 - b0) / (self.n_b - 1)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        a0, a1, b0, b1 = self.bounds
        return np.linspace(a0, a1, self.n_a), np.linspace(b0, b1, self.n_b)

    def lattice(self) -> tuple[np.ndarray, np.ndarray]:
        """Full bounding-box lattice ``(labels, inside)`` of shape ``(n_b, n_a)``."""
        a, b = self.axes()
        labels = a[None, :] + 1j * b[:, None]
        return labels, self.contains(labels)

    def labels(self) -> np.ndarray:
        """Flat array of grid labels inside the domain, b-major then a."""
        labels, inside = self.lattice()
        return labels[inside]

    def contains(self, z, margin: float = 0.0) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        s = self.shape
        if isinstance(s, Rectangle):
            eps = 1e-12 * max(1.0, abs(s.a_min), abs(s.a_max), abs(s.b_min), abs(s.b_max))
            return (
                (z.real >= s.a_min + margin - eps) & (z.real <= s.a_max - margin + eps)
                & (z.imag >= s.b_min + margin - eps) & (z.imag <= s.b_max - margin + eps)
            )
        return np.abs(z - s.center) <= s.radius - margin + 1e-12 * max(1.0, s.radius)

    def with_grid(self, n_a: int, n_b: int) -> "Domain":
        return replace(self, n_a=n_a, n_b=n_b)

    def conjugate(self) -> "Domain":
        s = self.shape
        if isinstance(s, Rectangle):
            shape = Rectangle(s.a_min, s.a_max, -s.b_max, -s.b_min)
        else:
            shape = Disk(s.center.conjugate(), s.radius)
        return replace(self, shape=shape)

    def shrink(self, margin: float) -> "Domain":
        s = self.shape
        if isinstance(s, Rectangle):
            return replace(self, shape=Rectangle(s.a_min + margin, s.a_max - margin,
                                                 s.b_min + margin, s.b_max - margin))
        return replace(self, shape=Disk(s.center, s.radius - margin))

    @property
    def width(self) -> float:
        a0, a1, _, _ = self.bounds
        return a1 - a0


@dataclass(frozen=True)
class HarmonicMap:
    """``F + conj(G)`` with ``F``, ``G`` analytic expressions in ``z``.

    ``params`` binds any named constants (``k``, ``A``, ...) used by the
    expressions.
    """

    F: ex.Expr
    G: ex.Expr
    domain: Domain
    params: Mapping[str, complex] = field(default_factory=dict)

    @cached_property
    def dF(self) -> ex.Expr:
        return ex.differentiate(self.F, "z")

    @cached_property
    def dG(self) -> ex.Expr:
        return ex.differentiate(self.G, "z")

    def _eval(self, e: ex.Expr, z):
        return _broadcast(ex.evaluate(e, self.params, z=z), z)

    def __call__(self, z):
        return self._eval(self.F, z) + np.conj(self._eval(self.G, z))

    def derivatives(self, z):
        """``(F'(z), G'(z))``."""
        return self._eval(self.dF, z), self._eval(self.dG, z)


def _broadcast(v, z):
    """Give constant expressions the shape of the label array."""
    if np.ndim(z) and not np.ndim(v):
        return np.full(np.shape(z), v, dtype=np.result_type(np.asarray(z).dtype, complex))
    return v


class Orientation(enum.Enum):
    SENSE_PRESERVING = "SensePreserving"
    SENSE_REVERSING = "SenseReversing"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class UnivalenceReport:
    locally_injective: bool
    collision: Optional[tuple[complex, complex]]
    min_image_separation_ratio: float

    @property
    def univalent(self) -> bool:
        return self.locally_injective and self.collision is None


def jacobian(m: HarmonicMap, z):
    fp, gp = m.derivatives(z)
    return np.abs(fp) ** 2 - np.abs(gp) ** 2


def dilatation(m: HarmonicMap, z):
    fp, gp = m.derivatives(z)
    if np.any(fp == 0):
        raise PoleError("F' vanishes; dilatation undefined")
    return gp / fp


def orientation(m: HarmonicMap) -> Orientation:
    J = jacobian(m, m.domain.labels())
    if np.all(J > DEGENERACY_TOL):
        return Orientation.SENSE_PRESERVING
    if np.all(J < -DEGENERACY_TOL):
        return Orientation.SENSE_REVERSING
    return Orientation.DEGENERATE


def conjugate_relabel(m: HarmonicMap, strict: bool = True) -> HarmonicMap:
    """Re-express ``z -> F(conj z) + conj(G(conj z))`` as a harmonic map.

    With ``F*(z) = conj(F(conj z))`` the relabelled map has analytic part
    ``G*`` and co-analytic part ``F*`` on the mirrored domain.  With
    ``strict`` (the default) the input must be sense reversing.
    """
    if strict and orientation(m) is not Orientation.SENSE_REVERSING:
        raise OrientationError("conjugate_relabel expects a sense-reversing map")
    params = {k: complex(v).conjugate() for k, v in m.params.items()}
    return HarmonicMap(
        F=ex.conjugate_coefficients(m.G),
        G=ex.conjugate_coefficients(m.F),
        domain=m.domain.conjugate(),
        params=params,
    )


def univalence_check(m: HarmonicMap, separation_tol: float = DEFAULT_SEPARATION_TOL) -> UnivalenceReport:
    """Grid heuristic for global injectivity; never a certificate.

    Each grid label ``p`` gets a local image scale ``s(p) = (|F'| - |G'|) h``,
    the smallest stretch the differential can apply to a grid step ``h``.
    A collision is a pair of labels more than two grid cells apart whose
    images are closer than ``separation_tol * min(s(p), s(q))``.  The
    reported ratio is the smallest such image distance over local scale
    among nearby image candidates.
    """
    d = m.domain
    if d.n_a < MIN_UNIVALENCE_GRID or d.n_b < MIN_UNIVALENCE_GRID:
        raise DomainError(f"univalence check needs at least a {MIN_UNIVALENCE_GRID}x{MIN_UNIVALENCE_GRID} grid")
    z = d.labels()
    fp, gp = m.derivatives(z)
    J = np.abs(fp) ** 2 - np.abs(gp) ** 2
    locally_injective = bool(np.min(np.abs(J)) > DEGENERACY_TOL)

    h = max(d.spacing)
    scale = np.abs(np.abs(fp) - np.abs(gp)) * min(d.spacing)
    w = m(z)
    pts = np.column_stack([w.real, w.imag])
    tree = cKDTree(pts)
    far = 2.0 * h * (1 + 1e-9)

    k = min(16, len(z))
    dist, idx = tree.query(pts, k=k)
    ratio = np.inf
    for j in range(1, k):
        q = idx[:, j]
        ok = np.abs(z - z[q]) > far
        if np.any(ok):
            with np.errstate(divide="ignore", invalid="ignore"):
                r = dist[ok, j] / np.minimum(scale[ok], scale[q[ok]])
            ratio = min(ratio, float(np.min(r)))

    collision = None
    neighbours = tree.query_ball_point(pts, r=separation_tol * scale)
    for p, cand in enumerate(neighbours):
        for q in sorted(cand):
            if q <= p or abs(z[p] - z[q]) <= far:
                continue
            sep = np.hypot(*(pts[p] - pts[q])) / min(scale[p], scale[q])
            if sep < separation_tol:
                collision = (complex(z[p]), complex(z[q]))
                ratio = min(ratio, float(sep))
                break
        if collision is not None:
            break
    return UnivalenceReport(locally_injective, collision, ratio)


def dilatation_is_constant(m: HarmonicMap, tol: float = 1e-9) -> bool:
    z = m.domain.labels()
    w = dilatation(m, z)
    ref = w[len(w) // 2]
    return bool(np.max(np.abs(w - ref)) <= tol)
