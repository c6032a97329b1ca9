"""Relations between harmonic maps that share a Jacobian.

Two sense-preserving maps ``F1 + conj(G1)`` and ``F2 + conj(G2)`` with equal
Jacobians are tied together by constants:

* if ``G1' = lam F1'`` (constant dilatation):  ``F2' = alpha F1'``,
  ``G2' = beta F1'`` with ``|alpha|^2 - |beta|^2 = 1 - |lam|^2``;
* otherwise ``(F2', G2') = [[alpha, beta], [conj beta, conj alpha]]
  diag(1, e^{i xi}) (F1', G1')`` with ``|alpha|^2 = 1 + |beta|^2``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import expr as ex
from .errors import (
    FitResidualExceeded,
    IllConditionedSample,
    InvalidRelationParams,
    JacobianMismatch,
    NonconstantModulusIdentity,
    NotSensePreserving,
)
from .harmonic import (
    Domain,
    HarmonicMap,
    Orientation,
    dilatation_is_constant,
    orientation,
)

JACOBIAN_TOL = 1e-8
FIT_TOL = 1e-8
GENERAL_MODULUS_TOL = 1e-9
IDENTITY_TOL = 1e-10


@dataclass(frozen=True)
class LinearDependent:
    alpha: complex
    beta: complex

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        if not abs(self.alpha) ** 2 - abs(self.beta) ** 2 > 0:
            raise InvalidRelationParams("need |alpha|^2 - |beta|^2 > 0")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.alpha, 0], [self.beta, 0]], dtype=complex)


@dataclass(frozen=True)
class General:
    alpha: complex
    beta: complex
    xi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        object.__setattr__(self, "xi", float(self.xi) % (2 * math.pi))
        if abs(abs(self.alpha) ** 2 - (1 + abs(self.beta) ** 2)) > GENERAL_MODULUS_TOL:
            raise InvalidRelationParams("need |alpha|^2 = 1 + |beta|^2")

    @property
    def matrix(self) -> np.ndarray:
        """The 2x2 matrix acting on ``(F1', G1')``."""
        e = cmath.exp(1j * self.xi)
        a, b = self.alpha, self.beta
        return np.array([[a, b * e], [b.conjugate(), a.conjugate() * e]], dtype=complex)

    @classmethod
    def from_matrix(cls, M: np.ndarray) -> "General":
        alpha = complex(M[0, 0])
        beta = complex(M[1, 0]).conjugate()
        xi = cmath.phase(complex(M[1, 1]) / alpha.conjugate())
        return cls(alpha, beta, xi)


RelationParams = Union[LinearDependent, General]


def compose(second: General, first: General) -> General:
    """Relation equivalent to applying ``first`` and then ``second``."""
    return General.from_matrix(second.matrix @ first.matrix)


def apply_relation(m1: HarmonicMap, p: RelationParams) -> tuple[ex.Expr, ex.Expr]:
    """Derivative pair ``(F2', G2')`` obtained from ``m1`` through ``p``."""
    M = p.matrix
    F2 = ex.add(ex.mul(ex.Const(M[0, 0]), m1.dF), ex.mul(ex.Const(M[0, 1]), m1.dG))
    G2 = ex.add(ex.mul(ex.Const(M[1, 0]), m1.dF), ex.mul(ex.Const(M[1, 1]), m1.dG))
    return F2, G2


def related_map(m1: HarmonicMap, p: RelationParams) -> HarmonicMap:
    """The harmonic map whose derivatives are ``apply_relation(m1, p)``.

    The additive constants are fixed by integrating the same linear
    combination of ``F1`` and ``G1``.
    """
    M = p.matrix
    F2 = ex.add(ex.mul(ex.Const(M[0, 0]), m1.F), ex.mul(ex.Const(M[0, 1]), m1.G))
    G2 = ex.add(ex.mul(ex.Const(M[1, 0]), m1.F), ex.mul(ex.Const(M[1, 1]), m1.G))
    return HarmonicMap(F2, G2, m1.domain, dict(m1.params))


def fit_residual(m1: HarmonicMap, m2: HarmonicMap, p: RelationParams) -> float:
    """Max over the grid of ``|(F2', G2') - M (F1', G1')|`` relative to ``|(F2', G2')|``."""
    z = m1.domain.labels()
    f1, g1 = m1.derivatives(z)
    f2, g2 = m2.derivatives(z)
    M = p.matrix
    r_f = f2 - (M[0, 0] * f1 + M[0, 1] * g1)
    r_g = g2 - (M[1, 0] * f1 + M[1, 1] * g1)
    scale = np.maximum(np.hypot(np.abs(f2), np.abs(g2)), np.finfo(float).tiny)
    return float(np.max(np.hypot(np.abs(r_f), np.abs(r_g)) / scale))


def _sample_pairs(f1: np.ndarray, g1: np.ndarray, count: int = 4) -> list[tuple[int, int]]:
    """Label index pairs ordered by how well they separate the dilatation."""
    w = g1 / f1
    centre = np.median(w.real) + 1j * np.median(w.imag)
    order = np.argsort(-np.abs(w - centre), kind="stable")
    pairs = []
    for p in order[:count]:
        q = int(np.argmax(np.abs(w - w[p])))
        pairs.append((int(p), q))
    return pairs


def recover_relation(m1: HarmonicMap, m2: HarmonicMap) -> RelationParams:
    """Recover the constants relating two equal-Jacobian harmonic maps."""
    if orientation(m1) is not Orientation.SENSE_PRESERVING:
        raise NotSensePreserving("first map must be sense preserving")
    z = m1.domain.labels()
    f1, g1 = m1.derivatives(z)
    f2, g2 = m2.derivatives(z)
    J1 = np.abs(f1) ** 2 - np.abs(g1) ** 2
    J2 = np.abs(f2) ** 2 - np.abs(g2) ** 2
    mismatch = float(np.max(np.abs(J1 - J2) / np.abs(J1)))
    if mismatch > JACOBIAN_TOL:
        raise JacobianMismatch(f"Jacobians differ by {mismatch:.3e} (relative)")

    if dilatation_is_constant(m1):
        p = LinearDependent(complex(np.mean(f2 / f1)), complex(np.mean(g2 / f1)))
        res = fit_residual(m1, m2, p)
        if res > FIT_TOL:
            raise FitResidualExceeded(f"fit residual {res:.3e}")
        return p

    best = math.inf
    for i, j in _sample_pairs(f1, g1):
        A = np.array([[f1[i], g1[i]], [f1[j], g1[j]]])
        if np.linalg.cond(A) > 1e8:
            continue
        x = np.linalg.solve(A, np.array([f2[i], f2[j]]))
        y = np.linalg.solve(A, np.array([g2[i], g2[j]]))
        alpha = complex(x[0])
        beta = complex(y[0]).conjugate()
        rot = complex(y[1]) / alpha.conjugate()
        try:
            p = General(alpha, beta, cmath.phase(rot))
        except InvalidRelationParams:
            continue
        res = fit_residual(m1, m2, p)
        if res <= FIT_TOL:
            return p
        best = min(best, res)
    if best is math.inf:
        raise IllConditionedSample("no well-conditioned pair of sample labels")
    raise FitResidualExceeded(f"fit residual {best:.3e}")


class Verdict(enum.Enum):
    FORCED_CONSTANT = "ForcedConstant"
    NOT_SATISFIED = "NotSatisfied"


def modulus_identity_test(
    phi: ex.Expr,
    psi: ex.Expr,
    r: float,
    s: float,
    domain: Domain,
    params=None,
    tol: float = IDENTITY_TOL,
) -> Verdict:
    """Decide whether ``|phi|^2 = r |psi|^2 + s`` holds on the grid.

    For nonzero ``r`` and ``s`` the identity can only hold with both factors
    constant; finding it satisfied by nonconstant factors raises
    :class:`NonconstantModulusIdentity`.
    """
    z = domain.labels()
    p = np.broadcast_to(ex.evaluate(phi, params, z=z), z.shape)
    q = np.broadcast_to(ex.evaluate(psi, params, z=z), z.shape)
    holds = bool(np.max(np.abs(np.abs(p) ** 2 - r * np.abs(q) ** 2 - s)) <= tol)
    if not holds:
        return Verdict.NOT_SATISFIED
    if r == 0 or s == 0:
        raise ValueError("the identity only forces constants when r and s are nonzero")
    constant = bool(np.max(np.abs(p - p[0])) <= tol and np.max(np.abs(q - q[0])) <= tol)
    if not constant:
        raise NonconstantModulusIdentity("modulus identity holds with nonconstant factors")
    return Verdict.FORCED_CONSTANT
