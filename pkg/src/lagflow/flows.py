"""Euler flows whose Lagrangian labelling map is harmonic at every time.

Every such flow is ``x + i y = F(t, z) + conj(G(t, z))`` where, writing
``F0, G0`` for the initial parts, one of three families applies:

``linear_dependent``  (``G0' = lam F0'``)
    ``F = alpha(t) F0``, ``G = beta(t) F0`` with
    ``alpha = sqrt(1 - |lam|^2 + |beta|^2) e^{i phi(t)}``, ``beta(0) = lam``.
``affine``  (nonconstant dilatation, no rotation of ``G``)
    ``F = alpha F0 + beta G0``, ``G = conj(beta) F0 + conj(alpha) G0`` with
    ``alpha = sqrt(1 + |beta|^2) e^{i phi(t)}``, ``beta(0) = 0``.
``rotational``
    ``F = e^{i nu0 t} F0``, ``G = e^{i (xi0 - nu0) t} G0`` with ``xi0 != 0``.

``phi`` is the phase integral of ``(nu0 + s Im(beta conj(beta_t))) / (c + |beta|^2)``
with ``c = 1 - |lam|^2, s = +1`` (linear dependent) or ``c = 1, s = -1``
(affine).  Additive translations are fixed to zero.
"""

from __future__ import annotations

import cmath
import math
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from . import expr as ex
from .errors import (
    BetaInitialMismatch,
    ConstantDilatation,
    ConstantDilatationInAffineFamily,
    FlowSpecError,
    LambdaOutOfRange,
    NotSensePreserving,
    NotUnivalent,
    XiZero,
)
from .harmonic import (
    MIN_UNIVALENCE_GRID,
    _broadcast,
    Domain,
    HarmonicMap,
    Orientation,
    dilatation_is_constant,
    orientation,
    univalence_check,
)
from .quadrature import integrate

INITIAL_TOL = 1e-12
PHASE_PANEL = 0.25
PHASE_TOL = 1e-12


@dataclass(frozen=True)
class BetaPath:
    """Complex coefficient path ``beta(t)`` given as an expression in ``t``."""

    expr: ex.Expr
    params: Mapping[str, complex] = field(default_factory=dict)

    @classmethod
    def parse(cls, source: str, params=None) -> "BetaPath":
        return cls(ex.parse(source), dict(params or {}))

    @classmethod
    def constant(cls, value: complex) -> "BetaPath":
        return cls(ex.Const(value))

    @cached_property
    def derivative(self) -> ex.Expr:
        return ex.differentiate(self.expr, "t")

    @cached_property
    def second_derivative(self) -> ex.Expr:
        return ex.differentiate(self.derivative, "t")

    @property
    def is_constant(self) -> bool:
        return "t" not in ex.free_vars(self.expr)

    def __call__(self, t):
        return ex.evaluate(self.expr, self.params, t=t)

    def jet(self, t):
        """``(beta, beta_t, beta_tt)`` at ``t``."""
        return (
            ex.evaluate(self.expr, self.params, t=t),
            ex.evaluate(self.derivative, self.params, t=t),
            ex.evaluate(self.second_derivative, self.params, t=t),
        )

    def uniform_rotation(self) -> Optional[tuple[complex, float]]:
        """``(c, sigma)`` when ``beta = c exp(i sigma t)`` literally, else None."""
        e = self.expr
        c = ex.ONE
        if isinstance(e, ex.Mul) and isinstance(e.right, ex.Exp):
            c, e = e.left, e.right
        elif isinstance(e, ex.Mul) and isinstance(e.left, ex.Exp):
            c, e = e.right, e.left
        if not isinstance(e, ex.Exp) or "t" in ex.free_vars(c):
            return None
        rate = ex.differentiate(e.arg, "t")
        if "t" in ex.free_vars(rate) or ex.free_vars(ex.substitute(e.arg, {"t": ex.ZERO})) - set(self.params):
            return None
        try:
            w = ex.evaluate(rate, self.params)
            c0 = ex.evaluate(c, self.params)
            offset = ex.evaluate(e.arg, self.params, t=0.0)
        except ex.UnboundVariableError:
            return None
        if w.real != 0 or offset.real != 0:
            return None
        return c0 * cmath.exp(offset), w.imag


@dataclass(frozen=True)
class LinearDependentSpec:
    """Initial map ``F0 + conj(lam F0)``; coefficients driven by ``beta``."""

    F0: ex.Expr
    lam: complex
    beta: BetaPath
    nu0: float
    domain: Domain
    params: Mapping[str, complex] = field(default_factory=dict)

    family = "linear_dependent"

    @property
    def G0(self) -> ex.Expr:
        return ex.mul(ex.Const(self.lam), self.F0)


@dataclass(frozen=True)
class AffineSpec:
    F0: ex.Expr
    G0: ex.Expr
    beta: BetaPath
    nu0: float
    domain: Domain
    params: Mapping[str, complex] = field(default_factory=dict)

    family = "affine"


@dataclass(frozen=True)
class RotationalSpec:
    F0: ex.Expr
    G0: ex.Expr
    nu0: float
    xi0: float
    domain: Domain
    params: Mapping[str, complex] = field(default_factory=dict)

    family = "rotational"


FlowSpec = Union[LinearDependentSpec, AffineSpec, RotationalSpec]


class Coefficients(NamedTuple):
    alpha: complex
    beta: complex
    xi: float


class FieldJet(NamedTuple):
    """Time jets ``[value, d/dt, d2/dt2]`` of ``F, G, f = F', g = G'`` on a label set."""

    F: np.ndarray
    G: np.ndarray
    f: np.ndarray
    g: np.ndarray


class PhaseIntegral:
    """``phi(t) = int_0^t rate(s) ds`` on fixed panels with cached prefix sums.

    Panel boundaries sit at multiples of ``panel`` so ``phi(t)`` is the same
    whatever order queries arrive in; the prefix cache grows under a lock.
    """

    def __init__(self, rate, panel: float = PHASE_PANEL, tol: float = PHASE_TOL, constant_rate=None):
        self.rate = rate
        self.panel = panel
        self.tol = tol
        self.constant_rate = constant_rate
        self._prefix = [0.0]
        self._lock = threading.Lock()

    def _prefix_sum(self, j: int) -> float:
        with self._lock:
            while len(self._prefix) <= j:
                k = len(self._prefix) - 1
                lo, hi = k * self.panel, (k + 1) * self.panel
                self._prefix.append(self._prefix[-1] + integrate(self.rate, lo, hi, abs_tol=self.tol))
            return self._prefix[j]

    def __call__(self, t: float) -> float:
        if t < 0:
            raise ValueError("phase is defined for t >= 0")
        if self.constant_rate is not None:
            return self.constant_rate * t
        j = int(math.floor(t / self.panel))
        start = j * self.panel
        return self._prefix_sum(j) + integrate(self.rate, start, t, abs_tol=self.tol)


def phase_rate_function(beta: BetaPath, nu0: float, c: float, sign: int):
    """Integrand ``(nu0 + sign Im(beta conj(beta_t))) / (c + |beta|^2)`` as an array function."""

    def rate(t):
        b = ex.evaluate(beta.expr, beta.params, t=t)
        bt = ex.evaluate(beta.derivative, beta.params, t=t)
        return (nu0 + sign * np.imag(b * np.conj(bt))) / (c + np.abs(b) ** 2)

    return rate


def make_phase(beta: BetaPath, nu0: float, c: float, sign: int) -> PhaseIntegral:
    """Phase integral with closed forms for constant and uniformly rotating ``beta``."""
    rate = phase_rate_function(beta, nu0, c, sign)
    constant_rate = None
    if beta.is_constant:
        b = complex(beta(0.0))
        constant_rate = nu0 / (c + abs(b) ** 2)
    else:
        rot = beta.uniform_rotation()
        if rot is not None:
            amp, sigma = rot
            # Im(beta conj(beta_t)) = -sigma |amp|^2 for beta = amp e^{i sigma t}
            constant_rate = (nu0 - sign * sigma * abs(amp) ** 2) / (c + abs(amp) ** 2)
    return PhaseIntegral(rate, constant_rate=constant_rate)


class Flow:
    """A validated flow; construct through :func:`build_flow`."""

    def __init__(self, spec: FlowSpec):
        self.spec = spec
        self.family = spec.family
        self.params = dict(spec.params)
        self.F0 = spec.F0
        self.G0 = spec.G0
        self.dF0 = ex.differentiate(self.F0, "z")
        self.dG0 = ex.differentiate(self.G0, "z")
        self.initial = HarmonicMap(self.F0, self.G0, spec.domain, self.params)
        if self.family == "linear_dependent":
            self.c = 1.0 - abs(spec.lam) ** 2
            self.sign = 1
        else:
            self.c = 1.0
            self.sign = -1
        if self.family == "rotational":
            self._phase = PhaseIntegral(None, constant_rate=spec.nu0)
        else:
            self._phase = make_phase(spec.beta, spec.nu0, self.c, self.sign)

    @property
    def domain(self) -> Domain:
        return self.spec.domain

    def __repr__(self) -> str:
        return f"Flow({self.family}, F0={ex.to_source(self.F0)}, G0={ex.to_source(self.G0)})"

    # -- coefficients ---------------------------------------------------------

    def phase(self, t: float) -> float:
        return self._phase(t)

    def _alpha_beta_jet(self, t: float):
        spec = self.spec
        b, b1, b2 = (complex(v) for v in spec.beta.jet(t))
        c, nu0 = self.c, spec.nu0
        R = math.sqrt(c + abs(b) ** 2)
        q = (b1 * b.conjugate()).real
        R_t = q / R
        R_tt = (abs(b1) ** 2 + (b2 * b.conjugate()).real - R_t ** 2) / R
        N = nu0 + self.sign * (b * b1.conjugate()).imag
        N_t = self.sign * (b * b2.conjugate()).imag
        D = R * R
        phi = self._phase(t)
        phi_t = N / D
        phi_tt = (N_t * D - N * 2 * q) / D ** 2
        e = cmath.exp(1j * phi)
        alpha = R * e
        alpha_t = complex(R_t, R * phi_t) * e
        alpha_tt = complex(R_tt - R * phi_t ** 2, 2 * R_t * phi_t + R * phi_tt) * e
        return (alpha, alpha_t, alpha_tt), (b, b1, b2)

    def coefficients(self, t: float) -> Coefficients:
        if t < 0:
            raise ValueError("coefficients are defined for t >= 0")
        if self.family == "rotational":
            return Coefficients(cmath.exp(1j * self.spec.nu0 * t), 0j, self.spec.xi0 * t)
        (alpha, _, _), (beta, _, _) = self._alpha_beta_jet(t)
        return Coefficients(alpha, beta, 0.0)

    def matrix_jet(self, t: float) -> np.ndarray:
        """Array ``(3, 2, 2)``: the matrix mapping ``(F0, G0)`` to ``(F, G)`` and its first two time derivatives."""
        if t < 0:
            raise ValueError("flows are defined for t >= 0")
        M = np.zeros((3, 2, 2), dtype=complex)
        if self.family == "rotational":
            nu0, xi0 = self.spec.nu0, self.spec.xi0
            for k in range(3):
                M[k, 0, 0] = (1j * nu0) ** k * cmath.exp(1j * nu0 * t)
                M[k, 1, 1] = (1j * (xi0 - nu0)) ** k * cmath.exp(1j * (xi0 - nu0) * t)
            return M
        alpha, beta = self._alpha_beta_jet(t)
        for k in range(3):
            M[k, 0, 0] = alpha[k]
            M[k, 1, 0] = beta[k]
            if self.family == "affine":
                M[k, 0, 1] = beta[k]
                M[k, 1, 0] = beta[k].conjugate()
                M[k, 1, 1] = alpha[k].conjugate()
        return M

    # -- fields ---------------------------------------------------------------

    def basis(self, z):
        """``(F0, G0, F0', G0')`` evaluated at ``z``."""
        p = self.params
        return tuple(_broadcast(ex.evaluate(e, p, z=z), z) for e in (self.F0, self.G0, self.dF0, self.dG0))

    def field_jet(self, t: float, z) -> FieldJet:
        M = self.matrix_jet(t)
        F0, G0, f0, g0 = (np.asarray(v) for v in self.basis(z))
        m = M[(...,) + (None,) * np.ndim(z)]
        return FieldJet(
            F=m[:, 0, 0] * F0 + m[:, 0, 1] * G0,
            G=m[:, 1, 0] * F0 + m[:, 1, 1] * G0,
            f=m[:, 0, 0] * f0 + m[:, 0, 1] * g0,
            g=m[:, 1, 0] * f0 + m[:, 1, 1] * g0,
        )

    def fg(self, t: float, z):
        jet = self.field_jet(t, z)
        return _out(jet.f[0]), _out(jet.g[0])

    def labelling(self, t: float, z):
        jet = self.field_jet(t, z)
        return _out(jet.F[0] + np.conj(jet.G[0]))

    def velocity(self, t: float, z):
        jet = self.field_jet(t, z)
        return _out(jet.F[1] + np.conj(jet.G[1]))

    def acceleration(self, t: float, z):
        jet = self.field_jet(t, z)
        return _out(jet.F[2] + np.conj(jet.G[2]))

    def jacobian(self, t: float, z):
        jet = self.field_jet(t, z)
        return _out(np.abs(jet.f[0]) ** 2 - np.abs(jet.g[0]) ** 2)

    def trajectory(self, z, times: Sequence[float]) -> list:
        times = list(times)
        if not times:
            raise ValueError("trajectory needs at least one time")
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("times must be ascending")
        return [self.labelling(t, z) for t in times]


def _out(v):
    v = np.asarray(v)
    if v.ndim == 0:
        return complex(v) if np.iscomplexobj(v) else float(v)
    return v


def _check_vars(e: ex.Expr, allowed: set, what: str) -> None:
    extra = ex.free_vars(e) - allowed
    if extra:
        raise FlowSpecError(f"{what} uses unbound names {sorted(extra)}")


def build_flow(spec: FlowSpec, check_univalence: bool = True) -> Flow:
    """Validate ``spec`` and return the corresponding :class:`Flow`."""
    params = set(spec.params)
    _check_vars(spec.F0, params | {"z"}, "F0")
    if not isinstance(spec, LinearDependentSpec):
        _check_vars(spec.G0, params | {"z"}, "G0")
    if not isinstance(spec, RotationalSpec):
        _check_vars(spec.beta.expr, set(spec.beta.params) | {"t"}, "beta")

    if isinstance(spec, LinearDependentSpec):
        if not abs(spec.lam) < 1:
            raise LambdaOutOfRange(f"|lambda| = {abs(spec.lam)} must be < 1")
        b0 = complex(spec.beta(0.0))
        if abs(b0 - spec.lam) > INITIAL_TOL:
            raise BetaInitialMismatch(f"beta(0) = {b0} but lambda = {spec.lam}")
    elif isinstance(spec, AffineSpec):
        b0 = complex(spec.beta(0.0))
        if abs(b0) > INITIAL_TOL:
            raise BetaInitialMismatch(f"affine family needs beta(0) = 0, got {b0}")
    else:
        if spec.xi0 == 0:
            raise XiZero("rotational family needs xi0 != 0")

    flow = Flow(spec)
    m = flow.initial
    if orientation(m) is not Orientation.SENSE_PRESERVING:
        raise NotSensePreserving(
            "initial map is not sense preserving on the grid; relabel a sense-reversing map with conjugate_relabel"
        )
    if not isinstance(spec, LinearDependentSpec) and dilatation_is_constant(m):
        cls = ConstantDilatationInAffineFamily if isinstance(spec, AffineSpec) else ConstantDilatation
        raise cls(f"{spec.family} family needs F0', G0' linearly independent")
    if check_univalence:
        d = m.domain
        probe = HarmonicMap(m.F, m.G, d.with_grid(max(d.n_a, MIN_UNIVALENCE_GRID), max(d.n_b, MIN_UNIVALENCE_GRID)), m.params)
        report = univalence_check(probe)
        if not report.univalent:
            raise NotUnivalent(f"initial map fails the univalence heuristic: {report}")
    return flow


# Thin functional aliases.

def phase(flow: Flow, t: float) -> float:
    return flow.phase(t)


def coefficients(flow: Flow, t: float) -> Coefficients:
    return flow.coefficients(t)


def fg(flow: Flow, t: float, z):
    return flow.fg(t, z)


def labelling(flow: Flow, t: float, z):
    return flow.labelling(t, z)


def velocity(flow: Flow, t: float, z):
    return flow.velocity(t, z)


def trajectory(flow: Flow, z, times: Sequence[float]) -> list:
    return flow.trajectory(z, times)
