"""Numerical checks of the Lagrangian governing equations for a flow.

Two independent routes are provided.  The symbolic route evaluates

    Q = f_t conj(f) - g conj(g_t)

from exact coefficient derivatives: mass conservation is ``Re Q = 0`` and
Euler compatibility is ``(Im Q)_t = 0``.  The finite-difference route only
samples particle positions and differentiates the compatibility bracket

    x_a x_bt + y_a y_bt - x_b x_at - y_b y_at

in time by central differences.  The pressure gradient
``P_a = -(x_a x_tt + y_a y_tt)``, ``P_b = -(x_b x_tt + y_b y_tt)`` is
integrated along grid paths and its discrete curl reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .flows import FieldJet, Flow
from .harmonic import Domain
from .parallel import map_ordered

DEFAULT_HS = (4e-3, 2e-3, 1e-3)
EXACT_TOL = 1e-12
FD_MARGIN = 0.01
FD_POINTS = 21
# Rounding in the double-precision time coefficients reaches the bracket
# derivative amplified by 1/h^2; residuals below this many eps * |w| / h^2
# are indistinguishable from zero.
FD_FLOOR_FACTOR = 100.0


@dataclass(frozen=True)
class Tolerances:
    mass_conservation: float = 1e-9
    governing_re: float = 1e-9
    governing_im_drift: float = 1e-9
    euler_order: float = 1.8
    pressure_order: float = 1.8
    exact: float = EXACT_TOL


class GoverningResidual(NamedTuple):
    governing_re: float
    governing_im_drift: float
    scale: float


@dataclass
class ResidualReport:
    """Sup-norm residuals over a label grid and a set of times.

    ``governing_re`` and ``governing_im_drift`` are relative to the sup of
    ``|f_t||f| + |g||g_t|`` (absolute when that vanishes);
    ``mass_conservation`` is relative to ``sup |J(0, .)|``; ``euler_fd`` and
    ``pressure_loop`` are absolute values at the finest resolution, with
    observed convergence orders alongside.
    """

    mass_conservation: float
    governing_re: float
    governing_im_drift: float
    euler_fd: float
    pressure_loop: float
    grid: Domain
    times: list
    euler_fd_residuals: list = field(default_factory=list)
    euler_fd_orders: list = field(default_factory=list)
    euler_fd_floors: list = field(default_factory=list)
    pressure_loop_residuals: list = field(default_factory=list)
    pressure_loop_orders: list = field(default_factory=list)
    q_scale: float = 0.0


@dataclass
class PressureField:
    """Pressure on the domain lattice, ``P = 0`` at ``anchor``; NaN where undefined."""

    values: np.ndarray
    anchor: complex
    a: np.ndarray
    b: np.ndarray
    grad_a: np.ndarray
    grad_b: np.ndarray
    loop_defect: float


# -- negative controls ------------------------------------------------------------

class TamperedFlow(Flow):
    """A deliberately broken copy of a flow, used to test that checks fail.

    ``g_growth``: ``G <- G (1 + amount t)``.
    ``alpha_scale``: ``F <- F (1 + amount)`` for ``t > 0``.
    """

    KINDS = ("g_growth", "alpha_scale")

    def __init__(self, base: Flow, kind: str, amount: float):
        if kind not in self.KINDS:
            raise ValueError(f"unknown tamper kind {kind!r}")
        self.__dict__.update(base.__dict__)
        self.base = base
        self.kind = kind
        self.amount = float(amount)

    def __repr__(self) -> str:
        return f"TamperedFlow({self.base!r}, {self.kind}, {self.amount})"

    def field_jet(self, t: float, z) -> FieldJet:
        jet = self.base.field_jet(t, z)
        eps = self.amount
        if self.kind == "g_growth":
            s = 1 + eps * t

            def grow(x):
                return np.stack([x[0] * s, x[1] * s + eps * x[0], x[2] * s + 2 * eps * x[1]])

            return FieldJet(jet.F, grow(jet.G), jet.f, grow(jet.g))
        s = 1 + eps if t > 0 else 1.0
        return FieldJet(jet.F * s, jet.G, jet.f * s, jet.g)


# -- symbolic route --------------------------------------------------------------

def _require_zero(times: Sequence[float]) -> list:
    times = [float(t) for t in times]
    if 0.0 not in times:
        raise ValueError("times must include 0")
    return times


def governing_residual(flow: Flow, times: Sequence[float], domain: Optional[Domain] = None) -> GoverningResidual:
    """Relative sup of ``Re Q`` and of the drift of ``Im Q`` from its value at t = 0."""
    times = _require_zero(times)
    z = (domain or flow.domain).labels()

    def q_at(t):
        jet = flow.field_jet(t, z)
        f, f_t = jet.f[0], jet.f[1]
        g, g_t = jet.g[0], jet.g[1]
        Q = f_t * np.conj(f) - g * np.conj(g_t)
        return Q, float(np.max(np.abs(f_t) * np.abs(f) + np.abs(g) * np.abs(g_t)))

    results = map_ordered(q_at, times)
    nu = results[times.index(0.0)][0].imag
    re = max(float(np.max(np.abs(Q.real))) for Q, _ in results)
    drift = max(float(np.max(np.abs(Q.imag - nu))) for Q, _ in results)
    scale = max(s for _, s in results)
    if scale > 0:
        re, drift = re / scale, drift / scale
    return GoverningResidual(re, drift, scale)


def label_function(flow: Flow, domain: Optional[Domain] = None) -> np.ndarray:
    """``Im Q`` at t = 0 on the grid: the time-independent function the flow carries."""
    z = (domain or flow.domain).labels()
    jet = flow.field_jet(0.0, z)
    return (jet.f[1] * np.conj(jet.f[0]) - jet.g[0] * np.conj(jet.g[1])).imag


def mass_conservation_residual(flow: Flow, times: Sequence[float], domain: Optional[Domain] = None) -> float:
    """``sup |J(t) - J(0)| / sup |J(0)|`` over grid and times."""
    times = _require_zero(times)
    z = (domain or flow.domain).labels()
    J = map_ordered(lambda t: np.asarray(flow.jacobian(t, z)), times)
    J0 = J[times.index(0.0)]
    return max(float(np.max(np.abs(Jt - J0))) for Jt in J) / float(np.max(np.abs(J0)))


# -- finite-difference route -------------------------------------------------------

def fd_labels(domain: Domain, margin: float = FD_MARGIN, n: int = FD_POINTS) -> np.ndarray:
    """Labels whose finite-difference stencils stay inside ``domain``."""
    return domain.shrink(margin).with_grid(n, n).labels()


def euler_compatibility_residual(
    flow: Flow, times: Sequence[float], h: float, labels: Optional[np.ndarray] = None
) -> float:
    """Sup over labels and times of the central-difference time derivative of the bracket.

    Positions are sampled in extended precision: the nested differences
    amplify rounding by about ``1/h^3``, which in double precision would
    swamp the ``h^2`` truncation error near ``h = 1e-3``.
    """
    if labels is None:
        labels = fd_labels(flow.domain, margin=max(FD_MARGIN, 2 * h))
    if not np.all(flow.domain.contains(labels, margin=h)):
        raise ValueError("finite-difference stencil leaves the domain")
    times = [float(t) for t in times]
    if any(t - 2 * h < 0 for t in times):
        raise ValueError("finite-difference times must satisfy t >= 2h")
    z = np.asarray(labels, dtype=np.clongdouble)
    step = float(h)
    h = np.longdouble(h)

    def spatial(tt):
        w = flow.labelling
        wa = (w(tt, z + h) - w(tt, z - h)) / (2 * h)
        wb = (w(tt, z + 1j * h) - w(tt, z - 1j * h)) / (2 * h)
        return wa, wb

    def bt_at(t):
        d = {k: spatial(t + k * step) for k in (-2, -1, 0, 1, 2)}

        def bracket(k):
            wa, wb = d[k]
            wat = (d[k + 1][0] - d[k - 1][0]) / (2 * h)
            wbt = (d[k + 1][1] - d[k - 1][1]) / (2 * h)
            return (wa * np.conj(wbt)).real - (wb * np.conj(wat)).real

        return float(np.max(np.abs((bracket(1) - bracket(-1)) / (2 * h))))

    return max(map_ordered(bt_at, times))


def observed_orders(hs: Sequence[float], residuals: Sequence[float], exact: float = EXACT_TOL) -> list:
    """Pairwise orders ``log(r_i / r_{i+1}) / log(h_i / h_{i+1})``; None where both sit below ``exact``."""
    out = []
    for (h0, r0), (h1, r1) in zip(zip(hs, residuals), zip(hs[1:], residuals[1:])):
        if r0 <= exact and r1 <= exact:
            out.append(None)
        elif r1 <= 0 or r0 <= 0:
            out.append(math.inf if r1 <= 0 else -math.inf)
        else:
            out.append(math.log(r0 / r1) / math.log(h0 / h1))
    return out


def euler_noise_floor(flow: Flow, h: float, labels: np.ndarray) -> float:
    """Rounding floor of :func:`euler_compatibility_residual` at step ``h``."""
    scale = 1.0 + float(np.max(np.abs(flow.labelling(0.0, labels))))
    return FD_FLOOR_FACTOR * np.finfo(float).eps * scale / h ** 2


def euler_convergence(flow: Flow, times: Sequence[float], hs: Sequence[float] = DEFAULT_HS):
    """Residuals on a fixed label set for each ``h``, observed orders and rounding floors."""
    labels = fd_labels(flow.domain, margin=max(FD_MARGIN, 2 * max(hs)))
    residuals = [euler_compatibility_residual(flow, times, h, labels) for h in hs]
    floors = [euler_noise_floor(flow, h, labels) for h in hs]
    return residuals, observed_orders(hs, residuals), floors


# -- pressure ------------------------------------------------------------------------

def _cumtrapz(values: np.ndarray, step: float, start: int) -> np.ndarray:
    """Trapezoid integral along axis 0 measured from index ``start``."""
    out = np.zeros_like(values)
    seg = 0.5 * step * (values[1:] + values[:-1])
    fwd = np.cumsum(seg[start:], axis=0)
    out[start + 1:] = fwd
    if start > 0:
        back = np.cumsum(seg[:start][::-1], axis=0)[::-1]
        out[:start] = -back
    return out


def pressure_field(flow: Flow, t: float, anchor: complex, domain: Optional[Domain] = None) -> PressureField:
    domain = domain or flow.domain
    a, b = domain.axes()
    labels, inside = domain.lattice()
    h_a, h_b = domain.spacing
    grad_a = np.full(labels.shape, np.nan)
    grad_b = np.full(labels.shape, np.nan)
    z = labels[inside]
    jet = flow.field_jet(t, z)
    f, g = jet.f[0], jet.g[0]
    w_a = f + np.conj(g)
    w_b = 1j * (f - np.conj(g))
    w_tt = jet.F[2] + np.conj(jet.G[2])
    grad_a[inside] = -(w_a * np.conj(w_tt)).real
    grad_b[inside] = -(w_b * np.conj(w_tt)).real

    dist = np.where(inside, np.abs(labels - anchor), np.inf)
    j0, i0 = np.unravel_index(np.argmin(dist), labels.shape)
    # NaN gradients poison every path that leaves the domain.
    row = _cumtrapz(grad_a[j0][:, None], h_a, i0)[:, 0]
    values = row[None, :] + _cumtrapz(grad_b, h_b, j0)
    values[~inside] = np.nan

    circ = (
        h_a * (0.5 * (grad_a[:-1, :-1] + grad_a[:-1, 1:]) - 0.5 * (grad_a[1:, :-1] + grad_a[1:, 1:]))
        + h_b * (0.5 * (grad_b[:-1, 1:] + grad_b[1:, 1:]) - 0.5 * (grad_b[:-1, :-1] + grad_b[1:, :-1]))
    ) / (h_a * h_b)
    finite = circ[np.isfinite(circ)]
    loop = float(np.max(np.abs(finite))) if finite.size else 0.0
    return PressureField(values, complex(labels[j0, i0]), a, b, grad_a, grad_b, loop)


def pressure_convergence(flow: Flow, t: float, n0: int = 11, levels: int = 3):
    """Loop defects on grids ``n0, 2 n0 - 1, ...`` (halving h) and the observed orders."""
    domain = flow.domain
    ns = [(n0 - 1) * 2 ** k + 1 for k in range(levels)]
    anchor = domain.labels()[0]
    defects = [pressure_field(flow, t, anchor, domain.with_grid(n, n)).loop_defect for n in ns]
    hs = [max(domain.with_grid(n, n).spacing) for n in ns]
    return defects, observed_orders(hs, defects)


# -- battery --------------------------------------------------------------------------

@dataclass
class Verification:
    report: ResidualReport
    failures: list

    @property
    def passed(self) -> bool:
        return not self.failures


def _order_ok(residuals, orders, min_order: float, exact: float, floors=None) -> bool:
    floors = floors or [0.0] * len(residuals)
    if all(r <= max(exact, f) for r, f in zip(residuals, floors)):
        return True
    return all(o is not None and o >= min_order for o in orders)


def verify_flow(
    flow: Flow,
    times: Sequence[float],
    tol: Tolerances = Tolerances(),
    hs: Sequence[float] = DEFAULT_HS,
) -> Verification:
    """Run both verification routes and the pressure check; list failing residuals."""
    times = _require_zero(times)
    gov = governing_residual(flow, times)
    mass = mass_conservation_residual(flow, times)
    fd_times = [t for t in times if t >= 2 * max(hs)]
    if not fd_times:
        raise ValueError(f"need a time >= {2 * max(hs)} for the finite-difference check")
    euler, euler_orders, euler_floors = euler_convergence(flow, fd_times, hs)
    p_defects, p_orders = None, None
    for t in fd_times:
        d, o = pressure_convergence(flow, t)
        if p_defects is None or d[-1] > p_defects[-1]:
            p_defects, p_orders = d, o

    report = ResidualReport(
        mass_conservation=mass,
        governing_re=gov.governing_re,
        governing_im_drift=gov.governing_im_drift,
        euler_fd=euler[-1],
        pressure_loop=p_defects[-1],
        grid=flow.domain,
        times=list(times),
        euler_fd_residuals=euler,
        euler_fd_orders=euler_orders,
        euler_fd_floors=euler_floors,
        pressure_loop_residuals=p_defects,
        pressure_loop_orders=p_orders,
        q_scale=gov.scale,
    )
    failures = []
    if not mass <= tol.mass_conservation:
        failures.append("mass_conservation")
    if not gov.governing_re <= tol.governing_re:
        failures.append("governing_re")
    if not gov.governing_im_drift <= tol.governing_im_drift:
        failures.append("governing_im_drift")
    if not _order_ok(euler, euler_orders, tol.euler_order, tol.exact, euler_floors):
        failures.append("euler_fd")
    if not _order_ok(p_defects, p_orders, tol.pressure_order, tol.exact):
        failures.append("pressure_loop")
    return Verification(report, failures)
