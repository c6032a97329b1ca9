"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

from __future__ import annotations

import contextlib
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from _generators import (
    SPEC_FACTORIES,
    general_map,
    linear_map,
    nonconstant_expr,
    random_expr,
    random_general,
    random_linear,
)
from lagflow import cli, presets, verify
from lagflow import config as cfg
from lagflow import expr as ex
from lagflow.errors import NonconstantModulusIdentity
from lagflow.flows import build_flow
from lagflow.harmonic import Domain, Rectangle, jacobian, univalence_check
from lagflow.relation import General, Verdict, modulus_identity_test, recover_relation, related_map

FIXTURES = Path(__file__).parent / "fixtures"
TIMES = [0.0, 0.5, 1.0, 2.0]

CRITERIA_LINES: dict[int, str] = {}


@contextlib.contextmanager
def criterion(n: int, title: str):
    detail: dict = {}
    try:
        yield detail
    except BaseException as err:
        line = f"criterion {n} [{title}]: FAIL ({type(err).__name__}: {str(err).splitlines()[0] if str(err) else ''})"
        CRITERIA_LINES[n] = line
        print(line, file=sys.__stdout__)
        raise
    extra = ", ".join(f"{k}={v}" for k, v in detail.items())
    line = f"criterion {n} [{title}]: PASS" + (f" ({extra})" if extra else "")
    CRITERIA_LINES[n] = line
    print(line, file=sys.__stdout__)


def test_criterion_1_exact_solution_residuals():
    with criterion(1, "exact-solution residual suite") as info:
        start = time.perf_counter()
        worst = 0.0
        for family, make in SPEC_FACTORIES.items():
            rng = np.random.default_rng(20240101 + len(family))
            for _ in range(20):
                flow = build_flow(make(rng))
                assert flow.domain.n_a == 41 and flow.domain.n_b == 41
                gov = verify.governing_residual(flow, TIMES)
                mass = verify.mass_conservation_residual(flow, TIMES)
                assert mass <= 1e-9, (family, mass)
                assert gov.governing_re <= 1e-9, (family, gov)
                assert gov.governing_im_drift <= 1e-9, (family, gov)
                worst = max(worst, mass, gov.governing_re, gov.governing_im_drift)
        elapsed = time.perf_counter() - start
        assert elapsed <= 10.0, f"took {elapsed:.2f} s"
        info.update(worst=f"{worst:.1e}", seconds=f"{elapsed:.2f}")


def test_criterion_2_independent_euler_check():
    with criterion(2, "finite-difference Euler oracle") as info:
        hs = verify.DEFAULT_HS
        orders = {}
        for name in presets.FLOW_PRESETS:
            flow = build_flow(presets.resolve(name))
            residuals, obs, _ = verify.euler_convergence(flow, [0.5, 1.0, 2.0], hs)
            if all(r <= verify.EXACT_TOL for r in residuals):
                orders[name] = "exact"
                continue
            assert all(o is not None and o >= 1.8 for o in obs), (name, residuals, obs)
            orders[name] = f"{min(obs):.3f}"
        conf = cfg.load(FIXTURES / "tampered.json")
        flow = verify.TamperedFlow(build_flow(conf.spec()), conf.tamper["kind"], conf.tamper["amount"])
        residuals, obs, _ = verify.euler_convergence(flow, [0.5, 1.0, 2.0], hs)
        assert min(residuals) >= 1e-4, residuals
        assert all(o < 1.8 for o in obs), obs
        info.update(orders=orders, tamper_plateau=f"{min(residuals):.2e}")


def _fit_circle(w: np.ndarray):
    """Algebraic least-squares circle through the points ``w``."""
    A = np.column_stack([w.real, w.imag, np.ones(len(w))])
    rhs = -(w.real ** 2 + w.imag ** 2)
    (D, E, F), *_ = np.linalg.lstsq(A, rhs, rcond=None)
    centre = complex(-D / 2, -E / 2)
    return centre, math.sqrt(abs(centre) ** 2 - F)


def test_criterion_3_gerstner_geometry():
    with criterion(3, "Gerstner geometry") as info:
        k, g = 1.0, 9.81
        flow = build_flow(presets.gerstner(k, g))
        period = 2 * math.pi / math.sqrt(k * g)
        times = np.linspace(0.0, 2 * period, 256)
        worst_r = worst_p = 0.0
        for b in (-0.5, -1.0, -2.0):
            z = complex(1.0, b)
            w = np.array(flow.trajectory(z, times))
            centre, radius = _fit_circle(w)
            angle = np.unwrap(np.angle(w - centre))
            omega = np.polyfit(times, angle, 1)[0]
            fitted_period = 2 * math.pi / abs(omega)
            r_err = abs(radius - math.exp(k * b) / k) / (math.exp(k * b) / k)
            p_err = abs(fitted_period - period) / period
            assert r_err <= 1e-6, (b, radius)
            assert p_err <= 1e-6, (b, fitted_period)
            worst_r, worst_p = max(worst_r, r_err), max(worst_p, p_err)
        info.update(radius_err=f"{worst_r:.1e}", period_err=f"{worst_p:.1e}")


def _xi_distance(a: float, b: float) -> float:
    d = (a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def test_criterion_4_relation_round_trip():
    with criterion(4, "relation recovery round trip") as info:
        rng = np.random.default_rng(4)
        worst_param = worst_jac = 0.0
        for i in range(50):
            if i % 2 == 0:
                m1 = general_map(rng)
                p = random_general(rng)
            else:
                m1, lam = linear_map(rng)
                p = random_linear(rng, lam)
            m2 = related_map(m1, p)
            z = m1.domain.labels()
            J1 = jacobian(m1, z)
            jac = float(np.max(np.abs(jacobian(m2, z) - J1) / np.abs(J1)))
            assert jac <= 1e-10, jac
            q = recover_relation(m1, m2)
            assert type(q) is type(p)
            err = max(abs(q.alpha - p.alpha), abs(q.beta - p.beta))
            if isinstance(p, General):
                err = max(err, _xi_distance(q.xi, p.xi))
            assert err <= 1e-8, (p, q)
            worst_param, worst_jac = max(worst_param, err), max(worst_jac, jac)
        info.update(param_err=f"{worst_param:.1e}", jacobian_err=f"{worst_jac:.1e}")


def test_criterion_5_modulus_identity():
    with criterion(5, "modulus identity forces constants") as info:
        rng = np.random.default_rng(5)
        domain = Domain(Rectangle(-0.5, 0.5, -0.5, 0.5), 11, 11)
        labels = domain.labels()
        counts = {Verdict.FORCED_CONSTANT: 0, Verdict.NOT_SATISFIED: 0}
        for i in range(1000):
            kind = i % 4
            r = float(rng.choice([-1, 1]) * rng.uniform(0.1, 3))
            if kind == 0:
                c1, c2 = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
                s = abs(c1) ** 2 - r * abs(c2) ** 2
                phi, psi = ex.Const(c1), ex.Const(c2)
            elif kind == 1:
                phi, psi = nonconstant_expr(rng, labels), nonconstant_expr(rng, labels)
                s = float(rng.uniform(-2, 2)) or 1.0
            elif kind == 2:
                # identity satisfied at one label but not across the grid
                phi, psi = nonconstant_expr(rng, labels), nonconstant_expr(rng, labels)
                z0 = complex(labels[0])
                p0, q0 = ex.evaluate(phi, z=z0), ex.evaluate(psi, z=z0)
                s = abs(p0) ** 2 - r * abs(q0) ** 2
                if s == 0:
                    s = 1.0
            else:
                # |c1|^2 = r |c2|^2 + s with phi constant and psi nonconstant
                c1 = complex(*rng.normal(size=2))
                psi = ex.parse("z + 1")
                phi = ex.Const(c1)
                s = abs(c1) ** 2 - r
            try:
                verdict = modulus_identity_test(phi, psi, r, s, domain)
            except NonconstantModulusIdentity as err:  # the forbidden state
                pytest.fail(f"forbidden state for {ex.to_source(phi)}, {ex.to_source(psi)}: {err}")
            if kind == 0:
                assert verdict is Verdict.FORCED_CONSTANT
            else:
                assert verdict is Verdict.NOT_SATISFIED
            counts[verdict] += 1
        info.update(forced=counts[Verdict.FORCED_CONSTANT], not_satisfied=counts[Verdict.NOT_SATISFIED])


def test_criterion_6_koebe_univalence():
    with criterion(6, "harmonic Koebe univalence") as info:
        start = time.perf_counter()
        assert univalence_check(presets.harmonic_koebe(1.0)).univalent
        hits = 0
        for j in range(64):
            mu = complex(math.cos(2 * math.pi * j / 64), math.sin(2 * math.pi * j / 64))
            if univalence_check(presets.harmonic_koebe(mu)).collision is not None:
                hits += 1
        elapsed = time.perf_counter() - start
        assert hits >= 1
        assert elapsed <= 5.0, f"took {elapsed:.2f} s"
        info.update(collisions=f"{hits}/64", seconds=f"{elapsed:.2f}")


def _preset_corpus() -> list:
    exprs = []
    for name in presets.PRESETS:
        obj = presets.resolve(name)
        exprs += [obj.F, obj.G] if hasattr(obj, "F") else [obj.F0, obj.G0]
        if hasattr(obj, "beta"):
            exprs.append(obj.beta.expr)
    return exprs


def test_criterion_7_expression_calculus():
    with criterion(7, "expression calculus") as info:
        rng = np.random.default_rng(7)
        h1, h2 = 1e-2, 5e-3
        orders, exact = [], 0
        for _ in range(200):
            e = random_expr(rng, depth=4)
            d = ex.differentiate(e, "z")
            z0 = complex(*rng.uniform(-0.5, 0.5, 2))
            sym = ex.evaluate(d, z=z0)

            def fd(h):
                return (ex.evaluate(e, z=z0 + h) - ex.evaluate(e, z=z0 - h)) / (2 * h)

            e1, e2 = abs(fd(h1) - sym), abs(fd(h2) - sym)
            if e1 <= 1e-11 * (1 + abs(sym)):
                exact += 1  # central differences are exact on quadratics
                continue
            orders.append(math.log2(e1 / e2))
        assert min(orders) >= 1.9, min(orders)
        corpus = _preset_corpus()
        for e in corpus:
            src = ex.to_source(e)
            assert ex.parse(src) == e, src
            assert ex.to_source(ex.parse(src)) == src
        info.update(min_order=f"{min(orders):.3f}", exact_cases=exact, corpus=len(corpus))


def test_criterion_8_determinism(tmp_path, monkeypatch, capsys):
    with criterion(8, "byte-identical outputs") as info:
        config = tmp_path / "run.json"
        config.write_text(
            '{"flow": {"preset": "Gerstner"}, "times": [0, 0.5, 1, 2], "grid": [17, 17],'
            ' "output": {"formats": ["csv", "json"]}}'
        )
        outputs = []
        for threads in ("1", "8"):
            for rep in range(2):
                monkeypatch.setenv("LF_THREADS", threads)
                out = tmp_path / f"out-{threads}-{rep}"
                assert cli.main(["simulate", "--config", str(config), "--out", str(out)]) == 0
                assert cli.main(["verify", "--config", str(config), "--out", str(out)]) == 0
                capsys.readouterr()
                outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert set(outputs[0]) == {"trajectory.csv", "trajectory.json", "verify.json"}
        assert all(o == outputs[0] for o in outputs[1:])
        info.update(runs=len(outputs), files=len(outputs[0]))
