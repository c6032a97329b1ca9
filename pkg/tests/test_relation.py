from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _generators import general_map, linear_map, random_general, random_linear
from lagflow import expr as ex
from lagflow.errors import (
    FitResidualExceeded,
    InvalidRelationParams,
    JacobianMismatch,
    NonconstantModulusIdentity,
    NotSensePreserving,
)
from lagflow.harmonic import Disk, Domain, HarmonicMap, Rectangle, jacobian
from lagflow.relation import (
    General,
    LinearDependent,
    Verdict,
    apply_relation,
    compose,
    fit_residual,
    modulus_identity_test,
    recover_relation,
    related_map,
)

GERSTNER_DOMAIN = Domain(Rectangle(0.0, 2 * math.pi, -2.0, -0.1), 21, 21)
GERSTNER0 = HarmonicMap(ex.parse("z"), ex.parse("-(i/k)*exp(-i*k*z)"), GERSTNER_DOMAIN, {"k": 1.0})


def test_params_invariants():
    with pytest.raises(InvalidRelationParams):
        General(1.0, 1.0)
    with pytest.raises(InvalidRelationParams):
        LinearDependent(0.5, 0.5)
    assert General(math.sqrt(2), 1, -0.5).xi == pytest.approx(2 * math.pi - 0.5)


def test_identity_relation():
    p = recover_relation(GERSTNER0, GERSTNER0)
    assert isinstance(p, General)
    assert (p.alpha, p.beta) == (pytest.approx(1), pytest.approx(0, abs=1e-14))
    assert min(p.xi, 2 * math.pi - p.xi) == pytest.approx(0, abs=1e-12)


def test_identity_relation_linear_branch():
    m = HarmonicMap(ex.parse("exp(i*z)"), ex.parse("0.5*exp(i*z)"), Domain(Disk(0, 1), 21, 21))
    p = recover_relation(m, m)
    assert isinstance(p, LinearDependent)
    assert (p.alpha, p.beta) == (pytest.approx(1), pytest.approx(0.5))


def test_gerstner_round_trip():
    planted = General(math.sqrt(2) * cmath.exp(0.3j), 1.0, 0.7)
    p = recover_relation(GERSTNER0, related_map(GERSTNER0, planted))
    assert abs(p.alpha - planted.alpha) <= 1e-9
    assert abs(p.beta - planted.beta) <= 1e-9
    assert abs(p.xi - 0.7) <= 1e-9


def test_linear_dependent_recovery():
    d = Domain(Disk(0, 1), 21, 21)
    m1 = HarmonicMap(ex.parse("exp(i*z)"), ex.parse("0.5*exp(i*z)"), d)
    m2 = HarmonicMap(ex.Mul(ex.Const(math.sqrt(0.84)), ex.parse("exp(i*z)")), ex.parse("0.3*exp(i*z)"), d)
    p = recover_relation(m1, m2)
    assert isinstance(p, LinearDependent)
    assert p.alpha == pytest.approx(math.sqrt(0.84), abs=1e-12)
    assert p.beta == pytest.approx(0.3, abs=1e-12)
    assert abs(p.alpha) ** 2 - abs(p.beta) ** 2 == pytest.approx(0.75)


def test_apply_relation_identity_and_formula():
    F2, G2 = apply_relation(GERSTNER0, General(1, 0, 0))
    z = GERSTNER_DOMAIN.labels()
    f1, g1 = GERSTNER0.derivatives(z)
    np.testing.assert_allclose(ex.evaluate(F2, GERSTNER0.params, z=z), f1)
    np.testing.assert_allclose(ex.evaluate(G2, GERSTNER0.params, z=z), g1)
    a, b, xi = 1.2 + 0.3j, 0.4 - 0.6j, 1.1
    a = a / abs(a) * math.sqrt(1 + abs(b) ** 2)
    F2, G2 = apply_relation(GERSTNER0, General(a, b, xi))
    e = cmath.exp(1j * xi)
    np.testing.assert_allclose(ex.evaluate(F2, GERSTNER0.params, z=z), a * f1 + b * e * g1, rtol=1e-13)
    np.testing.assert_allclose(ex.evaluate(G2, GERSTNER0.params, z=z), b.conjugate() * f1 + a.conjugate() * e * g1, rtol=1e-13)


def test_jacobian_preserved_on_gerstner():
    m2 = related_map(GERSTNER0, General(math.sqrt(2), 1, 1.1))
    z = GERSTNER_DOMAIN.labels()
    assert np.max(np.abs(jacobian(m2, z) - jacobian(GERSTNER0, z))) <= 1e-10


def test_jacobian_mismatch():
    m2 = HarmonicMap(ex.parse("2*z"), GERSTNER0.G, GERSTNER_DOMAIN, GERSTNER0.params)
    with pytest.raises(JacobianMismatch):
        recover_relation(GERSTNER0, m2)


def test_sign_flip_of_g_is_a_rotation():
    d = Domain(Disk(0, 0.5), 21, 21)
    m1 = HarmonicMap(ex.parse("z + z^3/3"), ex.parse("z^2/4"), d)
    m2 = HarmonicMap(ex.parse("z + z^3/3"), ex.parse("-z^2/4"), d)
    p = recover_relation(m1, m2)
    assert abs(p.xi - math.pi) < 1e-9
    assert fit_residual(m1, m2, p) < 1e-12


def test_first_map_must_be_sense_preserving():
    d = Domain(Disk(0, 0.5), 21, 21)
    m = HarmonicMap(ex.parse("z^2/4"), ex.parse("z"), d)
    with pytest.raises(NotSensePreserving):
        recover_relation(m, m)


def test_fit_residual_exceeded():
    # G2' = G1' (1 + i d z): Jacobians agree to ~1e-9, the fit misses by ~1e-7
    d = Domain(Disk(0, 0.8), 21, 21)
    m1 = HarmonicMap(ex.parse("z"), ex.parse("0.005*z^2"), d)
    m2 = HarmonicMap(ex.parse("z"), ex.parse("0.005*z^2 + i*1e-7*z^3/3"), d)
    with pytest.raises(FitResidualExceeded):
        recover_relation(m1, m2)


@given(st.integers(0, 2 ** 32 - 1))
def test_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    m1, p = general_map(rng, n=15), random_general(rng)
    q = recover_relation(m1, related_map(m1, p))
    assert abs(q.alpha - p.alpha) <= 1e-8 and abs(q.beta - p.beta) <= 1e-8
    d = (q.xi - p.xi) % (2 * math.pi)
    assert min(d, 2 * math.pi - d) <= 1e-8


@given(st.integers(0, 2 ** 32 - 1))
def test_linear_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    m1, lam = linear_map(rng, n=15)
    p = random_linear(rng, lam)
    q = recover_relation(m1, related_map(m1, p))
    assert isinstance(q, LinearDependent)
    assert abs(q.alpha - p.alpha) <= 1e-8 and abs(q.beta - p.beta) <= 1e-8


@given(st.integers(0, 2 ** 32 - 1))
def test_group_property(seed):
    rng = np.random.default_rng(seed)
    m1 = general_map(rng, n=15)
    p, q = random_general(rng), random_general(rng)
    two_step = related_map(related_map(m1, p), q)
    one_step = related_map(m1, compose(q, p))
    z = rng.uniform(-0.5, 0.5, 100) + 1j * rng.uniform(-0.5, 0.5, 100)
    np.testing.assert_allclose(two_step(z), one_step(z), rtol=1e-12, atol=1e-12)


def test_compose_with_rotation():
    p, q = General(math.sqrt(2), 1, 0.4), General(math.sqrt(5), 2j, 1.3)
    np.testing.assert_allclose(compose(q, p).matrix, q.matrix @ p.matrix, atol=1e-14)


# -- modulus identity ------------------------------------------------------------------

SMALL = Domain(Rectangle(-1, 1, -1, 1), 11, 11)


def test_modulus_identity_examples():
    assert modulus_identity_test(ex.Const(2), ex.Const(1), 3, 1, SMALL) is Verdict.FORCED_CONSTANT
    assert modulus_identity_test(ex.parse("z"), ex.parse("z"), 1, 1, SMALL) is Verdict.NOT_SATISFIED
    assert modulus_identity_test(ex.parse("exp(i*z)"), ex.Const(1), 1, 0, SMALL) is Verdict.NOT_SATISFIED


def test_modulus_identity_holding_with_zero_s_is_rejected():
    with pytest.raises(ValueError):
        modulus_identity_test(ex.parse("2*z"), ex.parse("z"), 4, 0, SMALL)


def test_forbidden_state_is_an_error():
    # r is small enough that a nonconstant psi passes the identity check
    with pytest.raises(NonconstantModulusIdentity):
        modulus_identity_test(ex.Const(1), ex.parse("1 + 1e-3*z"), 1e-3, 1 - 1e-3, SMALL, tol=1e-4)
