import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from noon_metrology.noon2_model import (
    CANONICAL_SETTINGS,
    ModelPoint,
    dv_depsilon,
    hb_setting_to_hwp,
    limit_probs,
    prob_postselected,
    prob_single_param,
    probs_full,
    visibility_from_distinguishability,
)

angles = st.floats(-10, 10)
unit = st.floats(0, 1)


def test_perfect_interference():
    p = probs_full(0.0, 0.0, 1.0)
    assert p.p1 == pytest.approx(1.0) and p.p2 == pytest.approx(0.0)


def test_distinguishable_point():
    p = probs_full(0.0, math.pi / 2, 1 / 3)
    assert p.p1 == pytest.approx(0.5, abs=1e-12)
    assert p.p2 == pytest.approx(0.25, abs=1e-12)


def test_completeness_symbolic():
    # both outcomes depend on theta and phi only through u = 4 theta - phi
    u, v = sp.symbols("u v", real=True)
    p1 = (1 + v * sp.cos(2 * u)) / (1 + v)
    p2 = v * sp.sin(u) ** 2 / (1 + v)
    assert sp.simplify(p1 + 2 * p2 - 1) == 0


@given(angles, angles, unit)
def test_completeness_numeric(theta, phi, v):
    p = probs_full(theta, phi, v)
    assert abs(p.p1 + 2 * p.p2 - 1) < 1e-12
    assert 0 <= p.p1 <= 1 and 0 <= p.p2 <= 1


def test_postselected_examples():
    assert prob_postselected(0.0, 0.0, 1.0) == pytest.approx(0.5)
    assert prob_postselected(math.pi / 8, 0.0, 1.0) == pytest.approx(0.0, abs=1e-15)


@given(angles, unit)
def test_postselected_normalized(phi, v):
    assert abs(sum(prob_postselected(t, phi, v) for t in CANONICAL_SETTINGS) - 1) < 1e-12


@given(angles, unit)
def test_postselected_consistent_with_full(phi, v):
    p1 = probs_full(CANONICAL_SETTINGS, phi, v).p1
    assert np.allclose(prob_postselected(CANONICAL_SETTINGS, phi, v), p1 / p1.sum(), atol=1e-12)


@given(angles, angles, unit)
def test_periodicity(theta, phi, v):
    ref = probs_full(theta, phi, v)
    for shifted in (probs_full(theta, phi + math.pi, v), probs_full(theta + math.pi / 4, phi, v)):
        assert abs(shifted.p1 - ref.p1) < 1e-9 and abs(shifted.p2 - ref.p2) < 1e-9
    assert abs(prob_postselected(theta + math.pi / 4, phi + math.pi, v) - prob_postselected(theta, phi, v)) < 1e-9


@given(angles, angles)
def test_limits_match_full(theta, phi):
    ind = limit_probs(theta, phi, "indistinguishable")
    dis = limit_probs(theta, phi, "distinguishable")
    f1, f3 = probs_full(theta, phi, 1.0), probs_full(theta, phi, 1 / 3)
    assert abs(ind.p1 - f1.p1) < 1e-12 and abs(ind.p2 - f1.p2) < 1e-12
    assert abs(dis.p1 - f3.p1) < 1e-12 and abs(dis.p2 - f3.p2) < 1e-12


def test_distinguishable_symbolic():
    th, ph = sp.symbols("theta phi", real=True)
    v = sp.Rational(1, 3)
    p1 = (1 + v * sp.cos(8 * th - 2 * ph)) / (1 + v)
    assert sp.simplify(p1 - (3 + sp.cos(8 * th - 2 * ph)) / 4) == 0


@given(angles, angles, unit)
def test_weighted_sum_is_full_model(theta, phi, eps):
    ind = limit_probs(theta, phi, "indistinguishable")
    dis = limit_probs(theta, phi, "distinguishable")
    w1 = (1 - eps**2) * ind.p1 + eps**2 * dis.p1
    w2 = (1 - eps**2) * ind.p2 + eps**2 * dis.p2
    total = w1 + 2 * w2
    ref = probs_full(theta, phi, visibility_from_distinguishability(eps))
    assert abs(w1 / total - ref.p1) < 1e-12
    assert abs(w2 / total - ref.p2) < 1e-12


def test_limit_rejects_regime():
    with pytest.raises(ValueError):
        limit_probs(0.0, 0.0, "partial")


@pytest.mark.parametrize("eps,v", [(0.0, 1.0), (1.0, 1 / 3), (math.sqrt(0.4), 2 / 3)])
def test_visibility(eps, v):
    assert visibility_from_distinguishability(eps) == pytest.approx(v, abs=1e-14)


@pytest.mark.parametrize("eps", [-0.01, 1.01])
def test_visibility_rejects(eps):
    with pytest.raises(ValueError):
        visibility_from_distinguishability(eps)


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
def test_dv_depsilon(eps):
    h = 1e-6
    num = (visibility_from_distinguishability(eps + h) - visibility_from_distinguishability(eps - h)) / (2 * h)
    assert dv_depsilon(eps) == pytest.approx(num, rel=1e-8)


def test_single_param_examples():
    assert prob_single_param(0.0, 0.0, 0.982) == pytest.approx(0.4955, abs=1e-12)
    assert prob_single_param(math.pi / 16, math.pi / 8, 0.978) == pytest.approx(0.42289, abs=5e-6)
    assert prob_single_param(0.3, 0.2, 0.95) == prob_postselected(0.3, 0.2, 0.95)
    with pytest.raises(ValueError):
        prob_single_param(0.0, 0.0, 1.2)


def test_model_point_validation():
    assert ModelPoint(0.3, 0.98).v == 0.98
    with pytest.raises(ValueError):
        ModelPoint(0.0, 1.1)


def test_clamp_guard_raises():
    with pytest.raises(ArithmeticError):
        probs_full(math.pi / 8, 0.0, 2.0)


def test_canonical_settings_readonly():
    with pytest.raises(ValueError):
        CANONICAL_SETTINGS[0] = 1.0


def test_setting_map():
    assert hb_setting_to_hwp(math.pi / 2) == pytest.approx(-math.pi / 8)


def test_broadcasting():
    P, V = np.meshgrid(np.linspace(0, 1, 5), np.linspace(0.5, 1, 3), indexing="ij")
    assert prob_postselected(0.1, P, V).shape == (5, 3)
