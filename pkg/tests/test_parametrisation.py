"""Order-by-order parametrisation engine used as the oracle for the closed forms."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlrom.errors import ResonanceError
from nlrom.invariant import graph_coefficients, graph_single
from nlrom.model import classify_monomials
from nlrom.parametrisation import (diagonalize, gamma_engine, invariance_residual, parametrise,
                                   residual_slope, to_real_graph)
from nlrom.zoo import make_modal, make_two_dof, random_modal

AMPS = np.geomspace(1e-3, 1e-2, 5)


@pytest.fixture(scope="module")
def two_dof():
    return make_two_dof(1.0, 2.5, g={(1, 0, 0): 0.5, (0, 0, 0): 0.3, (0, 1, 1): 0.2},
                        h={(0, 0, 0, 0): 1.0, (0, 0, 1, 1): 0.4, (1, 1, 1, 1): 0.7})


@pytest.fixture(scope="module")
def system(two_dof):
    return diagonalize(two_dof)


def test_diagonalize_spectra():
    s1 = diagonalize(make_modal([1.0]))
    np.testing.assert_allclose(s1.lam, [1j, -1j], atol=1e-15)
    s2 = diagonalize(make_modal([1.0]), damping_ratio=0.01)
    np.testing.assert_allclose(s2.lam, [-0.01 + 1j * np.sqrt(1 - 1e-4),
                                        -0.01 - 1j * np.sqrt(1 - 1e-4)], atol=1e-15)
    s3 = diagonalize(make_two_dof(1.0, 2.5))
    np.testing.assert_allclose(np.sort_complex(s3.lam), np.sort_complex([1j, -1j, 2.5j, -2.5j]),
                               atol=1e-14)


def test_diagonalize_back_transform_is_real(system):
    q = np.array([0.3 + 0.1j, 0.3 - 0.1j, -0.2j, 0.2j])
    z = system.P @ q
    assert np.abs(z.imag).max() < 1e-15
    np.testing.assert_allclose(system.P @ system.Pinv, np.eye(4), atol=1e-14)


def test_diagonalize_rejects_critical_damping():
    with pytest.raises(ValueError):
        diagonalize(make_modal([1.0]), damping_ratio=1.0)


def test_order_one_is_tangent_space(system):
    par = parametrise(system, [0], 1)
    W = par.W_poly()
    np.testing.assert_allclose(W.coefficient((1, 0)), system.P[:, 0])
    np.testing.assert_allclose(W.coefficient((0, 1)), system.P[:, 1])
    np.testing.assert_allclose(par.f_poly().coefficient((1, 0)), [system.lam[0], 0])
    assert not par.f


def test_graph_style_quadratic_matches_closed_form(two_dof, system):
    mp, _ = to_real_graph(parametrise(system, [0], 2))
    a, b, alpha = graph_coefficients(two_dof.omega, two_dof.g, 0)
    assert a[1] == pytest.approx(-0.151111111111, rel=1e-11)
    np.testing.assert_allclose(mp.disp.coefficient((2, 0))[1], a[1], rtol=1e-12)
    np.testing.assert_allclose(mp.disp.coefficient((0, 2))[1], b[1], rtol=1e-12)
    np.testing.assert_allclose(mp.vel.coefficient((1, 1))[1], alpha[1], rtol=1e-12)


def test_graph_style_masters_are_linear(system):
    par = parametrise(system, [0], 3, "graph")
    for k in (2, 3):
        assert np.abs(par.xi[k][:, par.L]).max() == 0


def test_normal_form_style_keeps_only_trivial_monomials(two_dof, system):
    par = parametrise(system, [0], 3, "normal-form")
    assert not np.any(par.f[2])
    kept = {tuple(par.exps[3][i]) for i, row in enumerate(par.f[3]) if np.any(row)}
    # s+^2 s- on the + coordinate and its conjugate on the - coordinate
    assert kept == {(2, 1), (1, 2)}
    cl = classify_monomials(two_dof, [0])
    assert cl.find(0, (0, 0, 0)).tag == "trivially-resonant"


def test_cross_resonance_error_names_mode():
    mm = make_two_dof(1.0, 2.0, g={(1, 0, 0): 0.5})
    with pytest.raises(ResonanceError, match=r"mode 2 \(index 1\)") as info:
        parametrise(diagonalize(mm), [0], 3)
    assert info.value.mode == 1


def test_resonance_without_forcing_term_is_logged():
    mm = make_two_dof(1.0, 2.0, h={(0, 0, 0, 0): 1.0})
    par = parametrise(diagonalize(mm), [0], 3)
    assert par.log


def test_residual_linear_system_is_zero():
    par = parametrise(diagonalize(make_two_dof(1.0, 2.5)), [0], 1)
    assert invariance_residual(par, [0.1, 1.0]).max() < 1e-14


@pytest.mark.parametrize("style", ["graph", "normal-form"])
def test_residual_slopes(system, style):
    par = parametrise(system, [0], 3, style)
    slope = residual_slope(AMPS, invariance_residual(par, AMPS))
    assert slope == pytest.approx(4.0, abs=0.3)
    degraded = residual_slope(AMPS, invariance_residual(par.without(2), AMPS))
    assert degraded == pytest.approx(2.0, abs=0.3)


def test_higher_order_slope(system):
    par = parametrise(system, [0], 5)
    amps = np.geomspace(1e-2, 5e-2, 5)
    assert residual_slope(amps, invariance_residual(par, amps)) == pytest.approx(6.0, abs=0.3)


def test_engine_real_map_matches_graph_single(two_dof):
    mp_g, rm_g = graph_single(two_dof, 0)
    mp_e, rm_e = to_real_graph(parametrise(diagonalize(two_dof), [0], 3))
    states = np.array([[0.01, 0.004], [-0.02, 0.01], [0.005, -0.03]])
    Xg, Yg = mp_g.evaluate(states)
    Xe, Ye = mp_e.evaluate(states)
    np.testing.assert_allclose(Xg, Xe, atol=1e-14)
    np.testing.assert_allclose(Yg, Ye, atol=1e-14)
    for d, v in (((2,), (0,)), ((3,), (0,)), ((1,), (2,))):
        assert rm_e.coefficient(0, d, v) == pytest.approx(rm_g.coefficient(0, d, v), rel=1e-12)


def test_real_map_is_real_on_conjugate_states(system):
    par = parametrise(system, [0], 3)
    s = np.array([[0.01 * np.exp(1j * t), 0.01 * np.exp(-1j * t)] for t in (0.1, 1.3, 2.9)])
    assert np.abs(par.W_poly()(s).imag).max() < 1e-10 * 0.01


def test_gamma_engine_duffing():
    assert gamma_engine(make_modal([1.0], h={(0, 0, 0, 0): 1.0})) == pytest.approx(0.375)


def test_to_dict_layout(system):
    d = parametrise(system, [0], 2).to_dict()
    assert d["style"] == "graph" and set(d["W"]) == {"1", "2"}
    assert len(d["W"]["2"]["coef"][0][0]) == 2


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_random_models_residual_slope(seed):
    rng = np.random.default_rng(seed)
    omega = np.array([1.0, rng.uniform(2.3, 6.0), rng.uniform(6.5, 9.0)])
    mm = random_modal(omega, rng, 0.5, 0.5)
    par = parametrise(diagonalize(mm), [0], 3)
    assert residual_slope(AMPS, invariance_residual(par, AMPS)) == pytest.approx(4.0, abs=0.3)
