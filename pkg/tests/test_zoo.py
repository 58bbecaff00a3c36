"""Model zoo generators and the black-box force evaluator."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlrom.dynamics import gamma_closed_form
from nlrom.model import check_tensor_symmetry, eval_internal_force
from nlrom.zoo import (ZooSpec, as_blackbox, beam_physical, make_foundation_beam,
                       make_shallow_arch, make_two_dof, make_vk_beam)


@pytest.fixture(scope="module")
def vk5():
    return make_vk_beam(n_modes=5)


@pytest.fixture(scope="module")
def arches():
    return {w0: make_shallow_arch(n_modes=4, w0=w0) for w0 in (-1.5, 0.0, 1.5, 3.0)}


def test_two_dof_uncoupled():
    mm = make_two_dof(1.0, 2.5)
    assert not mm.g.any() and not mm.h.any()
    np.testing.assert_array_equal(mm.omega, [1.0, 2.5])


def test_two_dof_fills_permutations():
    mm = make_two_dof(1.0, 10.0, g={(1, 0, 0): 0.5}, h={(0, 0, 1, 1): 0.2})
    assert mm.g[0, 0, 1] == mm.g[0, 1, 0] == mm.g[1, 0, 0] == 0.5
    assert mm.h[1, 0, 1, 0] == 0.2
    assert check_tensor_symmetry(mm, 1e-12).passed


def test_two_dof_rejects_inconsistent_entries():
    with pytest.raises(ValueError, match="symmetry-inconsistent"):
        make_two_dof(1.0, 2.5, g={(1, 0, 0): 0.5, (0, 0, 1): 0.3})


def test_vk_beam_spectrum_and_tensors(vk5):
    k = np.arange(1, 6)
    np.testing.assert_allclose(vk5.omega, k ** 2, rtol=1e-12)
    assert not vk5.g.any()
    assert vk5.h[0, 0, 0, 0] > 0
    assert check_tensor_symmetry(vk5, 1e-12).passed


def test_vk_beam_single_mode_is_duffing():
    mm = make_vk_beam(n_modes=1)
    assert mm.omega[0] == pytest.approx(1.0)
    assert mm.h[0, 0, 0, 0] > 0 and mm.g[0, 0, 0] == 0


def test_vk_beam_axial_coefficient_choice():
    es = make_vk_beam(n_modes=1)
    ei = make_vk_beam(n_modes=1, axial="EI")
    spec = ZooSpec()
    assert ei.h[0, 0, 0, 0] / es.h[0, 0, 0, 0] == pytest.approx(spec.inertia / spec.area)


def test_foundation_beam_quadrature():
    spec = ZooSpec(kind="foundation-beam", n_modes=3, kappa=2.0)
    mm = make_foundation_beam(spec)
    l, th = spec.length, spec.thickness
    scale = spec.E * spec.inertia * (np.pi / l) ** 4 * l / 2
    # mass-normalised sine modes: V is diagonal with unit entries up to sign
    np.testing.assert_allclose(np.abs(mm.V), np.eye(3), atol=1e-14)
    h111 = spec.kappa * 3 * l / 8 * th ** 2 / scale
    assert mm.h[0, 0, 0, 0] == pytest.approx(h111, rel=1e-12)
    s = mm.V[0, 0] ** 3 * mm.V[2, 2]
    assert mm.h[0, 0, 0, 2] == pytest.approx(s * spec.kappa * (-l / 8) * th ** 2 / scale,
                                             rel=1e-12)
    assert not mm.g.any()
    lin = make_foundation_beam(n_modes=3, kappa=0.0)
    assert not lin.h.any()


def test_arch_quadratic_scaling(arches):
    # modal tensors follow frequency order, so compare the physical tensors
    g = {w0: beam_physical(ZooSpec(kind="shallow-arch", n_modes=4, w0=w0)).quad_dense()
         for w0 in (0.0, 1.5, 3.0, -1.5)}
    assert not g[0.0].any()
    big = np.abs(g[1.5]).max()
    assert big > 0
    np.testing.assert_allclose(g[3.0], 2 * g[1.5], rtol=0, atol=1e-12 * big)
    np.testing.assert_allclose(g[-1.5], -g[1.5], rtol=0, atol=1e-12 * big)
    assert arches[1.5].g[1, 0, 0] != 0 or arches[1.5].g[0, 0, 0] != 0
    np.testing.assert_allclose(arches[-1.5].h, arches[1.5].h, rtol=1e-12, atol=1e-15)
    for mm in arches.values():
        assert check_tensor_symmetry(mm, 1e-12).passed


def test_arch_flat_limit_matches_vk_beam():
    np.testing.assert_allclose(make_shallow_arch(n_modes=3, w0=0.0).h,
                               make_vk_beam(n_modes=3).h, rtol=1e-12, atol=1e-15)


def test_arch_rise_turns_hardening_into_softening():
    gam = [gamma_closed_form(make_shallow_arch(n_modes=4, w0=w0), 0, "nf")
           for w0 in np.linspace(0.0, 0.5, 6)]
    assert gam[0] > 0 and gam[-1] < 0
    assert np.all(np.diff(gam) < 0)


def test_zoo_spec_validation():
    with pytest.raises(ValueError):
        ZooSpec(n_modes=0)
    with pytest.raises(ValueError):
        ZooSpec(thickness=-1.0)
    with pytest.raises(ValueError):
        ZooSpec(kind="plate")
    spec = ZooSpec.from_pairs(["kind=shallow-arch", "n_modes=2", "w0=0.5"])
    assert spec.n_modes == 2 and spec.w0 == 0.5


def test_blackbox_linear_and_definitional():
    assert not as_blackbox(make_two_dof(1.0, 2.0))(np.array([0.3, -0.1])).any()
    phys = beam_physical(ZooSpec(kind="shallow-arch", n_modes=3, w0=1.0))
    fe = as_blackbox(phys)
    X = np.random.default_rng(0).normal(size=3)
    np.testing.assert_allclose(fe(X), eval_internal_force(phys, X) - phys.stiffness @ X,
                               rtol=1e-14, atol=1e-14 * np.abs(phys.stiffness @ X).max())
    with pytest.raises(ValueError):
        fe(np.zeros(2))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_blackbox_cubic_parity(x):
    fe = as_blackbox(make_vk_beam(n_modes=4))
    X = np.array(x)
    np.testing.assert_allclose(fe(-X), -fe(X), rtol=0, atol=0)
