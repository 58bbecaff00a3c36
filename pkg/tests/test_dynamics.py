"""Time integration, continuation, closed-form curvatures and manifold comparison."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from nlrom.condensation import ice_fit, ice_sample, stress_manifold_map
from nlrom.continuation import Curve, HarmonicBalance, backbone, frf, gamma_from_backbone
from nlrom.dynamics import (compare_manifolds, gamma_closed_form, gamma_parts, gamma_rom,
                            integrate, reconstruct)
from nlrom.errors import ConvergenceError, ResonanceError, SchemaError
from nlrom.invariant import graph_single, nf_third_order
from nlrom.qm import qm_build
from nlrom.reduced import ReducedModel
from nlrom.zoo import make_modal, make_two_dof

METHODS = ("nf", "ice", "qm-md", "qm-smd")


@pytest.fixture(scope="module")
def duffing_rom():
    return nf_third_order(make_modal([1.0], h={(0, 0, 0, 0): 1.0}), 0)[1]


@pytest.fixture(scope="module")
def forced(duffing_rom):
    return duffing_rom.with_damping([0.01]).with_forcing([0.01])


@pytest.fixture(scope="module")
def frf_up(forced):
    return frf(forced, (0.8, 1.6), H=5)


@pytest.fixture(scope="module")
def frf_down(forced):
    return frf(forced, (1.6, 0.8), H=5)


@pytest.fixture(scope="module")
def two_dof():
    return make_two_dof(1.0, 5.0, g={(1, 0, 0): 0.5, (0, 0, 0): 0.1, (0, 1, 1): 0.2},
                        h={(0, 0, 0, 0): 1.0, (0, 0, 1, 1): 0.3})


def _rom(mm, method):
    if method == "nf":
        return nf_third_order(mm, 0)[1]
    if method == "ice":
        return ice_fit(ice_sample(mm, 0, amp_target=0.01))
    return qm_build(mm, 0, "full" if method == "qm-md" else "static")[1]


def test_linear_period():
    tr = integrate(make_modal([1.0]), [1.0], [0.0], 7.0, 1e-3)
    v, a = tr.v[:, 0], -tr.x[:, 0]
    spl = CubicHermiteSpline(tr.t, v, a)
    # the velocity crosses zero from below at one full period
    t_per = brentq(spl, 6.0, 6.5)
    assert t_per == pytest.approx(2 * np.pi, abs=1e-6)


def test_duffing_energy_drift():
    mm = make_modal([1.0], h={(0, 0, 0, 0): 1.0})
    x0 = 0.5
    T = 2 * np.pi / (1 + 3 / 8 * x0 ** 2)
    tr = integrate(mm, [x0], [0.0], 100 * T, T / 1000)
    x, v = tr.x[:, 0], tr.v[:, 0]
    E = 0.5 * v ** 2 + 0.5 * x ** 2 + 0.25 * x ** 4
    assert np.abs(E - E[0]).max() / E[0] < 1e-6


def test_integration_blow_up():
    mm = make_modal([1.0], h={(0, 0, 0, 0): -1.0})
    with pytest.raises(ConvergenceError, match="blew up at t="):
        integrate(mm, [3.0], [0.0], 50.0, 0.01)


def test_integration_rejects_bad_step():
    with pytest.raises(ValueError):
        integrate(make_modal([1.0]), [1.0], [0.0], 1.0, 0.0)


def test_integration_is_deterministic(two_dof):
    a = integrate(two_dof, [0.1, 0.0], [0.0, 0.0], 5.0, 0.01)
    b = integrate(two_dof, [0.1, 0.0], [0.0, 0.0], 5.0, 0.01)
    np.testing.assert_array_equal(a.x, b.x)


def test_physical_and_modal_integration_agree(two_dof):
    phys = two_dof.as_physical()
    a = integrate(two_dof, [0.1, 0.02], [0.0, 0.0], 3.0, 0.01)
    b = integrate(phys, [0.1, 0.02], [0.0, 0.0], 3.0, 0.01)
    np.testing.assert_allclose(a.x, b.x, atol=1e-13)


def test_full_vs_rom_trajectory(two_dof):
    mp, rm = nf_third_order(two_dof, 0)
    gam = gamma_closed_form(two_dof, 0, "nf")
    a = np.sqrt(0.05 / abs(gam))
    X0, V0 = mp.evaluate([[a, 0.0]])
    T = 2 * np.pi
    dt = T / 300
    full = integrate(two_dof, X0[0], V0[0], 50 * T, dt)
    red = integrate(rm, [a], [0.0], 50 * T, dt)
    X, _ = reconstruct(mp, np.column_stack([red.x, red.v]))
    rms = np.sqrt(np.mean(np.sum((X - full.x) ** 2, axis=1)) / np.mean(np.sum(full.x ** 2, axis=1)))
    assert rms < 0.02


@pytest.mark.parametrize("method", METHODS)
def test_gamma_without_quadratic_terms(method):
    mm = make_two_dof(1.3, 4.0, h={(0, 0, 0, 0): 0.9, (0, 0, 1, 1): 0.4})
    assert gamma_closed_form(mm, 0, method) == pytest.approx(3 * 0.9 / (8 * 1.3 ** 2), rel=1e-15)


def test_gamma_single_slave_value():
    mm = make_two_dof(1.0, 3.0, g={(1, 0, 0): 1.0})
    # F = 1 + 4/15 so the curvature is (3/8)(-2/9)(19/15)
    assert gamma_closed_form(mm, 0, "nf") == pytest.approx(-19 / 180, rel=1e-14)
    assert gamma_closed_form(mm, 0, "ice") == pytest.approx(-1 / 12, rel=1e-14)


def test_gamma_common_term():
    mm = make_two_dof(2.0, 7.0, g={(0, 0, 0): 0.6})
    common, summed = gamma_parts(mm, 0, "nf")
    assert common == pytest.approx(-5 / 48 * 0.09, rel=1e-14)
    assert summed == 0.0


def test_gamma_guards():
    with pytest.raises(ResonanceError, match=r"mode 2 \(index 1\)"):
        gamma_closed_form(make_two_dof(1.0, 2.0, g={(1, 0, 0): 0.3}), 0, "nf")
    with pytest.raises(ValueError):
        gamma_closed_form(make_two_dof(1.0, 3.0), 0, "graph")


@settings(max_examples=50, deadline=None)
@given(st.floats(2.2, 20.0), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_gamma_closed_form_matches_rom(rho, gs, gm, h):
    # w_s = 3 w_m is a third-order resonance that the normal form rejects
    assume(abs(rho - 3.0) > 1e-2)
    mm = make_two_dof(1.0, rho, g={(1, 0, 0): gs, (0, 0, 0): gm}, h={(0, 0, 0, 0): h})
    _, rm = nf_third_order(mm, 0)
    assert gamma_rom(rm) == pytest.approx(gamma_closed_form(mm, 0, "nf"), abs=1e-10)


def test_linear_backbone():
    rm = ReducedModel([1.7], [()], (0,))
    c = backbone(rm, 0.5, H=3)
    np.testing.assert_allclose(c.omega, 1.7, rtol=1e-12)
    assert c.amp[-1, 0] >= 0.5
    assert gamma_from_backbone(c) == pytest.approx(0.0, abs=1e-10)


def test_duffing_backbone(duffing_rom):
    a_ref = np.sqrt(0.01 / (3 / 8))
    c = backbone(duffing_rom, 1.2 * a_ref)
    w = np.interp(a_ref, c.amp[:, 0], c.omega)
    assert w - 1.0 == pytest.approx(0.01, rel=1e-2)
    assert c.residual.max() < 1e-10
    assert c.stable.all() and set(c.tag) == {"none"}


def test_backbone_rejects_damped(duffing_rom):
    with pytest.raises(ValueError, match="conservative"):
        backbone(duffing_rom.with_damping([0.01]), 0.1)


@pytest.mark.parametrize("method", METHODS)
def test_backbone_fit_matches_closed_form(two_dof, method):
    gam = gamma_closed_form(two_dof, 0, method)
    a_fit = np.sqrt(0.01 / abs(gam))
    c = backbone(_rom(two_dof, method), a_fit, H=5)
    assert gamma_from_backbone(c, a_fit=a_fit) == pytest.approx(gam, rel=1e-2)


def test_backbone_fit_needs_points():
    c = Curve(np.ones(3), np.full((3, 1), 0.1), np.ones(3, bool), ["none"] * 3)
    with pytest.raises(ValueError, match="insufficient"):
        gamma_from_backbone(c)


def test_frf_two_folds(frf_up, frf_down):
    assert len(frf_up.tags("SN")) == 2
    assert len(frf_down.tags("SN")) == 2
    assert not frf_up.stable[frf_up.tags("SN")[0] + 1:frf_up.tags("SN")[1]].any()


def test_frf_peak_follows_backbone(frf_up, duffing_rom):
    i = int(np.argmax(frf_up.amp[:, 0]))
    a_pk = frf_up.amp[i, 0]
    bb = backbone(duffing_rom, 1.1 * a_pk)
    assert frf_up.omega[i] == pytest.approx(np.interp(a_pk, bb.amp[:, 0], bb.omega), rel=1e-3)


def test_frf_small_force_single_peak(duffing_rom):
    c = frf(duffing_rom.with_damping([0.01]).with_forcing([0.002]), (0.8, 1.3), H=5)
    assert not c.tags("SN") and c.stable.all()


def test_frf_zero_forcing(duffing_rom):
    c = frf(duffing_rom.with_damping([0.05]).with_forcing([0.0]), (0.5, 1.5), H=3)
    assert c.amp.max() == 0.0


def test_frf_needs_damping(duffing_rom):
    with pytest.raises(ValueError, match="damping"):
        frf(duffing_rom.with_forcing([0.01]), (0.8, 1.2))


def test_frf_direction_independence(forced, frf_up, frf_down):
    hb = HarmonicBalance(forced, 5, "full")
    sn = frf_up.omega[frf_up.tags("SN")]
    pts_up = np.column_stack([frf_up.omega, frf_up.amp[:, 0]])
    n_checked = 0
    for i in range(len(frf_down)):
        Om = frf_down.omega[i]
        if np.min(np.abs(sn - Om)) < 0.01 or not 0.8 <= Om <= 1.6:
            continue
        j = int(np.argmin(np.sum((pts_up - [Om, frf_down.amp[i, 0]]) ** 2, axis=1)))
        u = frf_up.coeffs[j].ravel().copy()
        for _ in range(30):
            du = np.linalg.solve(hb.jacobian(u, Om)[0], -hb.residual(u, Om))
            u += du
            if np.linalg.norm(du) < 1e-14:
                break
        np.testing.assert_allclose(u, frf_down.coeffs[i].ravel(), atol=1e-8)
        n_checked += 1
    assert n_checked > 20


def test_curve_csv_roundtrip(tmp_path, frf_up):
    path = tmp_path / "c.csv"
    frf_up.to_csv(path)
    back = Curve.from_csv(path)
    assert back.tag == frf_up.tag
    np.testing.assert_array_equal(back.omega, frf_up.omega)
    np.testing.assert_array_equal(back.amp, frf_up.amp)
    np.testing.assert_array_equal(back.stable, frf_up.stable)


def test_curve_csv_schema(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("omega,a_1,stable,tag\n1.0,0.1,1,XX\n")
    with pytest.raises(SchemaError, match="tag"):
        Curve.from_csv(path)


def test_compare_identical_maps(two_dof):
    mp, _ = graph_single(two_dof, 0)
    rep = compare_manifolds(mp, mp, [0.05, 0.1])
    assert not rep["zero_velocity"].any() and not rep["full_circle"].any()


def test_compare_rejects_master_mismatch():
    mm = make_modal([1.0, 1.7, 5.0], g={(2, 0, 0): 0.3})
    with pytest.raises(ValueError, match="master"):
        compare_manifolds(graph_single(mm, 0)[0], graph_single(mm, 1)[0], [0.1])


def test_stress_manifold_gap_shrinks_with_separation():
    gaps = []
    for rho in (2.5, 10.0):
        mm = make_two_dof(1.0, rho, g={(1, 0, 0): 0.5}, h={(0, 0, 0, 0): 1.0})
        rep = compare_manifolds(stress_manifold_map(mm, 0), graph_single(mm, 0)[0], [0.1])
        gaps.append(rep["full_circle"][0])
    assert gaps[0] > 4 * gaps[1]


def test_qm_gap_is_smaller_at_zero_velocity(two_dof):
    rep = compare_manifolds(qm_build(two_dof, 0)[0], graph_single(two_dof, 0)[0], [0.05, 0.1])
    assert np.all(rep["zero_velocity"] < rep["full_circle"])


def test_compare_normal_form_map(two_dof):
    # the normal-form map is inverted on the master coordinates before comparison;
    # both maps share the second-order slave geometry, so the gap is at least cubic
    mp_nf, _ = nf_third_order(two_dof, 0)
    mp_g, _ = graph_single(two_dof, 0)
    rep = compare_manifolds(mp_nf, mp_g, [0.01, 0.02])
    assert rep["full_circle"][1] / rep["full_circle"][0] > 7.5


def test_modal_projection_of_physical_qm_map():
    from nlrom.model import assemble_modal
    from nlrom.dynamics import modal_projection
    from nlrom.zoo import ZooSpec, beam_physical

    phys = beam_physical(ZooSpec(kind="shallow-arch", n_modes=4, w0=0.5, arch_shape="parabola"))
    mm = assemble_modal(phys)
    proj = modal_projection(qm_build(phys, 0)[0], mm.V, phys.mass)
    ref = qm_build(mm, 0)[0]
    s = np.array([[0.1, 0.0], [-0.05, 0.3]])
    np.testing.assert_allclose(proj.evaluate(s)[0], ref.evaluate(s)[0], atol=1e-12)
    assert compare_manifolds(proj, ref, [0.1])["full_circle"][0] < 1e-12
    with pytest.raises(ValueError, match="physical"):
        modal_projection(ref, mm.V, phys.mass)
