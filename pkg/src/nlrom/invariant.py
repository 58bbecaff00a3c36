"""Third-order invariant-manifold reduced models.

Three builders are provided:

* graph style, where slave modal coordinates are functions of the master
  displacement and velocity;
* the real normal form of the modal equations, written in normal
  coordinates (R, S = R');
* the direct normal form computed from the physical mass and stiffness
  matrices with only the master eigenpairs.
"""
from __future__ import annotations

import itertools

import numpy as np
import scipy.linalg as spl

from .errors import ReductionError, ResonanceError, mode_label
from .model import ModalModel, PhysicalModel
from .parametrisation import diagonalize, gamma_engine, parametrise, to_real_graph
from .poly import Poly, monomials
from .reduced import ManifoldMap, ReducedModel


def _masters(masters, N):
    if np.isscalar(masters):
        masters = [masters]
    out = tuple(int(r) for r in masters)
    if not out or len(set(out)) != len(out) or min(out) < 0 or max(out) >= N:
        raise ValueError(f"invalid master set {masters} for {N} modes")
    return out


def _conservative(mm):
    return ModalModel(mm.omega, mm.V, mm.g, mm.h)


def graph_coefficients(omega, g, m, tol=1e-3):
    """Quadratic graph-style coefficients of every slave for master ``m``.

    Returns
    -------
    a, b, alpha : (N,) ndarray
        Zero at the master entry.
    """
    omega = np.asarray(omega, dtype=float)
    N = omega.size
    wm = omega[m]
    a = np.zeros(N)
    b = np.zeros(N)
    alpha = np.zeros(N)
    for s in range(N):
        if s == m:
            continue
        ws = omega[s]
        if abs(ws - 2 * wm) < tol * wm:
            raise ResonanceError(
                f"second-order internal resonance: slave {mode_label(s)} has "
                f"w_s = {ws:.6g} close to 2 w_m = {2 * wm:.6g}; the single-master "
                "graph is not defined, include this mode in the master set", mode=s,
                monomial=(2, 0))
        gs = g[s, m, m]
        den = ws ** 2 * (ws ** 2 - 4 * wm ** 2)
        a[s] = (2 * wm ** 2 - ws ** 2) / den * gs
        b[s] = 2.0 / den * gs
        alpha[s] = -2.0 / (ws ** 2 - 4 * wm ** 2) * gs
    return a, b, alpha


def graph_single(mm, m, tol=1e-3):
    """Single-master graph-style invariant manifold up to third order.

    Parameters
    ----------
    mm : ModalModel
    m : int
        Master mode index.
    tol : float
        Relative guard on ``|w_s - 2 w_m| / w_m``.

    Returns
    -------
    ManifoldMap, ReducedModel
        The map gives modal displacements and velocities in terms of
        ``(x_m, y_m)``; its quadratic coefficients are the closed forms and
        its cubic ones come from the parametrisation engine. The reduced
        model is ``x'' + w^2 x + g^m_mm x^2 + c3 x^3 + c1 x y^2 = 0``.
    """
    N = mm.n_modes
    m = _masters(m, N)[0]
    omega, g, h = mm.omega, mm.g, mm.h
    a, b, alpha = graph_coefficients(omega, g, m, tol)
    wm = omega[m]
    c3 = h[m, m, m, m]
    c1 = 0.0
    for s in range(N):
        if s == m:
            continue
        c3 += 2 * g[m, m, s] * a[s]
        c1 += 2 * g[m, m, s] * b[s]
    terms = ((g[m, m, m], (2,), (0,)), (c3, (3,), (0,)), (c1, (1,), (2,)))
    rm = ReducedModel(np.array([wm]), (terms,), (m,), _damping(mm, (m,)), method="graph")
    disp_terms = {(1, 0): np.eye(N)[m], (2, 0): a, (0, 2): b}
    vel_terms = {(0, 1): np.eye(N)[m], (1, 1): alpha}
    coeffs = {"a": a, "b": b, "alpha": alpha}
    engine = _engine_graph(mm, (m,))
    if engine is not None:
        emap = engine
        for e in monomials(2, 3):
            cd = emap.disp.coefficient(e)
            cv = emap.vel.coefficient(e)
            if np.any(cd):
                disp_terms[e] = cd
            if np.any(cv):
                vel_terms[e] = cv
        coeffs.update({"c": emap.disp.coefficient((3, 0)), "d": emap.disp.coefficient((1, 2)),
                       "beta": emap.vel.coefficient((2, 1)), "gamma": emap.vel.coefficient((0, 3))})
    mp = ManifoldMap("graph", 3, (m,), Poly(2, (N,), disp_terms), Poly(2, (N,), vel_terms),
                     "modal", coeffs)
    return mp, rm


def _engine_graph(mm, masters):
    par = parametrise(diagonalize(_conservative(mm)), masters, 3, "graph")
    mp, _ = to_real_graph(par)
    return mp


def _damping(mm, masters):
    if mm.damping_ratio is None:
        return None
    return np.asarray(mm.damping_ratio)[list(masters)]


def graph_multi(mm, masters):
    """Multi-master graph-style manifold through the parametrisation engine.

    Parameters
    ----------
    mm : ModalModel
    masters : iterable of int

    Returns
    -------
    ManifoldMap, ReducedModel
    """
    masters = _masters(masters, mm.n_modes)
    par = parametrise(diagonalize(_conservative(mm)), masters, 3, "graph")
    mp, rm = to_real_graph(par)
    rm = ReducedModel(rm.omega, rm.terms, masters, _damping(mm, masters), method="graph")
    return mp, rm


def nf_quadratic(omega, g, masters, tol=1e-3):
    """Second-order real normal-form coefficients ``a^p_ij, b^p_ij, gamma^p_ij``.

    Indices ``i, j`` run over the masters, ``p`` over all modes.

    Raises
    ------
    ResonanceError
        ``w_p`` is within ``tol`` (relative) of ``w_i + w_j`` or
        ``|w_i - w_j|`` while ``g^p_ij`` is nonzero.
    """
    omega = np.asarray(omega, dtype=float)
    N = omega.size
    m = len(masters)
    a = np.zeros((N, m, m))
    b = np.zeros((N, m, m))
    c = np.zeros((N, m, m))
    found = []
    for p in range(N):
        wp = omega[p]
        for i, j in itertools.product(range(m), repeat=2):
            gp = g[p, masters[i], masters[j]]
            if gp == 0.0:
                continue
            wi, wj = omega[masters[i]], omega[masters[j]]
            if abs(wp - (wi + wj)) < tol * wp or abs(wp - abs(wi - wj)) < tol * wp:
                found.append((p, masters[i], masters[j]))
                continue
            D = (wp ** 2 - (wi + wj) ** 2) * (wp ** 2 - (wi - wj) ** 2)
            a[p, i, j] = gp * (wi ** 2 + wj ** 2 - wp ** 2) / D
            b[p, i, j] = 2 * gp / D
            c[p, i, j] = 2 * gp * (wj ** 2 - wi ** 2 - wp ** 2) / D
    if found:
        p, i, j = found[0]
        listing = ", ".join(f"g^{q}_{k}{l} x_{k} x_{l}" for q, k, l in found)
        raise ResonanceError(
            f"second-order internal resonance with {mode_label(p)}: the monomials "
            f"[{listing}] (zero-based) must be retained; enlarge the master set or use "
            "the parametrisation engine", mode=p, monomial=(i, j))
    return a, b, c


def _nf_terms(omega_m, A, B, hm):
    """Reduced normal-form dynamics from the A, B, h master tensors."""
    m = len(omega_m)
    eqs = []
    unit = np.eye(m, dtype=int)

    def ex(*parts):
        return tuple(int(v) for v in sum(parts, np.zeros(m, dtype=int)))

    zero = np.zeros(m, dtype=int)
    for r in range(m):
        eq = [(A[r, r, r, r] + hm[r, r, r, r], ex(3 * unit[r]), ex(zero)),
              (B[r, r, r, r], ex(unit[r]), ex(2 * unit[r]))]
        for j in range(m):
            if j == r:
                continue
            eq.append((A[r, j, j, r] + A[r, j, r, j] + A[r, r, j, j] + 3 * hm[r, r, j, j],
                       ex(unit[r], 2 * unit[j]), ex(zero)))
            eq.append((B[r, r, j, j], ex(unit[r]), ex(2 * unit[j])))
            eq.append((B[r, j, j, r] + B[r, j, r, j], ex(unit[j]), ex(unit[r], unit[j])))
        eqs.append(tuple(eq))
    return tuple(eqs)


def _linear_lie_matrix(omega_m, order):
    """Matrix of the linear Lie derivative on degree-``order`` monomials in (R, S)."""
    m = len(omega_m)
    mons = monomials(2 * m, order)
    index = {e: i for i, e in enumerate(mons)}
    L = np.zeros((len(mons), len(mons)))
    for col, e in enumerate(mons):
        for r in range(m):
            if e[r]:
                t = list(e)
                t[r] -= 1
                t[m + r] += 1
                L[index[tuple(t)], col] += e[r]
            if e[m + r]:
                t = list(e)
                t[m + r] -= 1
                t[r] += 1
                L[index[tuple(t)], col] -= omega_m[r] ** 2 * e[m + r]
    return mons, L


def _trivial_monomials(m, r):
    """Cubic monomials in (R, S) kept in the equation of master ``r``."""
    out = set()

    def e(rs, ss):
        v = [0] * (2 * m)
        for k in rs:
            v[k] += 1
        for k in ss:
            v[m + k] += 1
        return tuple(v)

    out.add(e([r, r, r], []))
    out.add(e([r], [r, r]))
    for j in range(m):
        if j != r:
            out.add(e([r, j, j], []))
            out.add(e([r], [j, j]))
            out.add(e([j], [r, j]))
    return out


def _linear_field(omega_m):
    m = len(omega_m)
    field = [Poly.variable(2 * m, m + r) for r in range(m)]
    field += [Poly.variable(2 * m, r, (), -omega_m[r] ** 2) for r in range(m)]
    return field


def _nf_cubic_map(omega, masters, x1, X2, g, h, rtol=1e-9):
    """Cubic map terms solving the real third-order homological equation.

    For each mode k the displacement correction X3_k satisfies
    ``(L0^2 + w_k^2) X3_k = N_k - F_k`` where ``F = 2 g(x1, X2) + h(x1, x1, x1)``
    and ``N_k`` is the part of ``F_k`` on the trivially resonant monomials of
    master k (zero for slaves). The kernel of the operator for master rows
    is fixed by the minimum-norm solution.
    """
    N = omega.size
    m = len(masters)
    omega_m = omega[list(masters)]
    mons, L0 = _linear_lie_matrix(omega_m, 3)
    L2 = L0 @ L0
    idx = {e: i for i, e in enumerate(mons)}
    F = np.zeros((len(mons), N))
    for e1, c1 in x1.terms.items():
        for e2, c2 in X2.terms.items():
            e = tuple(p + q for p, q in zip(e1, e2))
            F[idx[e]] += 2 * np.einsum("pij,i,j->p", g, c1, c2)
    lin = list(x1.terms.items())
    for (e1, c1), (e2, c2), (e3, c3) in itertools.product(lin, repeat=3):
        e = tuple(p + q + r for p, q, r in zip(e1, e2, e3))
        F[idx[e]] += np.einsum("pijk,i,j,k->p", h, c1, c2, c3)
    X3 = np.zeros((len(mons), N))
    kept = np.zeros((len(mons), m))
    for k in range(N):
        rhs = -F[:, k].copy()
        if k in masters:
            r = masters.index(k)
            for e in _trivial_monomials(m, r):
                kept[idx[e], r] = F[idx[e], k]
                rhs[idx[e]] += F[idx[e], k]
        op = L2 + omega[k] ** 2 * np.eye(len(mons))
        sol, *_ = np.linalg.lstsq(op, rhs, rcond=None)
        res = np.linalg.norm(op @ sol - rhs)
        if res > rtol * max(1.0, np.linalg.norm(rhs)):
            raise ResonanceError(
                f"third-order internal resonance on {mode_label(k)}: cubic monomials "
                "that cannot be removed remain; enlarge the master set", mode=k)
        X3[:, k] = sol
    return Poly(2 * m, (N,), {e: X3[i] for i, e in enumerate(mons) if np.any(X3[i])}), kept


def nf_third_order(mm, masters, tol=1e-3):
    """Real normal form of the modal equations truncated at third order.

    Parameters
    ----------
    mm : ModalModel
    masters : int or iterable of int
    tol : float
        Relative tolerance of the second-order resonance guard.

    Returns
    -------
    ManifoldMap, ReducedModel
        The map takes normal displacements and velocities ``(R, S)`` to
        modal displacements and velocities. Coefficient arrays ``a``, ``b``
        and ``gamma`` have shape ``(N, m, m)``; ``A`` and ``B`` have shape
        ``(m, m, m, m)``.
    """
    N = mm.n_modes
    masters = _masters(masters, N)
    m = len(masters)
    omega, g, h = mm.omega, mm.g, mm.h
    a, b, c = nf_quadratic(omega, g, masters, tol)
    gm = g[np.ix_(masters, masters, range(N))]
    A = 2 * np.einsum("ris,sjk->rijk", gm, a)
    B = 2 * np.einsum("ris,sjk->rijk", gm, b)
    hm = h[np.ix_(masters, masters, masters, masters)]
    rm = ReducedModel(omega[list(masters)], _nf_terms(omega[list(masters)], A, B, hm),
                      masters, _damping(mm, masters), method="nf")
    mp = _nf_map(omega, masters, a, b, g, h, style_coeffs={"a": a, "b": b, "gamma": c,
                                                               "A": A, "B": B})
    return mp, rm


def _nf_map(omega, masters, a, b, g, h, style_coeffs):
    N = omega.size
    m = len(masters)
    x1 = Poly(2 * m, (N,), {tuple(np.eye(2 * m, dtype=int)[r]): np.eye(N)[masters[r]]
                            for r in range(m)})
    X2 = Poly(2 * m, (N,))
    for i, j in itertools.product(range(m), repeat=2):
        eR = [0] * (2 * m)
        eR[i] += 1
        eR[j] += 1
        eS = [0] * (2 * m)
        eS[m + i] += 1
        eS[m + j] += 1
        X2 = X2 + Poly(2 * m, (N,), {tuple(eR): a[:, i, j], tuple(eS): b[:, i, j]})
    X2 = X2.chop(0.0)
    X3, _ = _nf_cubic_map(omega, masters, x1, X2, g, h)
    disp = (x1 + X2 + X3).chop(0.0)
    vel = disp.lie(_linear_field(omega[list(masters)]), 3).chop(0.0)
    return ManifoldMap("normal-form", 3, masters, disp, vel, "modal", style_coeffs)


def nf_cubic_reduced_from_map(mm, masters, tol=1e-3):
    """Trivially resonant cubic terms read off the homological solve.

    Returns the ``(n_monomials, m)`` coefficients of the cubic reduced
    field on the monomial list ``monomials(2m, 3)``; used to cross-check the
    closed-form reduced dynamics.
    """
    N = mm.n_modes
    masters = _masters(masters, N)
    m = len(masters)
    a, b, _ = nf_quadratic(mm.omega, mm.g, masters, tol)
    x1 = Poly(2 * m, (N,), {tuple(np.eye(2 * m, dtype=int)[r]): np.eye(N)[masters[r]]
                            for r in range(m)})
    X2 = Poly(2 * m, (N,))
    for i, j in itertools.product(range(m), repeat=2):
        eR = [0] * (2 * m)
        eR[i] += 1
        eR[j] += 1
        eS = [0] * (2 * m)
        eS[m + i] += 1
        eS[m + j] += 1
        X2 = X2 + Poly(2 * m, (N,), {tuple(eR): a[:, i, j], tuple(eS): b[:, i, j]})
    _, kept = _nf_cubic_map(mm.omega, masters, x1, X2, mm.g, mm.h)
    return kept


def _inertia_count(K, M, mu):
    """Number of generalised eigenvalues of (K, M) below ``mu``."""
    _, D, _ = spl.ldl(K - mu * M)
    return int(np.sum(np.linalg.eigvalsh(D) < 0))


def _dnf_guard(K, M, freq, rhs, tol, label):
    """Raise when a generalised eigenfrequency lies within ``tol`` of ``freq``."""
    if freq <= 0:
        return
    lo, hi = (freq * (1 - tol)) ** 2, (freq * (1 + tol)) ** 2
    n_lo = _inertia_count(K, M, lo)
    n_hi = _inertia_count(K, M, hi)
    if n_hi == n_lo:
        return
    lam, V = spl.eigh(K, M, subset_by_index=[n_lo, n_hi - 1])
    proj = V.T @ rhs
    scale = max(np.linalg.norm(rhs), 1e-300)
    hits = [n_lo + k for k in range(len(lam)) if abs(proj[k]) > 1e-12 * scale * np.sqrt(
        abs(V[:, k] @ M @ V[:, k]))]
    if hits and np.linalg.norm(rhs) > 0:
        s = hits[0]
        raise ResonanceError(
            f"{label}: frequency {freq:.6g} lies within {tol:g} (relative) of the "
            f"eigenfrequency {np.sqrt(lam[hits[0] - n_lo]):.6g} of {mode_label(s)}; the "
            "direct normal form is singular (internal resonance)", mode=s)


def dnf_second_order(model, masters, tol=1e-3):
    """Direct normal form from physical matrices up to second order.

    Only the master eigenpairs are computed. For every master pair
    ``(i, j)`` the two solves

        [(w_i + w_j)^2 M - K] Psi^P = G(phi_i, phi_j)
        [(w_i - w_j)^2 M - K] Psi^N = G(phi_i, phi_j)

    give the physical mapping vectors ``a_ij = (Psi^P + Psi^N) / 2``,
    ``b_ij = -(Psi^P - Psi^N) / (2 w_i w_j)`` and
    ``gamma_ij = ((w_i + w_j) Psi^P + (w_j - w_i) Psi^N) / w_j``.

    Parameters
    ----------
    model : PhysicalModel
    masters : int or iterable of int
        Indices of master modes in ascending-frequency order.
    tol : float
        Relative distance to an eigenfrequency treated as resonant.

    Returns
    -------
    ManifoldMap, ReducedModel
        The map is in physical space and of second order.
    """
    if not isinstance(model, PhysicalModel):
        raise TypeError("dnf_second_order expects a PhysicalModel")
    M, K = model.mass, model.stiffness
    masters = _masters(masters, model.n)
    m = len(masters)
    lam, Phi = spl.eigh(K, M, subset_by_index=[0, max(masters)])
    from .model import _fix_signs

    Phi = _fix_signs(Phi)[:, list(masters)]
    omega_m = np.sqrt(lam[list(masters)])
    n = model.n
    ah = np.zeros((n, m, m))
    bh = np.zeros((n, m, m))
    ch = np.zeros((n, m, m))
    for i, j in itertools.combinations_with_replacement(range(m), 2):
        rhs = model.G(Phi[:, i], Phi[:, j])
        wi, wj = omega_m[i], omega_m[j]
        sols = {}
        for name, freq in (("P", wi + wj), ("N", abs(wi - wj))):
            _dnf_guard(K, M, freq, rhs, tol, f"masters ({i}, {j}), {name} solve")
            Z = freq ** 2 * M - K
            sols[name] = np.linalg.solve(Z, rhs)
        PP, PN = sols["P"], sols["N"]
        for p, q in ((i, j), (j, i)):
            wp, wq = omega_m[p], omega_m[q]
            ah[:, p, q] = 0.5 * (PP + PN)
            bh[:, p, q] = -(PP - PN) / (2 * wp * wq)
            ch[:, p, q] = ((wp + wq) / wq) * PP + ((wq - wp) / wq) * PN
    A = np.zeros((m, m, m, m))
    B = np.zeros((m, m, m, m))
    hm = np.zeros((m, m, m, m))
    for r, i in itertools.product(range(m), repeat=2):
        for j, k in itertools.product(range(m), repeat=2):
            A[r, i, j, k] = 2 * Phi[:, r] @ model.G(Phi[:, i], ah[:, j, k])
            B[r, i, j, k] = 2 * Phi[:, r] @ model.G(Phi[:, i], bh[:, j, k])
            hm[r, i, j, k] = Phi[:, r] @ model.H(Phi[:, i], Phi[:, j], Phi[:, k])
    rm = ReducedModel(omega_m, _nf_terms(omega_m, A, B, hm), masters, method="dnf")
    disp = {tuple(np.eye(2 * m, dtype=int)[r]): Phi[:, r] for r in range(m)}
    vel = {tuple(np.eye(2 * m, dtype=int)[m + r]): Phi[:, r] for r in range(m)}
    for i, j in itertools.product(range(m), repeat=2):
        eR = [0] * (2 * m)
        eR[i] += 1
        eR[j] += 1
        eS = [0] * (2 * m)
        eS[m + i] += 1
        eS[m + j] += 1
        eRS = [0] * (2 * m)
        eRS[i] += 1
        eRS[m + j] += 1
        for e, vec, target in ((eR, ah[:, i, j], disp), (eS, bh[:, i, j], disp),
                               (eRS, ch[:, i, j], vel)):
            e = tuple(e)
            target[e] = target.get(e, 0) + vec
    zeros = np.zeros((n, m, m))
    coeffs = {"a": ah, "b": bh, "c": zeros, "alpha": zeros, "beta": zeros, "gamma": ch,
              "A": A, "B": B, "phi": Phi, "omega": omega_m}
    mp = ManifoldMap("normal-form", 2, masters, Poly(2 * m, (n,), disp), Poly(2 * m, (n,), vel),
                     "physical", coeffs)
    return mp, rm


def gamma_nf_rom(rm, r=0):
    """Backbone curvature of a cubic normal-form oscillator.

    For ``R'' + w^2 R + c3 R^3 + c1 R S^2 = 0`` the first-order harmonic
    balance gives ``(3 c3 + c1 w^2) / (8 w^2)``.
    """
    m = rm.m
    w = rm.omega[r]
    e3 = tuple(3 if k == r else 0 for k in range(m))
    e1 = tuple(1 if k == r else 0 for k in range(m))
    e2 = tuple(2 if k == r else 0 for k in range(m))
    c3 = rm.coefficient(r, e3)
    c1 = rm.coefficient(r, e1, e2)
    return (3 * c3 + c1 * w ** 2) / (8 * w ** 2)


def gamma_equivalence_check(mm, m, amplitudes=None, n_theta=64):
    """Compare the graph and normal-form single-master reduced dynamics.

    The master component of the normal-form map ``x_m(R, S)`` is inserted
    into the graph reduced dynamics, time derivatives being taken along the
    normal-form reduced field. The remainder is evaluated on rings
    ``R = a cos(t), S = -a w sin(t)``.

    Returns
    -------
    dict
        ``amplitudes``, ``residuals``, ``slope``, ``gamma_graph``,
        ``gamma_nf`` and ``max_geometry_difference`` (largest gap between the
        slave quadratic coefficients of both builds).
    """
    from .parametrisation import residual_slope

    mp_g, rm_g = graph_single(mm, m)
    mp_n, rm_n = nf_third_order(mm, [m])
    amplitudes = np.logspace(-3, -2, 5) if amplitudes is None else np.asarray(amplitudes)
    w = mm.omega[m]
    x = mp_n.disp[m]
    nf_field = [Poly.variable(2, 1), Poly(2, (), {(1, 0): -w ** 2})]
    for c, d, v in rm_n.terms[0]:
        nf_field[1] = nf_field[1] + Poly(2, (), {(d[0], v[0]): -c})
    xd = x.lie(nf_field)
    xdd = xd.lie(nf_field)
    res = xdd + x * (w ** 2)
    for c, d, v in rm_g.terms[0]:
        term = Poly.constant(2, c)
        for _ in range(d[0]):
            term = term.mul(x)
        for _ in range(v[0]):
            term = term.mul(xd)
        res = res + term
    theta = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    residuals = []
    for amp in amplitudes:
        pts = np.column_stack([amp * np.cos(theta), -amp * w * np.sin(theta)])
        residuals.append(float(np.max(np.abs(res(pts)))))
    residuals = np.array(residuals)
    slaves = [s for s in range(mm.n_modes) if s != m]
    geo = 0.0
    for key_g, key_n in (("a", "a"), ("b", "b"), ("alpha", "gamma")):
        geo = max(geo, float(np.max(np.abs(mp_g.coefficients[key_g][slaves]
                                           - mp_n.coefficients[key_n][slaves, 0, 0]),
                                    initial=0.0)))
    return {"amplitudes": amplitudes, "residuals": residuals,
            "slope": residual_slope(amplitudes, residuals) if np.all(residuals > 0) else np.inf,
            "gamma_graph": gamma_engine(rm_g), "gamma_nf": gamma_nf_rom(rm_n),
            "max_geometry_difference": geo}
