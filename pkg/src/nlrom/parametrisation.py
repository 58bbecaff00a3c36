"""Order-by-order parametrisation of invariant manifolds of polynomial fields.

The first-order system z' = F(z) = A z + N(z), with z = (x, y) stacking
modal displacements and velocities, is diagonalised as z = P q. A manifold
W(s) and its reduced field f(s) are expanded in homogeneous monomials of the
master parameters s and solved one order at a time from the invariance
equation F(W(s)) = DW(s) f(s). At order k each monomial m of each diagonal
coordinate i gives a scalar equation

    (lambda_i - m . lambda_L) xi_m^i - [i master] f_m^i = -eta_m^i,

where eta collects every lower-order contribution. The graph style keeps the
master components of W linear; the normal-form style keeps in f only the
monomials whose divisor is (nearly) zero.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ResonanceError, mode_label
from .model import ModalModel
from .poly import Poly, monomials
from .reduced import ManifoldMap, ReducedModel

STYLES = ("graph", "normal-form")


@dataclass(frozen=True, eq=False)
class DiagonalSystem:
    """First-order polynomial field with its diagonalising transform.

    The field is ``z' = A z + B [T2(u, u) + T3(u, u, u)]`` with ``u = C z``.

    Attributes
    ----------
    lam : (2N,) complex ndarray
        Eigenvalues ordered ``(mode 0 +, mode 0 -, mode 1 +, ...)``.
    P, Pinv : (2N, 2N) complex ndarray
        ``z = P q``.
    A, C, B : ndarray
        Linear part, input selection and output injection.
    T2, T3 : ndarray
        Quadratic and cubic coefficient tensors, shapes ``(nt, nin, nin)``
        and ``(nt, nin, nin, nin)``.
    omega, damping_ratio : ndarray
        Per-mode frequency and damping.
    repeated : list of tuple
        Pairs of modes sharing an eigenvalue (reported, not an error).
    """

    lam: np.ndarray
    P: np.ndarray
    Pinv: np.ndarray
    A: np.ndarray
    C: np.ndarray
    B: np.ndarray
    T2: np.ndarray
    T3: np.ndarray
    omega: np.ndarray
    damping_ratio: np.ndarray
    repeated: list = field(default_factory=list)

    @property
    def n_modes(self):
        return self.omega.size

    def field(self, z):
        """Evaluate F(z) for states of shape ``(npts, 2N)`` (complex allowed)."""
        z = np.atleast_2d(z)
        u = z @ self.C.T
        nl = np.einsum("tab,pa,pb->pt", self.T2, u, u)
        nl = nl + np.einsum("tabc,pa,pb,pc->pt", self.T3, u, u, u)
        return z @ self.A.T + nl @ self.B.T


def _symmetric_tensors_from_rom(rm, truncate):
    m = rm.m
    nin = 2 * m
    T2 = np.zeros((m, nin, nin))
    T3 = np.zeros((m, nin, nin, nin))
    for r, eq in enumerate(rm.terms):
        for c, d, v in eq:
            e = d + v
            deg = sum(e)
            idx = []
            for k, p in enumerate(e):
                idx += [k] * p
            if deg in (2, 3):
                perms = set(itertools.permutations(idx))
                T = T2 if deg == 2 else T3
                for p in perms:
                    T[(r,) + p] -= c / len(perms)
            elif deg > 3 and not truncate:
                raise ValueError("monomials above cubic order need truncate=True")
    return T2, T3


def diagonalize(model, damping_ratio=None, truncate=False):
    """Lift a modal or reduced second-order model to diagonal first-order form.

    Parameters
    ----------
    model : ModalModel or ReducedModel
    damping_ratio : array_like, optional
        Overrides the damping stored on the model.
    truncate : bool
        Drop monomials above cubic order instead of raising.

    Returns
    -------
    DiagonalSystem
    """
    if isinstance(model, ModalModel):
        N = model.n_modes
        T2 = -np.array(model.g)
        T3 = -np.array(model.h)
        C = np.hstack([np.eye(N), np.zeros((N, N))])
        xi = model.damping_ratio
    elif isinstance(model, ReducedModel):
        N = model.m
        T2, T3 = _symmetric_tensors_from_rom(model, truncate)
        C = np.eye(2 * N)
        xi = model.damping_ratio
    else:
        raise TypeError("model must be a ModalModel or ReducedModel")
    omega = np.asarray(model.omega, dtype=float)
    if damping_ratio is not None:
        xi = damping_ratio
    xi = np.zeros(N) if xi is None else np.broadcast_to(np.asarray(xi, dtype=float), (N,))
    if np.any(np.isclose(xi, 1.0)):
        raise ValueError("critically damped mode: linear part is defective")
    root = np.sqrt((1 - xi ** 2).astype(complex))
    lam = np.empty(2 * N, dtype=complex)
    lam[0::2] = -xi * omega + 1j * omega * root
    lam[1::2] = -xi * omega - 1j * omega * root
    P = np.zeros((2 * N, 2 * N), dtype=complex)
    for k in range(N):
        P[k, 2 * k] = P[k, 2 * k + 1] = 1.0
        P[N + k, 2 * k] = lam[2 * k]
        P[N + k, 2 * k + 1] = lam[2 * k + 1]
    A = np.block([[np.zeros((N, N)), np.eye(N)],
                  [-np.diag(omega ** 2), -np.diag(2 * xi * omega)]])
    B = np.vstack([np.zeros((N, N)), np.eye(N)])
    repeated = [(i, j) for i, j in itertools.combinations(range(N), 2)
                if abs(lam[2 * i] - lam[2 * j]) <= 1e-12 * abs(lam[2 * i])]
    return DiagonalSystem(lam, P, np.linalg.inv(P), A, C, B, T2, T3, omega, np.array(xi),
                          repeated)


class _Tables:
    """Monomial lists, product and derivative index maps for d variables."""

    def __init__(self, d, K):
        self.d = d
        self.exps = {k: np.array(monomials(d, k), dtype=int).reshape(-1, d) for k in range(K + 1)}
        self.index = {k: {e: i for i, e in enumerate(monomials(d, k))} for k in range(K + 1)}
        self._prod = {}

    def n(self, k):
        return len(self.exps[k])

    def prod(self, i, j):
        key = (i, j)
        if key not in self._prod:
            ei, ej = self.exps[i], self.exps[j]
            tab = np.empty((len(ei), len(ej)), dtype=int)
            index = self.index[i + j]
            for a, ea in enumerate(ei):
                for b, eb in enumerate(ej):
                    tab[a, b] = index[tuple(ea + eb)]
            self._prod[key] = tab
        return self._prod[key]

    def deriv(self, k, var):
        """For order k: (source rows, target rows in order k-1, factors)."""
        ek = self.exps[k]
        rows = np.nonzero(ek[:, var] > 0)[0]
        target = []
        for r in rows:
            e = ek[r].copy()
            e[var] -= 1
            target.append(self.index[k - 1][tuple(e)])
        return rows, np.array(target, dtype=int), ek[rows, var].astype(float)


@dataclass(eq=False)
class Parametrisation:
    """Polynomial manifold W(s) and reduced field f(s).

    Attributes
    ----------
    system : DiagonalSystem
    masters : tuple of int
        Master mode indices.
    order : int
    style : str
    xi : dict
        ``xi[k]`` holds the order-k coefficients of W in diagonal
        coordinates, shape ``(n_monomials, 2N)``.
    f : dict
        ``f[k]`` holds the order-k reduced-field coefficients, shape
        ``(n_monomials, 2m)``.
    exps : dict
        Monomial exponent arrays per order.
    log : list
        Divisors treated as resonant: ``(order, monomial, coordinate, divisor)``.
    """

    system: DiagonalSystem
    masters: tuple
    order: int
    style: str
    xi: dict
    f: dict
    exps: dict
    log: list

    @property
    def L(self):
        return [2 * r + s for r in self.masters for s in (0, 1)]

    @property
    def d(self):
        return 2 * len(self.masters)

    def W_poly(self, orders=None):
        """W(s) in z coordinates as a Poly over the 2m master parameters."""
        P = self.system.P
        terms = {}
        for k, arr in self.xi.items():
            if orders is not None and k not in orders:
                continue
            for e, c in zip(self.exps[k], arr):
                terms[tuple(e)] = P @ c
        return Poly(self.d, (P.shape[0],), terms)

    def f_poly(self, orders=None):
        """Reduced field f(s), including the linear part."""
        lamL = self.system.lam[self.L]
        terms = {}
        for a in range(self.d):
            e = [0] * self.d
            e[a] = 1
            v = np.zeros(self.d, dtype=complex)
            v[a] = lamL[a]
            terms[tuple(e)] = v
        for k, arr in self.f.items():
            if orders is not None and k not in orders:
                continue
            for e, c in zip(self.exps[k], arr):
                terms[tuple(e)] = terms.get(tuple(e), 0) + c
        return Poly(self.d, (self.d,), terms)

    def without(self, order):
        """Copy with the W coefficients of one order set to zero."""
        xi = dict(self.xi)
        xi[order] = np.zeros_like(xi[order])
        return Parametrisation(self.system, self.masters, self.order, self.style, xi,
                               dict(self.f), self.exps, list(self.log))

    def to_dict(self):
        def pairs(arr):
            return [[[float(v.real), float(v.imag)] for v in row] for row in arr]

        return {"style": self.style, "order": self.order, "masters": list(self.masters),
                "W": {str(k): {"monomials": self.exps[k].tolist(), "coef": pairs(v)}
                      for k, v in self.xi.items()},
                "f": {str(k): {"monomials": self.exps[k].tolist(), "coef": pairs(v)}
                      for k, v in self.f.items()}}


def parametrise(system, masters, order=3, style="graph", eps=1e-3, max_order=9):
    """Solve the invariance equation up to ``order``.

    Parameters
    ----------
    system : DiagonalSystem
    masters : iterable of int
        Master mode indices (both eigenvalues of each mode are kept).
    order : int
        Expansion order K (1 returns the linear tangent space).
    style : {"graph", "normal-form"}
    eps : float
        Divisors with ``|lambda_i - m . lambda_L| < eps |lambda_i|`` are
        treated as resonant.
    max_order : int
        Safety cap on K.

    Returns
    -------
    Parametrisation

    Raises
    ------
    ResonanceError
        A slave coordinate is resonant with a master monomial carrying a
        nonzero right-hand side.
    """
    if style not in STYLES:
        raise ValueError(f"style must be one of {STYLES}")
    if order < 1 or order > max_order:
        raise ValueError(f"order must lie in [1, {max_order}]")
    masters = tuple(sorted(set(int(r) for r in masters)))
    N = system.n_modes
    if not masters or min(masters) < 0 or max(masters) >= N:
        raise ValueError("invalid master set")
    L = [2 * r + s for r in masters for s in (0, 1)]
    d = len(L)
    lam = system.lam
    lamL = lam[L]
    n2 = 2 * N
    is_master = np.zeros(n2, dtype=bool)
    is_master[L] = True
    col_of = {i: a for a, i in enumerate(L)}
    tab = _Tables(d, order)
    Cq = system.C @ system.P
    Bq = system.Pinv @ system.B
    T2, T3 = system.T2, system.T3
    nt = T2.shape[0]

    xi = {1: np.zeros((d, n2), dtype=complex)}
    for a, i in enumerate(L):
        xi[1][a, i] = 1.0
    f = {}
    U = {1: xi[1] @ Cq.T}
    log = []
    for k in range(2, order + 1):
        nk = tab.n(k)
        force = np.zeros((nk, nt), dtype=complex)
        for i in range(1, k):
            j = k - i
            tmp = np.einsum("tab,ia,jb->ijt", T2, U[i], U[j], optimize=True)
            idx = tab.prod(i, j)
            np.add.at(force, idx.ravel(), tmp.reshape(-1, nt))
        for i in range(1, k - 1):
            for j in range(1, k - i):
                l = k - i - j
                if l < 1:
                    continue
                tmp = np.einsum("tabc,ia,jb,lc->ijlt", T3, U[i], U[j], U[l], optimize=True)
                idx = tab.prod(i + j, l)[tab.prod(i, j)[:, :, None],
                                         np.arange(tab.n(l))[None, None, :]]
                np.add.at(force, idx.ravel(), tmp.reshape(-1, nt))
        eta = force @ Bq.T
        for i in range(2, k):
            j = k + 1 - i
            if j not in f:
                continue
            for a in range(d):
                rows, target, fac = tab.deriv(i, a)
                if rows.size == 0:
                    continue
                Dxi = np.zeros((tab.n(i - 1), n2), dtype=complex)
                np.add.at(Dxi, target, xi[i][rows] * fac[:, None])
                contrib = Dxi[:, None, :] * f[j][None, :, a, None]
                idx = tab.prod(i - 1, j)
                np.add.at(eta, idx.ravel(), -contrib.reshape(-1, n2))
        mlam = tab.exps[k] @ lamL
        delta = lam[None, :] - mlam[:, None]
        small = np.abs(delta) < eps * np.abs(lam)[None, :]
        scale = 1.0 + np.max(np.abs(eta))
        xk = np.zeros((nk, n2), dtype=complex)
        fk = np.zeros((nk, d), dtype=complex)
        for a_m in range(nk):
            mono = tuple(int(v) for v in tab.exps[k][a_m])
            for i in range(n2):
                e = eta[a_m, i]
                if is_master[i]:
                    if style == "graph" or small[a_m, i]:
                        fk[a_m, col_of[i]] = e
                        if style == "normal-form":
                            log.append((k, mono, i, delta[a_m, i]))
                    else:
                        xk[a_m, i] = -e / delta[a_m, i]
                elif small[a_m, i]:
                    if abs(e) > 1e-12 * scale:
                        raise ResonanceError(
                            f"cross resonance between slave {mode_label(i // 2)} and master "
                            f"monomial {mono} at order {k} (divisor {abs(delta[a_m, i]):.3e}); "
                            "enlarge the master set to include this mode",
                            mode=i // 2, monomial=mono)
                    log.append((k, mono, i, delta[a_m, i]))
                else:
                    xk[a_m, i] = -e / delta[a_m, i]
        xi[k] = xk
        f[k] = fk
        U[k] = xk @ Cq.T
    return Parametrisation(system, masters, order, style, xi, f, tab.exps, log)


def _ring_samples(m, amplitude, n_samples, rng):
    """Complex conjugate master parameters with total amplitude ``amplitude``."""
    out = np.zeros((n_samples, 2 * m), dtype=complex)
    for s in range(n_samples):
        w = rng.dirichlet(np.ones(m)) if m > 1 else np.ones(1)
        theta = rng.uniform(0, 2 * np.pi, m)
        for r in range(m):
            val = 0.5 * amplitude * np.sqrt(w[r]) * np.exp(1j * theta[r])
            out[s, 2 * r] = val
            out[s, 2 * r + 1] = np.conj(val)
    return out


def invariance_residual(par, amplitudes, n_samples=64, seed=0):
    """Maximum norm of F(W(s)) - DW(s) f(s) on rings of master amplitude.

    Parameters
    ----------
    par : Parametrisation
    amplitudes : array_like
        Ring amplitudes (roughly the master displacement amplitude).
    n_samples : int
        Sample points per ring.
    seed : int
        Seed of the sampling generator.

    Returns
    -------
    (len(amplitudes),) ndarray
    """
    rng = np.random.default_rng(seed)
    W = par.W_poly()
    f = par.f_poly()
    dW = [W.deriv(a) for a in range(par.d)]
    out = []
    for amp in np.atleast_1d(amplitudes):
        s = _ring_samples(len(par.masters), amp, n_samples, rng)
        z = W(s)
        fs = f(s)
        DWf = sum(dW[a](s) * fs[:, a:a + 1] for a in range(par.d))
        r = par.system.field(z) - DWf
        out.append(np.max(np.linalg.norm(r, axis=1)))
    return np.array(out)


def residual_slope(amplitudes, residuals):
    """Least-squares slope of log(residual) against log(amplitude)."""
    return float(np.polyfit(np.log(amplitudes), np.log(residuals), 1)[0])


def _real_substitution(par):
    """Master parameters as linear polynomials in real (x, y) master states."""
    m = len(par.masters)
    lam = par.system.lam
    subs = []
    for r, mode in enumerate(par.masters):
        lp, lm = lam[2 * mode], lam[2 * mode + 1]
        x = Poly.variable(2 * m, r, (), 1.0 + 0j)
        y = Poly.variable(2 * m, m + r, (), 1.0 + 0j)
        subs.append((x * lm - y) * (1.0 / (lm - lp)))
        subs.append((y - x * lp) * (1.0 / (lm - lp)))
    return subs


def to_real_graph(par, tol=1e-12):
    """Convert a graph-style parametrisation to real map and reduced model.

    Returns
    -------
    ManifoldMap, ReducedModel
        The map gives modal displacements and velocities as polynomials in
        the master displacements and velocities; the reduced model carries
        the restoring monomials of the master oscillators.
    """
    if par.style != "graph":
        raise ValueError("real conversion is defined for graph-style parametrisations")
    sys = par.system
    N = sys.n_modes
    m = len(par.masters)
    subs = _real_substitution(par)
    W = par.W_poly().compose(subs, par.order)
    imag = W.max_imag()
    scale = max((float(np.max(np.abs(c))) for c in W.terms.values()), default=1.0)
    if imag > 1e-8 * max(scale, 1.0):
        raise ValueError(f"manifold is not real (imaginary part {imag:.2e})")
    W = W.real().chop(tol * max(scale, 1.0))
    disp = W[:N]
    vel = W[N:]
    polys = []
    fN = Poly(par.d, (par.d,), {})
    for k, arr in par.f.items():
        for e, c in zip(par.exps[k], arr):
            fN.terms[tuple(e)] = fN.terms.get(tuple(e), 0) + c
    fN_real = fN.compose(subs, par.order)
    for r, mode in enumerate(par.masters):
        lp, lm = sys.lam[2 * mode], sys.lam[2 * mode + 1]
        p = fN_real[2 * r] * (-(lp - lm))
        polys.append(p.real().chop(tol))
    xi = None if not np.any(sys.damping_ratio) else sys.damping_ratio[list(par.masters)]
    rm = ReducedModel.from_polys(sys.omega[list(par.masters)], polys, par.masters,
                                 method="graph-engine", damping_ratio=xi)
    mp = ManifoldMap("graph", par.order, par.masters, disp, vel, "modal")
    return mp, rm


def gamma_engine(model, master=0, eps=1e-3):
    """Backbone curvature of one mode from the order-3 normal form.

    The normal form ``s' = lam s + c s^2 conj(s)`` gives the frequency
    ``w + Im(c) |s|^2``. With amplitude ``a = 2|s|`` this is ``w (1 + G a^2)``
    with ``G = Im(c) / (4 w)``.

    Parameters
    ----------
    model : ModalModel or ReducedModel
        Conservative model; monomials above cubic order are ignored.
    master : int
        Index of the mode (or reduced oscillator).
    """
    sys = diagonalize(model, damping_ratio=0.0, truncate=True)
    par = parametrise(sys, [master], 3, "normal-form", eps=eps)
    idx = {tuple(e): i for i, e in enumerate(par.exps[3])}[(2, 1)]
    c = par.f[3][idx, 0]
    return float(np.imag(c) / (4 * sys.omega[master]))
