"""Implicit condensation (stress manifold) and its explicit third-order oracle.

Static solutions of ``K X + f_nl(X) = sum_r beta_r M phi_r`` define a
velocity-independent manifold. Fitting the applied load against the master
coordinate gives the reduced restoring force.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ReductionError
from .model import ModalModel, PhysicalModel, assemble_modal
from .poly import Poly, monomials
from .reduced import ManifoldMap, ReducedModel


@dataclass(frozen=True, eq=False)
class IceSamples:
    """Static solutions under modal body forces.

    Attributes
    ----------
    beta : (npts, m) ndarray
        Load amplitudes on each master.
    x_master : (npts, m) ndarray
        Master modal coordinates of the solutions.
    q : (npts, N) ndarray
        All modal coordinates (mass-orthogonal projection).
    X : (npts, n) ndarray
        Full static displacements.
    masters : tuple of int
    omega : (m,) ndarray
        Master eigenfrequencies.
    """

    beta: np.ndarray
    x_master: np.ndarray
    q: np.ndarray
    X: np.ndarray
    masters: tuple
    omega: np.ndarray

    def to_csv(self, path):
        """Write ``beta_*, x_*, q_*`` columns with 17 significant digits."""
        m = len(self.masters)
        cols = ([f"beta_{r}" for r in self.masters] + [f"x_{r}" for r in self.masters]
                + [f"q_{k}" for k in range(self.q.shape[1])])
        data = np.hstack([self.beta, self.x_master, self.q])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")
        return m


def _as_physical(model):
    if isinstance(model, ModalModel):
        return model.as_physical(), ModalModel(model.omega, np.eye(model.n_modes), model.g,
                                               model.h)
    if isinstance(model, PhysicalModel):
        return model, assemble_modal(model)
    raise TypeError("model must be a PhysicalModel or ModalModel")


def static_solve(model, load, X0=None, tol=1e-12, max_iter=50):
    """Newton solve of ``K X + f_nl(X) = load`` with the analytic tangent.

    Raises
    ------
    ConvergenceError
        The residual norm does not drop below ``tol`` (relative to the load).
    """
    X = np.zeros(model.n) if X0 is None else np.array(X0, dtype=float)
    scale = max(1.0, np.linalg.norm(load))
    for _ in range(max_iter):
        r = model.stiffness @ X + model.f_nl(X) - load
        if np.linalg.norm(r) <= tol * scale:
            return X
        try:
            X = X - np.linalg.solve(model.tangent(X), r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular tangent stiffness in static solve") from exc
        if not np.all(np.isfinite(X)):
            break
    raise ConvergenceError("static Newton iterations did not converge")


def beta_for_amplitude(model, master, amp_target, n_steps=20):
    """Load amplitude giving ``max |x_master| = amp_target`` on both signs.

    Returns the smaller of the two one-sided loads so the symmetric grid stays
    within the target.
    """
    phys, mm = _as_physical(model)
    phi = mm.V[:, master]
    Mphi = phys.mass @ phi
    w2 = mm.omega[master] ** 2
    best = []
    for sign in (1.0, -1.0):
        b_hi = w2 * amp_target
        X = None
        for b in np.linspace(0, b_hi, n_steps + 1)[1:]:
            X = static_solve(phys, sign * b * Mphi, X)
        x = phi @ phys.mass @ X
        for _ in range(60):
            # Newton on x(beta) with the slope from the tangent stiffness
            J = np.linalg.solve(phys.tangent(X), Mphi)
            dxdb = sign * (phi @ phys.mass @ J)
            if abs(dxdb) < 1e-300:
                break
            step = (sign * amp_target - x) / dxdb
            b_new = max(b_hi + step, 1e-3 * b_hi)
            X = static_solve(phys, sign * b_new * Mphi, X)
            x = phi @ phys.mass @ X
            b_hi = b_new
            if abs(abs(x) - amp_target) <= 1e-12 * amp_target:
                break
        best.append(b_hi)
    return min(best)


def ice_sample(model, masters, beta=None, amp_target=0.1, n_points=21):
    """Static solutions on a symmetric grid of modal body forces.

    Parameters
    ----------
    model : PhysicalModel or ModalModel
    masters : int or iterable of int
        At most two masters.
    beta : array_like, optional
        Explicit grid. For one master a 1-D array; for two masters an array
        of shape ``(npts, 2)``. When None a grid of ``n_points`` per master is
        scaled so that the largest master coordinate equals ``amp_target``.
    amp_target : float
    n_points : int

    Returns
    -------
    IceSamples
    """
    masters = (int(masters),) if np.isscalar(masters) else tuple(int(r) for r in masters)
    if not 1 <= len(masters) <= 2:
        raise ValueError("implicit condensation supports one or two masters")
    phys, mm = _as_physical(model)
    Phi = mm.V[:, list(masters)]
    MPhi = phys.mass @ Phi
    m = len(masters)
    if beta is None:
        axes = []
        for r in masters:
            bmax = beta_for_amplitude(model, r, amp_target)
            axes.append(np.linspace(-bmax, bmax, n_points))
        beta = np.array(list(itertools.product(*axes))) if m == 2 else axes[0][:, None]
    else:
        beta = np.asarray(beta, dtype=float).reshape(-1, m)
    X = np.zeros((beta.shape[0], phys.n))
    # solve along rays from the origin so Newton always starts close by
    for k, b in enumerate(beta):
        nb = np.linalg.norm(b)
        if nb == 0:
            continue
        n_sub = 8
        path = [b * t for t in np.linspace(0, 1, n_sub + 1)[1:]]
        Xk = None
        last = 0.0
        for p in path:
            try:
                Xk = static_solve(phys, MPhi @ p, Xk)
            except ConvergenceError as exc:
                raise ConvergenceError(
                    f"static solve diverged at beta={np.array2string(p, precision=6)}; "
                    f"last convergent |beta|={last:.6g}") from exc
            last = np.linalg.norm(p)
        X[k] = Xk
    q = X @ phys.mass @ mm.V
    return IceSamples(beta, q[:, list(masters)], q, X, masters, mm.omega[list(masters)])


def ice_fit(samples, order=3, return_residual=False):
    """Least-squares polynomial restoring force from static samples.

    The load on master ``r`` is fitted as ``w_r^2 x_r + sum c x^e`` over all
    monomials of degree 2..order in the master coordinates; the linear part is
    fixed by the eigenfrequencies.

    Parameters
    ----------
    samples : IceSamples
    order : int
    return_residual : bool
        Also return the root-mean-square fit residual per master.

    Returns
    -------
    ReducedModel or (ReducedModel, ndarray)
    """
    x = samples.x_master
    m = x.shape[1]
    if m == 1:
        xs = x[np.argsort(samples.beta[:, 0]), 0]
        if np.any(np.diff(xs) <= 0):
            raise ReductionError("sampled load/displacement map is not invertible")
    mons = [e for k in range(2, order + 1) for e in monomials(m, k)]
    if len(mons) >= x.shape[0]:
        raise ReductionError("not enough samples for the requested fitting order")
    Phi = np.column_stack([np.prod(x ** np.array(e), axis=1) for e in mons])
    rank = np.linalg.matrix_rank(Phi)
    if rank < len(mons):
        raise ReductionError("rank-deficient fit: the sample grid does not excite every monomial")
    terms = []
    resid = []
    for r in range(m):
        rhs = samples.beta[:, r] - samples.omega[r] ** 2 * x[:, r]
        coef, *_ = np.linalg.lstsq(Phi, rhs, rcond=None)
        resid.append(np.sqrt(np.mean((Phi @ coef - rhs) ** 2)))
        terms.append(tuple((float(c), e, (0,) * m) for c, e in zip(coef, mons)))
    rm = ReducedModel(samples.omega, tuple(terms), samples.masters, method="ice")
    if return_residual:
        return rm, np.array(resid)
    return rm


def static_condensation_third(mm, m):
    """Explicit third-order reduced dynamics on the stress manifold.

    ``x'' + w^2 x + g^m_mm x^2 + (h^m_mmm - sum_s 2 g^m_ms g^s_mm / w_s^2) x^3 = 0``.
    """
    N = mm.n_modes
    g, h, omega = mm.g, mm.h, mm.omega
    c3 = h[m, m, m, m] - sum(2 * g[m, m, s] * g[s, m, m] / omega[s] ** 2
                             for s in range(N) if s != m)
    terms = ((g[m, m, m], (2,), (0,)), (c3, (3,), (0,)))
    xi = None if mm.damping_ratio is None else mm.damping_ratio[[m]]
    return ReducedModel(omega[[m]], (terms,), (m,), xi, method="static-condensation")


def stress_manifold_map(mm, m):
    """Leading-order stress manifold ``x_s = -(g^s_mm / w_s^2) x_m^2``.

    The map depends on the master displacement only; velocities follow by
    differentiating along the motion, ``y_s = -2 (g^s_mm / w_s^2) x_m y_m``.
    """
    N = mm.n_modes
    c = np.array([0.0 if s == m else -mm.g[s, m, m] / mm.omega[s] ** 2 for s in range(N)])
    e = np.eye(N)[m]
    disp = Poly(2, (N,), {(1, 0): e, (2, 0): c})
    vel = Poly(2, (N,), {(0, 1): e, (1, 1): 2 * c})
    return ManifoldMap("graph", 2, (m,), disp, vel, "modal", {"c": c})


def ice_map(samples, order=3):
    """Slave modal coordinates fitted as polynomials of the master ones."""
    x = samples.x_master
    m = x.shape[1]
    N = samples.q.shape[1]
    mons = [e for k in range(1, order + 1) for e in monomials(m, k)]
    Phi = np.column_stack([np.prod(x ** np.array(e), axis=1) for e in mons])
    coef, *_ = np.linalg.lstsq(Phi, samples.q, rcond=None)
    disp = Poly(2 * m, (N,), {tuple(e) + (0,) * m: coef[i] for i, e in enumerate(mons)})
    field = [Poly.variable(2 * m, m + r) for r in range(m)] + [Poly(2 * m, ())] * m
    vel = disp.lie(field)
    return ManifoldMap("graph", order, samples.masters, disp, vel, "modal")


def correction_factor(rho):
    """Ratio ``(rho^2 - 8/3) / (rho^2 - 4)`` of condensed to invariant cubic sums.

    Raises
    ------
    ValueError
        At ``rho = 2`` where the factor diverges.
    """
    rho = float(rho)
    den = rho ** 2 - 4.0
    if abs(den) < 1e-12:
        raise ValueError("correction factor diverges at rho = 2 (2:1 internal resonance)")
    return (rho ** 2 - 8.0 / 3.0) / den
