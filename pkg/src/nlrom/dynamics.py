"""Time integration, closed-form backbone curvatures and manifold comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spl

from .errors import ConvergenceError, ResonanceError, mode_label
from .model import ModalModel, PhysicalModel
from .reduced import ManifoldMap, ReducedModel

GAMMA_METHODS = ("nf", "ice", "qm-md", "qm-smd")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution of a second-order system."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray


def _accel_fn(system, Omega=None, forcing=None):
    if isinstance(system, ReducedModel):
        return lambda t, x, v: system.accel(x, v, t, Omega)
    if isinstance(system, ModalModel):
        w2 = system.omega ** 2
        c = (np.zeros_like(w2) if system.damping_ratio is None
             else 2 * system.damping_ratio * system.omega)
        F = None if forcing is None else np.asarray(forcing, dtype=float)

        def acc(t, x, v):
            a = -w2 * x - c * v - system.f_nl(x)
            if F is not None and Omega is not None:
                a = a + F * np.cos(Omega * t)
            return a

        return acc
    if isinstance(system, PhysicalModel):
        cho = spl.cho_factor(system.mass)
        K = system.stiffness
        F = None if forcing is None else np.asarray(forcing, dtype=float)

        def acc(t, x, v):
            rhs = -(K @ x) - system.f_nl(x)
            if F is not None and Omega is not None:
                rhs = rhs + F * np.cos(Omega * t)
            return spl.cho_solve(cho, rhs)

        return acc
    raise TypeError("system must be a PhysicalModel, ModalModel or ReducedModel")


def integrate(system, x0, v0, t_end, dt, Omega=None, forcing=None):
    """Fixed-step fourth-order Runge-Kutta integration.

    Parameters
    ----------
    system : PhysicalModel, ModalModel or ReducedModel
    x0, v0 : array_like
        Initial displacement and velocity.
    t_end, dt : float
    Omega : float, optional
        Forcing frequency (reduced models use their own ``forcing``).
    forcing : array_like, optional
        Force amplitudes for full models.

    Returns
    -------
    Trajectory

    Raises
    ------
    ConvergenceError
        The state becomes non-finite.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    acc = _accel_fn(system, Omega, forcing)
    n_steps = int(round(t_end / dt))
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    xs = np.empty((n_steps + 1,) + x.shape)
    vs = np.empty_like(xs)
    xs[0], vs[0] = x, v
    err = np.seterr(over="ignore", invalid="ignore")
    try:
        _rk4_loop(acc, x, v, xs, vs, n_steps, dt)
    finally:
        np.seterr(**err)
    return Trajectory(dt * np.arange(n_steps + 1), xs, vs)


def _rk4_loop(acc, x, v, xs, vs, n_steps, dt):
    t = 0.0
    for k in range(n_steps):
        k1x, k1v = v, acc(t, x, v)
        k2x, k2v = v + 0.5 * dt * k1v, acc(t + 0.5 * dt, x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
        k3x, k3v = v + 0.5 * dt * k2v, acc(t + 0.5 * dt, x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
        k4x, k4v = v + dt * k3v, acc(t + dt, x + dt * k3x, v + dt * k3v)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        t = (k + 1) * dt
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ConvergenceError(f"integration blew up at t={t:.6g}")
        xs[k + 1], vs[k + 1] = x, v


def _slave_factor(method, w, ws):
    if method == "nf":
        return 1.0 + 4 * w ** 2 / (3 * (ws ** 2 - 4 * w ** 2))
    if method == "ice":
        return 1.0
    if method == "qm-md":
        return 1.0 + w ** 2 * (4 * ws ** 2 - 3 * w ** 2) / (3 * (ws ** 2 - w ** 2) ** 2)
    if method == "qm-smd":
        return 1.0 + 4 * w ** 2 / (3 * ws ** 2)
    raise ValueError(f"method must be one of {GAMMA_METHODS}")


def gamma_parts(mm, m, method="nf", tol=1e-3):
    """Common and summed parts of the closed-form backbone curvature.

    ``G = common + summed`` with ``common = -(5 / (12 w^2)) (g^m_mm / w)^2``
    and ``summed = (3 / (8 w^2)) (h^m_mmm - sum_s 2 (g^s_mm / w_s)^2 F_s)``,
    the factor ``F_s`` depending on the method.

    Returns
    -------
    common, summed : float
    """
    if method not in GAMMA_METHODS:
        raise ValueError(f"method must be one of {GAMMA_METHODS}")
    w = mm.omega[m]
    g, h = mm.g, mm.h
    total = 0.0
    for s in range(mm.n_modes):
        if s == m:
            continue
        ws = mm.omega[s]
        if method == "nf" and abs(ws - 2 * w) < tol * w:
            raise ResonanceError(f"slave {mode_label(s)} is in 2:1 resonance with the master",
                                 mode=s)
        if method == "qm-md" and abs(ws - w) < tol * w:
            raise ResonanceError(f"slave {mode_label(s)} has the master frequency", mode=s)
        total += 2 * (g[s, m, m] / ws) ** 2 * _slave_factor(method, w, ws)
    common = -5.0 / (12 * w ** 2) * (g[m, m, m] / w) ** 2
    summed = 3.0 / (8 * w ** 2) * (h[m, m, m, m] - total)
    return common, summed


def gamma_closed_form(mm, m, method="nf", tol=1e-3):
    """Backbone curvature ``G`` in ``w_NL = w (1 + G a^2)`` for one master.

    Parameters
    ----------
    mm : ModalModel
    m : int
    method : {"nf", "ice", "qm-md", "qm-smd"}
    tol : float
        Relative tolerance of the resonance guards.
    """
    common, summed = gamma_parts(mm, m, method, tol)
    return common + summed


def gamma_rom(rm, r=0):
    """Backbone curvature of a reduced model from its order-3 normal form."""
    from .parametrisation import gamma_engine

    return gamma_engine(rm, r)


def _graph_slice(mp, targets, omega):
    """Parameters of ``mp`` whose master components equal ``targets``.

    ``targets`` has shape ``(npts, 2m)`` holding master displacements and
    velocities. Graph-style maps are evaluated directly; other maps are
    inverted by Newton iterations on the master components.
    """
    m = mp.m
    masters = list(mp.masters)
    if mp.style == "graph":
        return targets
    p = targets.copy()
    dd = [mp.disp.deriv(k) for k in range(2 * m)]
    dv = [mp.vel.deriv(k) for k in range(2 * m)]
    for _ in range(50):
        X, Y = mp.evaluate(p)
        r = np.hstack([X[:, masters], Y[:, masters]]) - targets
        if np.max(np.abs(r)) <= 1e-14 * max(1.0, np.max(np.abs(targets))):
            return p
        J = np.empty((p.shape[0], 2 * m, 2 * m))
        for k in range(2 * m):
            J[:, :m, k] = np.real(dd[k](p))[:, masters]
            J[:, m:, k] = np.real(dv[k](p))[:, masters]
        p = p - np.linalg.solve(J, r[..., None])[..., 0]
    raise ConvergenceError("could not invert the manifold map on the master coordinates")


def compare_manifolds(mapA, mapB, amplitudes, omega=None, n_theta=72, seed=0):
    """Slave displacement gap between two manifold maps.

    Both maps are expressed over the physical master states: displacement
    ``x_r = a cos(t_r)`` and velocity ``y_r = a w_r sin(t_r)``.

    Parameters
    ----------
    mapA, mapB : ManifoldMap
        Maps in the same coordinate space with the same master set.
    amplitudes : array_like
    omega : array_like, optional
        Master frequencies scaling the velocity circles (default 1).
    n_theta : int
    seed : int
        Phase sampling seed for several masters.

    Returns
    -------
    dict
        ``amplitudes``, ``zero_velocity`` and ``full_circle`` arrays holding
        the largest slave displacement discrepancy per ring.
    """
    if tuple(mapA.masters) != tuple(mapB.masters):
        raise ValueError("maps have different master sets")
    if mapA.space != mapB.space or mapA.n_out != mapB.n_out:
        raise ValueError("maps live in different coordinate spaces")
    m = mapA.m
    masters = list(mapA.masters)
    slaves = [k for k in range(mapA.n_out) if k not in masters]
    w = np.ones(m) if omega is None else np.broadcast_to(np.asarray(omega, float), (m,))
    rng = np.random.default_rng(seed)
    theta = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    phases = theta[:, None] + (rng.uniform(0, 2 * np.pi, (1, m)) if m > 1 else 0.0)
    zero, circle = [], []
    for a in np.atleast_1d(amplitudes):
        pts_c = np.hstack([a * np.cos(phases), a * w * np.sin(phases)])
        xs = np.linspace(-a, a, n_theta)[:, None] * np.ones((1, m))
        pts_z = np.hstack([xs, np.zeros_like(xs)])
        for pts, out in ((pts_z, zero), (pts_c, circle)):
            XA, _ = mapA.evaluate(_graph_slice(mapA, pts, w))
            XB, _ = mapB.evaluate(_graph_slice(mapB, pts, w))
            diff = np.abs(XA[:, slaves] - XB[:, slaves])
            out.append(float(np.max(diff)) if diff.size else 0.0)
    return {"amplitudes": np.atleast_1d(np.asarray(amplitudes, dtype=float)),
            "zero_velocity": np.array(zero), "full_circle": np.array(circle)}


def modal_projection(mp, V, M):
    """Express a physical-space map in modal coordinates ``q = V^T M X``.

    Parameters
    ----------
    mp : ManifoldMap
        Map with ``space == "physical"``.
    V : (n, N) array_like
        Mass-normalised eigenvectors.
    M : (n, n) array_like
        Mass matrix.
    """
    if mp.space != "physical":
        raise ValueError("map is not in physical coordinates")
    P = np.asarray(V).T @ np.asarray(M)
    return ManifoldMap(mp.style, mp.order, mp.masters, mp.disp.matmul(P), mp.vel.matmul(P),
                       "modal", dict(mp.coefficients))


def reconstruct(mp, states, V=None):
    """Full displacement and velocity from reduced states through a map.

    Parameters
    ----------
    mp : ManifoldMap
    states : (npts, 2m) array_like
    V : (n, N) array_like, optional
        Eigenvectors turning modal outputs into physical ones.
    """
    X, Y = mp.evaluate(states)
    if V is not None and mp.space == "modal":
        V = np.asarray(V)
        X, Y = X @ V.T, Y @ V.T
    return X, Y
