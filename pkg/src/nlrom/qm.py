"""Modal derivatives and the quadratic-manifold reduced model."""
from __future__ import annotations

import itertools
import warnings

import numpy as np
import scipy.linalg as spl

from .errors import ReductionError
from .model import ModalModel, PhysicalModel, assemble_modal
from .poly import Poly
from .reduced import ManifoldMap, ReducedModel

KINDS = ("full", "static")


def modal_derivative(model, V, omega, i, j, kind="full", return_dw2=False):
    """Derivative of mode ``i`` with respect to the amplitude of mode ``j``.

    Parameters
    ----------
    model : PhysicalModel
    V : (n, N) array_like
        Mass-normalised eigenvectors.
    omega : (N,) array_like
        Eigenfrequencies.
    i, j : int
    kind : {"full", "static"}
        ``"full"`` solves the bordered system
        ``[[K - w_i^2 M, -M phi_i], [-phi_i^T M, 0]] [Theta; dw2] = [-2 G(phi_j, phi_i); 0]``
        which enforces mass orthogonality to ``phi_i``; ``"static"`` solves
        ``K Theta = -2 G(phi_j, phi_i)``.
    return_dw2 : bool
        Also return the eigenvalue derivative of the full kind.

    Returns
    -------
    (n,) ndarray, or (ndarray, float)
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    V = np.asarray(V, dtype=float)
    M, K = model.mass, model.stiffness
    phi_i, phi_j = V[:, i], V[:, j]
    rhs = -2.0 * model.G(phi_j, phi_i)
    n = model.n
    if kind == "static":
        try:
            theta = spl.solve(K, rhs, assume_a="sym")
        except (spl.LinAlgError, ValueError) as exc:
            raise ReductionError("singular stiffness matrix in static modal derivative") from exc
        return (theta, 0.0) if return_dw2 else theta
    Mphi = M @ phi_i
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = K - omega[i] ** 2 * M
    A[:n, n] = -Mphi
    A[n, :n] = -Mphi
    b = np.concatenate([rhs, [0.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", spl.LinAlgWarning)
        lu = spl.lu_factor(A, check_finite=True)
    if np.min(np.abs(np.diag(lu[0]))) <= 1e-13 * np.max(np.abs(np.diag(lu[0]))):
        raise ReductionError(f"bordered modal-derivative system for mode {i} is singular "
                             "(repeated eigenvalue?)")
    sol = spl.lu_solve(lu, b)
    return (sol[:n], sol[n]) if return_dw2 else sol[:n]


def _physical_and_modes(model, masters):
    if isinstance(model, ModalModel):
        N = model.n_modes
        phys = model.as_physical()
        return phys, np.eye(N), model.omega
    if isinstance(model, PhysicalModel):
        mm = assemble_modal(model, max(masters) + 1)
        return model, mm.V, mm.omega
    raise TypeError("model must be a PhysicalModel or ModalModel")


def qm_build(model, masters, kind="full"):
    """Quadratic-manifold reduced model from modal derivatives.

    The map is ``X = sum phi_i x_i + 1/2 sum_ij Theta_ij x_i x_j`` with the
    symmetrised derivatives ``Theta_ij = (Theta_ij + Theta_ji) / 2``. The
    reduced dynamics come from the Galerkin projection on the tangent
    ``T(x) = dX/dx`` of ``M X'' + K X + f_nl(X) = 0`` with
    ``X'' = T x'' + Theta(x', x')``; the reduced mass ``T^T M T`` is
    inverted as a series and everything is truncated at third order.

    Parameters
    ----------
    model : PhysicalModel or ModalModel
    masters : int or iterable of int
    kind : {"full", "static"}

    Returns
    -------
    ManifoldMap, ReducedModel
        The map is velocity independent; ``space`` is ``"physical"`` for a
        PhysicalModel and ``"modal"`` for a ModalModel.
    """
    masters = (int(masters),) if np.isscalar(masters) else tuple(int(r) for r in masters)
    phys, V, omega = _physical_and_modes(model, masters)
    m = len(masters)
    n = phys.n
    Phi = V[:, list(masters)]
    theta = np.zeros((m, m, n))
    raw = {}
    dw2 = np.zeros((m, m))
    for a, b in itertools.product(range(m), repeat=2):
        raw[a, b], dw2[a, b] = modal_derivative(phys, V, omega, masters[a], masters[b], kind,
                                                return_dw2=True)
    for a, b in itertools.product(range(m), repeat=2):
        theta[a, b] = 0.5 * (raw[a, b] + raw[b, a])
    nv = 2 * m
    X = Poly(nv, (n,))
    for a in range(m):
        e = [0] * nv
        e[a] = 1
        X = X + Poly(nv, (n,), {tuple(e): Phi[:, a]})
    for a, b in itertools.product(range(m), repeat=2):
        e = [0] * nv
        e[a] += 1
        e[b] += 1
        X = X + Poly(nv, (n,), {tuple(e): 0.5 * theta[a, b]})
    T = [X.deriv(a) for a in range(m)]
    acc_q = Poly(nv, (n,))
    for a, b in itertools.product(range(m), repeat=2):
        e = [0] * nv
        e[m + a] += 1
        e[m + b] += 1
        acc_q = acc_q + Poly(nv, (n,), {tuple(e): theta[a, b]})
    force = X.matmul(phys.stiffness) + _fnl_poly(phys, X, 3) + acc_q.matmul(phys.mass)
    P = [T[r].dot(force, 3) for r in range(m)]
    Mr = [[T[r].dot(T[k].matmul(phys.mass), 2) for k in range(m)] for r in range(m)]
    E = [[(Mr[r][k] - Poly.constant(nv, float(r == k))).truncate(2, 1) for k in range(m)]
         for r in range(m)]
    # (I + E)^-1 = I - E + E^2 up to second order
    inv = [[Poly.constant(nv, float(r == k)) - E[r][k] for k in range(m)] for r in range(m)]
    for r, k in itertools.product(range(m), repeat=2):
        for q in range(m):
            inv[r][k] = inv[r][k] + E[r][q].mul(E[q][k], 2)
    polys = []
    om = omega[list(masters)]
    for r in range(m):
        acc = Poly(nv, ())
        for k in range(m):
            acc = acc + inv[r][k].mul(P[k], 3)
        lin = acc.truncate(1, 1)
        for k in range(m):
            e = [0] * nv
            e[k] = 1
            expect = om[r] ** 2 if k == r else 0.0
            if abs(complex(lin.coefficient(e)) - expect) > 1e-8 * max(1.0, om[r] ** 2):
                raise ReductionError("projected linear stiffness is not modal; check mass "
                                     "normalisation of the eigenvectors")
        polys.append(acc.truncate(3, 2).chop(0.0))
    xi = None
    if isinstance(model, ModalModel) and model.damping_ratio is not None:
        xi = model.damping_ratio[list(masters)]
    method = "qm-md" if kind == "full" else "qm-smd"
    rm = ReducedModel.from_polys(om, polys, masters, method=method, damping_ratio=xi)
    vel = X.lie([Poly.variable(nv, m + a) for a in range(m)] + [Poly(nv, ())] * m)
    space = "modal" if isinstance(model, ModalModel) else "physical"
    mp = ManifoldMap("graph", 2, masters, X, vel, space, {"theta": theta, "dw2": dw2})
    return mp, rm


def _fnl_poly(phys, X, max_order):
    """G(X, X) + H(X, X, X) for a polynomial vector X, truncated."""
    nv = X.nvar
    out = {}
    items = list(X.terms.items())
    for (e1, c1), (e2, c2) in itertools.product(items, repeat=2):
        if sum(e1) + sum(e2) > max_order:
            continue
        e = tuple(p + q for p, q in zip(e1, e2))
        out[e] = out.get(e, 0) + phys.G(c1, c2)
    lin = [(e, c) for e, c in items if sum(e) == 1]
    for (e1, c1), (e2, c2), (e3, c3) in itertools.product(lin, repeat=3):
        e = tuple(p + q + r for p, q, r in zip(e1, e2, e3))
        out[e] = out.get(e, 0) + phys.H(c1, c2, c3)
    return Poly(nv, (phys.n,), out)
