"""Semi-discrete and modal equations of motion with polynomial stiffness.

The physical system is

    M X'' + K X + G(X, X) + H(X, X, X) = 0

with G and H fully symmetric sparse tensors. Projection on mass-normalised
eigenvectors gives the modal system

    x_p'' + w_p^2 x_p + sum g^p_ij x_i x_j + sum h^p_ijk x_i x_j x_k = 0.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spl

from .errors import ReductionError


def _as_entries(entries, order):
    """Convert a list of (idx..., value) rows to (int array, float array)."""
    if entries is None or len(entries) == 0:
        return np.zeros((0, order), dtype=int), np.zeros(0)
    if isinstance(entries, np.ndarray):
        return entries[:, :order].astype(int), entries[:, order].astype(float)
    arr = [tuple(e) for e in entries]
    idx = np.array([[int(v) for v in e[:order]] for e in arr], dtype=int)
    val = np.array([float(e[order]) for e in arr])
    return idx, val


def expand_canonical(entries, order):
    """Expand canonical sorted-index entries to every distinct permutation.

    Parameters
    ----------
    entries : sequence of tuples
        Rows ``(s, i, j, v)`` (order 3) or ``(s, i, j, k, v)`` (order 4)
        holding one value per index multiset.
    order : int
        Number of tensor indices.

    Returns
    -------
    list of tuples
        Rows for the full tensor, one per distinct index permutation.
    """
    out = []
    for e in entries:
        key = tuple(int(v) for v in e[:order])
        for perm in sorted(set(itertools.permutations(key))):
            out.append(perm + (float(e[order]),))
    return out


def canonical_entries(idx, val, order, tol=0.0):
    """Collapse full-tensor entries to one value per sorted index multiset.

    The value kept is the mean over the listed permutations, which equals the
    common value when the tensor is symmetric.
    """
    groups = {}
    for row, v in zip(idx, val):
        key = tuple(sorted(int(r) for r in row))
        groups.setdefault(key, {})
        groups[key][tuple(int(r) for r in row)] = groups[key].get(tuple(int(r) for r in row), 0.0) + v
    out = []
    for key in sorted(groups):
        perms = set(itertools.permutations(key))
        total = sum(groups[key].get(p, 0.0) for p in perms)
        value = total / len(perms)
        if abs(value) > tol:
            out.append(key + (value,))
    return out


def dense_to_entries(T, tol=0.0):
    """Nonzero entries of a dense tensor as an array of rows ``(idx..., value)``."""
    T = np.asarray(T, dtype=float)
    nz = np.argwhere(np.abs(T) > tol)
    return np.column_stack([nz.astype(float), T[tuple(nz.T)]])


def entries_to_dense(idx, val, n, order):
    """Dense tensor from (possibly repeated) coordinate entries."""
    T = np.zeros((n,) * order)
    if len(val):
        np.add.at(T, tuple(idx.T), val)
    return T


def symmetrize(T):
    """Average a dense tensor over all permutations of its axes."""
    T = np.asarray(T, dtype=float)
    perms = list(itertools.permutations(range(T.ndim)))
    return sum(np.transpose(T, p) for p in perms) / len(perms)


@dataclass(frozen=True, eq=False)
class PhysicalModel:
    """Discretised structure with quadratic and cubic polynomial stiffness.

    Parameters
    ----------
    mass, stiffness : (n, n) array_like
        Symmetric mass (positive definite) and stiffness matrices.
    quad : sequence of (s, i, j, value), optional
        Entries of the full quadratic tensor G^s_ij. Use
        :meth:`from_canonical` to pass one value per index multiset.
    cubic : sequence of (s, i, j, k, value), optional
        Entries of the full cubic tensor H^s_ijk.

    Notes
    -----
    Entries are stored exactly as given, so an asymmetric input stays
    asymmetric and can be diagnosed with :func:`check_tensor_symmetry`.
    Repeated index tuples are summed.
    """

    mass: np.ndarray
    stiffness: np.ndarray
    quad_idx: np.ndarray = field(default=None)
    quad_val: np.ndarray = field(default=None)
    cubic_idx: np.ndarray = field(default=None)
    cubic_val: np.ndarray = field(default=None)

    def __init__(self, mass, stiffness, quad=None, cubic=None):
        M = np.array(mass, dtype=float)
        K = np.array(stiffness, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or K.shape != M.shape:
            raise ValueError("mass and stiffness must be square matrices of equal size")
        n = M.shape[0]
        qi, qv = _as_entries(quad, 3)
        ci, cv = _as_entries(cubic, 4)
        for name, ix in (("quad", qi), ("cubic", ci)):
            if ix.size and (ix.min() < 0 or ix.max() >= n):
                raise ValueError(f"{name} index out of range for n={n}")
        for name, arr in (("mass", M), ("stiffness", K), ("quad_idx", qi),
                          ("quad_val", qv), ("cubic_idx", ci), ("cubic_val", cv)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_canonical(cls, mass, stiffness, quad=None, cubic=None):
        """Build a model from one value per sorted index multiset."""
        return cls(mass, stiffness, expand_canonical(quad or [], 3),
                   expand_canonical(cubic or [], 4))

    @classmethod
    def from_dense(cls, mass, stiffness, G=None, H=None, tol=0.0):
        """Build a model from dense quadratic and cubic tensors."""
        quad = dense_to_entries(G, tol) if G is not None else None
        cubic = dense_to_entries(H, tol) if H is not None else None
        return cls(mass, stiffness, quad, cubic)

    @property
    def n(self):
        return self.mass.shape[0]

    def quad_dense(self):
        return entries_to_dense(self.quad_idx, self.quad_val, self.n, 3)

    def cubic_dense(self):
        return entries_to_dense(self.cubic_idx, self.cubic_val, self.n, 4)

    def G(self, A, B):
        """Bilinear quadratic form, sum_ij G^s_ij A_i B_j."""
        s, i, j = self.quad_idx.T
        return np.bincount(s, self.quad_val * A[i] * B[j], minlength=self.n)

    def H(self, A, B, C):
        """Trilinear cubic form, sum_ijk H^s_ijk A_i B_j C_k."""
        s, i, j, k = self.cubic_idx.T
        return np.bincount(s, self.cubic_val * A[i] * B[j] * C[k], minlength=self.n)

    def f_nl(self, X):
        """Nonlinear part G(X,X) + H(X,X,X) of the internal force."""
        X = np.asarray(X, dtype=float)
        return self.G(X, X) + self.H(X, X, X)

    def tangent(self, X):
        """Jacobian of the internal force with respect to X."""
        X = np.asarray(X, dtype=float)
        n = self.n
        J = np.array(self.stiffness, dtype=float)
        s, i, j = self.quad_idx.T
        v = self.quad_val
        np.add.at(J, (s, i), v * X[j])
        np.add.at(J, (s, j), v * X[i])
        s, i, j, k = self.cubic_idx.T
        v = self.cubic_val
        np.add.at(J, (s, i), v * X[j] * X[k])
        np.add.at(J, (s, j), v * X[i] * X[k])
        np.add.at(J, (s, k), v * X[i] * X[j])
        return J.reshape(n, n)


@dataclass(frozen=True, eq=False)
class ModalModel:
    """Modal system with mass-normalised eigenvectors.

    Attributes
    ----------
    omega : (N,) ndarray
        Eigen angular frequencies, ascending.
    V : (n, N) ndarray
        Mass-normalised eigenvectors.
    g : (N, N, N) ndarray
        Quadratic modal tensor, ``g[p, i, j] = g^p_ij``.
    h : (N, N, N, N) ndarray
        Cubic modal tensor.
    damping_ratio : (N,) ndarray or None
        Optional modal damping ratios.

    Notes
    -----
    Modal tensors are kept dense because desk-scale mode counts stay small.
    """

    omega: np.ndarray
    V: np.ndarray
    g: np.ndarray
    h: np.ndarray
    damping_ratio: np.ndarray | None = None

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float).ravel()
        N = omega.size
        V = np.eye(N) if self.V is None else np.array(self.V, dtype=float)
        g = np.zeros((N,) * 3) if self.g is None else np.array(self.g, dtype=float)
        h = np.zeros((N,) * 4) if self.h is None else np.array(self.h, dtype=float)
        if g.shape != (N,) * 3 or h.shape != (N,) * 4 or V.shape[1] != N:
            raise ValueError("tensor shapes do not match the number of modes")
        if np.any(omega <= 0):
            raise ValueError("eigenfrequencies must be positive")
        xi = None
        if self.damping_ratio is not None:
            xi = np.broadcast_to(np.asarray(self.damping_ratio, dtype=float), (N,)).copy()
        for name, arr in (("omega", omega), ("V", V), ("g", g), ("h", h), ("damping_ratio", xi)):
            if arr is not None:
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_modes(self):
        return self.omega.size

    def with_damping(self, damping_ratio):
        """Copy of the model with modal damping ratios set."""
        return ModalModel(self.omega, self.V, self.g, self.h, damping_ratio)

    def f_nl(self, x):
        """Modal nonlinear force g(x, x) + h(x, x, x)."""
        x = np.asarray(x, dtype=float)
        return (np.einsum("pij,i,j->p", self.g, x, x)
                + np.einsum("pijk,i,j,k->p", self.h, x, x, x))

    def as_physical(self):
        """The modal equations seen as a PhysicalModel with M = I."""
        N = self.n_modes
        return PhysicalModel.from_dense(np.eye(N), np.diag(self.omega ** 2), self.g, self.h)


def eval_internal_force(model, X):
    """Internal force k = K X + G(X, X) + H(X, X, X).

    Parameters
    ----------
    model : PhysicalModel
    X : (n,) array_like
        Displacement vector.

    Returns
    -------
    (n,) ndarray
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (model.n,):
        raise ValueError(f"displacement has shape {X.shape}, expected ({model.n},)")
    return model.stiffness @ X + model.f_nl(X)


def potential_energy(model, X):
    """Quartic potential whose gradient is the internal force."""
    X = np.asarray(X, dtype=float)
    return (0.5 * X @ model.stiffness @ X + model.G(X, X) @ X / 3.0
            + model.H(X, X, X) @ X / 4.0)


def _fix_signs(V):
    """Make the largest-magnitude component of each column positive."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def project_tensors(model, V):
    """Modal tensors g = V^T G(V, V) and h = V^T H(V, V, V)."""
    V = np.asarray(V, dtype=float)
    n, N = V.shape
    if n <= 40:
        g = model.quad_dense()
        h = model.cubic_dense()
        for _ in range(3):
            g = np.tensordot(g, V, axes=([0], [0]))
        for _ in range(4):
            h = np.tensordot(h, V, axes=([0], [0]))
        return g, h
    g = np.zeros((N,) * 3)
    h = np.zeros((N,) * 4)
    s, i, j = model.quad_idx.T
    if s.size:
        g = np.einsum("e,ep,ei,ej->pij", model.quad_val, V[s], V[i], V[j], optimize=True)
    s, i, j, k = model.cubic_idx.T
    if s.size:
        h = np.einsum("e,ep,ei,ej,ek->pijk", model.cubic_val, V[s], V[i], V[j], V[k],
                      optimize=True)
    return g, h


def assemble_modal(model, n_modes=None, damping_ratio=None):
    """Solve the generalised eigenproblem and project the tensors.

    Parameters
    ----------
    model : PhysicalModel
    n_modes : int, optional
        Number of lowest modes to keep. Defaults to all.
    damping_ratio : array_like, optional
        Modal damping ratios attached to the result.

    Returns
    -------
    ModalModel
    """
    n = model.n
    n_modes = n if n_modes is None else int(n_modes)
    if not 1 <= n_modes <= n:
        raise ValueError(f"n_modes must lie in [1, {n}]")
    try:
        spl.cholesky(model.mass)
    except spl.LinAlgError as exc:
        raise ReductionError("mass matrix is not positive definite") from exc
    try:
        lam, V = spl.eigh(model.stiffness, model.mass, subset_by_index=[0, n_modes - 1])
    except spl.LinAlgError as exc:
        raise ReductionError(f"eigen-solver failed: {exc}") from exc
    if np.any(lam <= 0):
        raise ReductionError("stiffness matrix is not positive definite on the kept modes")
    V = _fix_signs(V)
    g, h = project_tensors(model, V)
    return ModalModel(np.sqrt(lam), V, g, h, damping_ratio)


@dataclass
class SymmetryReport:
    """Outcome of :func:`check_tensor_symmetry`.

    Attributes
    ----------
    passed : bool
    max_violation : dict
        Largest relative violation per tensor class (``"quad"``, ``"cubic"``).
    violations : list of tuple
        ``(tensor, index_a, index_b, magnitude)`` for each broken identity
        ``T[index_a] = T[index_b]`` above tolerance.
    """

    passed: bool
    max_violation: dict
    violations: list


def _entry_dict(obj, order):
    if isinstance(obj, ModalModel):
        T = obj.g if order == 3 else obj.h
        return {tuple(int(i) for i in row): float(T[tuple(row)]) for row in np.argwhere(T != 0)}
    idx, val = (obj.quad_idx, obj.quad_val) if order == 3 else (obj.cubic_idx, obj.cubic_val)
    out = {}
    for row, v in zip(idx, val):
        key = tuple(int(i) for i in row)
        out[key] = out.get(key, 0.0) + float(v)
    return out


def check_tensor_symmetry(model, tol=1e-12, max_report=50):
    """Check full index-permutation symmetry of the quadratic and cubic tensors.

    Parameters
    ----------
    model : PhysicalModel or ModalModel
    tol : float
        Relative tolerance, scaled by the largest entry of each tensor.
    max_report : int
        Maximum number of violated identities listed.

    Returns
    -------
    SymmetryReport
    """
    max_violation = {}
    violations = []
    for name, order in (("quad", 3), ("cubic", 4)):
        entries = _entry_dict(model, order)
        scale = max((abs(v) for v in entries.values()), default=0.0)
        worst = 0.0
        seen = set()
        for key in entries:
            base = tuple(sorted(key))
            if base in seen:
                continue
            seen.add(base)
            perms = sorted(set(itertools.permutations(base)))
            vals = [entries.get(p, 0.0) for p in perms]
            ref = vals[0]
            for p, v in zip(perms[1:], vals[1:]):
                diff = abs(v - ref) / scale if scale > 0 else 0.0
                worst = max(worst, diff)
                if diff > tol and len(violations) < max_report:
                    violations.append((name, perms[0], p, diff))
        max_violation[name] = worst
    passed = all(v <= tol for v in max_violation.values())
    return SymmetryReport(passed, max_violation, violations)


@dataclass
class MonomialTag:
    """Classification of one monomial of one modal equation."""

    equation: int
    indices: tuple
    coefficient: float
    tag: str
    invariant_breaking: bool


@dataclass
class MonomialClassification:
    """Result of :func:`classify_monomials`."""

    masters: tuple
    monomials: list
    resonances: list

    def find(self, equation, indices):
        key = tuple(sorted(indices))
        for m in self.monomials:
            if m.equation == equation and m.indices == key:
                return m
        raise KeyError((equation, indices))


def _sign_combos(freqs):
    """All values of +-w_a +-w_b ... for the given frequencies."""
    out = []
    for signs in itertools.product((1.0, -1.0), repeat=len(freqs)):
        out.append((signs, float(np.dot(signs, freqs))))
    return out


def _is_trivial(eq, indices):
    """Monomial x_eq x_q^2 (including x_eq^3) on equation eq."""
    if len(indices) != 3:
        return False
    rest = list(indices)
    if eq not in rest:
        return False
    rest.remove(eq)
    return rest[0] == rest[1]


def internal_resonances(omega, tol_res=1e-2):
    """Second- and third-order eigenfrequency relations below a relative detuning.

    Returns
    -------
    list of (relation, residual)
        ``residual`` is ``|combination - w_j| / w_j``. Relations that hold
        identically by index cancellation are skipped.
    """
    omega = np.asarray(omega, dtype=float)
    N = omega.size
    found = {}
    for order in (2, 3):
        for combo in itertools.combinations_with_replacement(range(N), order):
            for signs, val in _sign_combos(omega[list(combo)]):
                if val <= 0:
                    continue
                pos = sorted(c for c, s in zip(combo, signs) if s > 0)
                neg = sorted(c for c, s in zip(combo, signs) if s < 0)
                if set(pos) & set(neg):
                    continue
                for j in range(N):
                    res = abs(val - omega[j]) / omega[j]
                    if res < tol_res:
                        key = (tuple(pos), tuple(neg), j)
                        if key not in found:
                            terms = "+".join(f"w[{i}]" for i in pos)
                            terms += "".join(f"-w[{i}]" for i in neg)
                            found[key] = (f"{terms} ~ w[{j}]", float(res))
    return [found[k] for k in sorted(found)]


def classify_monomials(mm, masters, tol_res=1e-2, coef_tol=0.0):
    """Tag every nonzero quadratic and cubic monomial of the modal equations.

    Parameters
    ----------
    mm : ModalModel
    masters : iterable of int
        Zero-based master mode indices.
    tol_res : float
        Relative detuning below which a frequency relation counts as resonant.
    coef_tol : float
        Monomials with ``|coefficient| <= coef_tol`` are skipped.

    Returns
    -------
    MonomialClassification
        Each monomial is tagged ``"trivially-resonant"``, ``"resonant"`` or
        ``"non-resonant"``; ``invariant_breaking`` marks x_m^2 and x_m^3
        terms (m master) appearing on slave equations.
    """
    masters = tuple(sorted(int(m) for m in masters))
    if not masters:
        raise ValueError("masters must be non-empty")
    omega = mm.omega
    N = mm.n_modes
    out = []
    for p in range(N):
        for order, T in ((2, mm.g), (3, mm.h)):
            for combo in itertools.combinations_with_replacement(range(N), order):
                perms = set(itertools.permutations(combo))
                coef = float(sum(T[(p,) + q] for q in perms))
                if abs(coef) <= coef_tol:
                    continue
                if _is_trivial(p, combo):
                    tag = "trivially-resonant"
                else:
                    tag = "non-resonant"
                    for _, val in _sign_combos(omega[list(combo)]):
                        if abs(abs(val) - omega[p]) / omega[p] < tol_res:
                            tag = "resonant"
                            break
                breaking = (p not in masters and len(set(combo)) == 1 and combo[0] in masters)
                out.append(MonomialTag(p, combo, coef, tag, breaking))
    return MonomialClassification(masters, out, internal_resonances(omega, tol_res))


def spectral_quotient(sigma, masters):
    """Integer part of the largest slave decay rate over the smallest master one.

    Parameters
    ----------
    sigma : array_like
        Positive per-mode decay rates (real part magnitude of the eigenvalues).
    masters : iterable of int
        Zero-based master indices.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("decay rates must be positive")
    masters = sorted(set(int(m) for m in masters))
    slaves = [i for i in range(sigma.size) if i not in masters]
    if not slaves:
        raise ValueError("slave set is empty")
    if not masters:
        raise ValueError("master set is empty")
    return int(np.floor(sigma[slaves].max() / sigma[masters].min() + 1e-12))
