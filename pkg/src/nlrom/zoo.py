"""Desk-scale model generators.

Beam-like models use a sine-mode Galerkin basis on a simply supported span
and are made nondimensional: time is scaled by the first bending frequency
of the flat beam, displacements by the thickness, and the equations are
divided by the modal mass of a sine mode.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import ModalModel, PhysicalModel, assemble_modal, expand_canonical

KINDS = ("two-dof", "vk-beam", "foundation-beam", "shallow-arch")


@dataclass(frozen=True)
class ZooSpec:
    """Geometry and material description for the beam generators.

    Attributes
    ----------
    kind : str
        One of ``"vk-beam"``, ``"foundation-beam"``, ``"shallow-arch"``.
    n_modes : int
        Number of sine modes in the Galerkin basis.
    length, E, rho, thickness, width : float
        Span, Young's modulus, density and rectangular section dimensions.
    I, S : float or None
        Second moment and area. Computed from the rectangular section when None.
    kappa : float
        Cubic foundation stiffness per unit length.
    k_lin : float
        Linear foundation stiffness per unit length.
    w0 : float
        Arch rise in thickness units.
    arch_shape : str
        ``"sine"`` (first mode shape) or ``"parabola"``.
    axial : str
        ``"ES"`` uses the axial stiffness in N = c/(2l) int w'^2.
        ``"EI"`` keeps the bending stiffness in that coefficient instead.
    """

    kind: str = "vk-beam"
    n_modes: int = 1
    length: float = 1.0
    E: float = 1.0
    rho: float = 1.0
    thickness: float = 0.01
    width: float = 0.05
    I: float | None = None
    S: float | None = None
    kappa: float = 0.0
    k_lin: float = 0.0
    w0: float = 0.0
    arch_shape: str = "sine"
    axial: str = "ES"

    def __post_init__(self):
        if self.kind not in KINDS[1:]:
            raise ValueError(f"unknown beam kind {self.kind!r}")
        if self.n_modes < 1:
            raise ValueError("n_modes must be at least 1")
        for name in ("length", "E", "rho", "thickness", "width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.axial not in ("ES", "EI"):
            raise ValueError("axial must be 'ES' or 'EI'")
        if self.arch_shape not in ("sine", "parabola"):
            raise ValueError("arch_shape must be 'sine' or 'parabola'")

    @property
    def area(self):
        return self.S if self.S is not None else self.width * self.thickness

    @property
    def inertia(self):
        return self.I if self.I is not None else self.width * self.thickness ** 3 / 12.0

    @classmethod
    def from_pairs(cls, pairs):
        """Build a spec from ``key=value`` strings."""
        kw = {}
        for item in pairs:
            key, _, value = item.partition("=")
            key = key.strip().replace("-", "_")
            if key in ("kind", "arch_shape", "axial"):
                kw[key] = value.strip()
            elif key == "n_modes":
                kw[key] = int(value)
            else:
                kw[key] = float(value)
        return cls(**kw)


def _basis(spec, nq=None):
    """Quadrature nodes, weights and sine basis values with two derivatives."""
    n = spec.n_modes
    l = spec.length
    nq = nq or 8 * n + 48
    x, w = np.polynomial.legendre.leggauss(nq)
    y = 0.5 * l * (x + 1.0)
    w = 0.5 * l * w
    k = np.arange(1, n + 1)[:, None] * np.pi / l
    phi = np.sin(k * y)
    dphi = k * np.cos(k * y)
    ddphi = -k ** 2 * np.sin(k * y)
    return y, w, phi, dphi, ddphi


def _arch_profile(spec, y):
    """Rise profile and slope in physical units."""
    l = spec.length
    a = spec.w0 * spec.thickness
    if spec.arch_shape == "sine":
        return a * np.sin(np.pi * y / l), a * np.pi / l * np.cos(np.pi * y / l)
    return 4 * a * y * (l - y) / l ** 2, 4 * a * (l - 2 * y) / l ** 2


def beam_physical(spec):
    """Nondimensional Galerkin model of a beam from the zoo.

    Parameters
    ----------
    spec : ZooSpec

    Returns
    -------
    PhysicalModel
        Coordinates are sine-mode amplitudes in thickness units.
    """
    y, w, phi, dphi, ddphi = _basis(spec)
    E, I, S, rho, l, th = spec.E, spec.inertia, spec.area, spec.rho, spec.length, spec.thickness
    c = E * S if spec.axial == "ES" else E * I
    M = rho * S * (phi * w) @ phi.T
    Kb = E * I * (ddphi * w) @ ddphi.T + spec.k_lin * (phi * w) @ phi.T
    A = (dphi * w) @ dphi.T
    n = spec.n_modes
    G = np.zeros((n, n, n))
    H = np.zeros((n, n, n, n))
    K = Kb.copy()
    if spec.kind in ("vk-beam", "shallow-arch"):
        AA = np.einsum("pi,jk->pijk", A, A)
        H += c / (2 * l) * (AA + AA.transpose(0, 2, 1, 3) + AA.transpose(0, 2, 3, 1)) / 3.0
    if spec.kind == "shallow-arch" and spec.w0 != 0.0:
        _, dw0 = _arch_profile(spec, y)
        B = (dphi * w) @ dw0
        K = K + c / l * np.outer(B, B)
        G = c / (2 * l) * (np.einsum("p,ij->pij", B, A) + np.einsum("i,pj->pij", B, A)
                           + np.einsum("j,ip->pij", B, A))
    if spec.kind == "foundation-beam":
        H += spec.kappa * np.einsum("aq,bq,cq,dq,q->abcd", phi, phi, phi, phi, w)
    m_ref = rho * S * l / 2.0
    w_ref2 = (E * I * (np.pi / l) ** 4 * l / 2.0 + spec.k_lin * l / 2.0) / m_ref
    scale = m_ref * w_ref2
    G = _chop(G * th / scale)
    H = _chop(H * th ** 2 / scale)
    return PhysicalModel.from_dense(_chop(M / m_ref), _chop(K / scale), G, H)


def _chop(T, rel=1e-13):
    """Zero quadrature round-off below ``rel`` times the largest entry."""
    T = np.array(T, dtype=float)
    big = np.abs(T).max() if T.size else 0.0
    T[np.abs(T) <= rel * big] = 0.0
    return T


def make_vk_beam(spec=None, **kw):
    """Simply supported von Karman beam, sine-mode Galerkin.

    Returns
    -------
    ModalModel
        w_k = k^2 in units of the first frequency, zero quadratic tensor.
    """
    spec = spec or ZooSpec(kind="vk-beam", **kw)
    if spec.kind != "vk-beam":
        raise ValueError("spec.kind must be 'vk-beam'")
    return assemble_modal(beam_physical(spec))


def make_foundation_beam(spec=None, **kw):
    """Linear beam on a cubic elastic foundation of stiffness kappa."""
    spec = spec or ZooSpec(kind="foundation-beam", **kw)
    if spec.kind != "foundation-beam":
        raise ValueError("spec.kind must be 'foundation-beam'")
    return assemble_modal(beam_physical(spec))


def make_shallow_arch(spec=None, **kw):
    """Shallow arch: a beam with an initial rise w0 (thickness units).

    Time is scaled by the flat-beam first frequency so that the quadratic
    tensor stays proportional to w0.
    """
    spec = spec or ZooSpec(kind="shallow-arch", **kw)
    if spec.kind != "shallow-arch":
        raise ValueError("spec.kind must be 'shallow-arch'")
    return assemble_modal(beam_physical(spec))


def make_beam(spec):
    """Dispatch on ``spec.kind``."""
    return assemble_modal(beam_physical(spec))


def _fill_symmetric(entries, order, n):
    """Dense symmetric tensor from partial entries, checking consistency."""
    T = np.zeros((n,) * order)
    if entries is None:
        return T
    if isinstance(entries, dict):
        entries = [tuple(k) + (v,) for k, v in entries.items()]
    groups = {}
    for e in entries:
        key = tuple(int(i) for i in e[:order])
        if min(key) < 0 or max(key) >= n:
            raise ValueError(f"index {key} out of range")
        groups.setdefault(tuple(sorted(key)), []).append((key, float(e[order])))
    for base, vals in groups.items():
        ref = vals[0][1]
        for key, v in vals[1:]:
            if abs(v - ref) > 1e-12 * max(1.0, abs(ref)):
                raise ValueError(
                    f"symmetry-inconsistent entries: {vals[0][0]}={ref} but {key}={v}")
        for row in expand_canonical([base + (ref,)], order):
            T[row[:order]] = row[order]
    return T


def make_two_dof(w1, w2, g=None, h=None, damping_ratio=None):
    """Two-mode modal model with free tensor entries.

    Parameters
    ----------
    w1, w2 : float
        Eigenfrequencies.
    g, h : dict or sequence, optional
        Tensor entries ``{(s, i, j): v}`` / ``{(s, i, j, k): v}`` or rows
        ``(s, i, j, v)``. Each value fills every permutation of its indices;
        entries given for several permutations must agree.
    damping_ratio : array_like, optional

    Returns
    -------
    ModalModel
    """
    if w1 <= 0 or w2 <= 0:
        raise ValueError("frequencies must be positive")
    return ModalModel(np.array([w1, w2], dtype=float), np.eye(2),
                      _fill_symmetric(g, 3, 2), _fill_symmetric(h, 4, 2), damping_ratio)


def make_modal(omega, g=None, h=None, damping_ratio=None):
    """N-mode modal model with free tensor entries (see :func:`make_two_dof`)."""
    omega = np.asarray(omega, dtype=float)
    n = omega.size
    return ModalModel(omega, np.eye(n), _fill_symmetric(g, 3, n),
                      _fill_symmetric(h, 4, n), damping_ratio)


def random_modal(omega, rng, g_scale=1.0, h_scale=1.0):
    """Modal model with random fully symmetric tensors."""
    omega = np.asarray(omega, dtype=float)
    n = omega.size
    g = {}
    h = {}
    for key in itertools.combinations_with_replacement(range(n), 3):
        g[key] = g_scale * rng.uniform(-1, 1)
    for key in itertools.combinations_with_replacement(range(n), 4):
        h[key] = h_scale * rng.uniform(-1, 1)
    return make_modal(omega, g, h)


def as_blackbox(model):
    """Nonlinear force evaluator X -> G(X, X) + H(X, X, X).

    Parameters
    ----------
    model : PhysicalModel or ModalModel

    Returns
    -------
    callable
    """
    n = model.n if isinstance(model, PhysicalModel) else model.n_modes

    def evaluate(X):
        X = np.asarray(X, dtype=float)
        if X.shape != (n,):
            raise ValueError(f"displacement has shape {X.shape}, expected ({n},)")
        return model.f_nl(X)

    return evaluate
