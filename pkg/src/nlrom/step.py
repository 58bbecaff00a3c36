"""Non-intrusive identification of modal tensors from static force evaluations.

Prescribed displacements built from combinations of (scaled) eigenvectors are
fed to a black-box nonlinear force. Projecting the returned forces on the
eigenvectors and combining the responses at opposite signs separates the
quadratic (even) and cubic (odd) contributions entry by entry.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import mode_label
from .model import check_tensor_symmetry, ModalModel, symmetrize


@dataclass(frozen=True)
class StepPlan:
    """Load-case schedule for :func:`step_identify`.

    Attributes
    ----------
    lam : (N,) ndarray
        Per-mode displacement amplitude.
    pairs : bool
        Impose the mixed two-mode cases.
    triples : bool
        Impose the mixed three-mode cases.
    """

    lam: np.ndarray
    pairs: bool = True
    triples: bool = True

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if np.any(lam <= 0):
            raise ValueError("lambda must be positive (a zero amplitude makes the system singular)")
        object.__setattr__(self, "lam", lam)

    def cases(self):
        """Mode combinations imposed, as ``(indices, signs)`` tuples."""
        N = self.lam.size
        out = []
        for p in range(N):
            out += [((p,), (1,)), ((p,), (-1,))]
        if self.pairs:
            for p, q in itertools.combinations(range(N), 2):
                for sp, sq in ((1, 1), (-1, -1), (1, -1), (-1, 1)):
                    out.append(((p, q), (sp, sq)))
        if self.triples:
            for p, q, r in itertools.combinations(range(N), 3):
                out += [((p, q, r), (1, 1, 1)), ((p, q, r), (-1, -1, -1))]
        return out


@dataclass
class StepResult:
    """Identified tensors plus provenance."""

    g: np.ndarray
    h: np.ndarray
    lam: np.ndarray
    n_cases: int
    symmetry_violation: float


def _force_ratio(force_eval, K, phi, lam):
    X = lam * phi
    return np.linalg.norm(force_eval(X)) / np.linalg.norm(K @ X)


def choose_lambda(force_eval, V, K, band=(1e-3, 1e-1), lam0=1.0, max_iter=200):
    """Per-mode amplitudes putting the nonlinear/linear force ratio in a band.

    The ratio ``|f_nl(lam phi_p)| / |K lam phi_p|`` is driven to the
    geometric centre of ``band`` by bisection on ``log(lam)``.

    Parameters
    ----------
    force_eval : callable
        Nonlinear force X -> f_nl(X).
    V : (n, N) array_like
        Eigenvectors.
    K : (n, n) array_like
        Stiffness matrix.
    band : tuple of float
        Admissible ratio interval.

    Returns
    -------
    (N,) ndarray
        Modes whose own displacement produces no nonlinear force take the
        geometric mean of the other amplitudes.

    Raises
    ------
    ValueError
        No mode reaches the band.
    """
    V = np.asarray(V, dtype=float)
    K = np.asarray(K, dtype=float)
    lo_r, hi_r = band
    target = np.sqrt(lo_r * hi_r)
    lam = np.full(V.shape[1], np.nan)
    for p in range(V.shape[1]):
        phi = V[:, p]
        lo, hi = np.log(lam0) - 60.0, np.log(lam0) + 60.0
        r_hi = _force_ratio(force_eval, K, phi, np.exp(hi))
        if not np.isfinite(r_hi) or r_hi < lo_r:
            # mode enters the force only through couplings with other modes
            continue
        mid = 0.5 * (lo + hi)
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            r = _force_ratio(force_eval, K, phi, np.exp(mid))
            if lo_r <= r <= hi_r and abs(np.log(r / target)) < 0.5:
                break
            if r < target:
                lo = mid
            else:
                hi = mid
        r = _force_ratio(force_eval, K, phi, np.exp(mid))
        if not lo_r <= r <= hi_r:
            raise ValueError(f"force ratio band unreachable for {mode_label(p)}")
        lam[p] = np.exp(mid)
    ok = np.isfinite(lam)
    if not ok.any():
        raise ValueError("force ratio band unreachable for every mode (model looks linear)")
    lam[~ok] = np.exp(np.mean(np.log(lam[ok])))
    return lam


def step_identify(force_eval, V, M, plan, sym_tol=1e-9):
    """Identify modal quadratic and cubic tensors.

    Parameters
    ----------
    force_eval : callable
        Pure nonlinear force evaluator X -> f_nl(X).
    V : (n, N) array_like
        Mass-normalised eigenvectors.
    M : (n, n) array_like
        Mass matrix, used to project forces (``phi_k^T f / phi_k^T M phi_k``).
    plan : StepPlan

    Returns
    -------
    StepResult
        ``g[k, i, j]`` and ``h[k, i, j, l]`` symmetrised over all indices.

    Notes
    -----
    Each mode is scaled by its own amplitude, ``psi_p = lam_p phi_p``. The
    tensors are first identified in the scaled basis with unit amplitudes
    and then rescaled.
    """
    V = np.asarray(V, dtype=float)
    M = np.asarray(M, dtype=float)
    N = V.shape[1]
    lam = plan.lam if plan.lam.size == N else np.full(N, plan.lam[0])
    if lam.size != N:
        raise ValueError("lambda vector does not match the eigenvector count")
    modal_mass = np.einsum("ip,ij,jp->p", V, M, V)
    Psi = V * lam

    def F(coeffs):
        X = Psi @ coeffs
        return (V.T @ force_eval(X)) / modal_mass

    def unit(idx, signs):
        c = np.zeros(N)
        for i, s in zip(idx, signs):
            c[i] += s
        return c

    g = np.zeros((N, N, N))
    h = np.zeros((N, N, N, N))
    n_cases = 0

    def put(T, key, val):
        for perm in set(itertools.permutations(key)):
            T[(slice(None),) + perm] = val

    for p in range(N):
        fp, fm = F(unit((p,), (1,))), F(unit((p,), (-1,)))
        n_cases += 2
        put(g, (p, p), 0.5 * (fp + fm))
        put(h, (p, p, p), 0.5 * (fp - fm))
    if plan.pairs:
        for p, q in itertools.combinations(range(N), 2):
            f_pp = F(unit((p, q), (1, 1)))
            f_mm = F(unit((p, q), (-1, -1)))
            f_pm = F(unit((p, q), (1, -1)))
            f_mp = F(unit((p, q), (-1, 1)))
            n_cases += 4
            even_s = 0.5 * (f_pp + f_mm)
            odd_s = 0.5 * (f_pp - f_mm)
            odd_d = 0.5 * (f_pm - f_mp)
            put(g, (p, q), 0.5 * (even_s - g[:, p, p] - g[:, q, q]))
            # odd_s = hppp + 3hppq + 3hpqq + hqqq, odd_d = hppp - 3hppq + 3hpqq - hqqq
            c_plus = (odd_s + odd_d) / 2 - h[:, p, p, p]
            c_minus = (odd_s - odd_d) / 2 - h[:, q, q, q]
            put(h, (p, p, q), c_minus / 3.0)
            put(h, (p, q, q), c_plus / 3.0)
    if plan.triples:
        for p, q, r in itertools.combinations(range(N), 3):
            fp = F(unit((p, q, r), (1, 1, 1)))
            fm = F(unit((p, q, r), (-1, -1, -1)))
            n_cases += 2
            odd = 0.5 * (fp - fm)
            known = h[:, p, p, p] + h[:, q, q, q] + h[:, r, r, r]
            for a, b in itertools.permutations((p, q, r), 2):
                known = known + 3 * h[:, a, a, b]
            put(h, (p, q, r), (odd - known) / 6.0)
    scale2 = np.einsum("i,j->ij", lam, lam)
    scale3 = np.einsum("i,j,k->ijk", lam, lam, lam)
    g = g / scale2[None]
    h = h / scale3[None]
    raw = ModalModel(np.ones(N), np.eye(N), g, h)
    report = check_tensor_symmetry(raw, tol=sym_tol)
    worst = max(report.max_violation.values())
    if not report.passed:
        warnings.warn(f"identified tensors violate index symmetry by {worst:.3e} "
                      "(non-polynomial or non-conservative force?)")
    return StepResult(symmetrize(g), symmetrize(h), lam, n_cases, worst)


def step_model(model, n_modes=None, lam=None):
    """Run STEP on a PhysicalModel through its black-box evaluator.

    Returns
    -------
    ModalModel, StepResult
        Modal model with identified tensors, and the identification record.
    """
    from .model import assemble_modal
    from .zoo import as_blackbox

    mm = assemble_modal(model, n_modes)
    fe = as_blackbox(model)
    if lam is None:
        lam = choose_lambda(fe, mm.V, model.stiffness)
    res = step_identify(fe, mm.V, model.mass, StepPlan(np.atleast_1d(lam)))
    return ModalModel(mm.omega, mm.V, res.g, res.h, mm.damping_ratio), res
