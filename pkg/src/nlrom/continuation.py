"""Harmonic balance with pseudo-arclength continuation for reduced models.

Periodic solutions ``x_r(t) = sum_k c_rk cos(k W t) + s_rk sin(k W t)`` are
computed with the alternating frequency/time scheme. Backbones of
conservative models use cosine terms only, which fixes the phase; forced
responses use the full basis and carry Hill-method stability.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, SchemaError

TAGS = ("none", "SN", "PF", "NS-candidate")


@dataclass(eq=False)
class Curve:
    """Continuation branch.

    Attributes
    ----------
    omega : (npts,) ndarray
        Response frequency of each point.
    amp : (npts, m) ndarray
        Maximum of ``|x_r|`` over one period, per master.
    stable : (npts,) bool ndarray
    tag : list of str
        One of ``"none"``, ``"SN"``, ``"PF"``, ``"NS-candidate"`` per point.
    method : str
    residual : (npts,) ndarray
        Norm of the harmonic-balance residual at each converged point.
    coeffs : list of ndarray
        Harmonic coefficients of each point, shape ``(m, n_basis)``.
    """

    omega: np.ndarray
    amp: np.ndarray
    stable: np.ndarray
    tag: list
    method: str = ""
    residual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    coeffs: list = field(default_factory=list)

    def __len__(self):
        return len(self.omega)

    def tags(self, name):
        """Indices of points carrying a tag."""
        return [i for i, t in enumerate(self.tag) if t == name]

    def to_csv(self, path):
        """Columns ``omega, a_1..a_m, stable, tag``; floats with 17 digits."""
        m = self.amp.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega"] + [f"a_{r + 1}" for r in range(m)] + ["stable", "tag"])
            for i in range(len(self)):
                w.writerow([repr(float(self.omega[i]))]
                           + [repr(float(a)) for a in self.amp[i]]
                           + [int(bool(self.stable[i])), self.tag[i]])

    @classmethod
    def from_csv(cls, path, method=""):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0] != "omega" or rows[0][-2:] != ["stable", "tag"]:
            raise SchemaError("curve CSV header must be 'omega, a_1..a_m, stable, tag'")
        body = rows[1:]
        try:
            omega = np.array([float(r[0]) for r in body])
            amp = np.array([[float(v) for v in r[1:-2]] for r in body]).reshape(len(body), -1)
            stable = np.array([bool(int(r[-2])) for r in body], dtype=bool)
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"curve CSV row is malformed: {exc}") from exc
        tag = [r[-1] for r in body]
        bad = [t for t in tag if t not in TAGS]
        if bad:
            raise SchemaError(f"unknown tag {bad[0]!r} in column 'tag'")
        return cls(omega, amp, stable, tag, method)


class HarmonicBalance:
    """Harmonic-balance residual and Jacobians for a ReducedModel.

    Parameters
    ----------
    rm : ReducedModel
    H : int
        Number of harmonics.
    basis : {"full", "cos"}
        ``"cos"`` keeps the constant and cosine terms only.
    n_time : int, optional
        Time samples per period of the alternating scheme.
    """

    def __init__(self, rm, H=7, basis="full", n_time=None):
        self.rm = rm
        self.H = int(H)
        self.m = rm.m
        deg = max(rm.max_degree(), 1)
        nt = n_time or max(64, 2 * ((deg + 1) * self.H + 1))
        self.nt = nt
        tau = 2 * np.pi * np.arange(nt) / nt
        self.tau = tau
        cols = [np.ones(nt)]
        for k in range(1, self.H + 1):
            cols += [np.cos(k * tau), np.sin(k * tau)]
        E = np.column_stack(cols)
        nb = E.shape[1]
        D = np.zeros((nb, nb))
        for k in range(1, self.H + 1):
            c, s = 2 * k - 1, 2 * k
            D[s, c] = -k
            D[c, s] = k
        P = E.T * (2.0 / nt)
        P[0] /= 2.0
        if basis == "cos":
            idx = np.array([0] + [2 * k - 1 for k in range(1, self.H + 1)])
        elif basis == "full":
            idx = np.arange(nb)
        else:
            raise ValueError("basis must be 'full' or 'cos'")
        self.basis = basis
        self.idx = idx
        self.E_full, self.D_full, self.P_full = E, D, P
        self.nb = idx.size
        w = rm.omega
        self.w = w
        self.xi = np.zeros(self.m) if rm.damping_ratio is None else rm.damping_ratio
        self.F = np.zeros(self.m) if rm.forcing is None else rm.forcing
        self.n = self.m * self.nb

    def full(self, u):
        c = np.zeros((self.m, self.E_full.shape[1]))
        c[:, self.idx] = u.reshape(self.m, self.nb)
        return c

    def time_series(self, u, Omega):
        c = self.full(u)
        x = c @ self.E_full.T
        v = Omega * (c @ self.D_full.T @ self.E_full.T)
        return x, v

    def amplitude(self, u, n_fine=256):
        c = self.full(u)
        tau = 2 * np.pi * np.arange(n_fine) / n_fine
        cols = [np.ones(n_fine)]
        for k in range(1, self.H + 1):
            cols += [np.cos(k * tau), np.sin(k * tau)]
        x = c @ np.column_stack(cols).T
        return np.max(np.abs(x), axis=1)

    def residual(self, u, Omega):
        c = self.full(u)
        x, v = self.time_series(u, Omega)
        nl = self.rm.nonlinear(x, v)
        D = self.D_full
        lin = (Omega ** 2 * c @ (D @ D).T + (2 * self.xi * self.w)[:, None] * Omega * c @ D.T
               + (self.w ** 2)[:, None] * c)
        R = lin + nl @ self.P_full.T
        R[:, 1] -= self.F
        return R[:, self.idx].ravel()

    def jacobian(self, u, Omega):
        """Derivatives with respect to the coefficients and to Omega."""
        c = self.full(u)
        x, v = self.time_series(u, Omega)
        Jx, Jv = self.rm.nonlinear_jacobian(x, v)
        E, D, P = self.E_full, self.D_full, self.P_full
        idx = self.idx
        ED = E @ D
        Er, EDr, Pr = E[:, idx], ED[:, idx], P[idx]
        Dr = D[np.ix_(idx, idx)]
        J = np.zeros((self.n, self.n))
        dO = np.zeros((self.m, self.nb))
        nb = self.nb
        for r in range(self.m):
            for k in range(self.m):
                blk = Pr @ (Jx[r, k][:, None] * Er) + Omega * (Pr @ (Jv[r, k][:, None] * EDr))
                if r == k:
                    blk = blk + (Omega ** 2 * (D @ D)[np.ix_(idx, idx)]
                                 + 2 * self.xi[r] * self.w[r] * Omega * Dr
                                 + self.w[r] ** 2 * np.eye(nb))
                J[r * nb:(r + 1) * nb, k * nb:(k + 1) * nb] = blk
            dv = sum(Jv[r, k] * (c[k] @ ED.T) for k in range(self.m))
            dO[r] = (2 * Omega * (c[r] @ (D @ D).T) + 2 * self.xi[r] * self.w[r] * (c[r] @ D.T)
                     + P @ dv)[idx]
        return J, dO.ravel()

    def hill_exponents(self, u, Omega):
        """Floquet exponents from the Hill quadratic eigenproblem (full basis)."""
        if self.basis != "full":
            raise ValueError("stability needs the full basis")
        x, v = self.time_series(u, Omega)
        _, Jv = self.rm.nonlinear_jacobian(x, v)
        J0, _ = self.jacobian(u, Omega)
        E, D, P = self.E_full, self.D_full, self.P_full
        nb = self.nb
        L1 = np.zeros((self.n, self.n))
        for r in range(self.m):
            for k in range(self.m):
                blk = P @ (Jv[r, k][:, None] * E)
                if r == k:
                    blk = blk + 2 * Omega * D + 2 * self.xi[r] * self.w[r] * np.eye(nb)
                L1[r * nb:(r + 1) * nb, k * nb:(k + 1) * nb] = blk
        n = self.n
        A = np.zeros((2 * n, 2 * n))
        A[:n, n:] = np.eye(n)
        A[n:, :n] = -J0
        A[n:, n:] = -L1
        s = np.linalg.eigvals(A)
        order = np.argsort(np.abs(s.imag))
        return s[order[:2 * self.m]]


def _newton(fun, y, tol=1e-10, max_iter=20):
    """Newton iterations on a square system ``fun(y) -> (R, J)``."""
    for it in range(1, max_iter + 1):
        R, J = fun(y)
        try:
            dy = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError:
            return y, it, False
        y = y + dy
        if not np.all(np.isfinite(y)):
            return y, it, False
        if np.linalg.norm(dy) <= tol * max(1.0, np.linalg.norm(y)):
            R, _ = fun(y)
            return y, it, np.linalg.norm(R) <= 1e-8 * max(1.0, np.linalg.norm(y))
    return y, max_iter, False


def _tangent(J, dO, t_prev):
    Ja = np.hstack([J, dO[:, None]])
    A = np.vstack([Ja, t_prev[None, :]])
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    t = np.linalg.solve(A, b)
    t /= np.linalg.norm(t)
    if t @ t_prev < 0:
        t = -t
    return t


def _continue(hb, y0, t0, stop, ds=0.01, ds_min=1e-7, ds_max=0.1, max_steps=2000,
              stability=False, target_iter=3):
    """Pseudo-arclength continuation from a converged point ``y0 = (u, Omega)``."""
    n = hb.n

    def aug(y, t, y_pred):
        u, Om = y[:n], y[n]
        R = hb.residual(u, Om)
        J, dO = hb.jacobian(u, Om)
        return (np.concatenate([R, [t @ (y - y_pred)]]),
                np.vstack([np.hstack([J, dO[:, None]]), t[None, :]]))

    J, dO = hb.jacobian(y0[:n], y0[n])
    t = _tangent(J, dO, t0)
    ys, ts, dets = [y0], [t], []
    sign, _ = np.linalg.slogdet(np.vstack([np.hstack([J, dO[:, None]]), t[None, :]]))
    dets.append(sign)
    y = y0
    for _ in range(max_steps):
        if stop(y):
            break
        while True:
            y_pred = y + ds * t
            y_new, iters, ok = _newton(lambda z: aug(z, t, y_pred), y_pred)
            if ok:
                break
            ds *= 0.5
            if ds < ds_min:
                raise ConvergenceError(
                    f"continuation stalled at Omega={y[n]:.6g} (step below {ds_min:g})")
        J, dO = hb.jacobian(y_new[:n], y_new[n])
        t_new = _tangent(J, dO, t)
        sign, _ = np.linalg.slogdet(np.vstack([np.hstack([J, dO[:, None]]), t_new[None, :]]))
        ys.append(y_new)
        ts.append(t_new)
        dets.append(sign)
        y, t = y_new, t_new
        ds = float(np.clip(ds * target_iter / max(iters, 1), 0.5 * ds, 2 * ds))
        ds = min(max(ds, ds_min), ds_max)
    return ys, ts, dets


def _build_curve(hb, ys, ts, dets, method, stability):
    n = hb.n
    omega = np.array([y[n] for y in ys])
    amp = np.array([hb.amplitude(y[:n]) for y in ys])
    res = np.array([np.linalg.norm(hb.residual(y[:n], y[n])) for y in ys])
    tags = ["none"] * len(ys)
    stable = np.ones(len(ys), dtype=bool)
    n_unstable = np.zeros(len(ys), dtype=int)
    cplx = np.zeros(len(ys), dtype=bool)
    if stability:
        for i, y in enumerate(ys):
            s = hb.hill_exponents(y[:n], y[n])
            tol = 1e-8 * max(1.0, abs(y[n]))
            bad = s.real > tol
            n_unstable[i] = int(np.sum(bad))
            cplx[i] = bool(np.any(np.abs(s[bad].imag) > 1e-6 * max(1.0, abs(y[n]))))
            stable[i] = n_unstable[i] == 0
    for i in range(1, len(ys)):
        if np.sign(ts[i][n]) != np.sign(ts[i - 1][n]) and ts[i - 1][n] != 0:
            k = i if abs(ts[i][n]) < abs(ts[i - 1][n]) else i - 1
            tags[k] = "SN"
        elif dets[i] != dets[i - 1]:
            tags[i] = "PF"
        elif stability and n_unstable[i] != n_unstable[i - 1] and (cplx[i] or cplx[i - 1]):
            tags[i] = "NS-candidate"
    coeffs = [hb.full(y[:n]) for y in ys]
    return Curve(omega, amp, stable, tags, method, res, coeffs)


def backbone(rm, a_max, master=0, H=7, a_start=None, ds=None, max_steps=4000):
    """Backbone of a conservative reduced model.

    Parameters
    ----------
    rm : ReducedModel
        Must be conservative (no damping, even velocity powers).
    a_max : float
        Stop when the first harmonic of ``master`` exceeds this amplitude.
    master : int
        Oscillator whose linear mode is followed.
    H : int
        Number of harmonics.

    Returns
    -------
    Curve
        Points ordered from small to large amplitude; stability is not
        assessed for conservative branches and reported as True.
    """
    if not rm.is_conservative():
        raise ValueError("backbone requires a conservative reduced model")
    from .reduced import ReducedModel

    rm = ReducedModel(rm.omega, rm.terms, rm.masters, None, None, rm.method)
    hb = HarmonicBalance(rm, H, "cos")
    n = hb.n
    nb = hb.nb
    a0 = a_start if a_start is not None else min(1e-3, 0.01 * a_max)
    col = master * nb + 1
    u = np.zeros(n)
    u[col] = a0
    y = np.concatenate([u, [rm.omega[master]]])

    def fixed(z):
        R = hb.residual(z[:n], z[n])
        J, dO = hb.jacobian(z[:n], z[n])
        Ja = np.hstack([J, dO[:, None]])
        row = np.zeros(n + 1)
        row[col] = 1.0
        return np.concatenate([R, [z[col] - a0]]), np.vstack([Ja, row])

    y, _, ok = _newton(fixed, y)
    if not ok:
        raise ConvergenceError("could not converge the starting backbone point")
    t0 = np.zeros(n + 1)
    t0[col] = 1.0
    ds = ds if ds is not None else a_max / 50.0

    def stop(z):
        return hb.amplitude(z[:n])[master] >= a_max or z[n] <= 0

    ys, ts, dets = _continue(hb, y, t0, stop, ds=ds, ds_min=1e-9 * max(a_max, 1e-3),
                             ds_max=a_max / 10.0, max_steps=max_steps)
    curve = _build_curve(hb, ys, ts, dets, rm.method, stability=False)
    curve.method = rm.method
    return curve


def frf(rm, omega_range, H=7, ds=0.01, ds_max=0.05, max_steps=5000):
    """Forced response curve swept over the forcing frequency.

    Parameters
    ----------
    rm : ReducedModel
        Must carry damping (``damping_ratio > 0``) and ``forcing``.
    omega_range : (float, float)
        Start and end forcing frequency. A decreasing pair sweeps downwards.
    H : int

    Returns
    -------
    Curve
        Hill stability flags and SN/PF/NS-candidate tags.
    """
    if rm.damping_ratio is None or np.any(rm.damping_ratio <= 0):
        raise ValueError("frf requires positive damping")
    hb = HarmonicBalance(rm, H, "full")
    n = hb.n
    O0, O1 = float(omega_range[0]), float(omega_range[1])
    direction = 1.0 if O1 > O0 else -1.0
    u = np.zeros(n)
    for r in range(rm.m):
        z = hb.F[r] / (hb.w[r] ** 2 - O0 ** 2 + 2j * hb.xi[r] * hb.w[r] * O0)
        u[r * hb.nb + 1] = z.real
        u[r * hb.nb + 2] = -z.imag
    u, _, ok = _newton(lambda v: (hb.residual(v, O0), hb.jacobian(v, O0)[0]), u)
    if not ok:
        raise ConvergenceError(f"could not converge the forced response at Omega={O0:g}")
    y = np.concatenate([u, [O0]])
    t0 = np.zeros(n + 1)
    t0[n] = direction
    lo, hi = min(O0, O1), max(O0, O1)

    def stop(z):
        return z[n] > hi or z[n] < lo

    ys, ts, dets = _continue(hb, y, t0, stop, ds=ds, ds_max=ds_max, max_steps=max_steps)
    return _build_curve(hb, ys, ts, dets, rm.method, stability=True)


def gamma_from_backbone(curve, a_fit=None, omega0=None, master=0):
    """Backbone curvature from a least-squares fit of ``w(a)``.

    The fit is ``w(a) = w0 (1 + G a^2 + c3 a^3 + c4 a^4)``; the cubic and
    quartic terms absorb higher-order bending so that ``G`` is the small
    amplitude curvature.

    Parameters
    ----------
    curve : Curve
    a_fit : float, optional
        Fit window ``a <= a_fit``. Defaults to the whole curve.
    omega0 : float, optional
        Linear frequency; fitted when None.

    Raises
    ------
    ValueError
        Fewer than six points in the window.
    """
    a = curve.amp[:, master]
    w = curve.omega
    sel = a > 0 if a_fit is None else (a > 0) & (a <= a_fit)
    if np.sum(sel) < 6:
        raise ValueError("insufficient backbone points in the fit window")
    a, w = a[sel], w[sel]
    if omega0 is None:
        A = np.column_stack([np.ones_like(a), a ** 2, a ** 3, a ** 4])
        c, *_ = np.linalg.lstsq(A, w, rcond=None)
        return float(c[1] / c[0])
    A = np.column_stack([a ** 2, a ** 3, a ** 4])
    c, *_ = np.linalg.lstsq(A, w / omega0 - 1.0, rcond=None)
    return float(c[0])
