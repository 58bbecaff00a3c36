"""Reduced-order model containers: the reduced oscillators and the manifold map."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .poly import Poly


def _mono_key(term):
    coeff, d, v = term
    return (sum(d) + sum(v), tuple(-x for x in d), tuple(-x for x in v))


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Second-order polynomial oscillators in master coordinates.

    Equation ``r`` reads

        x_r'' + 2 xi_r w_r x_r' + w_r^2 x_r + sum_terms c x^d v^e = F_r cos(W t)

    where each term is ``(c, d, e)`` with exponent tuples ``d`` (displacements)
    and ``e`` (velocities) over the ``m`` masters.

    Attributes
    ----------
    omega : (m,) ndarray
    terms : tuple of tuples
        ``terms[r]`` lists the monomials of equation ``r``.
    masters : tuple of int
        Indices of the master modes in the parent model.
    damping_ratio : (m,) ndarray or None
    forcing : (m,) ndarray or None
        Modal forcing amplitudes ``F_r``.
    method : str
        Label of the building method.
    """

    omega: np.ndarray
    terms: tuple
    masters: tuple = ()
    damping_ratio: np.ndarray | None = None
    forcing: np.ndarray | None = None
    method: str = ""

    def __post_init__(self):
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        m = omega.size
        if len(self.terms) != m:
            raise ValueError("one monomial list per master is required")
        terms = []
        for eq in self.terms:
            merged = {}
            for c, d, v in eq:
                d = tuple(int(x) for x in d)
                v = tuple(int(x) for x in v)
                if len(d) != m or len(v) != m:
                    raise ValueError("exponent tuples must have one entry per master")
                merged[(d, v)] = merged.get((d, v), 0.0) + float(c)
            eq_terms = [(c, d, v) for (d, v), c in merged.items() if c != 0.0]
            terms.append(tuple(sorted(eq_terms, key=_mono_key)))
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "terms", tuple(terms))
        masters = tuple(int(x) for x in self.masters) if self.masters else tuple(range(m))
        object.__setattr__(self, "masters", masters)
        for name in ("damping_ratio", "forcing"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.broadcast_to(
                    np.asarray(val, dtype=float), (m,)).copy())

    @property
    def m(self):
        return self.omega.size

    def with_damping(self, damping_ratio):
        return ReducedModel(self.omega, self.terms, self.masters, damping_ratio,
                            self.forcing, self.method)

    def with_forcing(self, forcing):
        return ReducedModel(self.omega, self.terms, self.masters, self.damping_ratio,
                            forcing, self.method)

    def is_conservative(self):
        if self.damping_ratio is not None and np.any(self.damping_ratio != 0):
            return False
        return all(sum(v) % 2 == 0 for eq in self.terms for _, _, v in eq)

    def max_degree(self):
        return max((sum(d) + sum(v) for eq in self.terms for _, d, v in eq), default=1)

    def polys(self):
        """Nonlinear terms as scalar :class:`Poly` in (x_1..x_m, v_1..v_m)."""
        m = self.m
        return [Poly(2 * m, (), {d + v: c for c, d, v in eq}) for eq in self.terms]

    @classmethod
    def from_polys(cls, omega, polys, masters=(), method="", tol=0.0, **kw):
        """Build from nonlinear-term polynomials in (x, v)."""
        m = len(omega)
        terms = []
        for p in polys:
            eq = []
            for e, c in p.terms.items():
                c = float(np.real(c))
                if abs(c) > tol and sum(e) >= 2:
                    eq.append((c, e[:m], e[m:]))
            terms.append(eq)
        return cls(np.asarray(omega, dtype=float), tuple(terms), masters, method=method, **kw)

    def coefficient(self, r, disp, vel=None):
        """Coefficient of ``x^disp v^vel`` in equation ``r`` (0 if absent)."""
        vel = tuple(vel) if vel is not None else (0,) * self.m
        for c, d, v in self.terms[r]:
            if d == tuple(disp) and v == vel:
                return c
        return 0.0

    def nonlinear(self, x, v):
        """Evaluate the nonlinear terms for states of shape ``(m, ...)``."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(x)
        for r, eq in enumerate(self.terms):
            for c, d, e in eq:
                term = c
                for k in range(self.m):
                    if d[k]:
                        term = term * x[k] ** d[k]
                    if e[k]:
                        term = term * v[k] ** e[k]
                out[r] = out[r] + term
        return out

    def nonlinear_jacobian(self, x, v):
        """Derivatives of the nonlinear terms, shapes ``(m, m, ...)``."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        m = self.m
        Jx = np.zeros((m, m) + x.shape[1:])
        Jv = np.zeros((m, m) + x.shape[1:])

        def mono(d, e):
            term = 1.0
            for q in range(m):
                if d[q]:
                    term = term * x[q] ** d[q]
                if e[q]:
                    term = term * v[q] ** e[q]
            return term

        for r, eq in enumerate(self.terms):
            for c, d, e in eq:
                for k in range(m):
                    if d[k]:
                        dd = list(d)
                        dd[k] -= 1
                        Jx[r, k] = Jx[r, k] + c * d[k] * mono(dd, e)
                    if e[k]:
                        ee = list(e)
                        ee[k] -= 1
                        Jv[r, k] = Jv[r, k] + c * e[k] * mono(d, ee)
        return Jx, Jv

    def accel(self, x, v, t=0.0, Omega=None):
        """Accelerations of the reduced oscillators."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        w = self.omega.reshape((-1,) + (1,) * (x.ndim - 1))
        a = -(w ** 2) * x - self.nonlinear(x, v)
        if self.damping_ratio is not None:
            a = a - 2 * (self.damping_ratio.reshape(w.shape)) * w * v
        if self.forcing is not None and Omega is not None:
            a = a + self.forcing.reshape(w.shape) * np.cos(Omega * t)
        return a

    def to_dict(self):
        out = {
            "method": self.method,
            "masters": list(self.masters),
            "omega": [float(w) for w in self.omega],
            "monomials": [[[float(c), list(d), list(v)] for c, d, v in eq]
                          for eq in self.terms],
        }
        if self.damping_ratio is not None:
            out["damping_ratio"] = [float(x) for x in self.damping_ratio]
        if self.forcing is not None:
            out["forcing"] = [float(x) for x in self.forcing]
        return out

    @classmethod
    def from_dict(cls, data):
        from .errors import SchemaError

        for key in ("omega", "monomials"):
            if key not in data:
                raise SchemaError(f"ROM file is missing field '{key}'")
        try:
            terms = tuple(tuple((float(c), tuple(d), tuple(v)) for c, d, v in eq)
                          for eq in data["monomials"])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"field 'monomials' is malformed: {exc}") from exc
        return cls(np.asarray(data["omega"], dtype=float), terms,
                   tuple(data.get("masters", ())), data.get("damping_ratio"),
                   data.get("forcing"), data.get("method", ""))


@dataclass(frozen=True, eq=False)
class ManifoldMap:
    """Polynomial map from master states to full-space displacement and velocity.

    Attributes
    ----------
    style : str
        ``"graph"`` when the parameters are the master modal displacements
        and velocities, ``"normal-form"`` when they are normal coordinates.
    order : int
    masters : tuple of int
    disp, vel : Poly
        Polynomials in ``2m`` variables ``(u_1..u_m, v_1..v_m)`` returning
        full-space vectors.
    space : str
        ``"modal"`` or ``"physical"``.
    coefficients : dict
        Named coefficient arrays (for example ``a``, ``b``, ``alpha``).
    """

    style: str
    order: int
    masters: tuple
    disp: Poly
    vel: Poly
    space: str = "modal"
    coefficients: dict = field(default_factory=dict)

    @property
    def m(self):
        return len(self.masters)

    @property
    def n_out(self):
        return self.disp.shape[0]

    def evaluate(self, states):
        """Full displacement and velocity at master states ``(npts, 2m)``."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        X = np.real(self.disp(states))
        Y = np.real(self.vel(states))
        return X, Y

    def velocity_free(self):
        """True when the displacement map does not depend on master velocities."""
        m = self.m
        return all(not any(e[m:]) or np.all(c == 0) for e, c in self.disp.terms.items())

    def to_dict(self):
        def dump(p):
            return [[list(e), [float(x) for x in np.real(c)]] for e, c in sorted(p.terms.items())]

        coeffs = {}
        for k, v in self.coefficients.items():
            arr = np.asarray(v, dtype=float)
            coeffs[k] = {"shape": list(arr.shape), "data": [float(x) for x in arr.ravel()]}
        return {"style": self.style, "order": int(self.order), "masters": list(self.masters),
                "space": self.space, "disp": dump(self.disp), "vel": dump(self.vel),
                "coefficients": coeffs}

    @classmethod
    def from_dict(cls, data):
        from .errors import SchemaError

        for key in ("style", "masters", "disp", "vel"):
            if key not in data:
                raise SchemaError(f"map is missing field '{key}'")
        m = len(data["masters"])

        def load(rows):
            n = len(rows[0][1]) if rows else 0
            return Poly(2 * m, (n,), {tuple(e): np.asarray(c, dtype=float) for e, c in rows})

        coeffs = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"])
                  for k, v in data.get("coefficients", {}).items()}
        return cls(data["style"], int(data.get("order", 0)), tuple(data["masters"]),
                   load(data["disp"]), load(data["vel"]), data.get("space", "modal"), coeffs)
