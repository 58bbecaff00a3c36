"""Sparse multivariate polynomials with array-valued coefficients.

A :class:`Poly` maps exponent tuples to coefficient arrays of a common shape.
It is the small algebra used to compose maps, differentiate along vector
fields and read off monomial coefficients of reduced models.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def monomials(nvar, order):
    """Exponent tuples of total degree ``order`` in ``nvar`` variables.

    The list is in reverse lexicographic order, so for two variables and
    order 2 it reads ``(2, 0), (1, 1), (0, 2)``.
    """
    out = []
    for combo in itertools.combinations_with_replacement(range(nvar), order):
        e = [0] * nvar
        for c in combo:
            e[c] += 1
        out.append(tuple(e))
    return tuple(out)


class Poly:
    """Polynomial in ``nvar`` variables with coefficients of shape ``shape``.

    Parameters
    ----------
    nvar : int
        Number of variables.
    shape : tuple
        Shape of every coefficient array (``()`` for scalar polynomials).
    terms : dict, optional
        Mapping from exponent tuples to coefficients.
    """

    __slots__ = ("nvar", "shape", "terms")

    def __init__(self, nvar, shape=(), terms=None):
        self.nvar = int(nvar)
        self.shape = tuple(shape)
        self.terms = {}
        for e, c in (terms or {}).items():
            e = tuple(int(v) for v in e)
            if len(e) != self.nvar:
                raise ValueError("exponent length does not match nvar")
            c = np.asarray(c)
            c = np.broadcast_to(c, self.shape).copy() if c.shape != self.shape else c.copy()
            if e in self.terms:
                self.terms[e] = self.terms[e] + c
            else:
                self.terms[e] = c

    @classmethod
    def variable(cls, nvar, k, shape=(), coef=1.0):
        e = [0] * nvar
        e[k] = 1
        return cls(nvar, shape, {tuple(e): np.broadcast_to(coef, shape)})

    @classmethod
    def constant(cls, nvar, value):
        value = np.asarray(value)
        return cls(nvar, value.shape, {(0,) * nvar: value})

    @classmethod
    def stack(cls, polys):
        """Vector polynomial whose components are the given scalar polynomials."""
        nvar = polys[0].nvar
        keys = sorted(set().union(*(p.terms for p in polys)))
        dtype = np.result_type(*[c.dtype for p in polys for c in p.terms.values()] or [float])
        terms = {}
        for e in keys:
            terms[e] = np.array([p.terms.get(e, 0.0) for p in polys], dtype=dtype)
        return cls(nvar, (len(polys),), terms)

    def copy(self):
        return Poly(self.nvar, self.shape, self.terms)

    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def __getitem__(self, idx):
        """Component (or slice) of the coefficient arrays."""
        sample = np.zeros(self.shape)[idx]
        return Poly(self.nvar, sample.shape, {e: c[idx] for e, c in self.terms.items()})

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(self.nvar, np.broadcast_to(other, self.shape))
        out = self.copy()
        for e, c in other.terms.items():
            out.terms[e] = out.terms[e] + c if e in out.terms else np.array(c)
        out.shape = np.broadcast_shapes(self.shape, other.shape)
        return out

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvar, self.shape, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def mul(self, other, max_order=None):
        """Coefficient-wise (broadcast) product, truncated above ``max_order``."""
        if not isinstance(other, Poly):
            other = np.asarray(other)
            return Poly(self.nvar, np.broadcast_shapes(self.shape, other.shape),
                        {e: c * other for e, c in self.terms.items()})
        terms = {}
        for e1, c1 in self.terms.items():
            d1 = sum(e1)
            for e2, c2 in other.terms.items():
                if max_order is not None and d1 + sum(e2) > max_order:
                    continue
                e = tuple(a + b for a, b in zip(e1, e2))
                v = c1 * c2
                terms[e] = terms[e] + v if e in terms else v
        shape = np.broadcast_shapes(self.shape, other.shape)
        return Poly(self.nvar, shape, terms)

    def __mul__(self, other):
        return self.mul(other)

    __rmul__ = __mul__

    def matmul(self, A):
        """Apply a matrix to every coefficient vector: ``A @ c``."""
        A = np.asarray(A)
        return Poly(self.nvar, (A.shape[0],), {e: A @ c for e, c in self.terms.items()})

    def dot(self, other, max_order=None):
        """Scalar polynomial ``sum_k self[k] * other[k]``."""
        prod = self.mul(other, max_order)
        return Poly(self.nvar, (), {e: np.sum(c) for e, c in prod.terms.items()})

    def truncate(self, max_order, min_order=0):
        return Poly(self.nvar, self.shape,
                    {e: c for e, c in self.terms.items() if min_order <= sum(e) <= max_order})

    def homogeneous(self, order):
        return self.truncate(order, order)

    def deriv(self, k):
        """Partial derivative with respect to variable ``k``."""
        terms = {}
        for e, c in self.terms.items():
            if e[k] == 0:
                continue
            e2 = list(e)
            e2[k] -= 1
            terms[tuple(e2)] = c * e[k]
        return Poly(self.nvar, self.shape, terms)

    def lie(self, field, max_order=None):
        """Derivative along a vector field given as a list of scalar polynomials."""
        out = Poly(self.nvar, self.shape)
        for k, fk in enumerate(field):
            out = out + self.deriv(k).mul(fk, max_order)
        return out

    def compose(self, subs, max_order=None):
        """Substitute variable ``k`` by the scalar polynomial ``subs[k]``.

        Powers are cached; the result is truncated above ``max_order``.
        """
        nvar = subs[0].nvar
        cache = {}

        def power(k, p):
            if (k, p) not in cache:
                if p == 0:
                    cache[(k, p)] = Poly.constant(nvar, 1.0)
                else:
                    cache[(k, p)] = power(k, p - 1).mul(subs[k], max_order)
            return cache[(k, p)]

        out = Poly(nvar, self.shape)
        for e, c in self.terms.items():
            term = Poly.constant(nvar, 1.0)
            for k, p in enumerate(e):
                if p:
                    term = term.mul(power(k, p), max_order)
            out = out + term.mul(c)
        return out

    def __call__(self, points):
        """Evaluate at ``points`` of shape ``(npts, nvar)`` or ``(nvar,)``."""
        pts = np.asarray(points)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        dtype = np.result_type(pts.dtype, *[c.dtype for c in self.terms.values()] or [float])
        out = np.zeros((pts.shape[0],) + self.shape, dtype=dtype)
        for e, c in self.terms.items():
            mono = np.prod(pts ** np.array(e), axis=1)
            out += mono.reshape((-1,) + (1,) * len(self.shape)) * c
        return out[0] if single else out

    def coefficient(self, exps):
        return self.terms.get(tuple(exps), np.zeros(self.shape))

    def real(self):
        return Poly(self.nvar, self.shape, {e: np.real(c) for e, c in self.terms.items()})

    def max_imag(self):
        return max((float(np.max(np.abs(np.imag(c)))) for c in self.terms.values()), default=0.0)

    def chop(self, tol=0.0):
        return Poly(self.nvar, self.shape,
                    {e: c for e, c in self.terms.items() if np.max(np.abs(c)) > tol})

    def __repr__(self):
        return f"Poly(nvar={self.nvar}, shape={self.shape}, nterms={len(self.terms)})"
