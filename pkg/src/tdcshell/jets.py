"""Truncated bivariate Taylor arithmetic in the parametric coordinates (r, s).

A :class:`Jet` stores, for every entry of an array-valued field, the Taylor
coefficients ``c[a, b] = (1 / a! b!) d^(a+b) f / dr^a ds^b`` with ``a + b <= K``.
Products, quotients, square roots and trigonometric functions of jets carry
all parametric derivatives through order ``K`` exactly, which is how the
package obtains up to fourth-order surface derivatives of shape functions,
normals and Weingarten maps without symbolic differentiation.

The last two axes of ``Jet.c`` are the Taylor axes; all leading axes are
ordinary array axes (points, components, ...).
"""
from __future__ import annotations

from functools import cache
from math import factorial

import numpy as np


@cache
def _mask(order):
    a = np.arange(order + 1)
    return (a[:, None] + a[None, :] <= order).astype(float)


@cache
def _inv_factorials(order):
    f = np.array([1.0 / factorial(k) for k in range(order + 1)])
    return f[:, None] * f[None, :]


def _jet_index(idx):
    if not isinstance(idx, tuple):
        idx = (idx,)
    if any(i is Ellipsis for i in idx):
        idx = idx + (slice(None), slice(None))
    return idx


class Jet:
    """Array-valued field together with its parametric Taylor coefficients."""

    __array_ufunc__ = None

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)
        if self.c.ndim < 2 or self.c.shape[-1] != self.c.shape[-2]:
            raise ValueError("jet coefficients need two trailing square axes")

    # -- construction -------------------------------------------------------
    @classmethod
    def from_derivatives(cls, ders):
        """Build from raw partial derivatives ``ders[..., a, b]``."""
        ders = np.asarray(ders, dtype=float)
        k = ders.shape[-1] - 1
        return cls(ders * _inv_factorials(k) * _mask(k))

    @classmethod
    def constant(cls, value, order):
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (order + 1, order + 1))
        c[..., 0, 0] = value
        return cls(c)

    @classmethod
    def variable(cls, value, order, which):
        """The coordinate jet ``r`` (which=0) or ``s`` (which=1) at ``value``."""
        out = cls.constant(value, order)
        if order >= 1:
            if which == 0:
                out.c[..., 1, 0] = 1.0
            else:
                out.c[..., 0, 1] = 1.0
        return out

    # -- basic properties ---------------------------------------------------
    @property
    def order(self):
        return self.c.shape[-1] - 1

    @property
    def shape(self):
        return self.c.shape[:-2]

    @property
    def ndim(self):
        return self.c.ndim - 2

    @property
    def value(self):
        return self.c[..., 0, 0]

    def derivatives(self):
        """Raw partial derivatives ``d^(a+b) f / dr^a ds^b`` as ``[..., a, b]``."""
        k = self.order
        return self.c / _inv_factorials(k)

    def derivative(self, a, b):
        return self.c[..., a, b] * (factorial(a) * factorial(b))

    def truncate(self, order):
        if order >= self.order:
            return self
        return Jet(self.c[..., : order + 1, : order + 1] * _mask(order))

    def __getitem__(self, idx):
        return Jet(self.c[_jet_index(idx)])

    def __setitem__(self, idx, other):
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            self.c[_jet_index(idx)][..., : k + 1, : k + 1] = other.truncate(k).c
        else:
            self.c[_jet_index(idx)] = 0.0
            self.c[_jet_index(idx)][..., 0, 0] = other

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.order})"

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        k = min(self.order, other.order)
        return Jet(self.truncate(k).c + other.truncate(k).c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.c * other[..., None, None])
        k = min(self.order, other.order)
        x = self.truncate(k).c
        y = other.truncate(k).c
        out = np.zeros(np.broadcast_shapes(x.shape[:-2], y.shape[:-2]) + (k + 1, k + 1))
        for a in range(k + 1):
            for b in range(k + 1 - a):
                out[..., a:, b:] += x[..., a, b, None, None] * y[..., : k + 1 - a, : k + 1 - b]
        return Jet(out * _mask(k))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, int) and n >= 0:
            out = Jet.constant(np.ones(self.shape), self.order)
            for _ in range(n):
                out = out * self
            return out
        return self.power(float(n))

    # -- calculus -----------------------------------------------------------
    def dr(self):
        k = self.order
        if k == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        c = self.c[..., 1:, :k] * np.arange(1, k + 1)[:, None]
        return Jet(c * _mask(k - 1))

    def ds(self):
        k = self.order
        if k == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        c = self.c[..., :k, 1:] * np.arange(1, k + 1)[None, :]
        return Jet(c * _mask(k - 1))

    def compose(self, taylor):
        """Evaluate ``f(self)`` given ``taylor[k] = f^(k)(value) / k!``."""
        k = self.order
        delta = Jet(self.c.copy())
        delta.c[..., 0, 0] = 0.0
        out = Jet.constant(taylor[k], k)
        for j in range(k - 1, -1, -1):
            out = out * delta + taylor[j]
        return out

    def reciprocal(self):
        x0 = self.value
        if np.any(x0 == 0.0):
            raise ZeroDivisionError("jet reciprocal of a vanishing value")
        return self.compose([(-1.0) ** j / x0 ** (j + 1) for j in range(self.order + 1)])

    def power(self, alpha):
        x0 = self.value
        coeffs = []
        binom = 1.0
        for j in range(self.order + 1):
            coeffs.append(binom * x0 ** (alpha - j))
            binom *= (alpha - j) / (j + 1)
        return self.compose(coeffs)

    def sqrt(self):
        return self.power(0.5)

    def sin(self):
        x0 = self.value
        cyc = [np.sin(x0), np.cos(x0), -np.sin(x0), -np.cos(x0)]
        return self.compose([cyc[j % 4] / factorial(j) for j in range(self.order + 1)])

    def cos(self):
        x0 = self.value
        cyc = [np.cos(x0), -np.sin(x0), -np.cos(x0), np.sin(x0)]
        return self.compose([cyc[j % 4] / factorial(j) for j in range(self.order + 1)])

    # -- array manipulation -------------------------------------------------
    def sum(self, axis):
        axis = axis if axis >= 0 else axis - 2
        return Jet(self.c.sum(axis=axis))

    def expand(self, axis):
        axis = axis if axis >= 0 else axis - 2
        return Jet(np.expand_dims(self.c, axis))

    def swapaxes(self, a, b):
        a = a if a >= 0 else a - 2
        b = b if b >= 0 else b - 2
        return Jet(np.swapaxes(self.c, a, b))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.c.reshape(tuple(shape) + self.c.shape[-2:]))


def stack(jets, axis=-1):
    """Stack jets along a new ordinary axis."""
    k = min(j.order for j in jets)
    axis = axis if axis >= 0 else axis - 2
    return Jet(np.stack([j.truncate(k).c for j in jets], axis=axis))


def linear_combination(basis, coeffs):
    """``sum_f basis[p, f] * coeffs[p, f, ...]`` for jets ``basis`` of shape (P, F)."""
    coeffs = np.asarray(coeffs, dtype=float)
    extra = "".join("ijkl"[: coeffs.ndim - 2])
    return Jet(np.einsum(f"pfab,pf{extra}->p{extra}ab", basis.c, coeffs))


# -- small vector / tensor helpers on the trailing ordinary axes -------------

def dot(a, b):
    return (a * b).sum(-1)


def cross(a, b):
    return stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def matmul(a, b):
    """Matrix product over the last two ordinary axes (jets or arrays)."""
    if not isinstance(a, Jet):
        a = Jet.constant(a, b.order)
    if not isinstance(b, Jet):
        b = Jet.constant(b, a.order)
    return (a.expand(-1) * b.expand(-3)).sum(-2)


def matvec(a, v):
    if not isinstance(v, Jet):
        v = Jet.constant(v, a.order)
    return (a * v.expand(-2)).sum(-1)


def transpose(a):
    return a.swapaxes(-1, -2)


def trace(a):
    return Jet(np.trace(a.c, axis1=a.c.ndim - 4, axis2=a.c.ndim - 3))


def sym(a):
    return (a + transpose(a)) * 0.5


def outer(a, b):
    return a.expand(-1) * b.expand(-2)
