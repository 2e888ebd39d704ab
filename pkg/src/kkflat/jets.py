"""Truncated Taylor ("jet") arithmetic for tensor-valued functions.

A :class:`Jet` stores a tensor-valued quantity together with all of its
partial derivatives up to a fixed order with respect to ``nvars``
independent variables.  Part ``k`` has shape ``shape + (nvars,) * k`` and is
fully symmetric in its trailing ``k`` derivative axes.

Products follow the Leibniz rule exactly, so every derivative that comes out
is as accurate as the floating point arithmetic allows.  Differentiating a jet
(:meth:`Jet.derivative`) lowers its order by one and appends the derivative
index to the tensor shape, which is how Christoffel symbols, curvature and
their gradients are assembled from metric jets.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

MAX_ORDER = 3


class Jet:
    """Value and partial derivatives (up to order 3) of a tensor field."""

    __slots__ = ("parts",)

    def __init__(self, parts: Sequence[np.ndarray]):
        parts = tuple(np.asarray(p, dtype=float) for p in parts)
        if not 1 <= len(parts) <= MAX_ORDER + 1:
            raise ValueError(f"jet order must be between 0 and {MAX_ORDER}")
        self.parts = parts

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, nvars: int, order: int = MAX_ORDER) -> "Jet":
        value = np.asarray(value, dtype=float)
        parts = [value]
        for k in range(1, order + 1):
            parts.append(np.zeros(value.shape + (nvars,) * k))
        return cls(parts)

    @classmethod
    def variable(cls, value: float, index: int, nvars: int, order: int = MAX_ORDER) -> "Jet":
        jet = cls.constant(float(value), nvars, order)
        if order >= 1:
            jet.parts[1][index] = 1.0
        return jet

    @classmethod
    def stack(cls, jets: Sequence["Jet"], shape: tuple[int, ...] | None = None) -> "Jet":
        """Stack jets of equal shape and order into a jet with a new leading axis."""
        order = min(j.order for j in jets)
        parts = [np.stack([j.parts[k] for j in jets]) for k in range(order + 1)]
        out = cls(parts)
        if shape is not None:
            out = out.reshape(shape)
        return out

    # properties ---------------------------------------------------------
    @property
    def order(self) -> int:
        return len(self.parts) - 1

    @property
    def value(self) -> np.ndarray:
        return self.parts[0]

    @property
    def first(self) -> np.ndarray:
        return self.parts[1]

    @property
    def second(self) -> np.ndarray:
        return self.parts[2]

    @property
    def third(self) -> np.ndarray:
        return self.parts[3]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.parts[0].shape

    @property
    def nvars(self) -> int:
        if self.order == 0:
            raise ValueError("order-0 jet carries no derivative axes")
        return self.parts[1].shape[-1]

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, order={self.order})"

    # structural operations ---------------------------------------------
    def truncate(self, order: int) -> "Jet":
        return Jet(self.parts[: order + 1])

    def derivative(self) -> "Jet":
        """Jet of the gradient; the derivative index becomes the last tensor axis."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        return Jet(self.parts[1:])

    def _map(self, fn) -> "Jet":
        # fn acts on the tensor axes only; derivative axes ride along at the end
        nt = len(self.shape)
        out = []
        for k, p in enumerate(self.parts):
            moved = np.moveaxis(p, list(range(nt, nt + k)), list(range(k))) if k else p
            res = np.asarray(fn(moved, k))
            ntr = res.ndim - k
            out.append(np.moveaxis(res, list(range(k)), list(range(ntr, ntr + k))) if k else res)
        return Jet(out)

    def transpose(self, *axes: int) -> "Jet":
        perm = tuple(axes)
        return self._map(lambda p, k: np.transpose(p, tuple(range(k)) + tuple(k + a for a in perm)))

    def reshape(self, shape: tuple[int, ...]) -> "Jet":
        return self._map(lambda p, k: p.reshape(p.shape[:k] + tuple(shape)))

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return self._map(lambda p, k: p[(slice(None),) * k + idx])

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.nvars if self.order else 0, self.order)

    def __neg__(self) -> "Jet":
        return Jet([-p for p in self.parts])

    def __add__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return Jet((self.parts[0] + other,) + self.parts[1:])
        k = min(self.order, other.order)
        return Jet([a + b for a, b in zip(self.parts[: k + 1], other.parts[: k + 1])])

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return Jet([p * other for p in self.parts])
        return contract("...,...->...", self, other)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return Jet([p / other for p in self.parts])
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "Jet":
        return self.reciprocal() * other

    def apply(self, d0, d1, d2, d3) -> "Jet":
        """Compose an elementwise function with this jet.

        ``d0``..``d3`` are the function and its first three derivatives
        evaluated at ``self.value`` (arrays of the tensor shape).
        """
        d0, d1, d2, d3 = (np.asarray(d, dtype=float) for d in (d0, d1, d2, d3))
        u = self.parts
        ax = (np.newaxis,)
        out = [d0]
        if self.order >= 1:
            out.append(d1[(...,) + ax] * u[1])
        if self.order >= 2:
            out.append(
                d2[(...,) + ax * 2] * u[1][..., :, None] * u[1][..., None, :]
                + d1[(...,) + ax * 2] * u[2]
            )
        if self.order >= 3:
            u1, u2 = u[1], u[2]
            outer3 = u1[..., :, None, None] * u1[..., None, :, None] * u1[..., None, None, :]
            mixed = (
                u2[..., :, :, None] * u1[..., None, None, :]
                + u2[..., :, None, :] * u1[..., None, :, None]
                + u2[..., None, :, :] * u1[..., :, None, None]
            )
            out.append(
                d3[(...,) + ax * 3] * outer3
                + d2[(...,) + ax * 3] * mixed
                + d1[(...,) + ax * 3] * u[3]
            )
        return Jet(out)

    def reciprocal(self) -> "Jet":
        v = self.value
        if np.any(v == 0):
            raise ZeroDivisionError("reciprocal of a jet with zero value")
        return self.apply(1 / v, -1 / v**2, 2 / v**3, -6 / v**4)

    def power(self, p: float) -> "Jet":
        v = self.value
        c1 = p
        c2 = p * (p - 1)
        c3 = p * (p - 1) * (p - 2)

        def pw(e):
            if e == 0:
                return np.ones_like(v)
            return v**e

        return self.apply(pw(p), c1 * pw(p - 1) if c1 else 0 * v,
                          c2 * pw(p - 2) if c2 else 0 * v,
                          c3 * pw(p - 3) if c3 else 0 * v)

    def sqrt(self) -> "Jet":
        v = self.value
        s = np.sqrt(v)
        return self.apply(s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v))

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self.apply(e, e, e, e)

    def log(self) -> "Jet":
        v = self.value
        return self.apply(np.log(v), 1 / v, -1 / v**2, 2 / v**3)


def _leibniz_terms(order: int):
    """(derivative order on A, on B, list of (A letters, B letters)) per output order."""
    d = "pqr"
    table = {
        0: [("", "")],
        1: [("p", ""), ("", "p")],
        2: [("pq", ""), ("p", "q"), ("q", "p"), ("", "pq")],
        3: [
            ("pqr", ""),
            ("pq", "r"), ("pr", "q"), ("qr", "p"),
            ("p", "qr"), ("q", "pr"), ("r", "pq"),
            ("", "pqr"),
        ],
    }
    return d[:order], table[order]


def contract(spec: str, a: Jet, b: Jet) -> Jet:
    """Bilinear einsum of two jets with the product rule applied to derivatives.

    ``spec`` is an einsum string for the tensor axes only, e.g. ``"ij,jk->ik"``
    or ``"...,...->..."`` for elementwise products.  The derivative letters
    ``p, q, r`` are reserved.
    """
    lhs, out = spec.split("->")
    sa, sb = lhs.split(",")
    order = min(a.order, b.order)
    parts = []
    for k in range(order + 1):
        dletters, terms = _leibniz_terms(k)
        acc = None
        for da, db in terms:
            term = np.einsum(
                f"{sa}{da},{sb}{db}->{out}{dletters}", a.parts[len(da)], b.parts[len(db)]
            )
            acc = term if acc is None else acc + term
        parts.append(acc)
    return Jet(parts)


def linear(spec: str, const: np.ndarray, a: Jet) -> Jet:
    """Contract a constant array with a jet (no product rule needed)."""
    lhs, out = spec.split("->")
    sc, sa = lhs.split(",")
    parts = []
    for k, p in enumerate(a.parts):
        dl = "pqr"[:k]
        parts.append(np.einsum(f"{sc},{sa}{dl}->{out}{dl}", const, p))
    return Jet(parts)


def trace(spec: str, a: Jet) -> Jet:
    """Single-operand einsum on the tensor axes (traces, permutations)."""
    lhs, out = spec.split("->")
    parts = []
    for k, p in enumerate(a.parts):
        dl = "pqr"[:k]
        parts.append(np.einsum(f"{lhs}{dl}->{out}{dl}", p))
    return Jet(parts)


def inverse(a: Jet) -> Jet:
    """Jet of the matrix inverse of a square-matrix-valued jet."""
    g = np.linalg.inv(a.value)
    parts = [g]
    A = a.parts
    if a.order >= 1:
        g1 = -np.einsum("ab,bcp,cd->adp", g, A[1], g)
        parts.append(g1)
    if a.order >= 2:
        inner = (
            np.einsum("bcpq,cd->bdpq", A[2], g)
            + np.einsum("bcp,cdq->bdpq", A[1], g1)
            + np.einsum("bcq,cdp->bdpq", A[1], g1)
        )
        g2 = -np.einsum("ab,bdpq->adpq", g, inner)
        parts.append(g2)
    if a.order >= 3:
        inner = (
            np.einsum("bcpqr,cd->bdpqr", A[3], g)
            + np.einsum("bcpq,cdr->bdpqr", A[2], g1)
            + np.einsum("bcpr,cdq->bdpqr", A[2], g1)
            + np.einsum("bcqr,cdp->bdpqr", A[2], g1)
            + np.einsum("bcp,cdqr->bdpqr", A[1], g2)
            + np.einsum("bcq,cdpr->bdpqr", A[1], g2)
            + np.einsum("bcr,cdpq->bdpqr", A[1], g2)
        )
        parts.append(-np.einsum("ab,bdpqr->adpqr", g, inner))
    return Jet(parts)


def log_abs_det(a: Jet, inv: Jet | None = None) -> Jet:
    """Jet of ``ln|det a|`` for a square-matrix-valued jet."""
    if inv is None:
        inv = inverse(a)
    sign, logdet = np.linalg.slogdet(a.value)
    if sign == 0:
        raise ZeroDivisionError("singular matrix")
    parts = [np.asarray(logdet)]
    # d ln|det| = tr(g^{-1} dg); higher orders by differentiating that trace
    if a.order >= 1:
        grad = contract("ab,bac->c", inv.truncate(a.order - 1), a.derivative())
        parts.extend(grad.parts)
    return Jet(parts)


def sqrt_abs_det(a: Jet, inv: Jet | None = None) -> Jet:
    return (log_abs_det(a, inv) * 0.5).exp()
