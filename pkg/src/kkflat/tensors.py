"""Curvature of metric fields under the sign conventions used throughout.

Conventions
-----------
* Christoffel symbols ``gamma[k, m, n] = Γ^k_{mn}``.
* ``R^k_{lmn} = ∂_m Γ^k_{ln} - ∂_n Γ^k_{lm} + Γ^k_{mp} Γ^p_{ln} - Γ^k_{np} Γ^p_{lm}``
  so that the Ricci tensor ``R_{ln} = R^k_{lkn} = ∂_k Γ^k_{ln} - ...``.
* All-upper tensors are obtained by raising with the inverse metric; the
  Weyl tensor is built in all-upper form,
  ``C^{KLMN} = R^{KLMN} - 2/(n-2) (g^{K[M}S^{N]L} - g^{L[M}S^{N]K})`` with
  ``S^{NL} = R^{NL} - g^{NL} R / (2(n-1))``.
* Cotton tensor (three dimensions only): ``C_{MNL} = ∇_M S_{NL} - ∇_N S_{ML}``.

With signature ``(+, -, ..., -)`` these conventions give anti-de Sitter space a
positive Ricci scalar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import jets as J
from .expr import Expr, as_expr, eval_fd, eval_jet3, evaluate, parse
from .jets import Jet

DET_THRESHOLD = 1e-12
_LETTERS = "abcdefghijklmno"


class SingularMetricError(ArithmeticError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class MetricField:
    """Symmetric matrix of coordinate expressions.

    ``components`` holds the upper triangle row by row, ``(0,0), (0,1), ...,
    (n-1,n-1)``; use :meth:`from_matrix` or :meth:`from_strings` to build one.
    """

    dim: int
    components: tuple[Expr, ...]
    coords: tuple[str, ...]
    params: Mapping[str, float] = field(default_factory=dict)
    signature: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.dim < 2:
            raise DimensionError("metric dimension must be at least 2")
        if len(self.coords) != self.dim:
            raise DimensionError(f"{len(self.coords)} coordinates for a {self.dim}-dimensional metric")
        if len(self.components) != self.dim * (self.dim + 1) // 2:
            raise DimensionError("components must list the upper triangle")
        if self.signature is not None and len(self.signature) != self.dim:
            raise DimensionError("signature length must equal dim")

    @classmethod
    def from_matrix(cls, matrix, coords, params=None, signature=None) -> "MetricField":
        n = len(matrix)
        comps = []
        for i in range(n):
            for j in range(i, n):
                a, b = matrix[i][j], matrix[j][i]
                if a is not b and a != b and not (_is_zero_like(a) and _is_zero_like(b)):
                    raise ValueError(f"metric matrix not symmetric at ({i},{j})")
                comps.append(as_expr(a))
        return cls(n, tuple(comps), tuple(coords), dict(params or {}), _sig(signature))

    @classmethod
    def from_strings(cls, matrix, coords, params=None, signature=None) -> "MetricField":
        params = dict(params or {})
        n = len(matrix)
        comps = []
        for i in range(n):
            for j in range(i, n):
                comps.append(parse(str(matrix[i][j]), coords, list(params)))
        return cls(n, tuple(comps), tuple(coords), params, _sig(signature))

    @classmethod
    def diagonal(cls, entries, coords, params=None, signature=None) -> "MetricField":
        n = len(entries)
        mat = [[entries[i] if i == j else 0.0 for j in range(n)] for i in range(n)]
        if all(isinstance(e, str) for e in entries):
            mat = [[entries[i] if i == j else "0" for j in range(n)] for i in range(n)]
            return cls.from_strings(mat, coords, params, signature)
        return cls.from_matrix(mat, coords, params, signature)

    def component(self, i: int, j: int) -> Expr:
        if i > j:
            i, j = j, i
        n = self.dim
        return self.components[i * n - i * (i - 1) // 2 + (j - i)]

    def matrix(self) -> list[list[Expr]]:
        return [[self.component(i, j) for j in range(self.dim)] for i in range(self.dim)]

    def with_params(self, **updates) -> "MetricField":
        params = dict(self.params)
        params.update(updates)
        return MetricField(self.dim, self.components, self.coords, params, self.signature)

    def value(self, point) -> np.ndarray:
        n = self.dim
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = out[j, i] = evaluate(self.component(i, j), point, self.params, self.coords)
        return out

    def jet(self, point, order: int = 3, backend: str = "jets") -> Jet:
        """Jet of the metric matrix at ``point`` (shape ``(n, n)``)."""
        n = self.dim
        point = np.asarray(point, dtype=float)
        if backend == "fd":
            from .expr import finite_difference_parts
            return Jet(finite_difference_parts(self.value, point, order))
        if backend != "jets":
            raise ValueError(f"unknown backend {backend!r}")
        cache: dict[Expr, Jet] = {}
        entries = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                e = self.component(i, j)
                if e not in cache:
                    cache[e] = eval_jet3(e, point, self.params, self.coords, order)
                entries[i][j] = entries[j][i] = cache[e]
        return Jet.stack([Jet.stack(row) for row in entries])

    def check_invertible(self, value: np.ndarray):
        n = self.dim
        det = np.linalg.det(value)
        scale = np.max(np.linalg.norm(value, axis=1)) ** n
        if not abs(det) >= DET_THRESHOLD * scale:
            raise SingularMetricError(f"metric is singular (det={det:.3e})")


def _sig(signature):
    return None if signature is None else tuple(int(s) for s in signature)


def _is_zero_like(x):
    try:
        return float(x) == 0.0
    except (TypeError, ValueError):
        return False


# ---------------------------------------------------------------------------
# Jet-level building blocks
# ---------------------------------------------------------------------------

def christoffel_jet(g: Jet, ginv: Jet) -> Jet:
    """Γ^k_{mn} from the metric jet; order is one less than the metric's."""
    dg = g.derivative()  # dg[a, b, c] = ∂_c g_ab
    low = (dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)) * 0.5
    # low[l, m, n] = ½(∂_m g_ln + ∂_n g_lm - ∂_l g_mn)
    return J.contract("kl,lmn->kmn", ginv.truncate(low.order), low)


def riemann_jet(gamma: Jet) -> Jet:
    """R^k_{lmn}; order is one less than the Christoffel jet's."""
    dgam = gamma.derivative()  # dgam[k, l, n, m] = ∂_m Γ^k_{ln}
    g1 = gamma.truncate(dgam.order)
    deriv = dgam.transpose(0, 1, 3, 2) - dgam
    quad = J.contract("kmz,zln->klmn", g1, g1)
    return deriv + quad - quad.transpose(0, 1, 3, 2)


def covariant_derivative(t: Jet, gamma: Jet, kinds: str) -> Jet:
    """∇T with the derivative index appended last.

    ``kinds`` has one character per tensor index of ``t``: ``'u'`` (upper) or
    ``'d'`` (lower).
    """
    rank = len(kinds)
    if len(t.shape) != rank:
        raise DimensionError(f"tensor of rank {len(t.shape)} with index kinds {kinds!r}")
    dt = t.derivative()
    order = min(dt.order, gamma.order)
    out = dt.truncate(order)
    tt = t.truncate(order)
    gg = gamma.truncate(order)
    idx = _LETTERS[:rank]
    c = "y"
    for pos, kind in enumerate(kinds):
        rep = idx[:pos] + "z" + idx[pos + 1:]
        if kind == "u":
            spec = f"{idx[pos]}{c}z,{rep}->{idx}{c}"
            out = out + J.contract(spec, gg, tt)
        else:
            spec = f"z{c}{idx[pos]},{rep}->{idx}{c}"
            out = out - J.contract(spec, gg, tt)
    return out


def covariant_derivative_values(t: np.ndarray, dt: np.ndarray, gamma: np.ndarray, kinds: str) -> np.ndarray:
    """Array version of :func:`covariant_derivative`; ``dt`` holds ∂T with the derivative last."""
    return covariant_derivative(Jet([t, dt]), Jet([gamma]), kinds).value


# ---------------------------------------------------------------------------
# Curvature bundle
# ---------------------------------------------------------------------------

@dataclass
class CurvatureBundle:
    """Curvature objects of a metric at one point (numpy arrays)."""

    dim: int
    point: np.ndarray
    metric: np.ndarray
    inverse_metric: np.ndarray
    christoffel: np.ndarray
    riemann_mixed: np.ndarray
    riemann_up: np.ndarray
    riemann_down: np.ndarray
    ricci_lower: np.ndarray
    ricci: np.ndarray
    ricci_scalar: float
    schouten: np.ndarray
    weyl: np.ndarray | None
    cotton: np.ndarray | None
    d_riemann_mixed: np.ndarray | None = None
    d_metric: np.ndarray | None = None

    def riemann_scale(self) -> float:
        return float(np.max(np.abs(self.riemann_up))) if self.riemann_up.size else 0.0


def _raise_all(t: np.ndarray, ginv: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    for p in positions:
        t = raise_index(t, ginv, p)
    return t


def weyl_from(riemann_up: np.ndarray, ricci_up: np.ndarray, scalar: float, ginv: np.ndarray) -> np.ndarray:
    """All-upper Weyl tensor from all-upper Riemann and Ricci."""
    n = ginv.shape[0]
    s = ricci_up - ginv * scalar / (2 * (n - 1))
    # g^{K[M}S^{N]L} = (g^{KM}S^{NL} - g^{KN}S^{ML})/2
    a_kl = 0.5 * (np.einsum("km,nl->klmn", ginv, s) - np.einsum("kn,ml->klmn", ginv, s))
    a_lk = a_kl.transpose(1, 0, 2, 3)
    return riemann_up - 2.0 / (n - 2) * (a_kl - a_lk)


def curvature_at(g: MetricField, point, backend: str = "jets") -> CurvatureBundle:
    """All curvature objects of ``g`` at ``point``."""
    n = g.dim
    if n < 2:
        raise DimensionError("dimension must be at least 2")
    point = np.asarray(point, dtype=float)
    gj = g.jet(point, 3, backend)
    g.check_invertible(gj.value)
    ginv = J.inverse(gj)
    gamma = christoffel_jet(gj, ginv)
    riem = riemann_jet(gamma)
    gi = ginv.value
    rm = riem.value
    r_down = np.einsum("ka,almn->klmn", gj.value, rm)
    r_up = np.einsum("lb,mc,nd,kbcd->klmn", gi, gi, gi, rm)
    ric_low = np.einsum("klkn->ln", rm)
    ric_up = gi @ ric_low @ gi
    scalar = float(np.einsum("ln,ln->", gi, ric_low))
    schouten = ric_up - gi * scalar / (2 * (n - 1))
    weyl = weyl_from(r_up, ric_up, scalar, gi) if n >= 4 else None
    cotton = _cotton(gj, gamma, riem) if n == 3 else None
    return CurvatureBundle(
        dim=n,
        point=point,
        metric=gj.value,
        inverse_metric=gi,
        christoffel=gamma.value,
        riemann_mixed=rm,
        riemann_up=r_up,
        riemann_down=r_down,
        ricci_lower=ric_low,
        ricci=ric_up,
        ricci_scalar=scalar,
        schouten=schouten,
        weyl=weyl,
        cotton=cotton,
        d_riemann_mixed=riem.first,
        d_metric=gj.first,
    )


def _schouten_lower_jet(gj: Jet, riem: Jet) -> Jet:
    n = gj.shape[0]
    ricci = J.trace("klkn->ln", riem)
    order = ricci.order
    ginv = J.inverse(gj.truncate(order))
    scalar = J.contract("ln,ln->", ginv, ricci)
    return ricci - J.contract("ab,->ab", gj.truncate(order), scalar) * (1.0 / (2 * (n - 1)))


def _cotton(gj: Jet, gamma: Jet, riem: Jet) -> np.ndarray:
    s = _schouten_lower_jet(gj, riem)
    ds = covariant_derivative(s, gamma, "dd").value  # ds[n, l, m] = ∇_m S_nl
    return ds.transpose(2, 0, 1) - ds.transpose(0, 2, 1)


def cotton_at(g: MetricField, point, backend: str = "jets") -> np.ndarray:
    """Cotton tensor ``C_{MNL}`` of a three-dimensional metric."""
    if g.dim != 3:
        raise DimensionError(f"Cotton tensor needs a 3-dimensional metric, got {g.dim}")
    point = np.asarray(point, dtype=float)
    gj = g.jet(point, 3, backend)
    g.check_invertible(gj.value)
    ginv = J.inverse(gj)
    gamma = christoffel_jet(gj, ginv)
    return _cotton(gj, gamma, riemann_jet(gamma))


def cotton_scale(g: MetricField, point, backend: str = "jets") -> float:
    """Magnitude of the Riemann gradient, the natural scale for Cotton residuals."""
    b = curvature_at(g, point, backend)
    return float(np.max(np.abs(b.d_riemann_mixed)))


# ---------------------------------------------------------------------------
# Index gymnastics
# ---------------------------------------------------------------------------

def _check_pos(t: np.ndarray, pos: int, metric: np.ndarray):
    if not 0 <= pos < t.ndim:
        raise IndexError(f"index position {pos} out of range for rank {t.ndim}")
    if t.shape[pos] != metric.shape[0]:
        raise DimensionError(f"axis {pos} has size {t.shape[pos]}, metric has {metric.shape[0]}")


def raise_index(t: np.ndarray, ginv: np.ndarray, pos: int) -> np.ndarray:
    t = np.asarray(t)
    _check_pos(t, pos, ginv)
    return np.moveaxis(np.tensordot(ginv, t, axes=([1], [pos])), 0, pos)


def lower_index(t: np.ndarray, g: np.ndarray, pos: int) -> np.ndarray:
    return raise_index(t, g, pos)


def trace(t: np.ndarray, metric: np.ndarray, pos1: int, pos2: int) -> np.ndarray:
    """Contract index positions ``pos1`` and ``pos2`` using ``metric``.

    Pass the inverse metric to contract two lower indices, the metric to
    contract two upper ones.
    """
    t = np.asarray(t)
    _check_pos(t, pos1, metric)
    _check_pos(t, pos2, metric)
    if pos1 == pos2:
        raise IndexError("cannot contract an index with itself")
    lowered = raise_index(t, metric, pos1)
    return np.trace(lowered, axis1=pos1, axis2=pos2)


def relative(residual: float, scale: float) -> float:
    return float(residual) / (1.0 + float(scale))


def bianchi_residuals(b: CurvatureBundle) -> tuple[float, float]:
    """Second Bianchi identity and contracted Bianchi identity residuals.

    Returns ``(max|∇_{[p}R^k_{|l|mn]}|, max|∇_m R^m_n - ½∂_n R|)`` using the
    Riemann gradient stored in the bundle.
    """
    gam = b.christoffel
    rm = Jet([b.riemann_mixed, b.d_riemann_mixed])
    drm = covariant_derivative(rm, Jet([gam]), "uddd").value  # [k,l,m,n,p] = ∇_p R^k_lmn
    cyc = drm + drm.transpose(0, 1, 3, 4, 2) + drm.transpose(0, 1, 4, 2, 3)
    # contracted: ∇_k G^k_n = 0 with mixed Ricci R^m_n
    ric_mixed = np.einsum("ma,an->mn", b.inverse_metric, b.ricci_lower)
    d_ric_low = np.einsum("klknp->lnp", b.d_riemann_mixed)
    d_ginv = -np.einsum("ab,bcp,cd->adp", b.inverse_metric, b.d_metric, b.inverse_metric)
    d_ric_mixed = np.einsum("map,an->mnp", d_ginv, b.ricci_lower) + np.einsum(
        "ma,anp->mnp", b.inverse_metric, d_ric_low)
    d_scalar = np.einsum("mmp->p", d_ric_mixed)
    cov = covariant_derivative(Jet([ric_mixed, d_ric_mixed]), Jet([gam]), "ud").value
    div = np.einsum("mnm->n", cov) - 0.5 * d_scalar
    return float(np.max(np.abs(cyc))), float(np.max(np.abs(div)))
