"""Residual systems whose vanishing characterizes conformal flatness after reduction.

Every check returns a :class:`ResidualReport`.  Its relative residual is
``max_abs / (1 + scale)`` where ``scale`` is the largest absolute component of
the curvature-like inputs entering that residual, so checks near flat space
are not penalized for tiny absolute numbers.

Vector fields are given either as a sequence of expressions (or strings) in
the metric's coordinates, upper index, or as a callable ``point -> Jet``.
:func:`killing_field` turns the dual field strength of a decomposition into
such a callable.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import jets as J
from .expr import Expr, eval_jet3, parse
from .jets import Jet
from .kk import (
    EPS3,
    KKDecomposition,
    base_data,
    c_tensor,
    dual_scalar_jet,
    dual_vector_jet,
    quadratic_f,
    t_tensor,
    wedge,
)
from .tensors import (
    DimensionError,
    MetricField,
    christoffel_jet,
    covariant_derivative,
    curvature_at,
    riemann_jet,
)

VectorField = Union[Sequence[Union[Expr, str]], Callable[[np.ndarray], Jet]]

DEFAULT_TOL = 1e-8
FD_TOL = 1e-5
REPORT_FIELDS = ("name", "n_points", "max_abs", "max_rel", "tolerance", "pass")


class PreconditionError(ValueError):
    """The background does not satisfy the equations a check relies on."""


@dataclass
class ResidualReport:
    name: str
    points: list[list[float]]
    max_abs: float
    scale: float
    tolerance: float = DEFAULT_TOL
    description: str = ""
    rule: str = "vanish"  # "vanish", or "exceed" for sensitivity checks

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def max_rel(self) -> float:
        return self.max_abs / (1.0 + self.scale)

    @property
    def passed(self) -> bool:
        if self.rule == "exceed":
            return self.max_rel > self.tolerance
        return bool(self.max_rel <= self.tolerance)

    def row(self) -> dict:
        return {
            "name": self.name,
            "n_points": self.n_points,
            "max_abs": self.max_abs,
            "max_rel": self.max_rel,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }

    def to_dict(self) -> dict:
        out = self.row()
        out.update(scale=self.scale, description=self.description, rule=self.rule,
                   points=[list(map(float, p)) for p in self.points])
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def with_tolerance(self, tol: float) -> "ResidualReport":
        return ResidualReport(self.name, self.points, self.max_abs, self.scale, tol, self.description, self.rule)


def format_float(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def reports_to_csv(reports: Sequence[ResidualReport]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(REPORT_FIELDS)
    for r in reports:
        row = r.row()
        w.writerow([format_float(row[k]) for k in REPORT_FIELDS])
    return buf.getvalue()


@dataclass
class FlatnessConstant:
    c: float
    samples: list[float]
    spread: float
    points: list[list[float]] = field(default_factory=list)

    def consistent(self, tol: float = DEFAULT_TOL) -> bool:
        return self.spread <= tol * (1 + abs(self.c))


def _as_points(points) -> list[np.ndarray]:
    arr = [np.asarray(p, dtype=float) for p in points]
    if not arr:
        raise ValueError("at least one sample point is required")
    return arr


def collect(name: str, points, fn, tol: float = DEFAULT_TOL, description: str = "") -> ResidualReport:
    """Run ``fn(point) -> (residual array, scale)`` over ``points``."""
    pts = _as_points(points)
    max_abs = 0.0
    scale = 0.0
    for p in pts:
        res, sc = fn(p)
        max_abs = max(max_abs, float(np.max(np.abs(res))) if np.size(res) else 0.0)
        scale = max(scale, float(sc))
    return ResidualReport(name, [list(map(float, p)) for p in pts], max_abs, scale, tol, description)


def _amax(*arrays) -> float:
    return max((float(np.max(np.abs(a))) if np.size(a) else 0.0) for a in arrays)


# ---------------------------------------------------------------------------
# Vector fields
# ---------------------------------------------------------------------------

def vector_jet(g: MetricField, v: VectorField, point, order: int = 3) -> Jet:
    """Jet of an upper-index vector field at ``point``."""
    if callable(v):
        out = v(np.asarray(point, dtype=float))
    else:
        comps = [parse(c, g.coords, list(g.params)) if isinstance(c, str) else c for c in v]
        if len(comps) != g.dim:
            raise DimensionError(f"vector field has {len(comps)} components, metric is {g.dim}-dimensional")
        out = Jet.stack([eval_jet3(c, point, g.params, g.coords, order) for c in comps])
    return out.truncate(min(order, out.order))


def killing_field(kk: KKDecomposition) -> Callable[[np.ndarray], Jet]:
    """The dual field strength ``f^μ`` of a 3-dimensional base as a vector field."""
    if kk.base.dim != 3:
        raise DimensionError("the dual vector of the field strength needs a 3-dimensional base")

    def field_at(point):
        return dual_vector_jet(base_data(kk, point, sigma_ok=True))

    return field_at


def scalar_field(kk: KKDecomposition) -> Callable[[np.ndarray], Jet]:
    """The dual field strength ``f`` of a 2-dimensional base as a scalar field."""
    if kk.base.dim != 2:
        raise DimensionError("the scalar dual of the field strength needs a 2-dimensional base")

    def field_at(point):
        return dual_scalar_jet(base_data(kk, point, sigma_ok=True))

    return field_at


class _Geometry:
    """Metric jets and Christoffel symbols at one point, shared by several checks."""

    def __init__(self, g: MetricField, point, backend: str = "jets"):
        self.g = g
        self.point = np.asarray(point, dtype=float)
        self.gj = g.jet(self.point, 3, backend)
        g.check_invertible(self.gj.value)
        self.ginvj = J.inverse(self.gj)
        self.gamma = christoffel_jet(self.gj, self.ginvj)
        self.riem = riemann_jet(self.gamma)
        self.h = self.gj.value
        self.hinv = self.ginvj.value
        self.ricci_lower = np.einsum("klkn->ln", self.riem.value)
        self.scalar = float(np.einsum("ln,ln->", self.hinv, self.ricci_lower))
        self.riemann_scale = _amax(self.riem.value)

    def lower(self, v: Jet) -> Jet:
        return J.contract("ab,b->a", self.gj.truncate(v.order), v)

    def sqrt_det(self, order: int) -> Jet:
        return J.sqrt_abs_det(self.gj.truncate(order), self.ginvj.truncate(order))


def _lie_derivative(gj: Jet, v: Jet) -> tuple[Jet, float]:
    """``v^λ∂_λ g_μν + g_λν ∂_μ v^λ + g_μλ ∂_ν v^λ`` and the size of its terms."""
    order = min(gj.order, v.order) - 1
    dg = gj.derivative().truncate(order)  # [μ, ν, λ]
    dv = v.derivative().truncate(order)  # [λ, μ] = ∂_μ v^λ
    vv = v.truncate(order)
    gg = gj.truncate(order)
    t1 = J.contract("mnl,l->mn", dg, vv)
    t2 = J.contract("ln,lm->mn", gg, dv)
    out = t1 + t2 + t2.transpose(1, 0)
    return out, _amax(t1.value, t2.value)


# ---------------------------------------------------------------------------
# General n
# ---------------------------------------------------------------------------

def _check_kk(kk: KKDecomposition, n: int | None):
    if n is not None and n != kk.n:
        raise DimensionError(f"decomposition lifts to n={kk.n}, not {n}")
    if kk.n < 4:
        raise DimensionError("the general flatness system needs n >= 4")


def weyl_base_residual(bd, n: int) -> np.ndarray:
    h = bd.hinv
    cw = bd.weyl_up if n >= 5 else 0.0
    return cw + 0.25 * quadratic_f(bd.f_up) + 1.5 / (n - 3) * wedge(h, t_tensor(bd, n))


def mixed_residual(bd, n: int) -> np.ndarray:
    """``d^λ f^{μν} + 2/(n-2) g^{λ[μ} d_τ f^{ν]τ}`` indexed [λ, μ, ν]."""
    h = bd.hinv
    x = bd.div_f
    hx = 0.5 * (np.einsum("lm,n->lmn", h, x) - np.einsum("ln,m->lmn", h, x))
    return bd.df_up + 2.0 / (n - 2) * hx


def general_flatness_residuals(kk: KKDecomposition, points, n: int | None = None,
                               tol: float = DEFAULT_TOL) -> list[ResidualReport]:
    """Residuals of the three reduced conformal-flatness conditions.

    Returns reports for the base Weyl condition, the traceless Einstein-like
    condition ``c^{μν} = 0`` and the field-strength gradient condition.
    """
    _check_kk(kk, n)
    n = kk.n
    cache = {}

    def bd_at(p):
        key = tuple(p)
        if key not in cache:
            cache[key] = base_data(kk, p)
        return cache[key]

    def base_weyl(p):
        bd = bd_at(p)
        return weyl_base_residual(bd, n), _amax(bd.riemann_up, bd.F)

    def einstein_like(p):
        bd = bd_at(p)
        return c_tensor(bd, n), _amax(bd.ricci_up, bd.F)

    def gradient(p):
        bd = bd_at(p)
        return mixed_residual(bd, n), _amax(bd.df_up)

    return [
        collect("flatness_base_weyl", points, base_weyl, tol,
                "lower Weyl tensor plus quadratic field-strength terms"),
        collect("flatness_einstein_like", points, einstein_like, tol,
                "traceless Ricci balanced by the field-strength stress"),
        collect("flatness_field_gradient", points, gradient, tol,
                "gradient of the field strength against its divergence"),
    ]


def curvature_constant(kk: KKDecomposition, points, n: int | None = None,
                       tol: float = DEFAULT_TOL, check: bool = True) -> FlatnessConstant:
    """The constant ``c = n(n+1)/8 f^{μν}f_{νμ} - r`` of a flat lift.

    When ``check`` is set the Einstein-like and gradient conditions must hold
    to ``tol`` first; otherwise :class:`PreconditionError` is raised.
    """
    _check_kk(kk, n)
    n = kk.n
    pts = _as_points(points)
    if check:
        reps = general_flatness_residuals(kk, pts, n, tol)[1:]
        bad = [r for r in reps if not r.passed]
        if bad:
            msg = ", ".join(f"{r.name} max_rel={r.max_rel:.2e}" for r in bad)
            raise PreconditionError(f"background is not a flat lift within {tol:g}: {msg}")
    samples = []
    for p in pts:
        bd = base_data(kk, p)
        samples.append(n * (n + 1) / 8 * bd.FF - bd.scalar)
    arr = np.array(samples)
    return FlatnessConstant(float(arr.mean()), samples, float(arr.max() - arr.min()),
                            [list(map(float, p)) for p in pts])


def field_strength_identities(kk: KKDecomposition, points, tol: float = DEFAULT_TOL) -> list[ResidualReport]:
    """Two contractions of the field-strength gradient.

    ``f^{μλ} d_μ f_{λν} = ¼ ∂_ν(f^{μλ}f_{λμ})`` holds by the Bianchi identity
    alone; ``d_μ f^{μλ} f_{λν} = (n-2)/4 ∂_ν(f^{μλ}f_{λμ})`` additionally needs
    the gradient condition of a flat lift.
    """
    n = kk.n

    def parts(p):
        bd = base_data(kk, p)
        f2 = bd.f_low.truncate(2)
        hinv = bd.hinv_jet.truncate(2)
        fup = J.contract("ma,an->mn", J.contract("ma,ab->mb", hinv, f2), hinv)
        ff = J.contract("mn,nm->", fup, f2)
        dff = ff.derivative().value
        fdf = np.einsum("ml,lnm->n", bd.f_up, bd.df_low)
        # d_μ f^{μλ} = -div_f^λ
        divf = np.einsum("l,ln->n", -bd.div_f, bd.f_low.value)
        return fdf, divf, dff, _amax(bd.f_up) * _amax(bd.df_low)

    def first(p):
        fdf, _, dff, sc = parts(p)
        return fdf - 0.25 * dff, sc

    def second(p):
        _, divf, dff, sc = parts(p)
        return divf - (n - 2) / 4 * dff, sc

    return [
        collect("field_strength_bianchi_contraction", points, first, tol,
                "contracted gradient equals a quarter gradient of the invariant"),
        collect("field_strength_divergence_contraction", points, second, tol,
                "divergence contraction is a total derivative on flat lifts"),
    ]


# ---------------------------------------------------------------------------
# n = 4: Killing structure
# ---------------------------------------------------------------------------

def killing_residual(g: MetricField, v: VectorField, points, tol: float = 1e-10,
                     name: str = "killing") -> ResidualReport:
    """Lie derivative of the metric along ``v``; vanishes for a Killing vector."""

    def one(p):
        geo = _Geometry(g, p)
        vj = vector_jet(g, v, p, 3)
        lie, sc = _lie_derivative(geo.gj, vj)
        return lie.value, sc

    return collect(name, points, one, tol, "Lie derivative of the metric along the vector")


def _dual_killing_jet(geo: _Geometry, fj: Jet) -> Jet:
    """``F^μ = ε^{μνλ} ∂_ν f_λ / sqrt|g|`` (Christoffel terms cancel)."""
    f_low = geo.lower(fj)
    df = f_low.derivative()  # [λ, ν] = ∂_ν f_λ
    curl = J.linear("mnl,ln->m", EPS3, df)
    return J.contract("m,->m", curl, geo.sqrt_det(curl.order).reciprocal())


def dual_killing(g: MetricField, f: VectorField, point) -> np.ndarray:
    """The dual Killing vector ``F^μ`` at ``point``."""
    if g.dim != 3:
        raise DimensionError("the dual Killing vector is defined in three dimensions")
    geo = _Geometry(g, point)
    return _dual_killing_jet(geo, vector_jet(g, f, point, 3)).value


def dual_killing_field(g: MetricField, f: VectorField) -> Callable[[np.ndarray], Jet]:
    if g.dim != 3:
        raise DimensionError("the dual Killing vector is defined in three dimensions")

    def field_at(point):
        geo = _Geometry(g, point)
        return _dual_killing_jet(geo, vector_jet(g, f, point, 3))

    return field_at


def orthogonality_residual(g: MetricField, f: VectorField, points, tol: float = 1e-10) -> ResidualReport:
    """``F^μ f_μ`` for the dual Killing vector."""

    def one(p):
        geo = _Geometry(g, p)
        fj = vector_jet(g, f, p, 3)
        big_f = _dual_killing_jet(geo, fj).value
        f_low = geo.h @ fj.value
        return np.array([big_f @ f_low]), _amax(big_f) * _amax(f_low)

    return collect("dual_killing_orthogonal", points, one, tol, "dual Killing vector is orthogonal to f")


def _f_square(geo: _Geometry, fj: Jet) -> float:
    v = fj.value
    return float(v @ geo.h @ v)


def second_derivative_identity(g: MetricField, f: VectorField, c: float, points,
                               tol: float = DEFAULT_TOL) -> ResidualReport:
    """``d_μ d_ν f_λ - (1/6)(g_μν f_λ - g_μλ f_ν)(3 f² + c)``."""
    if g.dim != 3:
        raise DimensionError("the second-derivative identity is three-dimensional")

    def one(p):
        geo = _Geometry(g, p)
        fj = vector_jet(g, f, p, 3)
        if fj.order < 2:
            raise ValueError("the vector field needs second derivatives")
        f_low = geo.lower(fj.truncate(2))
        d1 = covariant_derivative(f_low, geo.gamma.truncate(2), "d")  # [λ, ν]
        d2 = covariant_derivative(d1, geo.gamma.truncate(1), "dd").value  # [λ, ν, μ]
        lhs = d2.transpose(2, 1, 0)  # [μ, ν, λ]
        fl = f_low.value
        f2 = float(fj.value @ fl)
        h = geo.h
        rhs = (np.einsum("mn,l->mnl", h, fl) - np.einsum("ml,n->mnl", h, fl)) * (3 * f2 + c) / 6
        return lhs - rhs, _amax(lhs, rhs)

    return collect("second_derivative_identity", points, one, tol,
                   "second covariant derivative of the Killing form")


def n4_einstein_form(kk: KKDecomposition, points, c: float | None = None,
                     tol: float = DEFAULT_TOL) -> ResidualReport:
    """``r_μν - ½ g_μν r - f_μ f_ν - (1/6) g_μν (c + 3 f²)`` on a 3-dimensional base."""
    if kk.base.dim != 3:
        raise DimensionError("the Einstein form needs a 3-dimensional base")
    if c is None:
        c = curvature_constant(kk, points, tol=tol, check=False).c

    def one(p):
        bd = base_data(kk, p)
        fv = dual_vector_jet(bd).value
        fl = bd.h @ fv
        f2 = float(fv @ fl)
        lhs = bd.ricci_lower - 0.5 * bd.h * bd.scalar
        rhs = np.outer(fl, fl) + bd.h * (c + 3 * f2) / 6
        return lhs - rhs, _amax(bd.ricci_lower, np.outer(fl, fl))

    return collect("einstein_form", points, one, tol, "Einstein tensor sourced by the Killing vector")


@dataclass
class CovariantConstancy:
    is_cc: bool
    light_like: bool
    out_of_scope: bool
    gradient: ResidualReport
    einstein: ResidualReport | None
    f_square: float

    @property
    def classification(self) -> str:
        if not self.is_cc:
            return "not covariantly constant"
        if self.out_of_scope:
            return "light-like covariantly constant (out of scope)"
        if self.f_square == 0.0:
            return "vanishing"
        return "time-like covariantly constant" if self.f_square > 0 else "space-like covariantly constant"


def covariantly_constant_check(g: MetricField, f: VectorField, points,
                               tol: float = 1e-9) -> CovariantConstancy:
    """Test ``d_μ f_ν = 0`` and, if it holds, ``r_μν - ½ g_μν r = f_μ f_ν``.

    A covariantly constant null vector is flagged as out of scope rather than
    classified, since the dust-like Einstein equation is not derived for it.
    """
    if g.dim != 3:
        raise DimensionError("this check is three-dimensional")
    squares = []
    norms = []

    def grad(p):
        geo = _Geometry(g, p)
        fj = vector_jet(g, f, p, 3)
        f_low = geo.lower(fj.truncate(1))
        d1 = covariant_derivative(f_low, geo.gamma.truncate(1), "d").value
        squares.append(_f_square(geo, fj))
        norms.append(_amax(fj.value) ** 2 * _amax(geo.h))
        return d1, _amax(f_low.first) + _amax(geo.gamma.value) * _amax(f_low.value)

    gr = collect("covariant_constancy", points, grad, tol, "covariant gradient of the Killing form")
    is_cc = gr.passed
    einstein = None
    if is_cc:
        def ein(p):
            geo = _Geometry(g, p)
            fv = vector_jet(g, f, p, 3).value
            fl = geo.h @ fv
            lhs = geo.ricci_lower - 0.5 * geo.h * geo.scalar
            return lhs - np.outer(fl, fl), _amax(geo.ricci_lower, np.outer(fl, fl))

        einstein = collect("dust_einstein", points, ein, tol, "Einstein tensor equals f_μ f_ν")
    f_square = float(np.mean(squares))
    nonzero = max(norms) > tol
    light_like = is_cc and nonzero and max(abs(s) for s in squares) <= tol * (1 + max(norms))
    if not nonzero:
        f_square = 0.0
    return CovariantConstancy(is_cc, light_like, light_like, gr, einstein, f_square)


# ---------------------------------------------------------------------------
# 3 -> 2: Cotton reduction
# ---------------------------------------------------------------------------

ScalarField = Union[Expr, str, Callable[[np.ndarray], Jet]]


def _scalar_jet(g: MetricField, f: ScalarField, point, order: int = 3) -> Jet:
    if callable(f) and not isinstance(f, Expr):
        return f(np.asarray(point, dtype=float))
    e = parse(f, g.coords, list(g.params)) if isinstance(f, str) else f
    return eval_jet3(e, point, g.params, g.coords, order)


def cotton_reduction_residuals(g2: MetricField, f: ScalarField, c: float, points,
                               tol: float = 1e-9) -> list[ResidualReport]:
    """Residuals of ``r = 3f² - c``, the kink equation and the traceless equation."""
    if g2.dim != 2:
        raise DimensionError("the Cotton reduction residuals live in two dimensions")

    def parts(p):
        geo = _Geometry(g2, p)
        fj = _scalar_jet(g2, f, p, 3)
        if fj.order < 2:
            raise ValueError("the scalar field needs second derivatives")
        df = fj.derivative().truncate(1)
        ddf = covariant_derivative(df, geo.gamma.truncate(1), "d").value  # [μ, ν]
        box = float(np.einsum("mn,mn->", geo.hinv, ddf))
        return geo, float(fj.value), ddf, box

    def curvature(p):
        geo, fv, _, _ = parts(p)
        return np.array([geo.scalar - 3 * fv**2 + c]), max(abs(geo.scalar), 3 * fv**2, abs(c))

    def kink(p):
        _, fv, _, box = parts(p)
        return np.array([box - c * fv + fv**3]), max(abs(box), abs(c * fv), abs(fv) ** 3)

    def traceless(p):
        geo, _, ddf, box = parts(p)
        return ddf - 0.5 * geo.h * box, _amax(ddf)

    return [
        collect("cotton_curvature", points, curvature, tol, "Ricci scalar against 3f^2 - c"),
        collect("cotton_kink", points, kink, tol, "kink equation for the dual field strength"),
        collect("cotton_traceless", points, traceless, tol, "traceless Hessian of f"),
    ]


# ---------------------------------------------------------------------------
# Quadratic Weyl action
# ---------------------------------------------------------------------------

# The full density equals 8 (c·c - K·K/16) on every KK background (fit against
# the brute-force Weyl tensor); see the decision ledger.
REDUCED_K_COEFFICIENT = 1.0 / 16.0
PRINTED_K_COEFFICIENT = 0.25
DENSITY_RATIO = 8.0


def symmetrized_gradient(bd) -> np.ndarray:
    """``K_μν = d_μ f_ν + d_ν f_μ`` of the dual vector."""
    fj = dual_vector_jet(bd)
    order = fj.order
    f_low = J.contract("ab,b->a", bd.h_jet.truncate(order), fj)
    d = covariant_derivative(f_low, bd.gamma.truncate(order), "d").value  # [ν, μ] = d_μ f_ν
    return d + d.T


def quadratic_action_density(kk: KKDecomposition, point) -> dict[str, float]:
    """``C_KLMN C^KLMN`` of the lift and its reduced forms at one point.

    Keys: ``full``, ``reduced`` (``c·c - K·K/16``), ``printed`` (``c·c - K·K/4``),
    ``cc`` and ``KK``.
    """
    g = kk_lift(kk)
    pt = np.concatenate([np.asarray(point, dtype=float)[: kk.base.dim], [0.0]])
    b = curvature_at(g, pt)
    m = b.metric
    w_low = np.einsum("ak,bl,cm,dn,abcd->klmn", m, m, m, m, b.weyl)
    full = float(np.einsum("klmn,klmn->", w_low, b.weyl))
    out = {"full": full}
    if kk.n == 4:
        bd = base_data(kk, point)
        c = c_tensor(bd, 4)
        cc = float(np.einsum("mn,mn->", c, bd.h @ c @ bd.h))
        k = symmetrized_gradient(bd)
        kk_sq = float(np.einsum("mn,mn->", k, bd.hinv @ k @ bd.hinv))
        out.update(cc=cc, KK=kk_sq, reduced=cc - REDUCED_K_COEFFICIENT * kk_sq,
                   printed=cc - PRINTED_K_COEFFICIENT * kk_sq)
    return out


def kk_lift(kk: KKDecomposition) -> MetricField:
    from .kk import assemble

    return assemble(kk)
