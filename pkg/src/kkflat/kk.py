"""Kaluza-Klein split of an n-metric into an (n-1)-metric and a vector potential.

The n-dimensional metric is

    g_MN = e^{2σ} [[g_μν - a_μ a_ν, -a_μ], [-a_ν, -1]]

with nothing depending on the extra ("fiber") coordinate, which is stored as
the last index ``n-1`` and printed as ``-``.

Besides assembling the full metric, this module evaluates the closed-form
reduction of Riemann, Ricci and Weyl components in terms of the lower
dimensional curvature and the field strength ``f_μν = ∂_μ a_ν - ∂_ν a_μ``.
Those formulas assume σ is absent.

Levi-Civita symbols are lowered with the tangent-space metric, so
``ε^{012} = ε_{012} = 1`` in three dimensions and ``ε^{01} = -ε_{01} = 1`` in
two.  Densities use ``sqrt|det g|`` in every signature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import jets as J
from .expr import Const, Expr, Unary, as_expr, diff, eval_jet3, parse
from .jets import Jet
from .tensors import (
    DimensionError,
    MetricField,
    christoffel_jet,
    covariant_derivative,
    riemann_jet,
    weyl_from,
)

MAX_DIM = 6

EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    EPS3[_i, _j, _k] = 1.0
    EPS3[_i, _k, _j] = -1.0
EPS2_UP = np.array([[0.0, 1.0], [-1.0, 0.0]])
EPS2_DOWN = -EPS2_UP


class SigmaNotSupported(ValueError):
    """Reduction formulas are only valid without the conformal factor."""


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return Const(0.0)
    return a * b


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return -b
    return a - b


@dataclass(frozen=True)
class KKDecomposition:
    """Base metric, vector potential and optional conformal factor."""

    base: MetricField
    vector: tuple[Expr, ...]
    sigma: Expr | None = None
    fiber: str = "z"

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(as_expr(v) for v in self.vector))
        if len(self.vector) != self.base.dim:
            raise DimensionError(
                f"vector potential has {len(self.vector)} components, base metric is {self.base.dim}-dimensional"
            )
        if self.base.dim + 1 > MAX_DIM:
            raise DimensionError(f"lifted dimension {self.base.dim + 1} exceeds the cap of {MAX_DIM}")
        if self.fiber in self.base.coords:
            raise DimensionError(f"fiber coordinate {self.fiber!r} clashes with a base coordinate")

    @classmethod
    def from_strings(cls, base: MetricField, vector: Sequence[str], sigma: str | None = None,
                     fiber: str = "z") -> "KKDecomposition":
        """Parse the vector and conformal factor over the base coordinates and parameters."""
        names = list(base.params)
        vec = tuple(parse(str(v), base.coords, names) for v in vector)
        sig = None if sigma is None else parse(sigma, base.coords, names)
        return cls(base, vec, sig, fiber)

    @property
    def n(self) -> int:
        return self.base.dim + 1

    def gauge_shift(self, chi: Expr) -> "KKDecomposition":
        """a_μ → a_μ + ∂_μ χ."""
        shifted = tuple(a + diff(chi, c) for a, c in zip(self.vector, self.base.coords))
        return KKDecomposition(self.base, shifted, self.sigma, self.fiber)

    def vector_jet(self, point, order: int = 3) -> Jet:
        b = self.base
        return Jet.stack([eval_jet3(a, point, b.params, b.coords, order) for a in self.vector])


def assemble(kk: KKDecomposition) -> MetricField:
    """The n-dimensional metric of the decomposition."""
    base = kk.base
    m = base.dim
    a = kk.vector
    mat: list[list[Expr]] = [[Const(0.0)] * (m + 1) for _ in range(m + 1)]
    for i in range(m):
        for j in range(i, m):
            mat[i][j] = mat[j][i] = _sub(base.component(i, j), _mul(a[i], a[j]))
        mat[i][m] = mat[m][i] = -a[i] if not _is_zero(a[i]) else Const(0.0)
    mat[m][m] = Const(-1.0)
    if kk.sigma is not None:
        factor = Unary("exp", Const(2.0) * kk.sigma)
        mat = [[_mul(factor, e) if not _is_zero(e) else e for e in row] for row in mat]
    sig = None if base.signature is None else tuple(base.signature) + (-1,)
    return MetricField.from_matrix(mat, tuple(base.coords) + (kk.fiber,), dict(base.params), sig)


# ---------------------------------------------------------------------------
# Lower-dimensional data at a point
# ---------------------------------------------------------------------------

@dataclass
class BaseData:
    """Everything the reduction formulas need at one base point."""

    dim: int
    h: np.ndarray
    hinv: np.ndarray
    gamma: Jet
    sqrt_det: Jet
    riemann_up: np.ndarray
    ricci_up: np.ndarray
    ricci_lower: np.ndarray
    scalar: float
    weyl_up: np.ndarray
    a_low: np.ndarray
    a_up: np.ndarray
    f_low: Jet  # f_μν, order 2
    f_up: np.ndarray
    F: np.ndarray  # f^{μλ} f_λ^ν
    FF: float  # f^{μν} f_{νμ}
    df_low: np.ndarray  # ∇_λ f_μν stored [μ, ν, λ]
    df_up: np.ndarray  # d^λ f^{μν} stored [λ, μ, ν]
    div_f: np.ndarray  # d_τ f^{ντ} stored [ν]
    h_jet: Jet
    hinv_jet: Jet


def base_data(kk: KKDecomposition, point: Sequence[float], sigma_ok: bool = False) -> BaseData:
    if kk.sigma is not None and not sigma_ok:
        raise SigmaNotSupported(
            "the reduction formulas are derived for vanishing conformal factor; drop sigma first"
        )
    base = kk.base
    m = base.dim
    x = np.asarray(point, dtype=float)[:m]
    hj = base.jet(x, 3)
    base.check_invertible(hj.value)
    hinvj = J.inverse(hj)
    gam = christoffel_jet(hj, hinvj)
    riem = riemann_jet(gam)
    hi = hinvj.value
    rm = riem.value
    r_up = np.einsum("lb,mc,nd,kbcd->klmn", hi, hi, hi, rm)
    ric_low = np.einsum("klkn->ln", rm)
    ric_up = hi @ ric_low @ hi
    scalar = float(np.einsum("ln,ln->", hi, ric_low))
    if m >= 4:
        weyl = weyl_from(r_up, ric_up, scalar, hi)
    else:
        weyl = np.zeros((m,) * 4)

    aj = kk.vector_jet(x, 3)
    da = aj.derivative()  # da[ν, μ] = ∂_μ a_ν
    f_low = da.transpose(1, 0) - da  # f[μ, ν] = ∂_μ a_ν - ∂_ν a_μ
    fv = f_low.value
    f_up = hi @ fv @ hi.T
    F = f_up @ fv @ hi  # f^{μλ} f_λ^ν
    FF = float(np.einsum("mn,nm->", f_up, fv))
    dfl = covariant_derivative(f_low, gam, "dd").value  # [μ, ν, λ] = ∇_λ f_μν
    df_up = np.einsum("la,mb,nc,bca->lmn", hi, hi, hi, dfl)
    dfu_cov = np.einsum("mb,nc,bca->mna", hi, hi, dfl)  # ∇_λ f^{μν} stored [μ, ν, λ]
    div_f = np.einsum("ntt->n", dfu_cov)
    return BaseData(
        dim=m, h=hj.value, hinv=hi, gamma=gam, sqrt_det=J.sqrt_abs_det(hj, hinvj),
        riemann_up=r_up, ricci_up=ric_up, ricci_lower=ric_low, scalar=scalar, weyl_up=weyl,
        a_low=aj.value, a_up=hi @ aj.value, f_low=f_low, f_up=f_up, F=F, FF=FF,
        df_low=dfl, df_up=df_up, div_f=div_f, h_jet=hj, hinv_jet=hinvj,
    )


def wedge(h: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``h^{μ[λ}X^{τ]ν} - h^{ν[λ}X^{τ]μ}`` as an array indexed [μ, ν, λ, τ]."""
    a = 0.5 * (np.einsum("ml,tn->mnlt", h, x) - np.einsum("mt,ln->mnlt", h, x))
    return a - a.transpose(1, 0, 2, 3)


def quadratic_f(f_up: np.ndarray) -> np.ndarray:
    """``f^{μτ}f^{λν} - f^{μλ}f^{τν} + 2 f^{μν}f^{λτ}`` indexed [μ, ν, λ, τ]."""
    return (
        np.einsum("mt,ln->mnlt", f_up, f_up)
        - np.einsum("ml,tn->mnlt", f_up, f_up)
        + 2 * np.einsum("mn,lt->mnlt", f_up, f_up)
    )


# ---------------------------------------------------------------------------
# Field strength
# ---------------------------------------------------------------------------

@dataclass
class FieldStrength:
    f_lower: np.ndarray
    invariant_square: float
    f_scalar: float | None = None
    f_vector: np.ndarray | None = None


def dual_vector_jet(bd: BaseData) -> Jet:
    """f^λ = ε^{λμν} f_μν / (2 sqrt|g|) for a three-dimensional base (order 2)."""
    if bd.dim != 3:
        raise DimensionError("the vector dual of f exists only for a 3-dimensional base")
    eps_f = J.linear("lmn,mn->l", EPS3, bd.f_low)
    return J.contract("l,->l", eps_f, bd.sqrt_det.truncate(eps_f.order).reciprocal()) * 0.5


def dual_scalar_jet(bd: BaseData) -> Jet:
    """f with f_μν = sqrt|g| ε_μν f for a two-dimensional base (order 2)."""
    if bd.dim != 2:
        raise DimensionError("the scalar dual of f exists only for a 2-dimensional base")
    f01 = bd.f_low[0, 1]
    return f01 * bd.sqrt_det.truncate(f01.order).reciprocal() * (1.0 / EPS2_DOWN[0, 1])


def field_strength(kk: KKDecomposition, point: Sequence[float]) -> FieldStrength:
    bd = base_data(kk, point, sigma_ok=True)
    out = FieldStrength(f_lower=bd.f_low.value, invariant_square=bd.FF)
    if bd.dim == 2:
        out.f_scalar = float(dual_scalar_jet(bd).value)
    elif bd.dim == 3:
        out.f_vector = dual_vector_jet(bd).value
    return out


# ---------------------------------------------------------------------------
# Reduced curvature
# ---------------------------------------------------------------------------

def reduced_riemann(kk: KKDecomposition, point, bd: BaseData | None = None) -> dict[str, np.ndarray]:
    """R^{μνλτ}, R^{-λμν} and R^{-μ-ν} from lower-dimensional data."""
    bd = bd or base_data(kk, point)
    a = bd.a_low
    r4 = bd.riemann_up + 0.25 * quadratic_f(bd.f_up)
    r3 = 0.5 * bd.df_up - np.einsum("t,tlmn->lmn", a, r4)
    r2 = (
        -0.25 * bd.F
        - np.einsum("l,mln->mn", a, r3)
        - np.einsum("l,nlm->mn", a, r3)
        - np.einsum("l,t,lmtn->mn", a, a, r4)
    )
    return {"R_base": r4, "R_mixed": r3, "R_mm": r2}


def reduced_ricci(kk: KKDecomposition, point, bd: BaseData | None = None) -> dict[str, np.ndarray]:
    """R^{μν}, R^{-μ}, R^{--} and the scalar R."""
    bd = bd or base_data(kk, point)
    a = bd.a_low
    ric = bd.ricci_up - 0.5 * bd.F
    # d_ν f^{νμ} = -div_f^μ
    mixed = 0.5 * bd.div_f - ric @ a
    mm = -0.25 * bd.FF - 2 * a @ mixed - a @ ric @ a
    return {"R_base": ric, "R_mixed": mixed, "R_mm": np.asarray(mm), "R": bd.scalar - 0.25 * bd.FF}


def c_tensor(bd: BaseData, n: int) -> np.ndarray:
    """c^{μν}: traceless combination whose vanishing is the Einstein-like condition."""
    h = bd.hinv
    return (
        bd.ricci_up
        - h * bd.scalar / (n - 1)
        - n / 4 * (bd.F - h * bd.FF / (n - 1))
    ) / (n - 2)


def t_tensor(bd: BaseData, n: int) -> np.ndarray:
    return bd.F - bd.hinv * bd.FF / (2 * (n - 2))


def reduced_weyl(kk: KKDecomposition, point, bd: BaseData | None = None) -> dict[str, np.ndarray]:
    """Weyl components C^{μνλτ}, c^{μν}, t^{μν}, C^{-λμν} from lower-dimensional data.

    The quadratic field-strength term uses the same index structure as the
    reduced Riemann tensor, ``f^{μτ}f^{λν} - f^{μλ}f^{τν} + 2f^{μν}f^{λτ}``.
    At n = 4 the three-dimensional Weyl tensor is identically zero and is
    omitted.
    """
    n = kk.n
    if n < 4:
        raise DimensionError("reduced Weyl formulas need n >= 4")
    bd = bd or base_data(kk, point)
    h = bd.hinv
    c = c_tensor(bd, n)
    t = t_tensor(bd, n)
    cw = bd.weyl_up if n >= 5 else 0.0
    c4 = cw + 2.0 / (n - 3) * wedge(h, c) + 0.25 * quadratic_f(bd.f_up) + 1.5 / (n - 3) * wedge(h, t)
    x = bd.div_f  # d_τ f^{ντ}
    hx = 0.5 * (np.einsum("lm,n->lmn", h, x) - np.einsum("ln,m->lmn", h, x))
    c3 = 0.5 * bd.df_up + hx / (n - 2) - np.einsum("t,tlmn->lmn", bd.a_low, c4)
    return {"C_base": c4, "c": c, "t": t, "C_mixed": c3}


def oracle_blocks(full: np.ndarray) -> dict[str, np.ndarray]:
    """Split an all-upper n-dimensional array into base / fiber blocks."""
    m = full.shape[0] - 1
    if full.ndim == 4:
        return {
            "R_base": full[:m, :m, :m, :m],
            "R_mixed": full[m, :m, :m, :m],
            "R_mm": full[m, :m, m, :m],
        }
    if full.ndim == 2:
        return {"R_base": full[:m, :m], "R_mixed": full[m, :m], "R_mm": np.asarray(full[m, m])}
    raise ValueError("expected a rank-2 or rank-4 array")


def lift_point(point, n: int, fiber_value: float = 0.0) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    if len(p) == n:
        return p
    return np.concatenate([p, [fiber_value]])


def oracle_pairs(kk: KKDecomposition, point, backend: str = "jets") -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Reduced curvature blocks next to the brute-force n-dimensional ones.

    Returns ``block -> (reduced, direct)`` for the Riemann, Ricci and
    (n >= 4) Weyl blocks, all indices up.
    """
    from .tensors import curvature_at

    x = np.asarray(point, dtype=float)[: kk.base.dim]
    b = curvature_at(assemble(kk), lift_point(x, kk.n), backend)
    bd = base_data(kk, x)
    out: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def put(prefix, reduced, direct):
        for key, val in reduced.items():
            out[f"{prefix}{key[1:]}"] = (np.asarray(val), np.asarray(direct[key]))

    put("riemann", reduced_riemann(kk, x, bd), oracle_blocks(b.riemann_up))
    ric = reduced_ricci(kk, x, bd)
    put("ricci", {k: v for k, v in ric.items() if k != "R"}, oracle_blocks(b.ricci))
    out["ricci_scalar"] = (np.asarray(float(ric["R"])), np.asarray(b.ricci_scalar))
    if kk.n >= 4:
        w = reduced_weyl(kk, x, bd)
        ob = oracle_blocks(b.weyl)
        put("weyl", {"C_base": w["C_base"], "C_mixed": w["C_mixed"]}, {"C_base": ob["R_base"], "C_mixed": ob["R_mixed"]})
        # c^{μν} is the base trace of the base Weyl block
        out["weyl_c"] = (w["c"], np.einsum("ab,ambn->mn", bd.h, ob["R_base"]))
    return out


def oracle_comparison(kk: KKDecomposition, point, backend: str = "jets") -> dict[str, tuple[float, float]]:
    """``block -> (max |reduced - direct|, max |direct|)`` from :func:`oracle_pairs`."""
    return {
        k: (float(np.max(np.abs(r - d))), float(np.max(np.abs(d))))
        for k, (r, d) in oracle_pairs(kk, point, backend).items()
    }
