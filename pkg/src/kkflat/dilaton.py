"""Two-dimensional dilaton gravity: potentials to Eddington-Finkelstein metrics.

A model ``∫(X R + U(X)(∇X)² - V(X))`` has the generic solution

    ds² = e^{Q(X)} (2 du dX + K(X) du²),
    Q = -∫U,   K = ∫ e^Q V + modulus,

and isolated constant-dilaton vacua at the roots of ``V`` with curvature
``R = V'(X)``.  Catalog models carry closed forms for ``Q`` and ``K``; other
models integrate by adaptive quadrature from a chosen base point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import brentq

from .expr import Expr, Integral, Unary, diff, evaluate, evaluate_array, parse
from .tensors import MetricField

ROOT_SCAN = (-10.0, 10.0)
ROOT_CELLS = 10_000
ROOT_XTOL = 1e-12


@dataclass(frozen=True)
class DilatonModel:
    """Potentials ``U``, ``V`` in the dilaton ``X`` plus the modulus of ``K``.

    ``Q`` and ``K`` may be supplied in closed form (``K`` then already
    includes the modulus).  Otherwise they are integrals from ``lower``.
    """

    name: str
    U: Expr
    V: Expr
    params: Mapping[str, float] = field(default_factory=dict)
    modulus: float = 0.0
    Q: Expr | None = None
    K: Expr | None = None
    variable: str = "X"
    lower: float = 0.0

    @classmethod
    def from_strings(cls, U: str, V: str, params: Mapping[str, float] | None = None,
                     modulus: float = 0.0, name: str = "custom", variable: str = "X",
                     lower: float = 0.0) -> "DilatonModel":
        params = dict(params or {})
        u = parse(U, [variable], list(params))
        v = parse(V, [variable], list(params))
        return cls(name, u, v, params, modulus, variable=variable, lower=lower)

    def q_expr(self) -> Expr:
        if self.Q is not None:
            return self.Q
        return -Integral(self.U, self.variable, self.lower)

    def k_expr(self) -> Expr:
        if self.K is not None:
            return self.K
        return Integral(Unary("exp", self.q_expr()) * self.V, self.variable, self.lower, self.modulus)

    def _eval(self, e: Expr, x: float) -> float:
        return evaluate(e, [x], self.params, [self.variable])

    def V_array(self, xs) -> np.ndarray:
        return evaluate_array(self.V, self.variable, xs, self.params)

    def K_array(self, xs) -> np.ndarray:
        return evaluate_array(self.k_expr(), self.variable, xs, self.params)

    def U_at(self, x: float) -> float:
        return self._eval(self.U, x)

    def V_at(self, x: float) -> float:
        return self._eval(self.V, x)

    def dV_at(self, x: float) -> float:
        return self._eval(diff(self.V, self.variable), x)

    def Q_at(self, x: float) -> float:
        return self._eval(self.q_expr(), x)

    def K_at(self, x: float) -> float:
        return self._eval(self.k_expr(), x)

    def metric(self, time: str = "u") -> MetricField:
        """Eddington-Finkelstein metric in coordinates ``(time, X)``."""
        eq = Unary("exp", self.q_expr()) if not _is_zero(self.q_expr()) else None
        k = self.k_expr()
        if eq is None:
            mat = [[k, 1.0], [1.0, 0.0]]
        else:
            mat = [[eq * k, eq], [eq, 0.0]]
        return MetricField.from_matrix(mat, (time, self.variable), dict(self.params))

    def ricci_closed_form(self, x: float) -> float:
        """``R = V' - 2UV - U' e^{-Q} K``."""
        dU = self._eval(diff(self.U, self.variable), x)
        return self.dV_at(x) - 2 * self.U_at(x) * self.V_at(x) - dU * np.exp(-self.Q_at(x)) * self.K_at(x)


def _is_zero(e: Expr) -> bool:
    from .expr import Const

    return isinstance(e, Const) and e.value == 0.0


def dilaton_generate(model: DilatonModel, time: str = "u") -> MetricField:
    return model.metric(time)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _p(text: str, params) -> Expr:
    return parse(text, ["X"], list(params))


def sine_model(B: float, A: float) -> DilatonModel:
    """Sine-Gordon potential; ``A`` is the constant of motion."""
    ps = {"A": A, "B": B}
    return DilatonModel("I1", _p("0", ps), _p("-(B/2)*sin(X/2)", ps), ps, A,
                        Q=_p("0", ps), K=_p("A + B*cos(X/2)", ps))


def sinh_model(A: float, B: float) -> DilatonModel:
    """Sinh-Gordon potential with kinetic term; ``B`` is the constant of motion."""
    ps = {"A": A, "B": B}
    return DilatonModel("I1_dual", _p("tanh(X/2)/2", ps), _p("(A/4)*sinh(X)", ps), ps, B,
                        Q=_p("-ln(cosh(X/2))", ps), K=_p("B + A*cosh(X/2)", ps))


def cubic_model(Y: float, M: float) -> DilatonModel:
    """Cubic potential ``V = X³ - Y X``; ``M`` is the constant of motion."""
    ps = {"Y": Y, "M": M}
    return DilatonModel("I2", _p("0", ps), _p("X^3 - Y*X", ps), ps, -2 * M,
                        Q=_p("0", ps), K=_p("X^4/4 - (Y/2)*X^2 - 2*M", ps))


def inverse_cubic_model(Y: float, M: float) -> DilatonModel:
    """Partner of the cubic model; ``Y`` is the constant of motion."""
    ps = {"Y": Y, "M": M}
    return DilatonModel("I2_dual", _p("2/X", ps), _p("-1/(2*X) - 4*M*X^3", ps), ps, -Y / 2,
                        Q=_p("-ln(X^2)", ps), K=_p("1/(4*X^2) - 2*M*X^2 - Y/2", ps))


PRESETS = {
    "I1": (sine_model, ("B", "A")),
    "I1_dual": (sinh_model, ("A", "B")),
    "I2": (cubic_model, ("Y", "M")),
    "I2_dual": (inverse_cubic_model, ("Y", "M")),
}


def preset(name: str, **params) -> DilatonModel:
    try:
        maker, names = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown dilaton model {name!r}; choose from {sorted(PRESETS)}") from None
    missing = [n for n in names if n not in params]
    if missing:
        raise ValueError(f"model {name} needs parameters {missing}")
    return maker(*(float(params[n]) for n in names))


def without_closed_forms(model: DilatonModel, lower: float, modulus: float | None = None) -> DilatonModel:
    """Same potentials, ``Q`` and ``K`` recomputed by quadrature from ``lower``."""
    return DilatonModel(model.name + "_quad", model.U, model.V, model.params,
                        model.modulus if modulus is None else modulus, variable=model.variable, lower=lower)


# base points where the closed-form Q vanishes, so quadrature needs no shift
QUADRATURE_BASE = {"I1": 0.0, "I1_dual": 0.0, "I2": 0.0, "I2_dual": 1.0}


def quadrature_twin(model: DilatonModel, lower: float | None = None) -> DilatonModel:
    """Quadrature model that should coincide with the closed forms of ``model``.

    The base point must be a zero of the closed-form ``Q``; the modulus is
    the closed-form ``K`` there.
    """
    if model.Q is None or model.K is None:
        raise ValueError("model has no closed forms to match")
    if lower is None:
        lower = QUADRATURE_BASE.get(model.name, 0.0)
    if abs(model.Q_at(lower)) > 1e-14:
        raise ValueError(f"closed-form Q does not vanish at the base point {lower}")
    return without_closed_forms(model, lower, model.K_at(lower))


# ---------------------------------------------------------------------------
# Roots
# ---------------------------------------------------------------------------

def sign_change_roots(fn, lo: float = ROOT_SCAN[0], hi: float = ROOT_SCAN[1],
                      cells: int = ROOT_CELLS, xtol: float = ROOT_XTOL, grid_fn=None) -> list[float]:
    """All simple roots of ``fn`` on ``[lo, hi]`` located by bracketing and refined by Brent's method.

    Points where ``fn`` raises (outside its domain) break brackets.  ``grid_fn``
    is an optional vectorized version of ``fn`` (NaN outside the domain) used
    for the bracketing pass.
    """
    xs = np.linspace(lo, hi, cells + 1)
    if grid_fn is not None:
        vals = list(np.asarray(grid_fn(xs), dtype=float))
    else:
        vals = []
        for x in xs:
            try:
                v = float(fn(x))
            except (ArithmeticError, ValueError):
                v = float("nan")
            vals.append(v)
    v = np.asarray(vals, dtype=float)
    a, b = v[:-1], v[1:]
    finite = np.isfinite(a) & np.isfinite(b)
    hits = np.flatnonzero(finite & ((a == 0.0) | (a * b < 0)))
    roots: list[float] = []
    for i in hits:
        if v[i] == 0.0:
            r = float(xs[i])
        else:
            r = float(brentq(fn, xs[i], xs[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
        if not roots or abs(r - roots[-1]) > 10 * xtol:
            roots.append(r)
    if np.isfinite(v[-1]) and v[-1] == 0.0 and (not roots or abs(xs[-1] - roots[-1]) > 10 * xtol):
        roots.append(float(xs[-1]))
    return roots


@dataclass(frozen=True)
class Vacuum:
    X: float
    R: float


def constant_dilaton_vacua(model: DilatonModel, lo: float = ROOT_SCAN[0], hi: float = ROOT_SCAN[1],
                           cells: int = ROOT_CELLS) -> list[Vacuum]:
    """Roots of ``V`` with their curvature ``R = V'(X*)``."""
    return [Vacuum(x, model.dV_at(x)) for x in sign_change_roots(model.V_at, lo, hi, cells, grid_fn=model.V_array)]


def horizon_roots(model: DilatonModel, lo: float = ROOT_SCAN[0], hi: float = ROOT_SCAN[1],
                  cells: int = ROOT_CELLS) -> list[float]:
    """Killing horizons: roots of ``K``."""
    return sign_change_roots(model.K_at, lo, hi, cells, grid_fn=model.K_array)
