"""Explicit conformally flat backgrounds and their reference quantities.

Each family builds a base metric with its Killing vector ``f^μ`` (the dual of
the field strength of the lift), a lift to four dimensions where one exists,
a safe sampling box and a closed-form Ricci scalar.

Families
--------
``flat``          Minkowski 3-space, trivial lift.
``max_sym_3d``    (A)dS_3 in static form, trivial lift; ``sign=+1`` selects the
                  positive-λ²ρ² branch (r = -6λ²), ``sign=-1`` anti-de Sitter
                  (r = +6λ²).
``const_phi``     AdS_2 × circle with ``a_t = -λρ``; covariantly constant f.
``sol1_static``   Static chart of the time-like Killing branch.
``sol1_ef``       Null chart (u, Φ, θ) of the same geometry.
``sol1_dual_ef``  Null chart (u, Φ̂, θ) with ``tanh(Φ̂/2) = sin(Φ/2)``.
``sol2_static``   Static chart of the space-like Killing branch, ``a_t = -ρ²/2``.
``sol2_ef``       Null chart (u, X, θ) of the same geometry, ``a_u = -X²/2``.
``dilaton_2d``    Eddington-Finkelstein solution of a 2D dilaton model.

For the time-like branch the printed line elements are used verbatim; the lift
that makes them conformally flat has ``f^t = 1/2``, i.e. ``a_θ = -√(a-ρ²)``
(see the decision ledger).  Every family accepts ``perturb``, a constant
added to one diagonal metric component, to build broken backgrounds.  Static
charts shift the first component; null charts shift the angular one, since
there a shift of the first only moves an integration constant.  For
``dilaton_2d`` the shift is ``perturb * X²`` in the first component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad

from . import dilaton as D
from .expr import Const, Expr, Unary, evaluate, eval_jet3, parse
from .kk import KKDecomposition
from .sampling import sample_box
from .tensors import MetricField

FAMILIES = (
    "flat", "max_sym_3d", "const_phi", "sol1_static", "sol1_ef", "sol1_dual_ef",
    "sol2_static", "sol2_ef", "dilaton_2d",
)

TWO_PI = 2 * math.pi
K_MIN = 0.05


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class FamilySpec:
    name: str
    defaults: Mapping[str, object]
    coords: tuple[str, ...]
    description: str
    gauge: str
    killing: str
    printed_gauge: str | None = None


SPECS = {
    "flat": FamilySpec("flat", {}, ("t", "x", "y"), "Minkowski space in three dimensions",
                       "a = 0", "f = 0"),
    "max_sym_3d": FamilySpec("max_sym_3d", {"lam": 0.5, "sign": -1}, ("t", "rho", "theta"),
                             "maximally symmetric 3-space, static form", "a = 0", "f = 0"),
    "const_phi": FamilySpec("const_phi", {"lam": 1.0}, ("t", "rho", "theta"),
                            "AdS_2 times a circle of constant radius", "a_t = -lam*rho", "f^theta = lam"),
    "sol1_static": FamilySpec("sol1_static", {"A": 1.0, "B": 0.5, "a": 4.0}, ("t", "rho", "theta"),
                              "time-like Killing branch, static chart", "a_theta = -sqrt(a - rho^2)",
                              "f^t = 1/2", "a_theta = -2*sqrt(a - rho^2)"),
    "sol1_ef": FamilySpec("sol1_ef", {"A": 1.0, "B": 0.5, "a": 4.0}, ("u", "Phi", "theta"),
                          "time-like Killing branch, null chart", "a_theta = -sqrt(a)*cos(Phi/2)",
                          "f^u = 1/2"),
    "sol1_dual_ef": FamilySpec("sol1_dual_ef", {"A": 1.0, "B": 0.5, "a": 4.0}, ("u", "Phih", "theta"),
                               "time-like Killing branch, null chart with tanh(Phih/2) = sin(Phi/2)",
                               "a_theta = -sqrt(a)/cosh(Phih/2)", "f^u = 1/2"),
    "sol2_static": FamilySpec("sol2_static", {"A": 0.3, "B": 0.2}, ("t", "rho", "theta"),
                              "space-like Killing branch, static chart", "a_t = -rho^2/2", "f^theta = sgn(rho)"),
    "sol2_ef": FamilySpec("sol2_ef", {"A": 0.3, "B": 0.2}, ("u", "X", "theta"),
                          "space-like Killing branch, null chart", "a_u = -X^2/2", "f^theta = sgn(X)"),
    "dilaton_2d": FamilySpec("dilaton_2d", {"model": "I2"}, ("u", "X"),
                             "Eddington-Finkelstein solution of a 2D dilaton model", "none", "f^u = 1"),
}

MODEL_DEFAULTS = {
    "I1": {"B": 1.0, "A": 0.3},
    "I1_dual": {"A": 1.0, "B": 0.3},
    "I2": {"Y": 1.0, "M": -0.1},
    "I2_dual": {"Y": 0.1, "M": 0.1},
}

MODEL_BOXES = {
    "I1": (0.1, TWO_PI - 0.1),
    "I1_dual": (0.1, 4.0),
    "I2": (0.2, 3.0),
    "I2_dual": (0.2, 3.0),
}


@dataclass(frozen=True)
class SolutionInstance:
    family: str
    params: Mapping[str, object]
    base: MetricField
    lift: KKDecomposition | None
    killing: tuple[Expr, ...] | None
    box: tuple[tuple[float, float], ...]
    accept: Callable[[np.ndarray], bool] | None = None
    model: D.DilatonModel | None = None
    gauge: str = ""
    description: str = ""
    ricci: Callable[[np.ndarray], float] | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def numeric_params(self) -> dict[str, float]:
        return {k: float(v) for k, v in self.params.items() if isinstance(v, (int, float))}

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        return sample_box(self.box, count, seed, self.accept)

    def closed_form_ricci(self, point) -> float:
        if self.ricci is None:
            raise CatalogError(f"family {self.family} has no closed-form Ricci scalar")
        return float(self.ricci(np.asarray(point, dtype=float)))

    @property
    def perturbed(self) -> bool:
        return float(self.params.get("perturb", 0.0)) != 0.0


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _metric(rows, coords, params, perturb: float, slot: int = 0) -> MetricField:
    names = list(params)
    mat = [[parse(e, coords, names) if isinstance(e, str) else Const(float(e)) for e in row] for row in rows]
    if perturb:
        mat[slot][slot] = mat[slot][slot] + Const(perturb)
    return MetricField.from_matrix(mat, coords, params)


def _vec(comps, coords, params) -> tuple[Expr, ...]:
    return tuple(parse(c, coords, list(params)) for c in comps)


def _lift(base: MetricField, comps) -> KKDecomposition:
    return KKDecomposition(base, _vec(comps, base.coords, base.params))


def _box3(lo, hi) -> tuple:
    return ((-1.0, 1.0), (lo, hi), (0.0, TWO_PI))


def _check_positive(params, *names):
    for n in names:
        if not float(params[n]) > 0:
            raise CatalogError(f"parameter {n} must be positive, got {params[n]}")


def _build_flat(p, pert):
    c = SPECS["flat"].coords
    base = _metric([[1, 0, 0], [0, -1, 0], [0, 0, -1]], c, p, pert)
    return dict(base=base, lift=_lift(base, ["0", "0", "0"]), killing=_vec(["0", "0", "0"], c, p),
                box=((-1.0, 1.0),) * 3, ricci=lambda x: 0.0)


def _build_max_sym(p, pert):
    lam, sign = float(p["lam"]), int(p["sign"])
    if sign not in (1, -1):
        raise CatalogError("sign must be +1 or -1")
    if lam < 0:
        raise CatalogError("lam must be non-negative")
    c = SPECS["max_sym_3d"].coords
    s = "-" if sign > 0 else "+"
    w = f"(1 {s} lam^2*rho^2)"
    base = _metric([[w, 0, 0], [0, f"-1/{w}", 0], [0, 0, "-rho^2"]], c, p, pert)
    rho_max = 2.0 if sign < 0 or lam == 0 else min(2.0, 0.9 / lam)
    return dict(base=base, lift=_lift(base, ["0", "0", "0"]), killing=_vec(["0", "0", "0"], c, p),
                box=_box3(0.1, rho_max), ricci=lambda x: -sign * 6 * lam**2)


def _build_const_phi(p, pert):
    lam = float(p["lam"])
    c = SPECS["const_phi"].coords
    w = "(1 + lam^2*rho^2)"
    base = _metric([[w, 0, 0], [0, f"-1/{w}", 0], [0, 0, -1]], c, p, pert)
    return dict(base=base, lift=_lift(base, ["-lam*rho", "0", "0"]), killing=_vec(["0", "0", "lam"], c, p),
                box=_box3(-2.0, 2.0), ricci=lambda x: 2 * lam**2)


def _sol1_ricci(cos_half):
    def r(A, B):
        return -1.25 * B * cos_half - A / 2
    return r


def _build_sol1_static(p, pert):
    _check_positive(p, "a")
    A, B, a = (float(p[k]) for k in "ABa")
    c = SPECS["sol1_static"].coords
    g = "(A + B*sqrt(1 - rho^2/a))"
    base = _metric([[g, 0, 0], [0, f"-(4/a)/(1 - rho^2/a)/{g}", 0], [0, 0, "-rho^2"]], c, p, pert)
    ra = math.sqrt(a)
    return dict(
        base=base, lift=_lift(base, ["0", "0", "-sqrt(a - rho^2)"]), killing=_vec(["1/2", "0", "0"], c, p),
        box=_box3(0.1 * ra, 0.9 * ra),
        accept=lambda x: abs(A + B * math.sqrt(1 - x[1] ** 2 / a)) >= K_MIN,
        ricci=lambda x: -1.25 * B * math.sqrt(1 - x[1] ** 2 / a) - A / 2,
    )


def _build_sol1_ef(p, pert):
    _check_positive(p, "a")
    A, B, a = (float(p[k]) for k in "ABa")
    c = SPECS["sol1_ef"].coords
    base = _metric([["A + B*cos(Phi/2)", 1, 0], [1, 0, 0], [0, 0, "-a*sin(Phi/2)^2"]], c, p, pert, slot=2)
    return dict(
        base=base, lift=_lift(base, ["0", "0", "-sqrt(a)*cos(Phi/2)"]), killing=_vec(["1/2", "0", "0"], c, p),
        box=_box3(0.1, math.pi - 0.1),
        accept=lambda x: abs(A + B * math.cos(x[1] / 2)) >= K_MIN,
        ricci=lambda x: -1.25 * B * math.cos(x[1] / 2) - A / 2,
    )


def _build_sol1_dual_ef(p, pert):
    _check_positive(p, "a")
    A, B, a = (float(p[k]) for k in "ABa")
    c = SPECS["sol1_dual_ef"].coords
    base = _metric([["(B + A*cosh(Phih/2))/cosh(Phih/2)", "1/cosh(Phih/2)", 0],
                    ["1/cosh(Phih/2)", 0, 0], [0, 0, "-a*tanh(Phih/2)^2"]], c, p, pert, slot=2)
    return dict(
        base=base, lift=_lift(base, ["0", "0", "-sqrt(a)/cosh(Phih/2)"]), killing=_vec(["1/2", "0", "0"], c, p),
        box=_box3(0.1, 4.0),
        accept=lambda x: abs(B + A * math.cosh(x[1] / 2)) >= K_MIN,
        ricci=lambda x: -1.25 * B / math.cosh(x[1] / 2) - A / 2,
    )


def _quartic(A, B):
    return lambda x: 0.25 * x**4 + A * x**2 + B


def _sol2_accept(A, B):
    k = _quartic(A, B)
    return lambda x: abs(x[1]) >= 0.2 and abs(k(x[1])) >= K_MIN


def _build_sol2_static(p, pert):
    A, B = float(p["A"]), float(p["B"])
    c = SPECS["sol2_static"].coords
    k = "(rho^4/4 + A*rho^2 + B)"
    base = _metric([[k, 0, 0], [0, f"-1/{k}", 0], [0, 0, "-rho^2"]], c, p, pert)
    return dict(base=base, lift=_lift(base, ["-rho^2/2", "0", "0"]), killing=_vec(["0", "0", "rho/sqrt(rho^2)"], c, p),
                box=_box3(-3.0, 3.0), accept=_sol2_accept(A, B), ricci=lambda x: 5 * x[1] ** 2 + 6 * A)


def _build_sol2_ef(p, pert):
    A, B = float(p["A"]), float(p["B"])
    c = SPECS["sol2_ef"].coords
    base = _metric([["X^4/4 + A*X^2 + B", 1, 0], [1, 0, 0], [0, 0, "-X^2"]], c, p, pert, slot=2)
    return dict(base=base, lift=_lift(base, ["-X^2/2", "0", "0"]), killing=_vec(["0", "0", "X/sqrt(X^2)"], c, p),
                box=_box3(-3.0, 3.0), accept=_sol2_accept(A, B), ricci=lambda x: 5 * x[1] ** 2 + 6 * A)


def _build_dilaton(p, pert):
    name = str(p["model"])
    if name not in D.PRESETS:
        raise CatalogError(f"unknown dilaton model {name!r}; choose from {sorted(D.PRESETS)}")
    model_params = {k: float(v) for k, v in p.items() if k not in ("model", "perturb")}
    model = D.preset(name, **model_params)
    g = model.metric("u")
    if pert:
        g = _metric_with_offset(g, pert)
    lo, hi = MODEL_BOXES[name]
    return dict(
        base=g, lift=None, killing=_vec(["1", "0"], g.coords, g.params), model=model,
        box=((-1.0, 1.0), (lo, hi)),
        accept=lambda x: abs(model.K_at(x[1])) >= K_MIN,
        ricci=lambda x: model.ricci_closed_form(x[1]),
    )


def _metric_with_offset(g: MetricField, offset: float) -> MetricField:
    # a constant or linear shift of g_uu would leave the 2D curvature unchanged
    mat = g.matrix()
    mat[0][0] = mat[0][0] + Const(offset) * parse(f"{g.coords[1]}^2", g.coords, [])
    return MetricField.from_matrix(mat, g.coords, g.params, g.signature)


_BUILDERS = {
    "flat": _build_flat,
    "max_sym_3d": _build_max_sym,
    "const_phi": _build_const_phi,
    "sol1_static": _build_sol1_static,
    "sol1_ef": _build_sol1_ef,
    "sol1_dual_ef": _build_sol1_dual_ef,
    "sol2_static": _build_sol2_static,
    "sol2_ef": _build_sol2_ef,
    "dilaton_2d": _build_dilaton,
}


def family_params(family: str, params: Mapping[str, object] | None = None) -> dict[str, object]:
    """Defaults of ``family`` updated by ``params``; unknown names are rejected."""
    if family not in SPECS:
        raise CatalogError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    out: dict[str, object] = dict(SPECS[family].defaults)
    params = dict(params or {})
    if family == "dilaton_2d":
        model = str(params.get("model", out["model"]))
        if model not in MODEL_DEFAULTS:
            raise CatalogError(f"unknown dilaton model {model!r}; choose from {sorted(MODEL_DEFAULTS)}")
        out["model"] = model
        out.update(MODEL_DEFAULTS[model])
    allowed = set(out) | {"perturb"}
    extra = set(params) - allowed
    if extra:
        raise CatalogError(f"family {family} does not take parameters {sorted(extra)}; allowed: {sorted(allowed)}")
    out.update(params)
    out.setdefault("perturb", 0.0)
    for k, v in out.items():
        if k != "model":
            try:
                out[k] = float(v)
            except (TypeError, ValueError):
                raise CatalogError(f"parameter {k} must be numeric, got {v!r}") from None
    if "sign" in out:
        out["sign"] = int(out["sign"])
    return out


def instantiate(family: str, params: Mapping[str, object] | None = None) -> SolutionInstance:
    p = family_params(family, params)
    pert = float(p["perturb"])
    metric_params = {k: v for k, v in p.items() if k not in ("perturb", "model")}
    spec = SPECS[family]
    built = _BUILDERS[family](metric_params if family != "dilaton_2d" else p, pert)
    return SolutionInstance(
        family=family, params=p, gauge=spec.gauge, description=spec.description, **built,
    )


def printed_lift(instance: SolutionInstance) -> KKDecomposition | None:
    """The lift with the gauge exactly as printed, which can differ from :attr:`SolutionInstance.lift`.

    Only the static time-like chart differs: its printed potential carries an
    extra factor 2 and the resulting lift is not conformally flat.
    """
    if instance.family == "sol1_static":
        return _lift(instance.base, ["0", "0", "-2*sqrt(a - rho^2)"])
    return instance.lift


def closed_form_ricci(instance: SolutionInstance, point) -> float:
    return instance.closed_form_ricci(point)


def expected_curvature_constant(instance: SolutionInstance) -> float | None:
    """Known value of the flatness constant, where one is fixed in closed form."""
    p = instance.params
    if instance.family == "const_phi":
        return 3 * float(p["lam"]) ** 2
    if instance.family == "max_sym_3d":
        return int(p["sign"]) * 6 * float(p["lam"]) ** 2
    if instance.family == "flat":
        return 0.0
    return None


def catalog_listing() -> list[dict]:
    """Static description of every family (used by the CLI)."""
    out = []
    for name in FAMILIES:
        spec = SPECS[name]
        entry = {
            "family": name,
            "coords": list(spec.coords),
            "defaults": dict(spec.defaults),
            "description": spec.description,
            "gauge": spec.gauge,
            "printed_gauge": spec.printed_gauge or spec.gauge,
            "killing_vector": spec.killing,
            "lift": name != "dilaton_2d",
        }
        if name == "dilaton_2d":
            entry["models"] = {m: dict(v) for m, v in MODEL_DEFAULTS.items()}
        out.append(entry)
    return out


# ---------------------------------------------------------------------------
# Coordinate maps between charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartMap:
    """Map ``source point -> target point`` with its Jacobian ∂target/∂source."""

    source: SolutionInstance
    target: SolutionInstance
    forward: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    box: tuple[tuple[float, float], ...]

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        """Source points inside the region where the map is a diffeomorphism."""
        return sample_box(self.box, count, seed, self.source.accept)

    def pullback(self, point) -> np.ndarray:
        x = np.asarray(point, dtype=float)
        jac = self.jacobian(x)
        return jac.T @ self.target.base.value(self.forward(x)) @ jac

    def max_mismatch(self, points) -> float:
        worst = 0.0
        for x in points:
            diff = self.pullback(x) - self.source.base.value(x)
            worst = max(worst, float(np.max(np.abs(diff))))
        return worst


def _time_shift(kfun, ref: float):
    def h(x):
        val, _ = quad(lambda y: 1.0 / kfun(y), ref, x, epsabs=1e-13, epsrel=1e-13, limit=200)
        return val
    return h


def chart_map(source: str, target: str, params: Mapping[str, object] | None = None) -> ChartMap:
    """Coordinate maps between presentations of the same geometry.

    Supported pairs: ``sol1_ef -> sol1_static``, ``sol1_ef -> sol1_dual_ef``,
    ``sol2_ef -> sol2_static`` and, for 2D dilaton models, ``I1 -> I1_dual``
    and ``I2 -> I2_dual`` (pass ``model`` in ``params``; the dual side reuses
    the same parameter values).
    """
    params = dict(params or {})
    s = instantiate(source, params)
    if source == "sol1_ef" and target == "sol1_static":
        A, B, a = (float(s.params[k]) for k in "ABa")
        K = lambda phi: A + B * math.cos(phi / 2)
        h = _time_shift(K, math.pi / 2)

        def fwd(x):
            return np.array([x[0] + h(x[1]), math.sqrt(a) * math.sin(x[1] / 2), x[2]])

        def jac(x):
            return np.array([[1, 1 / K(x[1]), 0], [0, 0.5 * math.sqrt(a) * math.cos(x[1] / 2), 0], [0, 0, 1]])

        return ChartMap(s, instantiate(target, params), fwd, jac, s.box)
    if source == "sol1_ef" and target == "sol1_dual_ef":
        def fwd(x):
            return np.array([x[0], 2 * math.atanh(math.sin(x[1] / 2)), x[2]])

        def jac(x):
            return np.diag([1.0, 1.0 / math.cos(x[1] / 2), 1.0])

        return ChartMap(s, instantiate(target, params), fwd, jac, s.box)
    if source == "sol2_ef" and target == "sol2_static":
        K = _quartic(float(s.params["A"]), float(s.params["B"]))

        def fwd(x):
            return np.array([x[0] + _time_shift(K, x[1] / abs(x[1]) * 3.0)(x[1]), x[1], x[2]])

        def jac(x):
            return np.array([[1, 1 / K(x[1]), 0], [0, 1, 0], [0, 0, 1]])

        return ChartMap(s, instantiate(target, params), fwd, jac, s.box)
    if source == target == "dilaton_2d":
        model = str(s.params["model"])
        dual = {"I1": "I1_dual", "I2": "I2_dual"}.get(model)
        if dual is None:
            raise CatalogError(f"no dual map from model {model!r}")
        tp = {k: v for k, v in s.params.items() if k not in ("model", "perturb")}
        t = instantiate("dilaton_2d", dict(tp, model=dual))
        if model == "I1":
            def fwd(x):
                return np.array([x[0], 2 * math.atanh(math.sin(x[1] / 2))])

            def jac(x):
                return np.diag([1.0, 1.0 / math.cos(x[1] / 2)])
        else:
            def fwd(x):
                return np.array([x[0], -1.0 / x[1]])

            def jac(x):
                return np.diag([1.0, 1.0 / x[1] ** 2])
        # the sine map is one-to-one only while cos(X/2) > 0
        box = ((-1.0, 1.0), (0.1, math.pi - 0.1)) if model == "I1" else s.box
        return ChartMap(s, t, fwd, jac, box)
    raise CatalogError(f"no chart map from {source} to {target}")


# ---------------------------------------------------------------------------
# Dilaton-variable presentation of the two non-constant branches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DilatonChart:
    """``e^Q (2 du dX + K du²) - X^{2α} dθ²`` with ``Q``, ``K`` expressions in ``X``.

    ``killing`` is ``'u'`` (f^u = 1) or ``'theta'`` (f^θ = 1); ``potential`` is
    the vector potential whose dual field strength equals that Killing vector.
    """

    name: str
    Q: Expr
    K: Expr
    alpha: float
    params: Mapping[str, float]
    killing: str
    potential: tuple[str, str, str]
    box: tuple[float, float]

    coords = ("u", "X", "theta")

    def metric(self, alpha: float | None = None) -> MetricField:
        alpha = self.alpha if alpha is None else alpha
        eq = Unary("exp", self.Q)
        phi2 = parse(f"X^{2 * alpha!r}", self.coords, [])
        mat = [[eq * self.K, eq, 0.0], [eq, 0.0, 0.0], [0.0, 0.0, -phi2]]
        return MetricField.from_matrix(mat, self.coords, dict(self.params))

    def lift(self) -> KKDecomposition:
        return _lift(self.metric(), list(self.potential))

    def jets(self, x: float):
        """Values and first two X-derivatives of Q and K."""
        q = eval_jet3(self.Q, [0.0, x, 0.0], self.params, self.coords).parts
        k = eval_jet3(self.K, [0.0, x, 0.0], self.params, self.coords).parts
        return (q[0], q[1][1], q[2][1, 1], q[3][1, 1, 1]), (k[0], k[1][1], k[2][1, 1], k[3][1, 1, 1])

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        return sample_box(((-1.0, 1.0), self.box, (0.0, TWO_PI)), count, seed)


def sol1_dilaton_chart(A: float = 1.0, B: float = 0.5, a: float = 4.0, normalization: float | None = None) -> DilatonChart:
    """Time-like branch with ``φ² = X``.

    ``e^{-Q} = N √x √(1-x)``, ``x = X/a``, with ``N = 2a`` by default, the
    normalization fixed by the first reduced ODE; ``K = e^{-Q}(A + B√(1-x))``.
    """
    if not a > 0:
        raise CatalogError("a must be positive")
    N = 2 * a if normalization is None else normalization
    ps = {"A": A, "B": B, "a": a, "N": N}
    co = DilatonChart.coords
    Q = parse("-ln(N*sqrt(X/a)*sqrt(1 - X/a))", co, list(ps))
    K = parse("N*sqrt(X/a)*sqrt(1 - X/a)*(A + B*sqrt(1 - X/a))", co, list(ps))
    # ∂_X a_θ = e^Q √X gives f^u = 1
    pot = ("0", "0", f"-(2*a/N)*sqrt(a)*sqrt(1 - X/a)")
    return DilatonChart("sol1", Q, K, 0.5, ps, "u", pot, (0.05 * a, 0.95 * a))


def sol2_dilaton_chart(A: float = 0.3, B: float = 0.2) -> DilatonChart:
    """Space-like branch with ``φ = X``, ``e^Q = 1``, ``K = X⁴/4 + A X² + B``."""
    ps = {"A": A, "B": B}
    co = DilatonChart.coords
    return DilatonChart("sol2", Const(0.0), parse("X^4/4 + A*X^2 + B", co, list(ps)), 1.0, ps, "theta",
                        ("-X^2/2", "0", "0"), (0.2, 3.0))


def minimaster_ode_residuals(chart: DilatonChart, x: float) -> tuple[float, float, float]:
    """Residuals of the two reduced ODEs of the time-like branch and their scale.

    ``e^{2Q} - 1/(4X²) - Q'/(2X)`` and
    ``K'' + K'(Q' - 1/(2X)) + K(Q'' - Q'/(2X))``.
    """
    (q0, q1, q2, _), (k0, k1, k2, _) = chart.jets(x)
    first = math.exp(2 * q0) - 1 / (4 * x * x) - q1 / (2 * x)
    second = k2 + k1 * (q1 - 1 / (2 * x)) + k0 * (q2 - q1 / (2 * x))
    scale = max(math.exp(2 * q0), 1 / (4 * x * x), abs(q1 / (2 * x)), abs(k2), abs(k1 * q1), abs(k0 * q2))
    return first, second, scale


def newminimaster_ode_residuals(chart: DilatonChart, x: float) -> tuple[float, float, float]:
    """Residuals of ``Q' = 0`` and ``K'' - K'(Q' + 1/X) - 2 e^Q X²``."""
    (q0, q1, _, _), (k0, k1, k2, _) = chart.jets(x)
    second = k2 - k1 * (q1 + 1 / x) - 2 * math.exp(q0) * x * x
    return q1, second, max(abs(k2), abs(k1 / x), 2 * math.exp(q0) * x * x)


def _ode_reports(fn, chart: DilatonChart, points, tol: float, names: tuple[str, str], what: tuple[str, str]):
    from .flatness import collect

    pts = np.atleast_2d(np.asarray(points, dtype=float))

    def first(p):
        r1, _, sc = fn(chart, float(p[1]))
        return np.array([r1]), sc

    def second(p):
        _, r2, sc = fn(chart, float(p[1]))
        return np.array([r2]), sc

    return [collect(names[0], pts, first, tol, what[0]), collect(names[1], pts, second, tol, what[1])]


def minimaster_residuals(chart: DilatonChart, points=None, tol: float = 1e-9):
    """Reports for the two reduced ODEs of the time-like branch at ``points`` (u, X, θ)."""
    pts = chart.sample(15) if points is None else points
    return _ode_reports(minimaster_ode_residuals, chart, pts, tol,
                        ("timelike_conformal_factor_ode", "timelike_killing_norm_ode"),
                        ("first-order equation for the conformal factor",
                         "second-order equation for the Killing norm"))


def newminimaster_residuals(chart: DilatonChart, points=None, tol: float = 1e-9):
    """Reports for the two reduced ODEs of the space-like branch."""
    pts = chart.sample(15) if points is None else points
    return _ode_reports(newminimaster_ode_residuals, chart, pts, tol,
                        ("spacelike_conformal_factor_ode", "spacelike_killing_norm_ode"),
                        ("conformal factor is constant", "second-order equation for the Killing norm"))


def horizon_roots(source, lo: float = D.ROOT_SCAN[0], hi: float = D.ROOT_SCAN[1],
                  cells: int = D.ROOT_CELLS) -> list[float]:
    """Roots of ``K`` for a dilaton model, a dilaton instance or a sol1/sol2 instance."""
    if isinstance(source, D.DilatonModel):
        return D.horizon_roots(source, lo, hi, cells)
    if not isinstance(source, SolutionInstance):
        raise CatalogError("horizon_roots needs a DilatonModel or a SolutionInstance")
    if source.model is not None:
        return D.horizon_roots(source.model, lo, hi, cells)
    p = source.params
    if source.family in ("sol2_ef", "sol2_static"):
        kfun = _quartic(float(p["A"]), float(p["B"]))
    elif source.family == "sol1_ef":
        kfun = lambda x: float(p["A"]) + float(p["B"]) * np.cos(x / 2)
    else:
        raise CatalogError(f"family {source.family} has no horizon function in its radial coordinate")
    return D.sign_change_roots(lambda x: float(kfun(x)), lo, hi, cells, grid_fn=kfun)


def sol1_gauge_q_derivative(a: float, x: float) -> float:
    """``Q' = -1/(2X) - 1/(2(X-a))``, the general solution of the differentiated first ODE."""
    return -1 / (2 * x) - 1 / (2 * (x - a))


# ---------------------------------------------------------------------------
# Closed-form 2D/3D curvature of the circular ansatz
# ---------------------------------------------------------------------------

def appendix_formulas(chart: DilatonChart, x: float, alpha: float | None = None) -> dict[str, float]:
    """Closed-form curvature of ``e^Q(2du dX + K du²) - X^{2α} dθ²`` at ``X = x``.

    ``U = -Q'`` and ``V = e^{-Q} K'`` are the potentials that generate the
    2D part; every entry is expressed through them.
    """
    a = chart.alpha if alpha is None else alpha
    (q0, q1, q2, _), (k0, k1, k2, _) = chart.jets(x)
    U, dU = -q1, -q2
    V = math.exp(-q0) * k1
    dV = math.exp(-q0) * (k2 - q1 * k1)
    emq = math.exp(-q0)
    eq = math.exp(q0)
    out = {
        "R_2d": dV - 2 * U * V - dU * emq * k0,
        "box_X": -V,
        "grad_X_sq": -emq * k0,
        "hess_lnX_uu": k0 / (2 * x) * (k0 * U - k1),
        "hess_lnX_uX": (k0 * U - k1) / (2 * x),
        "hess_lnX_XX": (x * U - 1) / x**2,
        "r_3d": dV + 2 * V * (a / x - U) + emq * k0 * (2 * a * (a - 1) / x**2 - dU),
    }
    r_ux = (dV * eq / 6 - V * eq / 6 * (a / x + 2 * U)
            + k0 / 6 * (4 * a * (1 - a) / x**2 - dU - 3 * a / x * U))
    out.update({
        "rhat_uu": k0 * r_ux,
        "rhat_uX": r_ux,
        "rhat_XX": a / x**2 * (1 - a - x * U),
        "rhat_utheta": 0.0,
        "rhat_Xtheta": 0.0,
        "rhat_thetatheta": (x ** (2 * a) / 3 * dV - x ** (2 * a - 1) / 3 * V * (a + 2 * x * U)
                            + x ** (2 * a - 2) / 3 * emq * k0 * (a * (1 - a) - x * x * dU)),
        # f^u = 1, f^θ = 0
        "that_u_uu": 2 / 3 * k0**2 * eq**2,
        "that_u_uX": 2 / 3 * k0 * eq**2,
        "that_u_XX": eq**2,
        "that_u_thetatheta": x ** (2 * a) * eq * k0 / 3,
        # f^θ = 1, f^α = 0
        "that_theta_uu": k0 * eq * x ** (2 * a) / 3,
        "that_theta_uX": eq * x ** (2 * a) / 3,
        "that_theta_XX": 0.0,
        "that_theta_thetatheta": 2 / 3 * x ** (4 * a),
    })
    return out


# ---------------------------------------------------------------------------
# Random backgrounds for oracle tests
# ---------------------------------------------------------------------------

def random_background(base_dim: int = 3, seed: int = 0, amplitude: float = 0.3) -> KKDecomposition:
    """Seeded Kaluza-Klein background with polynomial and trigonometric components.

    The base metric is ``diag(1, -1, ...)`` plus small random terms; the
    vector potential is random of the same shape.  Intended for points in
    ``[-0.5, 0.5]^base_dim``.
    """
    from .sampling import SplitMix64

    if not 2 <= base_dim <= 5:
        raise CatalogError("base_dim must be between 2 and 5")
    rng = SplitMix64(seed)
    coords = ("x", "y", "w", "v", "s")[:base_dim]

    def coeff():
        return amplitude * (2 * rng.uniform() - 1)

    def term_list():
        out = []
        for i, c in enumerate(coords):
            nxt = coords[(i + 1) % base_dim]
            out += [f"{coeff()!r}*{c}", f"{coeff()!r}*{c}*{nxt}", f"{coeff()!r}*sin({c})", f"{coeff()!r}*cos({nxt})*{c}^2"]
        return " + ".join(out)

    mat = [[None] * base_dim for _ in range(base_dim)]
    for i in range(base_dim):
        for j in range(i, base_dim):
            lead = ("1 + " if i == 0 else "-1 + ") if i == j else ""
            mat[i][j] = mat[j][i] = lead + term_list()
    base = MetricField.from_strings(mat, coords)
    vec = tuple(parse(term_list(), coords) for _ in range(base_dim))
    return KKDecomposition(base, vec)


def appendix_direct(chart: DilatonChart, x: float, alpha: float | None = None) -> dict[str, float]:
    """The quantities of :func:`appendix_formulas` computed from the metric itself."""
    from .tensors import curvature_at

    a = chart.alpha if alpha is None else alpha
    g3 = chart.metric(a)
    p3 = np.array([0.0, x, 0.0])
    b3 = curvature_at(g3, p3)
    m = g3.matrix()
    g2 = MetricField.from_matrix([row[:2] for row in m[:2]], chart.coords[:2], dict(chart.params))
    b2 = curvature_at(g2, p3[:2])
    gi2 = b2.inverse_metric
    gam2 = b2.christoffel  # [c, a, b]
    dlnx = np.array([0.0, 1.0 / x])
    ddlnx = np.array([[0.0, 0.0], [0.0, -1.0 / x**2]])
    hess = ddlnx - np.einsum("cab,c->ab", gam2, dlnx)
    h = b3.metric
    rhat = b3.ricci_lower - h * b3.ricci_scalar / 3
    out = {
        "R_2d": b2.ricci_scalar,
        "box_X": float(-np.einsum("ab,ab->", gi2, gam2[1])),
        "grad_X_sq": float(gi2[1, 1]),
        "hess_lnX_uu": hess[0, 0],
        "hess_lnX_uX": hess[0, 1],
        "hess_lnX_XX": hess[1, 1],
        "r_3d": b3.ricci_scalar,
    }
    names = ("u", "X", "theta")
    for i, j in ((0, 0), (0, 1), (1, 1), (0, 2), (1, 2), (2, 2)):
        out[f"rhat_{names[i]}{names[j]}"] = rhat[i, j]
    for case, f_up in (("u", np.array([1.0, 0.0, 0.0])), ("theta", np.array([0.0, 0.0, 1.0]))):
        fl = h @ f_up
        t = np.outer(fl, fl) - h * float(f_up @ fl) / 3
        for i, j in ((0, 0), (0, 1), (1, 1), (2, 2)):
            out[f"that_{case}_{names[i]}{names[j]}"] = t[i, j]
    return {k: float(v) for k, v in out.items()}


def appendix_residual(chart: DilatonChart, points=None, alpha: float | None = None,
                      tol: float = 1e-8):
    """Largest mismatch between the closed forms and the direct computation."""
    from .flatness import collect

    pts = chart.sample(15) if points is None else points
    a = chart.alpha if alpha is None else alpha

    def one(p):
        closed = appendix_formulas(chart, float(p[1]), a)
        direct = appendix_direct(chart, float(p[1]), a)
        diff = np.array([closed[k] - direct[k] for k in direct])
        return diff, max(abs(v) for v in direct.values())

    return collect(f"appendix_closed_forms_alpha_{a:g}", pts, one, tol,
                   "closed-form 2D and 3D curvature of the circular ansatz")
