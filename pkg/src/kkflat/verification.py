"""Residual suites for catalog instances, shared by the ``verify`` and ``scan`` commands."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import catalog as C
from . import dilaton as D
from . import flatness as F
from .flatness import ResidualReport, collect
from .kk import assemble, lift_point
from .tensors import curvature_at

STRICT_KILLING_TOL = 1e-10
DUAL_KILLING_TOL = 1e-9
CLOSED_FORM_TOL = 1e-9
EXPECTED_C_TOL = 1e-9
QUADRATURE_TOL = 1e-10


def _tol(default: float, override: float | None) -> float:
    return default if override is None else override


def lift_weyl_report(inst: C.SolutionInstance, points, tol: float, backend: str = "jets") -> ResidualReport:
    g = assemble(inst.lift)

    def one(p):
        b = curvature_at(g, lift_point(p, inst.lift.n), backend)
        return b.weyl, b.riemann_scale()

    return collect("lift_weyl", points, one, tol, "Weyl tensor of the lifted metric")


def closed_form_report(inst: C.SolutionInstance, points, tol: float, backend: str = "jets") -> ResidualReport:
    def one(p):
        r = curvature_at(inst.base, p, backend).ricci_scalar
        ref = inst.closed_form_ricci(p)
        return np.array([r - ref]), abs(ref)

    return collect("closed_form_ricci", points, one, tol, "computed Ricci scalar against its closed form")


def _constant_reports(inst, points, tol, override):
    const = F.curvature_constant(inst.lift, points, check=False)
    samples = np.abs(np.array(const.samples))
    spread = ResidualReport("curvature_constant_spread", const.points, const.spread,
                            float(samples.max()), tol, "spread of the flatness constant over the points")
    out = [spread]
    expected = C.expected_curvature_constant(inst)
    if expected is not None:
        out.append(ResidualReport("curvature_constant_value", const.points, abs(const.c - expected),
                                  abs(expected), _tol(EXPECTED_C_TOL, override),
                                  "flatness constant against its closed form"))
    return const, out


def _action_reports(inst, points, tol):
    def full(p):
        d = F.quadratic_action_density(inst.lift, p)
        b = curvature_at(assemble(inst.lift), lift_point(p, inst.lift.n))
        return np.array([d["full"]]), b.riemann_scale() ** 2

    def reduced(p):
        d = F.quadratic_action_density(inst.lift, p)
        bd = F.base_data(inst.lift, p)
        return np.array([d["reduced"]]), max(F._amax(bd.ricci_up, bd.F) ** 2, d["cc"], d["KK"])

    return [
        collect("quadratic_action_full", points, full, tol, "squared Weyl tensor of the lift"),
        collect("quadratic_action_reduced", points, reduced, tol, "reduced squared Weyl density"),
    ]


def _branch_reports(inst, tol, override, seed: int, count: int):
    p = inst.params
    out = []
    if inst.family.startswith("sol1"):
        chart = C.sol1_dilaton_chart(float(p["A"]), float(p["B"]), float(p["a"]))
        pts = chart.sample(count, seed)
        out += C.minimaster_residuals(chart, pts, _tol(CLOSED_FORM_TOL, override))
    elif inst.family.startswith("sol2"):
        chart = C.sol2_dilaton_chart(float(p["A"]), float(p["B"]))
        pts = chart.sample(count, seed)
        out += C.newminimaster_residuals(chart, pts, _tol(CLOSED_FORM_TOL, override))
    else:
        return out
    for alpha in (0.5, 1.0):
        out.append(C.appendix_residual(chart, pts, alpha, tol))
    return out


def lift_suite(inst: C.SolutionInstance, points, tol: float | None = None, backend: str = "jets",
               seed: int = 0) -> list[ResidualReport]:
    """Every check that applies to a 3D base with a 4D lift."""
    base_tol = _tol(F.DEFAULT_TOL, tol)
    kk = inst.lift
    reps = [lift_weyl_report(inst, points, base_tol, backend)]
    reps += F.general_flatness_residuals(kk, points, tol=base_tol)
    reps += F.field_strength_identities(kk, points, base_tol)
    const, creps = _constant_reports(inst, points, base_tol, tol)
    reps += creps
    reps.append(F.killing_residual(inst.base, inst.killing, points, _tol(STRICT_KILLING_TOL, tol)))
    dual = F.dual_killing_field(inst.base, inst.killing)
    reps.append(F.killing_residual(inst.base, dual, points, _tol(DUAL_KILLING_TOL, tol), name="dual_killing"))
    reps.append(F.orthogonality_residual(inst.base, inst.killing, points, _tol(STRICT_KILLING_TOL, tol)))
    reps.append(F.n4_einstein_form(kk, points, const.c, base_tol))
    reps.append(F.second_derivative_identity(inst.base, inst.killing, const.c, points, base_tol))
    reps.append(closed_form_report(inst, points, _tol(CLOSED_FORM_TOL, tol), backend))
    reps += _action_reports(inst, points, base_tol)
    reps += _branch_reports(inst, base_tol, tol, seed, len(points))
    return reps


def dilaton_suite(inst: C.SolutionInstance, points, tol: float | None = None, backend: str = "jets",
                  seed: int = 0) -> list[ResidualReport]:
    """Checks for a 2D dilaton solution."""
    model = inst.model
    reps = [
        F.killing_residual(inst.base, inst.killing, points, _tol(STRICT_KILLING_TOL, tol)),
        closed_form_report(inst, points, _tol(CLOSED_FORM_TOL, tol), backend),
    ]
    if not inst.perturbed:
        twin = D.quadrature_twin(model)
        g_twin = twin.metric()

        def quad(p):
            ref = inst.base.value(p)
            return g_twin.value(p) - ref, float(np.max(np.abs(ref)))

        reps.append(collect("quadrature_line_element", points, quad, _tol(QUADRATURE_TOL, tol),
                            "line element rebuilt from the potentials by quadrature"))
        if model.name in ("I1", "I2"):
            cmap = C.chart_map("dilaton_2d", "dilaton_2d", dict(inst.params))
            mpts = cmap.sample(len(points), seed)
            reps.append(collect("dual_model_map", mpts,
                                lambda p: (cmap.pullback(p) - cmap.source.base.value(p),
                                           float(np.max(np.abs(cmap.source.base.value(p))))),
                                _tol(QUADRATURE_TOL, tol), "pullback of the partner model's line element"))
    vac = D.constant_dilaton_vacua(model)
    if vac:
        xs = [[v.X] for v in vac]
        reps.append(collect("vacuum_potential_roots", xs, lambda p: (np.array([model.V_at(p[0])]), abs(model.dV_at(p[0])) * (1 + abs(p[0]))),
                            _tol(CLOSED_FORM_TOL, tol), "potential at the constant dilaton vacua"))
    hz = D.horizon_roots(model)
    if hz:
        reps.append(collect("horizon_roots", [[x] for x in hz],
                            lambda p: (np.array([model.K_at(p[0])]), abs(model.modulus)),
                            _tol(CLOSED_FORM_TOL, tol), "Killing norm at the horizons"))
    return reps


def verify_instance(inst: C.SolutionInstance, count: int, seed: int = 0, tol: float | None = None,
                    backend: str = "jets") -> list[ResidualReport]:
    points = inst.sample(count, seed)
    if inst.lift is None:
        return dilaton_suite(inst, points, tol, backend, seed)
    return lift_suite(inst, points, tol, backend, seed)


def all_passed(reports: Sequence[ResidualReport]) -> bool:
    return all(r.passed for r in reports)


def scan_horizons(inst: C.SolutionInstance) -> list[float]:
    """Horizons in the region of positive radial coordinate."""
    try:
        roots = C.horizon_roots(inst)
    except C.CatalogError:
        return []
    return [x for x in roots if x > 0]


def scan_constant(inst: C.SolutionInstance, count: int, seed: int) -> float:
    if inst.lift is None:
        return math.nan
    return F.curvature_constant(inst.lift, inst.sample(count, seed), check=False).c
