import math

import pytest

from kkflat import catalog as C
from kkflat import verification as V

LIFT_CHECKS = {
    "lift_weyl", "flatness_base_weyl", "flatness_einstein_like", "flatness_field_gradient",
    "curvature_constant_spread", "killing", "dual_killing", "dual_killing_orthogonal", "einstein_form",
    "second_derivative_identity", "closed_form_ricci", "quadratic_action_full", "quadratic_action_reduced",
}


class TestSuites:
    @pytest.mark.parametrize("family", C.FAMILIES)
    def test_every_family_passes(self, family):
        reports = V.verify_instance(C.instantiate(family), 15)
        assert V.all_passed(reports), [(r.name, r.max_rel) for r in reports if not r.passed]

    @pytest.mark.parametrize("model", sorted(C.MODEL_DEFAULTS))
    def test_dilaton_models(self, model):
        reports = V.verify_instance(C.instantiate("dilaton_2d", {"model": model}), 10)
        assert V.all_passed(reports)
        assert {"killing", "closed_form_ricci", "quadrature_line_element"} <= {r.name for r in reports}

    def test_lift_suite_contents(self):
        names = {r.name for r in V.verify_instance(C.instantiate("sol1_ef"), 5)}
        assert LIFT_CHECKS <= names
        assert {"timelike_conformal_factor_ode", "timelike_killing_norm_ode",
                "appendix_closed_forms_alpha_0.5", "appendix_closed_forms_alpha_1"} <= names

    def test_sol2_branch_checks(self):
        names = {r.name for r in V.verify_instance(C.instantiate("sol2_static"), 5)}
        assert {"spacelike_conformal_factor_ode", "spacelike_killing_norm_ode"} <= names

    @pytest.mark.parametrize("family", ["sol1_static", "sol1_ef", "sol1_dual_ef", "sol2_static", "sol2_ef",
                                        "const_phi", "max_sym_3d", "dilaton_2d"])
    def test_perturbation_detected(self, family):
        reports = V.verify_instance(C.instantiate(family, {"perturb": 0.01}), 10)
        assert not V.all_passed(reports)

    def test_seed_changes_points(self):
        a = V.verify_instance(C.instantiate("sol2_ef"), 3, seed=1)
        b = V.verify_instance(C.instantiate("sol2_ef"), 3, seed=2)
        assert a[0].points != b[0].points


class TestScanHelpers:
    def test_horizons_positive_only(self):
        hz = V.scan_horizons(C.instantiate("sol2_ef", {"A": -2.0, "B": 1.0}))
        assert len(hz) == 2 and all(x > 0 for x in hz)

    def test_horizons_unsupported_family(self):
        assert V.scan_horizons(C.instantiate("const_phi")) == []

    def test_constant(self):
        assert V.scan_constant(C.instantiate("sol2_ef", {"A": 0.5, "B": 0.2}), 5, 0) == pytest.approx(-3.0)
        assert math.isnan(V.scan_constant(C.instantiate("dilaton_2d"), 5, 0))
