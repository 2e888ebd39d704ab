import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kkflat import catalog as C
from kkflat import dilaton as D
from kkflat.tensors import curvature_at

XS = {"I1": [0.5, 2.0, 4.0], "I1_dual": [0.3, 1.5, 3.5], "I2": [0.4, 1.1, 2.5], "I2_dual": [0.3, 1.2, 2.7]}


def printed_line_element(name, params, x):
    """Hand-written ``(e^Q, K)`` of the catalog line elements."""
    p = params
    if name == "I1":
        return 1.0, p["A"] + p["B"] * math.cos(x / 2)
    if name == "I1_dual":
        return 1 / math.cosh(x / 2), p["B"] + p["A"] * math.cosh(x / 2)
    if name == "I2":
        return 1.0, x**4 / 4 - p["Y"] / 2 * x**2 - 2 * p["M"]
    return x**-2, 1 / (4 * x * x) - 2 * p["M"] * x * x - p["Y"] / 2


class TestPresets:
    @pytest.mark.parametrize("name", sorted(D.PRESETS))
    def test_printed_line_elements(self, name):
        params = C.MODEL_DEFAULTS[name]
        m = D.preset(name, **params)
        g = m.metric()
        for x in XS[name]:
            eq, k = printed_line_element(name, params, x)
            ref = np.array([[eq * k, eq], [eq, 0.0]])
            np.testing.assert_allclose(g.value([0.0, x]), ref, atol=1e-10 * (1 + np.max(np.abs(ref))))

    @pytest.mark.parametrize("name", sorted(D.PRESETS))
    def test_quadrature_matches_closed_form(self, name):
        m = D.preset(name, **C.MODEL_DEFAULTS[name])
        twin = D.quadrature_twin(m)
        for x in XS[name]:
            assert twin.Q_at(x) == pytest.approx(m.Q_at(x), abs=1e-10)
            assert twin.K_at(x) == pytest.approx(m.K_at(x), abs=1e-10 * (1 + abs(m.K_at(x))))

    def test_sine_example(self):
        m = D.preset("I1", B=1.0, A=0.3)
        twin = D.quadrature_twin(m)
        for x in (0.7, 2.2):
            assert twin.K_at(x) == pytest.approx(0.3 + math.cos(x / 2), abs=1e-10)
            assert math.exp(twin.Q_at(x)) == pytest.approx(1.0, abs=1e-12)

    def test_inverse_cubic_example(self):
        m = D.preset("I2_dual", Y=0.1, M=0.1)
        for x in (0.5, 1.5):
            assert math.exp(m.Q_at(x)) == pytest.approx(x**-2)
            assert m.K_at(x) == pytest.approx(1 / (4 * x * x) - 0.2 * x * x - 0.05)

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            D.preset("I7")
        with pytest.raises(ValueError):
            D.preset("I2", Y=1.0)

    def test_twin_rejects_bad_base(self):
        with pytest.raises(ValueError):
            D.quadrature_twin(D.preset("I1_dual", A=1.0, B=0.3), lower=1.0)

    @pytest.mark.parametrize("name", sorted(D.PRESETS))
    def test_curvature_formula(self, name):
        m = D.preset(name, **C.MODEL_DEFAULTS[name])
        g = m.metric()
        for x in XS[name]:
            assert curvature_at(g, [0.0, x]).ricci_scalar == pytest.approx(m.ricci_closed_form(x), abs=1e-9)


class TestCustomModels:
    def test_from_strings_quadrature(self):
        m = D.DilatonModel.from_strings("1/X", "X^2", modulus=0.5, lower=1.0)
        # Q = -ln X, K = X^2/2 - 1/2 + 1/2
        for x in (0.5, 2.0):
            assert m.Q_at(x) == pytest.approx(-math.log(x), abs=1e-10)
            assert m.K_at(x) == pytest.approx(x * x / 2, abs=1e-10)

    @settings(max_examples=15, deadline=None)
    @given(a=st.floats(-2.0, 2.0), b=st.floats(-2.0, 2.0), x=st.floats(0.2, 3.0))
    def test_generated_curvature(self, a, b, x):
        m = D.DilatonModel.from_strings("a/X", "b*X + X^3", {"a": a, "b": b}, modulus=0.3, lower=1.0)
        g = m.metric()
        r = curvature_at(g, [0.0, x]).ricci_scalar
        assert r == pytest.approx(m.ricci_closed_form(x), abs=1e-7 * (1 + abs(r)))


class TestVacua:
    def test_cubic(self):
        vac = D.constant_dilaton_vacua(D.preset("I2", Y=1.0, M=0.1))
        assert [v.X for v in vac] == pytest.approx([-1.0, 0.0, 1.0], abs=1e-12)
        assert [v.R for v in vac] == pytest.approx([2.0, -1.0, 2.0], abs=1e-10)

    @pytest.mark.parametrize("Y", [0.5, 2.0])
    def test_cubic_general(self, Y):
        vac = D.constant_dilaton_vacua(D.preset("I2", Y=Y, M=0.0))
        assert [v.R for v in vac] == pytest.approx([2 * Y, -Y, 2 * Y], abs=1e-10)

    def test_no_roots(self):
        m = D.DilatonModel.from_strings("0", "1 + X^2")
        assert D.constant_dilaton_vacua(m) == []

    def test_const_phi_cross_check(self):
        vac = D.constant_dilaton_vacua(D.preset("I2", Y=1.0, M=0.0))
        r = C.instantiate("const_phi", {"lam": 1.0}).closed_form_ricci([0, 0, 0])
        assert vac[-1].R == pytest.approx(r)


class TestRoots:
    def test_domain_breaks(self):
        roots = D.sign_change_roots(lambda x: math.log(x) if x > 0 else float("nan"), -1.0, 3.0, 400)
        assert roots == pytest.approx([1.0], abs=1e-12)

    def test_exact_grid_root(self):
        assert D.sign_change_roots(lambda x: x, -1.0, 1.0, 10) == [0.0]

    def test_dual_cubic_horizons(self):
        m = D.preset("I2_dual", Y=0.1, M=0.1)
        for r in D.horizon_roots(m):
            assert abs(m.K_at(r)) < 1e-9

    @settings(max_examples=20, deadline=None)
    @given(Y=st.floats(0.5, 2.0), M=st.floats(-1.0, 1.0))
    def test_positive_horizon_count(self, Y, M):
        m = D.preset("I2", Y=Y, M=M)
        pos = [x for x in D.horizon_roots(m) if x > 0]
        assert len(pos) <= 2
