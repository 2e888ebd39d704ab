import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kkflat import catalog as C
from kkflat.expr import parse
from kkflat.kk import (
    KKDecomposition, SigmaNotSupported, assemble, base_data, c_tensor, field_strength, oracle_comparison,
    reduced_ricci, reduced_riemann, reduced_weyl, t_tensor,
)
from kkflat.sampling import sample_box
from kkflat.tensors import DimensionError, MetricField, curvature_at

FLAT2 = MetricField.diagonal(["1", "-1"], ("t", "x"))


def _points(dim, count, seed):
    return sample_box([(-0.5, 0.5)] * dim, count, seed)


def _rel(pair):
    delta, scale = pair
    return delta / (1 + scale)


GAUGES = ["x*y", "sin(x) + y^2", "exp(0.3*x)*cos(y)"]


class TestAssemble:
    def test_trivial_lift(self):
        g = assemble(KKDecomposition.from_strings(FLAT2, ("0", "0")))
        np.testing.assert_array_equal(g.value([0.3, 0.1, 0.0]), np.diag([1.0, -1.0, -1.0]))

    def test_const_phi_block_form(self):
        inst = C.instantiate("const_phi", {"lam": 1.0})
        g = assemble(inst.lift)
        t, rho, th = 0.2, 0.7, 1.1
        v = g.value([t, rho, th, 0.0])
        h = inst.base.value([t, rho, th])
        a = np.array([-rho, 0.0, 0.0])
        np.testing.assert_allclose(v[:3, :3], h - np.outer(a, a), atol=1e-15)
        np.testing.assert_allclose(v[3, :3], -a, atol=1e-15)
        assert v[3, 3] == -1.0

    def test_printed_sol1_lift(self):
        inst = C.instantiate("sol1_static", {"A": 1.0, "B": 0.5, "a": 4.0})
        kk = C.printed_lift(inst)
        v = assemble(kk).value([0.0, 1.0, 0.3, 0.0])
        a_theta = -2 * np.sqrt(3.0)
        assert v[2, 3] == pytest.approx(-a_theta)
        assert v[2, 2] == pytest.approx(inst.base.value([0.0, 1.0, 0.3])[2, 2] - a_theta ** 2)

    def test_sigma_prefactor(self):
        kk = KKDecomposition.from_strings(FLAT2, ("x", "0"), sigma="0.1*t")
        v = assemble(kk).value([0.5, 0.2, 0.0])
        plain = assemble(KKDecomposition.from_strings(FLAT2, ("x", "0"))).value([0.5, 0.2, 0.0])
        np.testing.assert_allclose(v, np.exp(0.1) * plain, rtol=1e-15)

    def test_dimension_cap(self):
        base = MetricField.diagonal(["1"] + ["-1"] * 5, tuple("abcdef"))
        with pytest.raises(DimensionError):
            KKDecomposition.from_strings(base, ("0",) * 6)

    def test_vector_length(self):
        with pytest.raises(DimensionError):
            KKDecomposition.from_strings(FLAT2, ("0",))


class TestFieldStrength:
    def test_pure_gauge(self):
        kk = KKDecomposition.from_strings(FLAT2, ("0", "0")).gauge_shift(parse("t*x", ["t", "x"]))
        assert not np.any(np.abs(field_strength(kk, [0.3, 0.4]).f_lower) > 1e-15)

    def test_sol2_dual_constant(self):
        inst = C.instantiate("sol2_static", {"A": 0.3, "B": 0.2})
        for rho in (0.5, 1.0, 1.7):
            fv = field_strength(inst.lift, [0.0, rho, 0.4]).f_vector
            np.testing.assert_allclose(fv, [0.0, 0.0, 1.0], atol=1e-14)

    def test_sol1_printed_component(self):
        inst = C.instantiate("sol1_static", {"A": 1.0, "B": 0.5, "a": 4.0})
        fs = field_strength(C.printed_lift(inst), [0.0, 1.0, 0.3])
        assert fs.f_lower[1, 2] == pytest.approx(2 / np.sqrt(3), rel=1e-14)
        np.testing.assert_allclose(fs.f_lower, -fs.f_lower.T, atol=0)

    def test_sqrt_density_convention_3d(self):
        kk = C.random_background(3, seed=2)
        p = [0.1, 0.2, -0.3]
        fs = field_strength(kk, p)
        sq = np.sqrt(abs(np.linalg.det(kk.base.value(p))))
        eps = np.zeros((3, 3, 3))
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            eps[i, j, k], eps[i, k, j] = 1, -1
        np.testing.assert_allclose(sq * np.einsum("mnl,l->mn", eps, fs.f_vector), fs.f_lower, atol=1e-12)

    def test_scalar_dual_2d(self):
        g = MetricField.diagonal(["1 + x^2", "-1"], ("t", "x"))
        kk = KKDecomposition.from_strings(g, ("x^2", "0"))
        p = [0.0, 0.6]
        fs = field_strength(kk, p)
        sq = np.sqrt(abs(np.linalg.det(g.value(p))))
        # f_{01} = sqrt|g| eps_{01} f with eps_{01} = -1
        assert fs.f_lower[0, 1] == pytest.approx(-sq * fs.f_scalar, rel=1e-14)

    def test_invariant_square(self):
        kk = C.random_background(3, seed=6)
        p = [0.2, -0.1, 0.3]
        bd = base_data(kk, p)
        fs = field_strength(kk, p)
        assert fs.invariant_square == pytest.approx(np.einsum("mn,nm->", bd.f_up, bd.f_low.value))


class TestReducedCurvature:
    def test_zero_vector(self):
        inst = C.instantiate("max_sym_3d")
        kk = KKDecomposition.from_strings(inst.base, ("0", "0", "0"))
        p = [0.1, 0.5, 1.0]
        red = reduced_riemann(kk, p)
        b = curvature_at(inst.base, p)
        np.testing.assert_allclose(red["R_base"], b.riemann_up, atol=1e-14)
        assert not np.any(red["R_mixed"]) and not np.any(red["R_mm"])
        ric = reduced_ricci(kk, p)
        np.testing.assert_allclose(ric["R_base"], b.ricci, atol=1e-14)
        assert ric["R"] == pytest.approx(b.ricci_scalar)

    def test_zero_vector_weyl_vanishes(self):
        inst = C.instantiate("max_sym_3d")
        kk = KKDecomposition.from_strings(inst.base, ("0", "0", "0"))
        for val in reduced_weyl(kk, [0.1, 0.5, 1.0]).values():
            assert np.max(np.abs(val)) < 1e-12

    def test_sigma_rejected(self):
        kk = KKDecomposition.from_strings(FLAT2, ("x", "0"), sigma="t")
        with pytest.raises(SigmaNotSupported):
            reduced_riemann(kk, [0.1, 0.2])

    def test_weyl_needs_n4(self):
        with pytest.raises(DimensionError):
            reduced_weyl(KKDecomposition.from_strings(FLAT2, ("x", "0")), [0.1, 0.2])

    @pytest.mark.parametrize("seed", range(10))
    def test_oracle_random_3d(self, seed):
        kk = C.random_background(3, seed=seed)
        for p in _points(3, 2, seed + 100):
            cmp = oracle_comparison(kk, p)
            for key, pair in cmp.items():
                tol = 1e-7 if key.startswith("weyl") else 1e-8
                assert _rel(pair) <= tol, key

    @pytest.mark.parametrize("base_dim", [2, 4])
    def test_oracle_other_dimensions(self, base_dim):
        kk = C.random_background(base_dim, seed=base_dim)
        for p in _points(base_dim, 2, 9):
            for key, pair in oracle_comparison(kk, p).items():
                assert _rel(pair) <= 1e-8, key

    def test_const_phi_mixed_nonzero(self):
        inst = C.instantiate("const_phi", {"lam": 1.0})
        p = inst.sample(1)[0]
        cmp = oracle_comparison(inst.lift, p)
        assert cmp["riemann_mm"][1] > 0.1
        assert cmp["riemann_mm"][0] <= 1e-9

    def test_trace_consistency(self):
        kk = C.random_background(3, seed=8)
        p = [0.2, 0.1, -0.3]
        ric = reduced_ricci(kk, p)
        g = assemble(kk).value([*p, 0.0])
        full = np.zeros((4, 4))
        full[:3, :3] = ric["R_base"]
        full[3, :3] = full[:3, 3] = ric["R_mixed"]
        full[3, 3] = ric["R_mm"]
        assert np.einsum("mn,mn->", g, full) == pytest.approx(ric["R"], abs=1e-10)

    def test_c_traceless_and_trace_of_weyl(self):
        kk = C.random_background(3, seed=9)
        p = [0.05, -0.2, 0.25]
        bd = base_data(kk, p)
        c = c_tensor(bd, 4)
        assert abs(np.einsum("mn,mn->", bd.h, c)) <= 1e-10
        np.testing.assert_allclose(c, c.T, atol=1e-14)
        cmp = oracle_comparison(kk, p)
        assert _rel(cmp["weyl_c"]) <= 1e-9

    def test_t_trace(self):
        # trace of t^{μν} is f^{μν}f_{νμ} (1 - (n-1)/(2(n-2))), nonzero at n=4
        kk = C.random_background(3, seed=10)
        bd = base_data(kk, [0.1, 0.1, 0.1])
        t = t_tensor(bd, 4)
        assert np.einsum("mn,mn->", bd.h, t) == pytest.approx(bd.FF * (1 - 3 / 4), rel=1e-12)

    def test_n5_maxwell_proportionality(self):
        kk = C.random_background(4, seed=3)
        bd = base_data(kk, [0.1, -0.1, 0.2, 0.0])
        rhs = 5 / 4 * (bd.F - bd.hinv * bd.FF / 4)
        stress = bd.F - 0.25 * bd.hinv * bd.FF
        np.testing.assert_allclose(rhs, 1.25 * stress, atol=1e-14)
        lhs = bd.ricci_up - bd.hinv * bd.scalar / 4
        np.testing.assert_allclose(c_tensor(bd, 5), (lhs - rhs) / 3, atol=1e-13)


class TestGaugeInvariance:
    @pytest.mark.parametrize("chi", GAUGES)
    def test_invariants(self, chi):
        kk = C.random_background(3, seed=12)
        shifted = kk.gauge_shift(parse(chi, kk.base.coords))
        p = [0.1, -0.2, 0.3]
        a, b = base_data(kk, p), base_data(shifted, p)
        np.testing.assert_allclose(a.f_low.value, b.f_low.value, atol=1e-10)
        np.testing.assert_allclose(c_tensor(a, 4), c_tensor(b, 4), atol=1e-9)
        np.testing.assert_allclose(t_tensor(a, 4), t_tensor(b, 4), atol=1e-9)
        ra, rb = reduced_riemann(kk, p, a), reduced_riemann(shifted, p, b)
        np.testing.assert_allclose(ra["R_base"], rb["R_base"], atol=1e-9)
        # the a-dependent terms are the only difference in the mixed blocks
        da = b.a_low - a.a_low
        np.testing.assert_allclose(rb["R_mixed"] - ra["R_mixed"],
                                   -np.einsum("t,tlmn->lmn", da, ra["R_base"]), atol=1e-9)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 500), k=st.floats(-1.0, 1.0))
    def test_oracle_after_shift(self, seed, k):
        kk = C.random_background(3, seed=seed).gauge_shift(parse(f"{k}*x*y*w", ["x", "y", "w"]))
        for key, pair in oracle_comparison(kk, [0.2, -0.3, 0.1]).items():
            assert _rel(pair) <= 1e-7, key
