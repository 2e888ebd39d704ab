import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kkflat import catalog as C
from kkflat.kk import assemble
from kkflat.sampling import sample_box
from kkflat.tensors import (
    DimensionError, MetricField, SingularMetricError, bianchi_residuals, cotton_at, cotton_scale,
    curvature_at, lower_index, raise_index, trace,
)

FLAT4 = MetricField.diagonal(["1", "-1", "-1", "-1"], ("t", "x", "y", "z"))
FLAT3 = MetricField.diagonal(["1", "-1", "-1"], ("t", "x", "y"))


def conformal(sigma: str, coords) -> MetricField:
    n = len(coords)
    entries = [f"exp(2*({sigma}))"] + [f"-exp(2*({sigma}))"] * (n - 1)
    return MetricField.diagonal(entries, coords)


def _arrays(b):
    return [b.christoffel, b.riemann_up, b.ricci, b.schouten] + ([b.weyl] if b.weyl is not None else [])


class TestMetricField:
    def test_upper_triangle_storage(self):
        g = MetricField.from_strings([["1", "x"], ["x", "-2"]], ("t", "x"))
        v = g.value([0.0, 0.5])
        np.testing.assert_array_equal(v, [[1.0, 0.5], [0.5, -2.0]])

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            MetricField.from_matrix([[1.0, 2.0], [3.0, 1.0]], ("a", "b"))

    def test_dimension_guard(self):
        with pytest.raises(DimensionError):
            MetricField.diagonal(["1"], ("t",))

    def test_singular_metric(self):
        g = MetricField.from_strings([["1", "1"], ["1", "1"]], ("t", "x"))
        with pytest.raises(SingularMetricError):
            curvature_at(g, [0.0, 0.0])


class TestCurvature:
    def test_flat_vanishes(self):
        b = curvature_at(FLAT4, [0.3, -1.0, 2.0, 0.5])
        for arr in _arrays(b):
            assert not np.any(arr)
        assert b.ricci_scalar == 0.0

    @pytest.mark.parametrize("backend", ["jets", "fd"])
    def test_ads3_scalar(self, backend):
        g = C.instantiate("max_sym_3d", {"lam": 0.5, "sign": -1}).base
        r = curvature_at(g, [0.0, 0.3, 1.0], backend).ricci_scalar
        assert r == pytest.approx(1.5, abs=1e-9 if backend == "jets" else 1e-5)

    def test_ds3_scalar(self):
        g = C.instantiate("max_sym_3d", {"lam": 0.5, "sign": 1}).base
        assert curvature_at(g, [0.0, 0.3, 1.0]).ricci_scalar == pytest.approx(-1.5, abs=1e-9)

    def test_two_sphere_convention(self):
        # spatial 2-sphere of unit radius, negative definite signature
        g = MetricField.diagonal(["-1", "-sin(th)^2"], ("th", "ph"))
        r = curvature_at(g, [1.0, 0.0]).ricci_scalar
        assert abs(abs(r) - 2.0) < 1e-12

    def test_conformally_flat_weyl(self):
        coords = ("t", "x", "y", "z")
        g = conformal("0.1*x^2 + 0.05*t*y", coords)
        for p in sample_box([(-1, 1)] * 4, 20, seed=11):
            b = curvature_at(g, p)
            assert np.max(np.abs(b.weyl)) / (1 + b.riemann_scale()) < 1e-8

    def test_generic_weyl_nonzero(self):
        g = MetricField.diagonal(["1 + x^2", "-1", "-(1 + t^2)", "-exp(y)"], ("t", "x", "y", "z"))
        b = curvature_at(g, [0.4, 0.3, 0.2, 0.1])
        assert np.max(np.abs(b.weyl)) > 1e-3

    def test_weyl_absent_in_three_dimensions(self):
        b = curvature_at(FLAT3, [0.0, 0.0, 0.0])
        assert b.weyl is None and b.cotton is not None


def _catalog_points():
    out = []
    for fam in ("max_sym_3d", "const_phi", "sol1_static", "sol1_ef", "sol2_static", "sol2_ef"):
        inst = C.instantiate(fam)
        for p in inst.sample(3, seed=2):
            out.append((fam, assemble(inst.lift), np.append(p, 0.0)))
            out.append((fam + "_base", inst.base, p))
    return out


CATALOG_POINTS = _catalog_points()
IDS = [f"{name}-{i}" for i, (name, _, _) in enumerate(CATALOG_POINTS)]


class TestSymmetries:
    @pytest.mark.parametrize("name,g,p", CATALOG_POINTS, ids=IDS)
    def test_riemann_symmetries(self, name, g, p):
        b = curvature_at(g, p)
        R = b.riemann_up
        tol = 1e-9 * (1 + b.riemann_scale())
        assert np.max(np.abs(R + R.transpose(1, 0, 2, 3))) <= tol
        assert np.max(np.abs(R + R.transpose(0, 1, 3, 2))) <= tol
        assert np.max(np.abs(R - R.transpose(2, 3, 0, 1))) <= tol
        cyc = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)
        assert np.max(np.abs(cyc)) <= tol
        np.testing.assert_allclose(b.ricci, b.ricci.T, atol=tol)

    @pytest.mark.parametrize("name,g,p", CATALOG_POINTS, ids=IDS)
    def test_bianchi(self, name, g, p):
        b = curvature_at(g, p)
        second, contracted = bianchi_residuals(b)
        scale = 1 + float(np.max(np.abs(b.d_riemann_mixed)))
        assert second / scale <= 1e-7
        assert contracted / scale <= 1e-8

    @pytest.mark.parametrize("name,g,p", [c for c in CATALOG_POINTS if c[1].dim == 4])
    def test_weyl_traceless(self, name, g, p):
        b = curvature_at(g, p)
        W = lower_index(b.weyl, b.metric, 0)
        assert np.max(np.abs(np.einsum("kkmn->mn", W))) <= 1e-9 * (1 + b.riemann_scale())

    def test_weyl_traceless_generic(self):
        kk = C.random_background(3, seed=5)
        g = assemble(kk)
        b = curvature_at(g, [0.1, -0.2, 0.3, 0.0])
        W = lower_index(b.weyl, b.metric, 0)
        for pair in ("kkmn->mn", "kmkn->mn", "kmnk->mn"):
            assert np.max(np.abs(np.einsum(pair, W))) <= 1e-9 * (1 + b.riemann_scale())


class TestCotton:
    def test_flat_zero(self):
        assert not np.any(cotton_at(FLAT3, [0.1, 0.2, 0.3]))

    def test_conformal_rescaling(self):
        g = conformal("0.2*sin(t)*x", ("t", "x", "y"))
        for p in sample_box([(-1, 1)] * 3, 20, seed=3):
            assert np.max(np.abs(cotton_at(g, p))) / (1 + cotton_scale(g, p)) < 1e-7

    def test_ads3(self):
        g = C.instantiate("max_sym_3d", {"lam": 0.5, "sign": -1}).base
        assert np.max(np.abs(cotton_at(g, [0.0, 0.7, 1.0]))) < 1e-9

    def test_antisymmetric(self):
        g = MetricField.diagonal(["1 + x^2", "-1", "-(1 + t^2*x)"], ("t", "x", "y"))
        cot = cotton_at(g, [0.3, 0.5, 0.1])
        np.testing.assert_allclose(cot, -cot.transpose(1, 0, 2), atol=1e-14)
        assert np.max(np.abs(cot)) > 1e-3

    def test_wrong_dimension(self):
        with pytest.raises(DimensionError):
            cotton_at(FLAT4, [0, 0, 0, 0])


class TestIndexGymnastics:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        g = np.diag([1.0, -1.0, -1.0]) + 0.2 * (lambda m: m + m.T)(rng.normal(size=(3, 3)))
        ginv = np.linalg.inv(g)
        t = rng.normal(size=(3, 3))
        for pos in (0, 1):
            back = raise_index(lower_index(t, g, pos), ginv, pos)
            assert np.max(np.abs(back - t)) <= 1e-12 * (1 + np.max(np.abs(t))) * np.linalg.cond(g)

    def test_metric_trace(self):
        g = np.diag([1.0, -2.0, -3.0, -0.5])
        assert trace(g, np.linalg.inv(g), 0, 1) == pytest.approx(4.0)

    def test_bad_position(self):
        with pytest.raises(IndexError):
            raise_index(np.zeros((3, 3)), np.eye(3), 2)
