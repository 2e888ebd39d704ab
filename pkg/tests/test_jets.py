import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kkflat.expr import finite_difference_parts
from kkflat.jets import Jet, contract, inverse, sqrt_abs_det


def _vars(point):
    n = len(point)
    return [Jet.variable(x, i, n) for i, x in enumerate(point)]


def _check_against_fd(jet_fn, plain_fn, point, tols=(1e-6, 1e-5, 1e-3)):
    jet = jet_fn(*_vars(point))
    fd = finite_difference_parts(lambda p: plain_fn(*p), point)
    for order, tol in enumerate(tols, start=1):
        a, b = jet.parts[order], fd[order]
        assert np.max(np.abs(a - b)) <= tol * (1 + np.max(np.abs(a)))


coords = st.lists(st.floats(-1.0, 1.0), min_size=2, max_size=2)


class TestJetArithmetic:
    def test_variable_seeds(self):
        x = Jet.variable(2.0, 1, 3)
        assert x.value == 2.0
        np.testing.assert_array_equal(x.first, [0, 1, 0])
        assert not x.second.any() and not x.third.any()

    def test_product_rule_exact(self):
        x, y = _vars([0.5, -1.5])
        j = x * x * y
        assert j.value == pytest.approx(-0.375)
        np.testing.assert_allclose(j.first, [2 * 0.5 * -1.5, 0.25])
        np.testing.assert_allclose(j.second, [[-3.0, 1.0], [1.0, 0.0]])
        assert j.third[0, 0, 1] == pytest.approx(2.0)

    def test_power_matches_repeated_product(self):
        x, _ = _vars([1.3, 0.0])
        a, b = x.power(3.0), x * x * x
        for pa, pb in zip(a.parts, b.parts):
            np.testing.assert_allclose(pa, pb, rtol=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(p=coords)
    def test_transcendental_chain(self, p):
        _check_against_fd(
            lambda x, y: (x * y + 2.0).log() * (x - y).exp() / (x * x + 1.0).sqrt(),
            lambda x, y: np.log(x * y + 2) * np.exp(x - y) / np.sqrt(x * x + 1),
            p,
        )

    @settings(max_examples=40, deadline=None)
    @given(p=coords, k=st.floats(-2.5, 2.5))
    def test_real_power(self, p, k):
        _check_against_fd(lambda x, y: (x * x + y * y + 0.5).power(k),
                          lambda x, y: (x * x + y * y + 0.5) ** k, p)


class TestMatrixJets:
    def _matrix(self, point):
        x, y = _vars(point)
        rows = [[2.0 + x * x, x * y], [x * y, -1.0 - y * y]]
        return Jet.stack([Jet.stack(r) for r in rows])

    @settings(max_examples=25, deadline=None)
    @given(p=coords)
    def test_inverse_identity(self, p):
        m = self._matrix(p)
        prod = contract("ij,jk->ik", m, inverse(m))
        np.testing.assert_allclose(prod.value, np.eye(2), atol=1e-13)
        for part in prod.parts[1:]:
            assert np.max(np.abs(part)) < 1e-12

    def test_sqrt_abs_det_derivatives(self):
        p = [0.3, -0.4]

        def plain(x, y):
            return np.sqrt(abs((2 + x * x) * (-1 - y * y) - (x * y) ** 2))

        jet = sqrt_abs_det(self._matrix(p))
        fd = finite_difference_parts(lambda q: plain(*q), p)
        assert jet.value == pytest.approx(plain(*p), rel=1e-14)
        np.testing.assert_allclose(jet.first, fd[1], rtol=1e-7)
        np.testing.assert_allclose(jet.second, fd[2], rtol=1e-5, atol=1e-7)
