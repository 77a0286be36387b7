import numpy as np
import pytest

from corrlab import geometry
from corrlab.exceptions import NotPositiveDefinite
from corrlab.geometry import MeanMethod


def corr2(rho):
    return np.array([[1.0, rho], [rho, 1.0]])


def rand_spd(dim, seed):
    g = np.random.Generator(np.random.PCG64(seed))
    a = g.standard_normal((dim, dim))
    return a @ a.T + dim * np.eye(dim)


class TestDistance:
    def test_identity_to_diagonal_closed_form(self):
        lam = np.array([0.5, 2.0, 3.0])
        d = geometry.airm_distance(np.eye(3), np.diag(lam))
        assert d == pytest.approx(np.sqrt(np.sum(np.log(lam) ** 2)), abs=1e-12)

    def test_symmetry_and_zero(self):
        a, b = rand_spd(5, 1), rand_spd(5, 2)
        assert geometry.airm_distance(a, a) == pytest.approx(0.0, abs=1e-7)
        assert geometry.airm_distance(a, b) == pytest.approx(
            geometry.airm_distance(b, a), abs=1e-9
        )

    def test_affine_invariance(self):
        g = np.random.Generator(np.random.PCG64(3))
        a, b = rand_spd(4, 4), rand_spd(4, 5)
        x = g.standard_normal((4, 4)) + 4 * np.eye(4)
        d0 = geometry.airm_distance(a, b)
        d1 = geometry.airm_distance(x @ a @ x.T, x @ b @ x.T)
        assert d1 == pytest.approx(d0, rel=1e-8)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            geometry.airm_distance(np.eye(2), corr2(1.5))


class TestGeodesic:
    def test_endpoints(self):
        a, b = rand_spd(4, 7), rand_spd(4, 8)
        assert np.allclose(geometry.geodesic(a, b, 0.0), a, atol=1e-9)
        assert np.allclose(geometry.geodesic(a, b, 1.0), b, atol=1e-8)

    def test_midpoint_leaves_elliptope(self):
        # midpoint of the rho = +/-0.75 pair is sqrt(1 - rho^2) I,
        # outside the unit-diagonal set
        mid = geometry.geodesic(corr2(0.75), corr2(-0.75), 0.5)
        expected = np.sqrt(1 - 0.75 ** 2) * np.eye(2)
        assert np.allclose(mid, expected, atol=1e-9)
        assert abs(mid[0, 0] - 0.661438) < 1e-6

    def test_constant_speed(self):
        a, b = rand_spd(3, 9), rand_spd(3, 10)
        total = geometry.airm_distance(a, b)
        q = geometry.geodesic(a, b, 0.25)
        assert geometry.airm_distance(a, q) == pytest.approx(
            0.25 * total, rel=1e-6
        )


class TestMeans:
    def test_karcher_single_matrix(self):
        a = rand_spd(4, 11)
        x, _, grad_norm = geometry.karcher_mean([a])
        assert np.allclose(x, a, atol=1e-8)
        assert grad_norm <= 1e-10

    def test_karcher_two_matrices_is_midpoint(self):
        a, b = rand_spd(3, 12), rand_spd(3, 13)
        x, _, _ = geometry.karcher_mean([a, b])
        mid = geometry.geodesic(a, b, 0.5)
        assert np.allclose(x, mid, atol=1e-7)

    def test_m1_m3_identity_on_opposite_pair(self):
        pair = [corr2(0.75), corr2(-0.75)]
        m1 = geometry.mean(MeanMethod.M1_EUCLIDEAN, pair)
        m3 = geometry.mean(MeanMethod.M3_NORMALIZED_BARYCENTER, pair)
        assert np.allclose(m1.matrix, np.eye(2), atol=1e-8)
        assert np.allclose(m3.matrix, np.eye(2), atol=1e-8)

    def test_m4_beats_m3_on_pair(self):
        pair = [corr2(0.75), corr2(-0.75)]
        m3 = geometry.mean(MeanMethod.M3_NORMALIZED_BARYCENTER, pair)
        m4 = geometry.mean(MeanMethod.M4_CONSTRAINED_FRECHET, pair)
        o3 = geometry._frechet_objective(m3.matrix, pair)
        o4 = geometry._frechet_objective(m4.matrix, pair)
        assert o4 <= o3 + 1e-10

    def test_m5_is_valid_correlation(self):
        from corrlab.core import validate
        pair = [corr2(0.6), corr2(-0.4)]
        m5 = geometry.mean(MeanMethod.M5_RIEMANNIAN_PROJECTION, pair)
        assert validate(m5.matrix).is_valid

    def test_mean_result_metadata(self):
        pair = [corr2(0.2), corr2(0.4)]
        res = geometry.mean(MeanMethod.M2_RIEMANNIAN_BARYCENTER, pair)
        assert res.method is MeanMethod.M2_RIEMANNIAN_BARYCENTER
        assert res.converged
        assert res.grad_norm < 1e-8

    def test_permutation_equivariance(self):
        mats = [rand_spd(4, s) for s in (20, 21, 22)]
        perm = [2, 0, 1, 3]
        p = np.eye(4)[perm]
        permuted = [p @ m @ p.T for m in mats]
        res = geometry.mean(MeanMethod.M2_RIEMANNIAN_BARYCENTER, mats)
        res_p = geometry.mean(MeanMethod.M2_RIEMANNIAN_BARYCENTER, permuted)
        assert np.allclose(p @ res.matrix @ p.T, res_p.matrix, atol=1e-7)
