"""Tests for the shared numeric primitives."""

import math

import numpy as np
import pytest

from rislink.mathkit import (
    Region2D,
    RngStream,
    bessel_j0,
    integrate_2d,
    principal_eigenvector,
    sample_angles,
    sample_complex_gaussian,
    wrap_angle,
)


def j0_series(x: float, terms: int = 60) -> float:
    """Power-series oracle: sum_k (-1)^k (x/2)^(2k) / (k!)^2."""
    total = 0.0
    term = 1.0
    for k in range(terms):
        total += term
        term *= -((x / 2.0) ** 2) / ((k + 1) ** 2)
    return total


class TestBesselJ0:
    def test_at_zero(self):
        assert bessel_j0(0.0) == 1.0

    def test_first_root(self):
        assert abs(bessel_j0(2.404825557695773)) < 1e-10

    def test_series_value_at_one(self):
        assert bessel_j0(1.0) == pytest.approx(j0_series(1.0), abs=1e-12)
        assert bessel_j0(1.0) == pytest.approx(0.7651976866, abs=1e-9)

    def test_matches_series_on_random_points(self):
        rng = np.random.default_rng(42)
        xs = rng.uniform(-10, 10, size=1000)
        for x in xs:
            assert bessel_j0(x) == pytest.approx(j0_series(float(x)), abs=1e-10)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            bessel_j0(math.nan)
        with pytest.raises(ValueError):
            bessel_j0(math.inf)


class TestComplexGaussian:
    def test_zero_variance_degenerate(self):
        assert sample_complex_gaussian(RngStream(1), 0.0) == 0j
        assert np.all(sample_complex_gaussian(RngStream(1), 0.0, 10) == 0)

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            sample_complex_gaussian(RngStream(1), -1.0)

    def test_law_of_large_numbers(self):
        z = sample_complex_gaussian(RngStream(2), 2.0, 1_000_000)
        assert abs(z.mean()) < 0.01
        assert np.mean(np.abs(z) ** 2) == pytest.approx(2.0, abs=0.01)

    def test_determinism(self):
        a = sample_complex_gaussian(RngStream(7, 0), 1.0, 100)
        b = sample_complex_gaussian(RngStream(7, 0), 1.0, 100)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = sample_complex_gaussian(RngStream(7, 0), 1.0, 100)
        b = sample_complex_gaussian(RngStream(7, 1), 1.0, 100)
        assert not np.allclose(a, b)


class TestSampleAngles:
    def test_zero_spread_copies_mean(self):
        ang = sample_angles(RngStream(3), 0.3, 0.0, "wrapped-gaussian", 5)
        assert np.array_equal(ang, np.full(5, 0.3))

    def test_wrapped_gaussian_std(self):
        ang = sample_angles(RngStream(4), 0.0, 0.2, "wrapped-gaussian", 100_000)
        assert 0.195 <= ang.std() <= 0.205

    def test_laplacian_std(self):
        ang = sample_angles(RngStream(5), 0.0, 0.2, "laplacian", 100_000)
        assert 0.19 <= ang.std() <= 0.21

    def test_wrapping_range(self):
        ang = sample_angles(RngStream(6), 3.0, 2.0, "wrapped-gaussian", 10_000)
        assert np.all(ang > -np.pi) and np.all(ang <= np.pi)

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            sample_angles(RngStream(1), 0.0, 0.1, "cauchy", 3)

    def test_wrap_angle_boundary(self):
        assert wrap_angle(np.pi) == np.pi
        assert wrap_angle(-np.pi) == np.pi
        assert wrap_angle(3 * np.pi) == np.pi


class TestPrincipalEigenvector:
    def test_identity_any_unit_vector(self):
        v = principal_eigenvector(np.eye(3))
        a = np.eye(3) @ v
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(a - v) <= 1e-8

    def test_dominant_axis(self):
        v = principal_eigenvector(np.diag([5.0, 1.0]))
        assert abs(v[0]) == pytest.approx(1.0, abs=1e-7)

    def test_rank_one_recovery(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            u = rng.normal(size=6) + 1j * rng.normal(size=6)
            u /= np.linalg.norm(u)
            v = principal_eigenvector(np.outer(u, u.conj()))
            assert abs(np.vdot(v, u)) > 1 - 1e-8

    def test_residual_on_random_psd(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = rng.integers(2, 33)
            G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            A = G @ G.conj().T
            v = principal_eigenvector(A)
            lam = float(np.real(v.conj() @ (A @ v)))
            assert np.linalg.norm(A @ v - lam * v) <= 1e-8 * lam

    def test_zero_matrix_convention(self):
        v = principal_eigenvector(np.zeros((4, 4)))
        assert np.array_equal(v, np.eye(4, dtype=complex)[0])

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            principal_eigenvector(np.ones((2, 3)))

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            principal_eigenvector(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestIntegrate2D:
    def test_unit_square_area(self):
        region = Region2D(0.0, 1.0, lambda u: (0.0, 1.0))
        res = integrate_2d(lambda u, v: 1.0, region, tol=1e-9)
        assert res.value == pytest.approx(1.0, abs=1e-9)

    def test_triangle_polynomial(self):
        region = Region2D(0.0, 1.0, lambda u: (0.0, max(u, 1e-300)))
        res = integrate_2d(lambda u, v: u, region, tol=1e-9)
        assert res.value == pytest.approx(1.0 / 3.0, rel=1e-8)

    def test_bivariate_normal_mass(self):
        region = Region2D(-8.0, 8.0, lambda u: (-8.0, 8.0))
        res = integrate_2d(
            lambda u, v: np.exp(-(u ** 2 + v ** 2) / 2) / (2 * np.pi), region, tol=1e-7)
        assert res.converged
        assert res.value == pytest.approx(1.0, abs=1e-6)

    def test_separable_gaussian_matches_erf_product(self):
        su, sv = 0.7, 1.3
        a, b = 1.1, 2.0

        def f(u, v):
            return (np.exp(-u ** 2 / (2 * su ** 2) - v ** 2 / (2 * sv ** 2))
                    / (2 * np.pi * su * sv))

        region = Region2D(-a, a, lambda u: (-b, b))
        res = integrate_2d(f, region, tol=1e-8)
        expect = (math.erf(a / (su * math.sqrt(2)))) * (math.erf(b / (sv * math.sqrt(2))))
        assert res.value == pytest.approx(expect, rel=1e-7)

    def test_u_dependent_bounds(self):
        # integral of v over v in [0, u^2], u in [0, 1]: u^4/2 -> 1/10
        region = Region2D(0.0, 1.0, lambda u: (0.0, max(u * u, 1e-300)))
        res = integrate_2d(lambda u, v: v, region, tol=1e-9)
        assert res.value == pytest.approx(0.1, rel=1e-7)

    def test_nonconvergence_flagged(self):
        # oscillation far too fast for the tiny panel budget
        region = Region2D(0.0, 1.0, lambda u: (0.0, 1.0))
        res = integrate_2d(
            lambda u, v: 1.0 + np.sin(50 * u) * np.sin(53 * v),
            region, tol=1e-14, max_panels=8)
        assert not res.converged
        assert res.error_estimate > 0
