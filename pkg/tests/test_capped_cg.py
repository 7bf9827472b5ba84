import numpy as np
import pytest

from conebarrier.capped_cg import (
    CappedCgParams,
    DirectionKind,
    capped_cg,
    iteration_bound,
    nc_curvature,
)
from conebarrier.errors import ZeroDirection, ZeroGradient


def matvec_of(h_mat):
    return lambda v: h_mat @ v


def random_symmetric(n, rng, spectrum=None, scale=1.0):
    """Random symmetric matrix with an optionally prescribed spectrum."""
    g = rng.standard_normal((n, n))
    q, _ = np.linalg.qr(g)
    if spectrum is None:
        spectrum = scale * (2.0 * rng.random(n) - 1.0)
    return (q * spectrum) @ q.T


class TestHandExamples:
    def test_identity_sol(self):
        h_mat = np.eye(2)
        out = capped_cg(matvec_of(h_mat), np.array([1.0, 0.0]),
                        CappedCgParams(epsilon=0.1, zeta=0.5))
        assert out.kind is DirectionKind.SOL
        assert out.iterations == 1
        np.testing.assert_allclose(out.direction, [-1.0 / 1.2, 0.0], rtol=1e-12)

    def test_preloop_negative_curvature(self):
        h_mat = np.diag([-1.0, 1.0])
        out = capped_cg(matvec_of(h_mat), np.array([1.0, 0.0]),
                        CappedCgParams(epsilon=0.1, zeta=0.5))
        assert out.kind is DirectionKind.NC
        assert out.iterations == 0
        np.testing.assert_allclose(out.direction, [-1.0, 0.0])
        d = out.direction
        assert d @ h_mat @ d < -0.1 * d @ d

    def test_gradient_orthogonal_to_negative_space(self):
        h_mat = np.diag([-1.0, 1.0])
        out = capped_cg(matvec_of(h_mat), np.array([0.0, 1.0]),
                        CappedCgParams(epsilon=0.1, zeta=0.5))
        assert out.kind is DirectionKind.SOL
        np.testing.assert_allclose(out.direction, [0.0, -1.0 / 1.2], rtol=1e-12)

    def test_zero_gradient_rejected(self):
        with pytest.raises(ZeroGradient):
            capped_cg(matvec_of(np.eye(2)), np.zeros(2), CappedCgParams(epsilon=0.1, zeta=0.5))

    def test_zero_operator(self):
        # (0 + 2 eps I) d = -g solved exactly in one step
        out = capped_cg(matvec_of(np.zeros((3, 3))), np.array([1.0, 2.0, -1.0]),
                        CappedCgParams(epsilon=0.25, zeta=0.5))
        assert out.kind is DirectionKind.SOL
        np.testing.assert_allclose(out.direction, -np.array([1.0, 2.0, -1.0]) / 0.5)

    def test_broken_symmetry_terminates(self):
        # caller contract violated: must still stop (any outcome or the cap error)
        from conebarrier.errors import HardCapExceeded

        rng = np.random.default_rng(0)
        bad = rng.standard_normal((12, 12))
        try:
            out = capped_cg(matvec_of(bad), rng.standard_normal(12),
                            CappedCgParams(epsilon=0.01, zeta=0.5))
            assert out.iterations <= 10 * 12 + 100
        except HardCapExceeded:
            pass


class TestNcCurvature:
    def test_diagonal(self):
        assert nc_curvature(matvec_of(np.diag([-1.0, 1.0])), np.array([1.0, 0.0])) == -1.0

    def test_identity(self):
        assert nc_curvature(matvec_of(np.eye(3)), np.array([0.3, -2.0, 1.0])) == pytest.approx(1.0)

    def test_mixed(self):
        assert nc_curvature(matvec_of(np.diag([-2.0, 4.0])), np.array([1.0, 1.0])) == pytest.approx(1.0)

    def test_zero_direction(self):
        with pytest.raises(ZeroDirection):
            nc_curvature(matvec_of(np.eye(2)), np.zeros(2))


class TestPositiveDefinite:
    def test_matches_dense_solve(self, rng):
        for trial in range(20):
            n = int(rng.integers(2, 30))
            eps = 0.1 if trial % 2 else 0.01
            # keep the spectrum clear of the NC region
            spectrum = eps + rng.random(n) * 2.0
            h_mat = random_symmetric(n, rng, spectrum=spectrum)
            g = rng.standard_normal(n)
            out = capped_cg(matvec_of(h_mat), g, CappedCgParams(epsilon=eps, zeta=0.5))
            assert out.kind is DirectionKind.SOL
            # agreement with the dense solve is at the residual level
            resid = np.linalg.norm((h_mat + 2 * eps * np.eye(n)) @ out.direction + g)
            assert resid <= out.zeta_hat * np.linalg.norm(g) * (1 + 1e-8)
            exact = np.linalg.solve(h_mat + 2 * eps * np.eye(n), -g)
            resid_exact = np.linalg.norm((h_mat + 2 * eps * np.eye(n)) @ exact + g)
            assert resid_exact <= resid + 1e-10


class TestContractFuzz:
    def test_two_hundred_cases(self):
        rng = np.random.default_rng(7)
        sol = nc = 0
        for trial in range(200):
            n = int(rng.integers(2, 51))
            eps = (0.1, 0.01)[trial % 2]
            kind = trial % 4
            if kind == 0:  # broad indefinite spectrum
                spectrum = 2.0 * rng.random(n) - 1.0
            elif kind == 1:  # positive definite
                spectrum = 0.05 + rng.random(n)
            elif kind == 2:  # indefinite but above the NC threshold
                spectrum = -0.8 * eps + rng.random(n)
            else:  # strongly negative tail
                spectrum = np.concatenate(([-1.0 - rng.random()], rng.random(n - 1)))
            h_mat = random_symmetric(n, rng, spectrum=spectrum)
            g = rng.standard_normal(n)
            out = capped_cg(matvec_of(h_mat), g, CappedCgParams(epsilon=eps, zeta=0.5))
            d = out.direction
            d_sq = float(d @ d)
            assert d_sq > 0.0
            quad = float(d @ h_mat @ d)
            if out.kind is DirectionKind.SOL:
                sol += 1
                resid = np.linalg.norm((h_mat + 2 * eps * np.eye(n)) @ d + g)
                assert resid <= out.zeta_hat * np.linalg.norm(g) * (1 + 1e-8)
                assert quad >= -eps * d_sq * (1 + 1e-8)
                # damped curvature along the solution direction
                assert eps * d_sq <= quad + 2 * eps * d_sq + 1e-8 * abs(quad)
            else:
                nc += 1
                assert quad < -eps * d_sq * (1 - 1e-8)
            assert out.iterations <= iteration_bound(out, n)
        assert sol > 20 and nc > 20  # the ensemble exercises both outcomes

    def test_iteration_bound_formula(self):
        out = capped_cg(matvec_of(np.eye(4)), np.ones(4), CappedCgParams(epsilon=0.1, zeta=0.5))
        # J is the smallest integer with sqrt(T) tau^{J/2} <= zeta_hat
        j = iteration_bound(out, 1000)
        assert np.sqrt(out.cap_t) * out.tau ** (j / 2.0) <= out.zeta_hat
        if j > 0:
            assert np.sqrt(out.cap_t) * out.tau ** ((j - 1) / 2.0) > out.zeta_hat
