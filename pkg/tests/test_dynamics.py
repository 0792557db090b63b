"""Nominal kernel gradient-descent dynamics tests."""

import numpy as np
import pytest

from curventk.dynamics import (nominal_evolve, separation_check,
                               iteration_schedule, weighted_operator_eigs)
from curventk.errors import ConfigurationError, DomainError
from curventk.geometry import builtin_geometry
from curventk.kernel import KernelParams
from curventk.solver import (KernelMatrix, assemble_kernel, discretize,
                             weighted_norm)

from test_solver import synthetic_grid


@pytest.fixture(scope="module")
def setup():
    inst = builtin_geometry("two_circles", samples=256)
    grid = discretize(inst, 200, "uniform_t")
    K = assemble_kernel(grid, KernelParams(50, 2.0))
    return grid, K


class TestNominalEvolve:
    def test_zero_step_constant(self, setup):
        grid, K = setup
        res = nominal_evolve(grid, K, -grid.labels, 0.0, 20)
        assert np.allclose(res.norms, res.norms[0])

    def test_norm_nonincreasing_below_threshold(self, setup):
        grid, K = setup
        evals, _, _ = weighted_operator_eigs(K, grid)
        tau = 0.5 / evals[-1]
        res = nominal_evolve(grid, K, -grid.labels, tau, 200, monotone=True)
        assert np.all(np.diff(res.norms) <= 1e-12)

    def test_eigenvector_initial_error_decays_geometrically(self, setup):
        grid, K = setup
        evals, evecs, d = weighted_operator_eigs(K, grid)
        v1 = evecs[:, -1] / d
        lam = evals[-1]
        tau = 0.3 / lam
        res = nominal_evolve(grid, K, v1, tau, 50)
        expected = np.abs(1 - tau * lam) ** np.arange(51) * res.norms[0]
        assert np.max(np.abs(res.norms - expected) / expected) < 1e-8

    def test_eig_matches_explicit(self, setup):
        grid, K = setup
        evals, _, _ = weighted_operator_eigs(K, grid)
        tau = 0.7 / evals[-1]
        a = nominal_evolve(grid, K, -grid.labels, tau, 1000, use_eig=True)
        b = nominal_evolve(grid, K, -grid.labels, tau, 1000, use_eig=False)
        # relative agreement wherever the norm is above the float floor
        # (below ~1e-10 of the initial scale both paths are pure roundoff)
        mask = a.norms > 1e-10 * a.norms[0]
        rel = np.abs(a.norms - b.norms)[mask] / a.norms[mask]
        assert np.max(rel) <= 1e-8

    def test_monotone_mode_rejects_large_step(self, setup):
        grid, K = setup
        evals, _, _ = weighted_operator_eigs(K, grid)
        with pytest.raises(ConfigurationError):
            nominal_evolve(grid, K, -grid.labels, 2.5 / evals[-1], 10,
                           monotone=True)

    def test_certificate_residual_bounds_error_floor(self):
        # synthetic well-conditioned spectrum: the asymptotic error floor is
        # at most the certificate residual plus discretization slack
        rng = np.random.default_rng(7)
        n = 64
        grid = synthetic_grid(n, seed=12)
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        lam = np.logspace(0, -6, n)
        d = np.sqrt(grid.mu_weights)
        S = Q @ np.diag(lam) @ Q.T
        Kv = S / d[:, None] / d[None, :]
        Kv = 0.5 * (Kv + Kv.T)
        K = KernelMatrix(values=Kv, params=KernelParams(4, 2.0), dc=True,
                         psi_pi=0.0)
        g = rng.normal(size=n)
        Tg = Kv @ (grid.mu_weights * g)
        e = rng.normal(size=n)
        e *= 1e-3 / weighted_norm(e, grid)
        zeta0 = Tg + e
        r = weighted_norm(e, grid)
        evals, _, _ = weighted_operator_eigs(K, grid)
        tau = 0.5 / evals[-1]
        res = nominal_evolve(grid, K, zeta0, tau, 0)
        # closed-form power at huge k via the eigen path
        evals2, evecs2, dd = weighted_operator_eigs(K, grid)
        coeffs = evecs2.T @ (dd * zeta0)
        k = 10**9
        damped = coeffs * np.abs(1 - tau * evals2) ** min(k, 10**9)
        floor = float(np.linalg.norm(damped))
        assert floor <= 1.1 * (r + 1e-8 * weighted_norm(zeta0, grid))

    def test_dimension_mismatch(self, setup):
        grid, K = setup
        with pytest.raises(DomainError):
            nominal_evolve(grid, K, np.ones(3), 0.1, 5)


class TestSeparationCheck:
    def test_exact_labels(self):
        labels = np.array([1.0, -1.0, 1.0])
        ok, margin = separation_check(labels, labels)
        assert ok and margin == 1.0

    def test_one_flipped_sign(self):
        labels = np.array([1.0, -1.0, 1.0])
        f = labels.copy()
        f[1] = 0.5
        ok, margin = separation_check(f, labels)
        assert not ok and margin < 0

    def test_two_circles_separates_quickly(self, setup):
        grid, K = setup
        evals, _, _ = weighted_operator_eigs(K, grid)
        tau = 0.5 / evals[-1]
        res = nominal_evolve(grid, K, -grid.labels, tau, 1000, monotone=True)
        separated = False
        for k in range(res.trajectory.shape[0]):
            ok, _ = separation_check(grid.labels + res.trajectory[k],
                                     grid.labels)
            if ok:
                separated = True
                break
        assert separated and k <= 1000


class TestIterationSchedule:
    def test_depth_one(self):
        assert iteration_schedule(1, 2, 0.25) == 2
        assert iteration_schedule(1, 3, 1.0) == 0

    def test_exact_power(self):
        assert iteration_schedule(2**44, 1, 1.0) == 2**39

    def test_large_depth_cross_check(self):
        # frozen from an independent exact sympy evaluation of
        # floor(100000^(39/44) / (2 * 1e-3))
        assert iteration_schedule(100000, 2, 1e-3) == 13514132

    def test_positivity_required(self):
        with pytest.raises(DomainError):
            iteration_schedule(0, 1, 1.0)
