"""Spectral operators: eigenstructure, functional calculus, caching."""

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from nls4 import spectral
from nls4.potentials import example_potential
from nls4.radial import RadialField, make_grid
from nls4.spectral import (
    SpectralError,
    apply_function,
    build_operator,
    free_fractional_gradient,
    h2_norm,
    hdot2_norm,
    l2_norm,
    laplacian_values,
    load_or_build,
)

from conftest import random_smooth_field


class TestBuildOperator:
    def test_free_eigenvalues_nonnegative(self, op_free):
        assert np.all(op_free.eigenvalues >= 0)

    def test_bilaplacian_is_square_of_laplacian(self, grid, op_free):
        lam = eigh_tridiagonal(grid.lap_diag, grid.lap_off, eigvals_only=True)
        scale = np.max(op_free.eigenvalues)
        assert np.max(np.abs(op_free.eigenvalues - lam**2)) <= 1e-8 * scale

    def test_zero_potential_matches_free(self, op_free, op_zero):
        scale = np.max(op_free.eigenvalues)
        assert np.max(np.abs(op_free.eigenvalues - op_zero.eigenvalues)) <= 1e-10 * scale

    def test_lowest_mode_against_refined_grid_and_bessel(self):
        # reference: same operator at N = 1024, plus the Dirichlet Bessel zero
        coarse = build_operator("free", make_grid(5, 20.0, 256))
        fine = build_operator("free", make_grid(5, 20.0, 1024))
        mu0 = coarse.eigenvalues[0]
        assert mu0 == pytest.approx(fine.eigenvalues[0], rel=0.05)
        # transformed -Delta has index nu = 3/2; J_{3/2} zeros solve tan x = x
        zero = brentq(lambda x: np.tan(x) - x, np.pi / 2 + 1e-9, 3 * np.pi / 2 - 1e-9)
        assert mu0 == pytest.approx((zero / 20.0) ** 4, rel=0.05)

    def test_eigenvector_orthonormality(self, op_full):
        gram = op_full.eigenvectors.T @ op_full.eigenvectors
        off = gram - np.eye(gram.shape[0])
        assert np.max(np.abs(off)) <= 1e-9

    def test_nonneg_potential_keeps_spectrum_nonneg(self, op_full):
        assert np.all(op_full.eigenvalues >= 0)

    def test_budget_rejected(self, grid):
        with pytest.raises(SpectralError):
            build_operator("free", grid, eig_budget=128)

    def test_kind_and_spec_consistency(self, grid):
        with pytest.raises(SpectralError):
            build_operator("full", grid)
        with pytest.raises(SpectralError):
            build_operator("free", grid, example_potential(5))

    def test_reconstruction_matches_stencil(self, grid, op_free, rng):
        u = random_smooth_field(grid, rng)
        via_modes = apply_function(op_free, "power_s", 4.0, u)
        direct = spectral.bilaplacian_values(grid, u.values)
        assert np.linalg.norm(via_modes.values - direct) <= 1e-8 * np.linalg.norm(direct)


class TestFunctionalCalculus:
    def test_exp_it_zero_is_identity(self, op_full, grid, rng):
        u = random_smooth_field(grid, rng)
        out = apply_function(op_full, "exp_it", 0.0, u)
        assert np.max(np.abs(out.values - u.values)) <= 1e-12 * np.max(np.abs(u.values))

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_unitarity(self, op_full, grid, rng, t):
        u = random_smooth_field(grid, rng)
        assert l2_norm(apply_function(op_full, "exp_it", t, u)) == pytest.approx(
            l2_norm(u), rel=1e-10
        )

    def test_semigroup(self, op_full, grid, rng):
        u = random_smooth_field(grid, rng)
        one = apply_function(op_full, "exp_it", 0.3, apply_function(op_full, "exp_it", 0.7, u))
        two = apply_function(op_full, "exp_it", 1.0, u)
        assert np.linalg.norm(one.values - two.values) <= 1e-9 * np.linalg.norm(two.values)

    def test_power_semigroup(self, op_full, grid, rng):
        u = random_smooth_field(grid, rng)
        twice = apply_function(op_full, "power_s", 2.0, apply_function(op_full, "power_s", 2.0, u))
        once = apply_function(op_full, "power_s", 4.0, u)
        assert np.linalg.norm(twice.values - once.values) <= 1e-9 * np.linalg.norm(once.values)

    def test_h_calculus_conserves_hdot2_surrogate(self, op_full, grid, rng):
        # ||H^{1/2} u|| is exactly invariant under exp(itH)
        u = random_smooth_field(grid, rng)
        before = l2_norm(apply_function(op_full, "power_s", 2.0, u))
        ut = apply_function(op_full, "exp_it", 3.0, u)
        after = l2_norm(apply_function(op_full, "power_s", 2.0, ut))
        assert after == pytest.approx(before, rel=1e-8)
        # companion: ||Delta u(t)|| stays within the equivalence band
        assert 0.5 <= hdot2_norm(ut) / hdot2_norm(u) <= 2.0

    def test_self_adjointness_weighted_inner_product(self, op_full, grid, rng):
        u = random_smooth_field(grid, rng)
        v = random_smooth_field(grid, rng)
        hu = apply_function(op_full, "power_s", 4.0, u)
        hv = apply_function(op_full, "power_s", 4.0, v)
        ip1 = np.sum(grid.metric * hu.values * np.conj(v.values))
        ip2 = np.sum(grid.metric * u.values * np.conj(hv.values))
        assert abs(ip1 - ip2) <= 1e-10 * abs(ip1)

    def test_heat_map_positivity_proxy(self, op_full, grid):
        u = RadialField(grid, np.exp(-grid.nodes**2).astype(complex))
        hu = apply_function(op_full, "exp_minus_t", 0.5, u)
        assert np.sum(grid.metric * hu.values * np.conj(u.values)).real > 0

    def test_exp_minus_t_rejects_negative_time(self, op_full, grid, rng):
        with pytest.raises(SpectralError):
            apply_function(op_full, "exp_minus_t", -0.1, random_smooth_field(grid, rng))

    def test_resolvent_rejects_spectrum(self, op_full, grid, rng):
        u = random_smooth_field(grid, rng)
        with pytest.raises(SpectralError):
            apply_function(op_full, "resolvent_z", op_full.eigenvalues[3], u)
        out = apply_function(op_full, "resolvent_z", -1.0 + 0.5j, u)
        assert np.all(np.isfinite(out.values))

    def test_grid_mismatch_rejected(self, op_full, rng):
        other = make_grid(5, 20.0, 128)
        with pytest.raises(SpectralError):
            apply_function(op_full, "exp_it", 1.0, random_smooth_field(other, rng))


class TestFractionalGradient:
    def test_s_zero_identity(self, op_free, grid, rng):
        u = random_smooth_field(grid, rng)
        out = free_fractional_gradient(op_free, 0.0, u)
        assert np.allclose(out.values, u.values, rtol=1e-12, atol=1e-14)

    def test_s_four_matches_stencil(self, op_free, grid, rng):
        u = random_smooth_field(grid, rng)
        out = free_fractional_gradient(op_free, 4.0, u)
        direct = spectral.bilaplacian_values(grid, u.values)
        assert np.linalg.norm(out.values - direct) <= 1e-8 * np.linalg.norm(direct)

    def test_eigenvector_scaling(self, op_free):
        mode = op_free.eigenfield(0)
        out = free_fractional_gradient(op_free, 2.0, mode)
        expected = np.sqrt(op_free.eigenvalues[0]) * mode.values
        assert np.allclose(out.values, expected, rtol=1e-9)

    def test_rejects_out_of_range(self, op_free, grid, rng):
        with pytest.raises(SpectralError):
            free_fractional_gradient(op_free, 4.5, random_smooth_field(grid, rng))

    def test_requires_free_operator(self, op_full, grid, rng):
        with pytest.raises(SpectralError):
            free_fractional_gradient(op_full, 1.0, random_smooth_field(grid, rng))

    def test_grad_norm_consistency(self, grid, op_free, rng):
        # || |grad| u ||_2 via calculus equals <-Delta u, u>^{1/2} via stencil
        u = random_smooth_field(grid, rng)
        via_calc = l2_norm(free_fractional_gradient(op_free, 1.0, u))
        assert spectral.grad_l2_norm(u) == pytest.approx(via_calc, rel=1e-8)


class TestNorms:
    def test_h2_norm_definition(self, grid, rng):
        u = random_smooth_field(grid, rng)
        lap = laplacian_values(grid, u.values)
        direct = RadialField(grid, u.values - lap)
        assert h2_norm(u) == pytest.approx(l2_norm(direct), rel=1e-12)


class TestCacheAndFieldIO:
    def test_operator_cache_roundtrip(self, grid, tmp_path):
        spec = example_potential(5)
        first = load_or_build("full", grid, spec, cache_dir=tmp_path)
        again = load_or_build("full", grid, spec, cache_dir=tmp_path)
        assert np.array_equal(first.eigenvalues, again.eigenvalues)
        assert np.array_equal(first.eigenvectors, again.eigenvectors)
        assert len(list(tmp_path.glob("*.eig"))) == 1

    def test_cache_key_separates_potentials(self, grid, tmp_path):
        load_or_build("full", grid, example_potential(5, c=0.01), cache_dir=tmp_path)
        load_or_build("full", grid, example_potential(5, c=0.02), cache_dir=tmp_path)
        assert len(list(tmp_path.glob("*.eig"))) == 2

    def test_cache_env_variable(self, grid, tmp_path, monkeypatch):
        monkeypatch.setenv("NLS4_CACHE_DIR", str(tmp_path))
        load_or_build("free", grid)
        assert len(list(tmp_path.glob("*.eig"))) == 1

    def test_field_io_roundtrip(self, grid, rng, tmp_path):
        u = random_smooth_field(grid, rng)
        path = tmp_path / "state.fld"
        spectral.save_field(path, u)
        back = spectral.load_field(path, grid)
        assert np.array_equal(u.values, back.values)

    def test_field_io_grid_mismatch(self, grid, rng, tmp_path):
        u = random_smooth_field(grid, rng)
        path = tmp_path / "state.fld"
        spectral.save_field(path, u)
        with pytest.raises(SpectralError):
            spectral.load_field(path, make_grid(5, 20.0, 128))
