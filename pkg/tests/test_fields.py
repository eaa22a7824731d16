"""Transform, spectral-calculus, and norm tests for the field layer."""

import math

import numpy as np
import pytest

from besovns.fields import (
    BOX_VOLUME,
    Grid,
    RealField,
    SpectralField,
    VectorField,
    curl,
    divergence,
    forward_transform,
    gradient,
    grad_l2_norm_sq,
    inverse_transform,
    l2_norm_spectral,
    laplacian,
    laplacian_l2_norm_sq,
    leray_project,
    lp_norm,
    partial_derivative,
    relative_divergence,
    vector_l2_norm,
)
from besovns.solver import random_divfree_init

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def grid():
    return Grid(32)


def random_real(grid, seed=0):
    rng = np.random.default_rng(seed)
    return RealField(grid, rng.standard_normal(grid.shape))


class TestGrid:
    def test_rejects_odd_and_small(self):
        with pytest.raises(ValueError, match="even"):
            Grid(15)
        with pytest.raises(ValueError, match="even"):
            Grid(4)

    def test_spacing_and_wavenumbers(self, grid):
        assert grid.spacing == pytest.approx(TWO_PI / 32)
        assert grid.k_axis[0] == 0
        assert grid.k_axis[1] == 1
        assert int(np.max(np.abs(grid.k_axis))) == 16


class TestForwardTransform:
    def test_constant_field_single_coefficient(self, grid):
        F = forward_transform(RealField(grid, np.full(grid.shape, 2.5)))
        assert F.coeff[0, 0, 0] == pytest.approx(2.5)
        rest = np.abs(F.coeff).sum() - abs(F.coeff[0, 0, 0])
        assert rest < 1e-12

    def test_cosine_two_modes(self, grid):
        x1 = grid.x[0]
        F = forward_transform(RealField(grid, np.cos(x1) + np.zeros(grid.shape)))
        nz = np.argwhere(np.abs(F.coeff) > 1e-13)
        modes = {tuple(int(grid.k_axis[i]) for i in ix) for ix in nz}
        assert modes == {(1, 0, 0), (-1, 0, 0)}
        assert F.coeff[1, 0, 0] == pytest.approx(0.5, abs=1e-14)

    def test_round_trip(self, grid):
        f = random_real(grid, 1)
        back = inverse_transform(forward_transform(f))
        scale = np.max(np.abs(f.samples))
        assert np.max(np.abs(back.samples - f.samples)) < 1e-12 * scale

    def test_rejects_nonfinite_with_index(self, grid):
        bad = np.zeros(grid.shape)
        bad[3, 7, 1] = np.nan
        with pytest.raises(ValueError, match=r"\(3, 7, 1\)"):
            forward_transform(RealField(grid, bad))


class TestInverseTransform:
    def test_zero_coefficients(self, grid):
        f = inverse_transform(SpectralField(grid, np.zeros(grid.shape, complex)))
        assert np.all(f.samples == 0)

    def test_single_conjugate_pair(self, grid):
        c = np.zeros(grid.shape, complex)
        c[1, 1, 0] = 0.5
        c[-1, -1, 0] = 0.5
        f = inverse_transform(SpectralField(grid, c))
        x1, x2, _ = grid.x
        expected = np.cos(x1 + x2) + np.zeros(grid.shape)
        assert np.max(np.abs(f.samples - expected)) < 1e-13

    def test_round_trip_hermitian(self, grid):
        F = forward_transform(random_real(grid, 2))
        again = forward_transform(inverse_transform(F))
        assert np.max(np.abs(again.coeff - F.coeff)) < 1e-12 * np.max(np.abs(F.coeff))

    def test_symmetry_violation_names_worst_mode(self, grid):
        c = np.zeros(grid.shape, complex)
        c[2, 0, 0] = 1.0  # no conjugate partner
        with pytest.raises(ValueError, match=r"k=\(2, 0, 0\)|k=\(-2, 0, 0\)"):
            inverse_transform(SpectralField(grid, c))


class TestDerivatives:
    def test_d1_cosine(self, grid):
        x1 = grid.x[0]
        F = forward_transform(RealField(grid, np.cos(x1) + np.zeros(grid.shape)))
        d = inverse_transform(partial_derivative(F, 1))
        assert np.max(np.abs(d.samples - (-np.sin(x1) - np.zeros(grid.shape)))) < 1e-13

    def test_d3_of_x3_independent_field(self, grid):
        x1, x2, _ = grid.x
        F = forward_transform(RealField(grid, np.sin(2 * x1) * np.cos(x2) + np.zeros(grid.shape)))
        d = inverse_transform(partial_derivative(F, 3))
        assert np.max(np.abs(d.samples)) < 1e-13

    def test_mixed_partials_commute(self, grid):
        F = forward_transform(random_real(grid, 3))
        d12 = partial_derivative(partial_derivative(F, 1), 2)
        d21 = partial_derivative(partial_derivative(F, 2), 1)
        assert np.max(np.abs(d12.coeff - d21.coeff)) < 1e-12 * np.max(np.abs(d12.coeff))

    def test_axis_validation(self, grid):
        F = forward_transform(random_real(grid, 3))
        with pytest.raises(ValueError, match="axis"):
            partial_derivative(F, 0)


class TestVectorCalculus:
    def test_curl_of_gradient_vanishes(self, grid):
        F = forward_transform(random_real(grid, 4))
        w = curl(gradient(F))
        worst = max(np.max(np.abs(c.coeff)) for c in w)
        assert worst < 1e-12 * np.max(np.abs(F.coeff))

    def test_divergence_of_curl_vanishes(self, grid):
        V = random_divfree_init(grid, 5).velocity
        # curl of an arbitrary (not necessarily solenoidal) field
        W = VectorField(
            tuple(
                forward_transform(random_real(grid, seed)) for seed in (6, 7, 8)
            )
        )
        d = divergence(curl(W))
        assert np.max(np.abs(d.coeff)) < 1e-12 * max(
            np.max(np.abs(c.coeff)) for c in W
        )

    def test_laplacian_is_minus_curl_curl_on_divfree(self, grid):
        u = random_divfree_init(grid, 9).velocity
        lap = [laplacian(c) for c in u]
        mcc = curl(curl(u))
        scale = max(np.max(np.abs(c.coeff)) for c in lap)
        worst = max(np.max(np.abs(a.coeff + b.coeff)) for a, b in zip(lap, mcc))
        assert worst < 1e-12 * scale

    def test_mixed_grid_vector_rejected(self):
        a = forward_transform(random_real(Grid(16), 0))
        b = forward_transform(random_real(Grid(32), 0))
        with pytest.raises(ValueError, match="grid"):
            VectorField((a, a, b))

    def test_mixed_representation_rejected(self, grid):
        a = forward_transform(random_real(grid, 0))
        b = random_real(grid, 1)
        with pytest.raises(ValueError, match="RealField or all SpectralField"):
            VectorField((a, a, b))


class TestLerayProjection:
    def test_divergence_free_fixed_point(self, grid):
        u = random_divfree_init(grid, 10).velocity
        v = leray_project(u)
        worst = max(np.max(np.abs(a.coeff - b.coeff)) for a, b in zip(u, v))
        assert worst < 1e-12 * max(np.max(np.abs(c.coeff)) for c in u)

    def test_pure_gradient_killed(self, grid):
        F = forward_transform(random_real(grid, 11))
        g = gradient(F)
        v = leray_project(g)
        scale = max(np.max(np.abs(c.coeff)) for c in g)
        assert max(np.max(np.abs(c.coeff)) for c in v) < 1e-12 * scale

    def test_output_divergence_free(self, grid):
        W = VectorField(tuple(forward_transform(random_real(grid, s)) for s in (12, 13, 14)))
        assert relative_divergence(leray_project(W)) < 1e-12

    def test_idempotent(self, grid):
        W = VectorField(tuple(forward_transform(random_real(grid, s)) for s in (15, 16, 17)))
        once = leray_project(W)
        twice = leray_project(once)
        scale = max(np.max(np.abs(c.coeff)) for c in once)
        worst = max(np.max(np.abs(a.coeff - b.coeff)) for a, b in zip(once, twice))
        assert worst < 1e-12 * scale


class TestLpNorms:
    def test_constant_l2(self, grid):
        f = RealField(grid, np.ones(grid.shape))
        assert lp_norm(f, 2) == pytest.approx(TWO_PI ** 1.5, rel=1e-14)

    def test_cosine_l2_squared(self, grid):
        x1 = grid.x[0]
        f = RealField(grid, np.cos(x1) + np.zeros(grid.shape))
        assert lp_norm(f, 2) ** 2 == pytest.approx(TWO_PI**3 / 2, rel=1e-13)

    def test_sup_norm_of_cosine(self, grid):
        x1, x2, _ = grid.x
        f = RealField(grid, np.cos(x1 + x2) + np.zeros(grid.shape))
        assert lp_norm(f, math.inf) == pytest.approx(1.0, abs=1e-14)

    def test_rejects_p_below_one(self, grid):
        with pytest.raises(ValueError, match="p >= 1"):
            lp_norm(random_real(grid), 0.5)

    def test_plancherel(self, grid):
        f = random_real(grid, 18)
        F = forward_transform(f)
        lhs = lp_norm(f, 2) ** 2
        rhs = BOX_VOLUME * np.sum(np.abs(F.coeff) ** 2)
        assert abs(lhs - rhs) < 1e-12 * lhs
        assert l2_norm_spectral(F) == pytest.approx(lp_norm(f, 2), rel=1e-13)


class TestDivergenceFreeNormEqualities:
    """||omega||_2 = ||grad u||_2 and ||grad omega||_2 = ||Lap u||_2."""

    @pytest.mark.parametrize("seed", range(10))
    def test_enstrophy_equality(self, grid, seed):
        u = random_divfree_init(grid, seed).velocity
        omega = curl(u)
        lhs = vector_l2_norm(omega) ** 2
        rhs = grad_l2_norm_sq(u)
        assert abs(lhs - rhs) < 1e-12 * rhs

    @pytest.mark.parametrize("seed", range(10))
    def test_grad_vorticity_equality(self, grid, seed):
        u = random_divfree_init(grid, 100 + seed).velocity
        omega = curl(u)
        lhs = grad_l2_norm_sq(omega)
        rhs = laplacian_l2_norm_sq(u)
        assert abs(lhs - rhs) < 1e-12 * rhs
