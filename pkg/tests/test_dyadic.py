"""Dyadic decomposition, Besov norms, and inequality-probe tests."""

import math

import numpy as np
import pytest

from besovns.dyadic import (
    DEFAULT_PROFILE,
    BesovIndex,
    BlockTable,
    SPEC_A3,
    SPEC_A4_P3,
    SPEC_A4_P6,
    besov_interpolation_ratio,
    besov_norm,
    besov_norm_components,
    block_range,
    check_bernstein,
    dyadic_block,
    dyadic_dilate,
    interpolation_ratio,
    low_pass,
    partition_of_unity_defect,
    sobolev_seminorm,
)
from besovns.fields import (
    Grid,
    RealField,
    forward_transform,
    gradient,
    inverse_transform,
    l2_norm_spectral,
    lp_norm,
    partial_derivative,
)
from besovns.solver import apply_mask, dealias_mask, random_divfree_init


@pytest.fixture(scope="module")
def grid():
    return Grid(32)


@pytest.fixture(scope="module")
def single_mode(grid):
    """cos(x1 + x2): |k| = sqrt(2) sits inside the phi = 1 plateau of block 0."""
    x1, x2, _ = grid.x
    return forward_transform(RealField(grid, np.cos(x1 + x2) + np.zeros(grid.shape)))


def masked_random(grid, seed, slope=-2.0):
    state = random_divfree_init(grid, seed, slope, 1.0)
    return apply_mask(state.velocity, dealias_mask(grid))[0]


class TestProfile:
    def test_phi_plateau(self):
        assert DEFAULT_PROFILE.phi(1.5) == pytest.approx(1.0, abs=1e-15)

    def test_phi_telescopes_at_interior_point(self):
        p = DEFAULT_PROFILE
        assert p.phi(0.9) + p.phi(1.8) == pytest.approx(1.0, abs=1e-15)

    def test_chi_plateau_and_support(self):
        p = DEFAULT_PROFILE
        assert p.chi(0.5) == pytest.approx(1.0, abs=1e-15)
        assert p.chi(1.4) == pytest.approx(0.0, abs=1e-15)

    def test_phi_support(self):
        p = DEFAULT_PROFILE
        assert np.all(p.phi(np.array([0.5, 0.99, 8 / 3 + 1e-9, 3.0])) == 0.0)

    def test_partition_of_unity_200_radii(self):
        jr = block_range(32)
        rho = np.logspace(
            math.log10(2.0 ** (jr.j_min - 1)), math.log10(2.0 ** (jr.j_max + 1)), 200
        )
        wide = range(jr.j_min - 4, jr.j_max + 5)

        class R:
            def __iter__(self):
                return iter(wide)

        assert partition_of_unity_defect(rho, R()) < 1e-12


class TestBlockRange:
    def test_unit_lattice_j_min(self):
        for n in (16, 32, 64):
            assert block_range(n).j_min == -1

    def test_j_max_grows_with_grid(self):
        assert block_range(16).j_max < block_range(64).j_max


class TestDyadicBlocks:
    def test_single_mode_captured_by_block_zero(self, grid, single_mode):
        jr = block_range(grid.n)
        for j in jr:
            b = dyadic_block(single_mode, j)
            nrm = l2_norm_spectral(b)
            if j == 0:
                assert nrm == pytest.approx(l2_norm_spectral(single_mode), rel=1e-12)
            else:
                assert nrm < 1e-12 * l2_norm_spectral(single_mode)

    def test_blocks_two_apart_annihilate(self, grid):
        f = forward_transform(
            RealField(grid, np.random.default_rng(0).standard_normal(grid.shape))
        )
        jr = block_range(grid.n)
        for j in jr:
            for m in jr:
                if abs(j - m) >= 2:
                    b = dyadic_block(dyadic_block(f, j), m)
                    assert np.max(np.abs(b.coeff)) == 0.0

    def test_block_reconstruction(self, grid):
        f = masked_random(grid, 1)
        total = np.zeros(grid.shape, dtype=complex)
        for j in block_range(grid.n):
            total += dyadic_block(f, j).coeff
        scale = np.max(np.abs(f.coeff))
        assert np.max(np.abs(total - f.coeff)) < 1e-12 * scale


class TestLowPass:
    def test_full_ball_capture(self, grid):
        f = masked_random(grid, 2)
        j = math.ceil(math.log2(math.sqrt(3) * grid.n / 2))
        out = low_pass(f, j)
        assert np.max(np.abs(out.coeff - f.coeff)) < 1e-14 * np.max(np.abs(f.coeff))

    def test_single_mode_low_pass_plateau(self, grid, single_mode):
        out = low_pass(single_mode, 1)  # chi(sqrt(2)/2) = 1
        assert np.max(np.abs(out.coeff - single_mode.coeff)) < 1e-14

    def test_telescoping_with_blocks(self, grid):
        f = masked_random(grid, 3)
        j0 = 1
        total = low_pass(f, j0).coeff.copy()
        for j in range(j0, block_range(grid.n).j_max + 1):
            total += dyadic_block(f, j).coeff
        assert np.max(np.abs(total - f.coeff)) < 1e-12 * np.max(np.abs(f.coeff))


class TestBesovNorm:
    @pytest.mark.parametrize("s", [-1.0, 0.0, 0.5, 1.0])
    def test_single_mode_sup_norm_is_one(self, single_mode, s):
        assert float(besov_norm(single_mode, BesovIndex(s))) == pytest.approx(
            1.0, abs=1e-10
        )

    def test_gradient_magnitude_convention_sqrt2(self, grid, single_mode):
        grads = list(gradient(single_mode))
        val = besov_norm_components(grads, BesovIndex(-1.0), combine="magnitude")
        assert val == pytest.approx(math.sqrt(2.0), abs=1e-10)
        base = besov_norm_components([single_mode], BesovIndex(0.0), combine="magnitude")
        assert val / base == pytest.approx(math.sqrt(2.0), abs=1e-10)

    def test_single_block_b022_equals_l2(self, grid, single_mode):
        b22 = float(besov_norm(single_mode, BesovIndex(0.0, 2.0, 2.0)))
        assert b22 == pytest.approx(l2_norm_spectral(single_mode), rel=1e-10)

    def test_nonzero_mean_flagged(self, grid):
        f = forward_transform(RealField(grid, 1.0 + np.cos(grid.x[0]) + np.zeros(grid.shape)))
        result = besov_norm(f, BesovIndex(0.0))
        assert any("mean" in w for w in result.warnings)

    def test_block_table_matches_direct(self, grid):
        f = masked_random(grid, 4)
        table = BlockTable(f)
        for idx in (BesovIndex(-1.0), BesovIndex(0.5, 2.0, 2.0), BesovIndex(0.0, 4.0, 1.0)):
            assert table.besov(idx) == pytest.approx(float(besov_norm(f, idx)), rel=1e-13)


class TestSobolevSeminorm:
    def test_s0_is_l2(self, grid):
        f = masked_random(grid, 5)
        assert sobolev_seminorm(f, 0.0) == pytest.approx(l2_norm_spectral(f), rel=1e-13)

    def test_s1_is_gradient_l2(self, grid):
        f = masked_random(grid, 6)
        g = gradient(f)
        gl2 = math.sqrt(sum(l2_norm_spectral(c) ** 2 for c in g))
        assert sobolev_seminorm(f, 1.0) == pytest.approx(gl2, rel=1e-13)

    @pytest.mark.parametrize("s", [-1.0, 0.0, 1.0])
    def test_besov22_sobolev_ratio_band(self, s):
        """Ratio of the (2,2) Besov norm to the Sobolev seminorm over 100 fields."""
        grid = Grid(16)
        ratios = []
        for seed in range(100):
            f = masked_random(grid, seed)
            hs = sobolev_seminorm(f, s)
            if hs == 0:
                continue
            ratios.append(float(besov_norm(f, BesovIndex(s, 2.0, 2.0))) / hs)
        assert 0.5 <= min(ratios) and max(ratios) <= 2.0

    def test_equivalence_constant_grid_independent(self):
        """Band edges move by < 10% across n in {16, 32, 64}."""
        bands = {}
        for n, n_fields in ((16, 12), (32, 12), (64, 12)):
            grid = Grid(n)
            ratios = []
            for seed in range(n_fields):
                f = masked_random(grid, seed)
                hs = sobolev_seminorm(f, 0.0)
                ratios.append(float(besov_norm(f, BesovIndex(0.0, 2.0, 2.0))) / hs)
            bands[n] = (min(ratios), max(ratios))
        for edge in (0, 1):
            vals = [bands[n][edge] for n in (16, 32, 64)]
            assert max(vals) / min(vals) < 1.10


class TestBernstein:
    def test_pure_mode_gradient_ratio(self, grid, single_mode):
        band = dyadic_block(single_mode, 0)
        rep = check_bernstein(band, 0, 1, math.inf, math.inf)
        # lambda-normalized by 2^0: the gradient-magnitude ratio is |k| = sqrt(2)
        assert rep.gradient_ratio == pytest.approx(math.sqrt(2.0), abs=1e-10)
        # normalized by the mode's own |k| the first-derivative ratio is exactly 1
        assert rep.gradient_ratio / math.sqrt(2.0) == pytest.approx(1.0, abs=1e-10)

    def test_zero_field_skipped(self, grid):
        zero = dyadic_block(
            forward_transform(RealField(grid, np.zeros(grid.shape))), 0
        )
        rep = check_bernstein(zero, 0, 1, 2.0, math.inf)
        assert rep.skipped

    def test_rejects_q_below_p(self, single_mode):
        with pytest.raises(ValueError, match="q >= p"):
            check_bernstein(single_mode, 0, 1, 4.0, 2.0)

    def test_ratio_stable_under_dyadic_rescaling(self):
        """Annulus-case ratios of a block and its dilates agree within 20 percent.

        The p = q ratio is the dilation-covariant one on the torus (the l^p
        volume factor of whole-space dilation has no periodic analogue), and
        index-doubling dilation preserves it exactly.
        """
        f16 = masked_random(Grid(16), 7)
        band = dyadic_block(f16, 1)
        ratios = [check_bernstein(band, 1, 1, math.inf, math.inf).upper_ratio]
        band32 = dyadic_dilate(band, Grid(32))
        ratios.append(check_bernstein(band32, 2, 1, math.inf, math.inf).upper_ratio)
        band64 = dyadic_dilate(band32, Grid(64))
        ratios.append(check_bernstein(band64, 3, 1, math.inf, math.inf).upper_ratio)
        assert max(ratios) / min(ratios) < 1.2
        # index-doubling dilation is exactly norm-preserving
        assert max(ratios) / min(ratios) == pytest.approx(1.0, abs=1e-10)
        lowers = [check_bernstein(band, 1, 1, math.inf, math.inf).lower_ratio]
        assert lowers[0] is not None and math.isfinite(lowers[0])


class TestInterpolation:
    def test_a3_anchor_on_pure_mode(self, single_mode):
        # ||f||_4 = ((3/8)(2pi)^3)^(1/4), low norm 1, H^1 norm (2pi)^(3/2)
        rep = interpolation_ratio(single_mode, SPEC_A3)
        assert rep.ratio == pytest.approx((3.0 / 8.0) ** 0.25, rel=1e-12)

    def test_a4_p6_anchor_on_pure_mode(self, single_mode):
        rep = interpolation_ratio(single_mode, SPEC_A4_P6)
        assert rep.ratio == pytest.approx((5.0 / 16.0) ** (1.0 / 6.0), rel=1e-12)

    def test_a4_p3_anchor_on_pure_mode(self, single_mode):
        # |cos|^3 is not a trigonometric polynomial; quadrature limits accuracy
        rep = interpolation_ratio(single_mode, SPEC_A4_P3)
        assert rep.ratio == pytest.approx((4.0 / (3.0 * math.pi)) ** (1.0 / 3.0), rel=2e-3)

    def test_spec_invariants(self):
        assert SPEC_A3.beta == pytest.approx(1.0)
        assert SPEC_A3.theta == pytest.approx(0.5)
        assert SPEC_A4_P6.beta == pytest.approx(1.0)
        assert SPEC_A4_P6.theta == pytest.approx(1.0 / 3.0)
        assert SPEC_A4_P3.beta == pytest.approx(1.0)
        assert SPEC_A4_P3.theta == pytest.approx(2.0 / 3.0)
        with pytest.raises(ValueError):
            from besovns.dyadic import InterpolationSpec

            InterpolationSpec(alpha=1.0, p=2.0, q=4.0)

    def test_zero_field_skip_flag(self, grid):
        zero = forward_transform(RealField(grid, np.zeros(grid.shape)))
        assert interpolation_ratio(zero, SPEC_A3).skipped

    def test_dilation_invariance(self):
        base = masked_random(Grid(16), 8)
        dil = dyadic_dilate(base, Grid(32))
        for spec in (SPEC_A3, SPEC_A4_P6, SPEC_A4_P3):
            r0 = interpolation_ratio(base, spec).ratio
            r1 = interpolation_ratio(dil, spec).ratio
            assert abs(r1 / r0 - 1.0) < 0.01

    def test_ensemble_bounded(self):
        grid = Grid(16)
        worst = 0.0
        for seed in range(100):
            rep = interpolation_ratio(masked_random(grid, seed), SPEC_A3)
            if not rep.skipped:
                worst = max(worst, rep.ratio)
        assert 0 < worst < math.inf


class TestBesovInterpolation:
    def test_single_block_equality(self, single_mode):
        rep = besov_interpolation_ratio(single_mode, -1.0, 1.0, 0.5)
        assert rep.ratio == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_sup_norm_ratio_below_one(self, grid, seed):
        f = masked_random(grid, seed)
        rep = besov_interpolation_ratio(f, -1.0, 0.0, 0.5)
        assert rep.ratio <= 1.0 + 1e-10

    def test_validation(self, single_mode):
        with pytest.raises(ValueError, match="s1 < s2"):
            besov_interpolation_ratio(single_mode, 1.0, -1.0, 0.5)
        with pytest.raises(ValueError, match="theta"):
            besov_interpolation_ratio(single_mode, -1.0, 1.0, 1.5)
