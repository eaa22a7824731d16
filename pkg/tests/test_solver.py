"""Solver tests: initial data, convection, stepping, budgets, pressure."""

import math

import numpy as np
import pytest

from besovns.fields import (
    Grid,
    RealField,
    SpectralField,
    VectorField,
    divergence,
    forward_transform,
    gradient,
    inverse_transform,
    l2_inner,
    l2_norm_spectral,
    lp_norm,
    relative_divergence,
    vector_l2_norm,
)
from besovns.solver import (
    SolverConfig,
    FlowState,
    _convection_coeff,
    apply_mask,
    check_pressure_estimates,
    dealias_cutoff,
    dealias_mask,
    load_checkpoint,
    nonlinear_term,
    pressure_solve,
    random_divfree_init,
    run,
    save_checkpoint,
    step,
    taylor_green_init,
)

TWO_PI = 2 * math.pi


def convection_oracle(state, grid):
    """Brute-force convolution sum for the advective term (u.grad)u.

    For every retained mode k, w_i(k) = sum_{m+m'=k} u_j(m') (i m_j) u_i(m)
    summed over j, evaluated directly over all nonzero coefficient pairs.
    Independent of any FFT-based product path.
    """
    cut = dealias_cutoff(grid.n)
    coeffs = [c.coeff for c in state.velocity]
    ka = grid.k_axis
    nz = np.argwhere(sum(np.abs(c) for c in coeffs) > 1e-14)
    modes = np.array([[ka[i] for i in ix] for ix in nz])  # (M, 3) integer k
    vals = np.array([[coeffs[comp][tuple(ix)] for comp in range(3)] for ix in nz])
    out = [np.zeros(grid.shape, dtype=complex) for _ in range(3)]
    n = grid.n
    for a in range(len(modes)):
        m = modes[a]  # advecting mode (velocity u_j(m'))... see below
        for b in range(len(modes)):
            mp = modes[b]
            k = m + mp
            if np.max(np.abs(k)) > cut:
                continue
            idx = tuple(int(x) % n for x in k)
            # (u . grad) u_i at k: sum_j u_j(m) * (i mp_j) * u_i(mp)
            advect = 1j * (
                vals[a, 0] * mp[0] + vals[a, 1] * mp[1] + vals[a, 2] * mp[2]
            )
            for i in range(3):
                out[i][idx] += advect * vals[b, i]
    return out


def leray_arrays(arrs, grid):
    d1, d2, d3 = grid.deriv_k
    lam = (d1 * arrs[0] + d2 * arrs[1] + d3 * arrs[2]) * grid.proj_inv
    return [arrs[0] - d1 * lam, arrs[1] - d2 * lam, arrs[2] - d3 * lam]


class TestTaylorGreen:
    def test_divergence_free(self):
        st = taylor_green_init(Grid(32))
        assert relative_divergence(st.velocity) < 1e-12

    def test_initial_energy(self):
        st = taylor_green_init(Grid(32))
        assert vector_l2_norm(st.velocity) ** 2 == pytest.approx(
            2 * math.pi**3, rel=1e-12
        )

    def test_u3_vanishes(self):
        st = taylor_green_init(Grid(16))
        assert np.max(np.abs(st.velocity[2].coeff)) == 0.0


class TestRandomInit:
    def test_deterministic(self):
        a = random_divfree_init(Grid(16), 42)
        b = random_divfree_init(Grid(16), 42)
        for ca, cb in zip(a.velocity, b.velocity):
            assert np.array_equal(ca.coeff, cb.coeff)

    def test_divergence_free(self):
        st = random_divfree_init(Grid(32), 0)
        assert relative_divergence(st.velocity) < 1e-12

    def test_energy_scales_with_amplitude_squared(self):
        e1 = vector_l2_norm(random_divfree_init(Grid(16), 7, amplitude=1.0).velocity) ** 2
        e2 = vector_l2_norm(random_divfree_init(Grid(16), 7, amplitude=2.0).velocity) ** 2
        assert e2 / e1 == pytest.approx(4.0, rel=1e-12)


class TestNonlinearTerm:
    def test_pure_shear_annихilates(self):
        grid = Grid(16)
        x2 = grid.x[1]
        u1 = np.sin(x2) + np.zeros(grid.shape)
        comps = tuple(
            forward_transform(RealField(grid, s))
            for s in (u1, np.zeros(grid.shape), np.zeros(grid.shape))
        )
        st = FlowState(0.0, VectorField(comps))
        N = nonlinear_term(st)
        assert max(np.max(np.abs(c.coeff)) for c in N) < 1e-14

    @pytest.mark.parametrize("seed", range(4))
    def test_energy_neutrality(self, seed):
        grid = Grid(32)
        st = random_divfree_init(grid, seed)
        st = FlowState(0.0, apply_mask(st.velocity, dealias_mask(grid)))
        N = nonlinear_term(st)
        u = st.velocity
        inner = l2_inner(N, u)
        scale = vector_l2_norm(N) * vector_l2_norm(u)
        assert abs(inner) < 1e-10 * scale

    def test_matches_convolution_oracle_taylor_green(self):
        grid = Grid(16)
        st = taylor_green_init(grid)
        oracle = leray_arrays(convection_oracle(st, grid), grid)
        term = nonlinear_term(st)
        scale = max(np.max(np.abs(c)) for c in oracle)
        worst = max(
            np.max(np.abs(t.coeff - o)) for t, o in zip(term, oracle)
        )
        assert worst < 1e-10 * scale

    def test_matches_convolution_oracle_random(self):
        grid = Grid(16)
        st = random_divfree_init(grid, 11)
        # keep the oracle affordable: restrict to a low band
        keep = grid.k_abs <= 3.0
        comps = tuple(SpectralField(grid, c.coeff * keep) for c in st.velocity)
        st = FlowState(0.0, VectorField(comps))
        oracle = leray_arrays(convection_oracle(st, grid), grid)
        term = nonlinear_term(st)
        scale = max(np.max(np.abs(c)) for c in oracle)
        worst = max(np.max(np.abs(t.coeff - o)) for t, o in zip(term, oracle))
        assert worst < 1e-10 * scale


class TestStep:
    def test_stokes_limit_modal_decay(self):
        """Tiny amplitude: retained modes decay by exactly exp(-nu |k|^2 dt)."""
        grid = Grid(16)
        nu, dt, n_steps = 0.1, 1e-3, 10
        st = taylor_green_init(grid, amplitude=1e-6)
        initial = [c.coeff.copy() for c in st.velocity]
        for _ in range(n_steps):
            st = step(st, dt, nu)
        mask = np.abs(initial[0]) > 1e-20
        expected = initial[0][mask] * np.exp(
            -nu * grid.k_sq[mask] * dt * n_steps
        )
        got = st.velocity[0].coeff[mask]
        assert np.max(np.abs(got - expected) / np.abs(expected)) < 1e-10

    def test_zero_field_fixed_point(self):
        grid = Grid(16)
        zero = FlowState(
            0.0,
            VectorField(
                tuple(SpectralField(grid, np.zeros(grid.shape, complex)) for _ in range(3))
            ),
        )
        out = step(zero, 1e-2, 0.1)
        assert all(np.max(np.abs(c.coeff)) == 0.0 for c in out.velocity)

    def test_richardson_order_at_least_3_9(self):
        """Global order from three nested step sizes on a Taylor-Green run."""
        grid = Grid(16)
        nu, T = 0.1, 0.1

        def final_state(dt):
            st = taylor_green_init(grid)
            for _ in range(int(round(T / dt))):
                st = step(st, dt, nu)
            return np.concatenate([c.coeff.ravel() for c in st.velocity])

        u1 = final_state(T / 10)
        u2 = final_state(T / 20)
        u4 = final_state(T / 40)
        e1 = np.max(np.abs(u1 - u2))
        e2 = np.max(np.abs(u2 - u4))
        order = math.log2(e1 / e2)
        assert order >= 3.9

    def test_divergence_and_mean_preserved(self):
        st = random_divfree_init(Grid(16), 3)
        for _ in range(5):
            st = step(st, 1e-3, 0.05)
        assert relative_divergence(st.velocity) < 1e-10
        assert all(abs(c.coeff[0, 0, 0]) < 1e-16 for c in st.velocity)


class TestRun:
    def test_zero_horizon_single_sample(self):
        traj = run(SolverConfig(n=16, t_end=0.0))
        assert len(traj.samples) == 1
        assert traj.samples[0].time == 0.0

    def test_energy_strictly_decreasing(self):
        traj = run(SolverConfig(n=32, viscosity=0.1, dt=1e-3, t_end=0.2, sample_stride=20))
        energies = [s.energy for s in traj.samples]
        assert all(b < a for a, b in zip(energies, energies[1:]))

    def test_energy_budget_short_run(self):
        traj = run(SolverConfig(n=16, viscosity=0.1, dt=1e-3, t_end=0.2))
        assert abs(traj.budget.defect) < 1e-6 * traj.budget.initial_energy

    def test_cfl_violation_warns_but_proceeds(self):
        cfg = SolverConfig(n=16, viscosity=0.1, dt=0.2, t_end=0.4, amplitude=1.0)
        with pytest.warns(RuntimeWarning, match="stability"):
            traj = run(cfg)
        assert len(traj.samples) >= 1

    def test_blowup_aborts_with_marker(self):
        cfg = SolverConfig(
            n=16, viscosity=1e-4, dt=0.05, t_end=5.0, amplitude=40.0, init="random", seed=1
        )
        with pytest.warns(RuntimeWarning):
            traj = run(cfg)
        assert traj.aborted
        assert traj.abort_reason != ""
        assert len(traj.samples) >= 1


class TestPressure:
    def test_zero_velocity_zero_pressure(self):
        grid = Grid(16)
        zero = FlowState(
            0.0,
            VectorField(
                tuple(SpectralField(grid, np.zeros(grid.shape, complex)) for _ in range(3))
            ),
        )
        p = pressure_solve(zero)
        assert np.max(np.abs(p.samples)) == 0.0

    def test_taylor_green_closed_form(self):
        """p = (1/16)(cos 2x1 + cos 2x2)(cos 2x3 + 2), verified symbolically.

        Derived by term-by-term Poisson inversion of sum d_i d_j (u_i u_j)
        for the Taylor-Green datum; the product form has mean zero.
        """
        grid = Grid(32)
        st = taylor_green_init(grid)
        p = pressure_solve(st)
        x1, x2, x3 = grid.x
        expected = (1.0 / 16.0) * (np.cos(2 * x1) + np.cos(2 * x2)) * (np.cos(2 * x3) + 2.0)
        assert np.max(np.abs(p.samples - expected)) < 1e-10

    def test_projection_consistency(self):
        """div((u.grad)u + grad p) vanishes: the pressure completes the projection."""
        grid = Grid(32)
        st = random_divfree_init(grid, 5)
        st = FlowState(0.0, apply_mask(st.velocity, dealias_mask(grid)))
        conv = _convection_coeff([c.coeff for c in st.velocity], grid, dealias_mask(grid))
        gp = gradient(forward_transform(pressure_solve(st)))
        total = VectorField(
            tuple(
                SpectralField(grid, c + g.coeff) for c, g in zip(conv, gp)
            )
        )
        scale = vector_l2_norm(total)
        assert l2_norm_spectral(divergence(total)) < 1e-10 * max(scale, 1e-300)

    def test_estimates_on_taylor_green(self):
        st = taylor_green_init(Grid(16))
        rows = check_pressure_estimates(st, [2.0])
        assert not rows[0].skipped
        assert 0 < rows[0].cz_ratio < 10
        assert 0 < rows[0].pressure_ratio < 10

    def test_estimates_zero_field_skip(self):
        grid = Grid(16)
        zero = FlowState(
            0.0,
            VectorField(
                tuple(SpectralField(grid, np.zeros(grid.shape, complex)) for _ in range(3))
            ),
        )
        rows = check_pressure_estimates(zero, [2.0])
        assert rows[0].skipped

    def test_estimate_stability_across_grids(self):
        vals = {}
        for n in (16, 32):
            rows = check_pressure_estimates(taylor_green_init(Grid(n)), [2.0])
            vals[n] = (rows[0].cz_ratio, rows[0].pressure_ratio)
        for i in range(2):
            assert abs(vals[16][i] / vals[32][i] - 1.0) < 0.1

    def test_estimates_reject_bad_exponent(self):
        st = taylor_green_init(Grid(16))
        with pytest.raises(ValueError, match="1 < q"):
            check_pressure_estimates(st, [1.0])


class TestCheckpoints:
    def test_save_load_bit_exact(self, tmp_path):
        st = random_divfree_init(Grid(16), 9)
        path = tmp_path / "ck.npz"
        save_checkpoint(path, st, 0.1)
        loaded, nu = load_checkpoint(path)
        assert nu == 0.1
        assert loaded.time == st.time
        for a, b in zip(loaded.velocity, st.velocity):
            assert np.array_equal(a.coeff, b.coeff)

    def test_resume_matches_continuous_run(self, tmp_path):
        st = taylor_green_init(Grid(16))
        mid = step(st, 1e-3, 0.1)
        path = tmp_path / "mid.npz"
        save_checkpoint(path, mid, 0.1)
        resumed, nu = load_checkpoint(path)
        a = step(mid, 1e-3, nu)
        b = step(resumed, 1e-3, nu)
        for ca, cb in zip(a.velocity, b.velocity):
            assert np.array_equal(ca.coeff, cb.coeff)
