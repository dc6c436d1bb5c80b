import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import random_dirichlet
from stochnls.functionals import charge, energy_bounds_check, energy_h
from stochnls.grid import GridFunction, UniformGrid, inner_h, laplacian_array
from stochnls.noise import COSINE, SINE, SpectralCovariance, evaluate_fq, increment_from_xi, noise_matrix
from stochnls.scheme import (
    BlowUp,
    FixedPointDiverged,
    MidpointStepper,
    NoiseSource,
    SchemeConfig,
    TrajectoryState,
    drift,
    evolve,
    parse_profile,
    step,
    write_trajectory,
)


def sine_state(grid, amp=1.0):
    return grid.sample(lambda x: amp * np.sin(np.pi * x))


def semi_discrete_rhs(n, lam):
    """Right-hand side of the noiseless central-difference system in real form."""
    inv_h = n + 1

    def rhs(_t, y):
        u = np.zeros(n + 2, dtype=complex)
        u[1:-1] = y[:n] + 1j * y[n:]
        du = 1j * laplacian_array(u, inv_h) + 1j * lam * np.abs(u) ** 2 * u
        return np.concatenate([du[1:-1].real, du[1:-1].imag])

    return rhs


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SchemeConfig(7, 0.0, 1.0)
        with pytest.raises(ValueError):
            SchemeConfig(7, 0.1, 1.0, lam=2)
        with pytest.raises(ValueError):
            SchemeConfig(7, 0.5, 0.1)
        with pytest.raises(ValueError):
            SchemeConfig(7, 0.1, 1.0, fp_damping=0.0)

    def test_partial_last_step(self):
        cfg = SchemeConfig(7, 1e-4, 2.5e-4)
        assert cfg.n_steps == 3
        assert sum(cfg.time_steps) == pytest.approx(2.5e-4, rel=1e-14)
        assert cfg.time_steps[-1] == pytest.approx(5e-5)

    def test_digest_tracks_fields(self):
        a = SchemeConfig(7, 1e-3, 0.1, seed=1)
        assert a.digest() == SchemeConfig(7, 1e-3, 0.1, seed=1).digest()
        assert a.digest() != SchemeConfig(7, 1e-3, 0.1, seed=2).digest()


class TestDrift:
    def test_zero(self):
        grid = UniformGrid(5)
        fq = evaluate_fq(SpectralCovariance.power_law(3, 2.0), grid)
        assert np.all(drift(grid.zeros(), -1, fq).values == 0)

    def test_interior_constant_single_mode(self):
        grid = UniformGrid(9)
        c = 0.7 - 0.2j
        u = GridFunction(grid, [0] + [c] * 9 + [0])
        fq = evaluate_fq(SpectralCovariance((1.0,)), grid)
        d = drift(u, 1, fq).values
        for l in range(2, 9):
            expected = 1j * abs(c) ** 2 * c - 0.5 * fq.values.real[l] * c
            assert d[l] == pytest.approx(expected, abs=1e-13)
        assert d[1] != pytest.approx(1j * abs(c) ** 2 * c - 0.5 * fq.values.real[1] * c)

    def test_dissipative_part(self, rng):
        grid = UniformGrid(12)
        u = random_dirichlet(rng, 12)
        fq = evaluate_fq(SpectralCovariance.power_law(5, 2.0), grid)
        d = drift(u, -1, fq).values
        conservative = 1j * laplacian_array(u.values, grid.inv_step) - 1j * np.abs(u.values) ** 2 * u.values
        dissipative = GridFunction(grid, d - conservative)
        weighted = GridFunction(grid, fq.values.real * u.values)
        assert inner_h(u, dissipative) == pytest.approx(-0.5 * inner_h(u, weighted), rel=1e-12)


class TestStep:
    @pytest.mark.parametrize("basis", [SINE, COSINE])
    def test_zero_stays_zero(self, basis):
        cfg = SchemeConfig(15, 1e-3, 0.01, covariance=SpectralCovariance.power_law(4, 2.0, basis_kind=basis))
        inc = increment_from_xi(cfg.covariance, cfg.grid, cfg.dt, np.array([3.0, -1.0, 0.5, 2.0]))
        out = step(TrajectoryState(0.0, cfg.grid.zeros()), cfg, inc)
        assert np.all(out.u.values == 0)
        assert out.step_index == 1

    @pytest.mark.parametrize("lam", [1, -1])
    def test_charge_without_noise(self, lam, rng):
        cfg = SchemeConfig(31, 1e-3, 0.01, lam=lam)
        u = random_dirichlet(rng, 31, 0.5)
        inc = increment_from_xi(cfg.covariance, cfg.grid, cfg.dt, np.zeros(0))
        out = step(TrajectoryState(0.0, u), cfg, inc)
        assert charge(out.u) == pytest.approx(charge(u), rel=1e-11)

    @pytest.mark.parametrize("basis", [SINE, COSINE])
    def test_charge_with_noise(self, basis, rng):
        cfg = SchemeConfig(31, 1e-3, 0.01, covariance=SpectralCovariance.power_law(8, 2.0, basis_kind=basis))
        u = random_dirichlet(rng, 31, 0.5)
        for k in range(5):
            xi = np.random.default_rng(k).standard_normal(8)
            inc = increment_from_xi(cfg.covariance, cfg.grid, cfg.dt, xi)
            out = step(TrajectoryState(0.0, u), cfg, inc)
            assert abs(charge(out.u) - charge(u)) < 1e-10 * charge(u)
            assert out.u.values[0] == 0 and out.u.values[-1] == 0

    def test_rejects_wrong_grid(self):
        cfg = SchemeConfig(7, 1e-3, 0.01)
        inc = increment_from_xi(cfg.covariance, UniformGrid(8), cfg.dt, np.zeros(0))
        with pytest.raises(ValueError):
            step(TrajectoryState(0.0, cfg.grid.zeros()), cfg, inc)

    def test_rows_independent_of_batch(self, rng):
        grid = UniformGrid(15)
        stepper = MidpointStepper(grid, 1e-3, -1)
        u = np.stack([random_dirichlet(rng, 15).values for _ in range(4)])
        dw = 0.03 * rng.standard_normal((4, grid.size))
        dw[:, [0, -1]] = 0
        batched = stepper.step(u, dw)
        for b in range(4):
            assert np.array_equal(stepper.step(u[b : b + 1], dw[b : b + 1])[0], batched[b])

    def test_fixed_point_divergence(self, rng):
        stepper = MidpointStepper(UniformGrid(15), 1e-2, 1, fp_max_iter=2)
        with pytest.raises(FixedPointDiverged):
            stepper.step(random_dirichlet(rng, 15, 3.0).values[None, :], np.zeros((1, 17)))


class TestEvolve:
    def test_final_time_zero(self, rng):
        u0 = random_dirichlet(rng, 7)
        state = evolve(SchemeConfig(7, 1e-3, 0.0), u0)
        assert state.t == 0 and state.step_index == 0
        assert np.array_equal(state.u.values, u0.values)
        assert len(state.reports) == 1

    def test_partial_step_reaches_final_time(self):
        cfg = SchemeConfig(7, 1e-3, 2.5e-3)
        state = evolve(cfg, sine_state(cfg.grid))
        assert state.t == 2.5e-3
        assert state.step_index == 3
        assert [r.time for r in state.reports][-1] == 2.5e-3

    def test_deterministic_energy(self):
        cfg = SchemeConfig(63, 1e-4, 0.5, lam=-1)
        u0 = sine_state(cfg.grid)
        state = evolve(cfg, u0, report_every=50)
        e0 = energy_h(u0, -1)
        drift_rel = max(abs(r.energy_h - e0) for r in state.reports) / e0
        assert drift_rel <= 1e-8
        # The semi-discrete flow conserves energy; a tight-tolerance reference confirms the target.
        ref = solve_ivp(
            semi_discrete_rhs(63, -1),
            (0, 0.5),
            np.concatenate([u0.values[1:-1].real, u0.values[1:-1].imag]),
            method="DOP853",
            rtol=1e-12,
            atol=1e-12,
        )
        end = np.zeros(65, dtype=complex)
        end[1:-1] = ref.y[:63, -1] + 1j * ref.y[63:, -1]
        e_ref = energy_h(GridFunction(cfg.grid, end), -1)
        assert abs(e_ref - e0) / e0 <= 1e-9
        assert abs(state.reports[-1].energy_h - e_ref) / e0 <= 1e-8

    @pytest.mark.parametrize("lam", [1, -1])
    def test_no_noise_matches_ode(self, lam):
        cfg = SchemeConfig(15, 1e-4, 0.05, lam=lam)
        u0 = cfg.grid.sample(lambda x: np.sin(np.pi * x) + 0.5j * np.sin(2 * np.pi * x))
        state = evolve(cfg, u0, report_every=100)
        ref = solve_ivp(
            semi_discrete_rhs(15, lam),
            (0, 0.05),
            np.concatenate([u0.values[1:-1].real, u0.values[1:-1].imag]),
            method="DOP853",
            rtol=1e-12,
            atol=1e-12,
        )
        end = ref.y[:15, -1] + 1j * ref.y[15:, -1]
        assert np.max(np.abs(state.u.values[1:-1] - end)) < 1e-5

    def test_stochastic_charge(self):
        cfg = SchemeConfig(64, 1e-4, 0.5, covariance=SpectralCovariance.power_law(16, 12.0, basis_kind=COSINE), seed=5)
        state = evolve(cfg, sine_state(cfg.grid), report_every=250)
        assert state.max_charge_drift <= 1e-9
        assert all(energy_bounds_check(s) for s in [state.u])

    def test_determinism(self):
        cfg = SchemeConfig(15, 1e-3, 0.05, covariance=SpectralCovariance.power_law(4, 4.0), seed=9)
        a = evolve(cfg, sine_state(cfg.grid))
        b = evolve(cfg, sine_state(cfg.grid))
        assert np.array_equal(a.u.values, b.u.values)
        c = evolve(cfg, sine_state(cfg.grid), NoiseSource(9, 1))
        assert not np.array_equal(a.u.values, c.u.values)

    def test_blowup_keeps_partial_state(self):
        cfg = SchemeConfig(15, 1e-3, 0.2, lam=1, blowup_threshold=1.2)
        u0 = cfg.grid.sample(lambda x: 1.1 * np.sin(np.pi * x) * (1 + 0.5 * np.sin(3 * np.pi * x)))
        with pytest.raises(BlowUp) as info:
            evolve(cfg, u0)
        err = info.value
        assert err.t is not None and 0 < err.t <= 0.2
        assert err.state.u.grid == cfg.grid
        assert np.max(np.abs(err.state.u.values)) <= 1.2

    def test_divergence_carries_time(self):
        cfg = SchemeConfig(15, 1e-2, 0.1, lam=1, fp_max_iter=2)
        with pytest.raises(FixedPointDiverged) as info:
            evolve(cfg, sine_state(cfg.grid, 3.0))
        assert info.value.t == 0.0
        assert info.value.state.step_index == 0

    def test_snapshots_and_checkpoint(self, tmp_path):
        cfg = SchemeConfig(7, 1e-3, 0.01, covariance=SpectralCovariance.power_law(2, 2.0), seed=3)
        state = evolve(cfg, sine_state(cfg.grid), snapshot_every=5)
        assert [s[0] for s in state.snapshots] == [0, 5, 10]
        write_trajectory(tmp_path / "t.csv", cfg, state.snapshots)
        text = (tmp_path / "t.csv").read_text()
        assert f"cfg_hash={cfg.digest()}" in text
        assert sum(1 for line in text.splitlines() if not line.startswith("#")) == 3


class TestItoConsistency:
    """Mean one-step increment of the midpoint scheme against the Ito drift."""

    M = 100_000

    def _increments(self, basis, dt, control=True):
        cov = SpectralCovariance((1.0, 0.5), None, basis)
        grid = UniformGrid(7)
        u = grid.sample(lambda x: np.sin(np.pi * x) * (1 + 0.3j * x))
        xi = np.random.default_rng(2).standard_normal((self.M, 2))
        dw = np.sqrt(dt) * xi @ noise_matrix(cov, grid)
        new = MidpointStepper(grid, dt, -1).step(np.broadcast_to(u.values, (self.M, grid.size)), dw)
        incr = new - u.values
        if control:
            # The martingale part -i u dW has mean zero exactly and serves as a control variate.
            incr = incr + 1j * u.values * dw
        return u, cov, grid, incr / dt

    @staticmethod
    def _within(samples, target, k=3.0):
        mean = samples.mean(axis=0)
        for part in (np.real, np.imag):
            se = part(samples).std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
            gap = np.abs(part(mean) - part(target))[1:-1]
            if not np.all(gap <= k * se[1:-1]):
                return False
        return True

    @pytest.mark.parametrize("basis", [SINE, COSINE])
    def test_raw_mean_matches_ito_drift(self, basis):
        u, cov, grid, incr = self._increments(basis, 1e-4, control=False)
        assert self._within(incr, drift(u, -1, evaluate_fq(cov, grid)).values)

    @pytest.mark.parametrize("basis", [SINE, COSINE])
    def test_bias_is_first_order(self, basis):
        u, cov, grid, coarse = self._increments(basis, 1e-4)
        fine = self._increments(basis, 5e-5)[3]
        target = drift(u, -1, evaluate_fq(cov, grid)).values
        gap_coarse = np.max(np.abs(coarse.mean(axis=0) - target))
        gap_fine = np.max(np.abs(fine.mean(axis=0) - target))
        assert gap_fine / gap_coarse == pytest.approx(0.5, abs=0.1)
        # Richardson extrapolation removes the O(dt) term; the rest is sampling noise.
        assert self._within(2 * fine - coarse, target)

    def test_correction_is_resolved(self):
        u, cov, grid, coarse = self._increments(COSINE, 1e-4)
        fine = self._increments(COSINE, 5e-5)[3]
        no_correction = drift(u, -1, evaluate_fq(SpectralCovariance.zero(COSINE), grid)).values
        assert not self._within(2 * fine - coarse, no_correction, k=10.0)


def test_parse_profile():
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(parse_profile("sin")(x), np.sin(np.pi * x))
    np.testing.assert_allclose(parse_profile("sin:2:0.5")(x), 0.5 * np.sin(2 * np.pi * x))
    assert parse_profile("sech:1:0.1")(0.5) == 1.0
    assert np.all(parse_profile("zero")(x) == 0)
    with pytest.raises(ValueError):
        parse_profile("gauss")
