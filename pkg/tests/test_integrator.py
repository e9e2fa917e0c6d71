import math

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import rough_field
from pfnl.fields import Field, Grid, field_from_function, norm, zeros
from pfnl.kernels import build_kernel_family, make_profile
from pfnl.operators import build_nonlocal_operator, energy_local
from pfnl.physics import (
    InitialDataRule,
    build_initial_data,
    make_double_well,
    make_linear_potential,
)
from pfnl.integrator import (
    SchemeConfig,
    State,
    energy_balance_residual,
    solve_trajectory,
    step_local,
)

ODE_MATRIX = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 1.0], [1.0, 0.0, -1.0]])


def ode_exact(y0, t):
    """Matrix-exponential oracle for the constant-field reduction
    (theta' = -v, phi' = v, v' = theta - v)."""
    return expm(ODE_MATRIX * t) @ np.asarray(y0)


@pytest.fixture(scope="module")
def family():
    return build_kernel_family(make_profile("polynomial-bump"), 1, 0.0)


def constant_data(grid, family, potential, y0, eps_list):
    mk = lambda c: Field(grid, np.full(grid.shape, c))
    return build_initial_data(
        "custom",
        grid,
        eps_list,
        family,
        potential,
        c1_bound=1e3,
        custom={"theta0": mk(y0[0]), "phi0": mk(y0[1]), "v0": mk(y0[2])},
    )


class TestConstantDataODE:
    Y0 = (0.8, -0.5, 0.3)

    def trajectory_error(self, traj):
        errs = []
        for t, st in zip(traj.times, traj.states):
            ex = ode_exact(self.Y0, t)
            errs.append(
                max(
                    np.max(np.abs(st.theta.data - ex[0])),
                    np.max(np.abs(st.phi.data - ex[1])),
                    np.max(np.abs(st.v.data - ex[2])),
                )
            )
        return max(errs)

    def test_local_matches_ode(self, family):
        grid = Grid.line(32)
        pot = make_linear_potential(0.0)
        data = constant_data(grid, family, pot, self.Y0, [0.5])
        traj = solve_trajectory(
            "local", data, pot, SchemeConfig(dt=1e-4, T=1.0, snapshots=10)
        )
        assert self.trajectory_error(traj) <= 1e-3

    def test_nonlocal_matches_ode(self, family):
        grid = Grid.line(40)
        pot = make_linear_potential(0.0)
        data = constant_data(grid, family, pot, self.Y0, [0.2])
        op = build_nonlocal_operator(family, 0.2, grid)
        traj = solve_trajectory(
            "nonlocal", data, pot, SchemeConfig(dt=1e-4, T=1.0, snapshots=10), op=op
        )
        assert self.trajectory_error(traj) <= 1e-3

    def test_first_order_in_dt(self, family):
        grid = Grid.line(32)
        pot = make_linear_potential(0.0)
        data = constant_data(grid, family, pot, self.Y0, [0.5])
        errs = []
        for dt in (4e-3, 2e-3, 1e-3):
            traj = solve_trajectory(
                "local", data, pot, SchemeConfig(dt=dt, T=1.0, snapshots=10)
            )
            errs.append(self.trajectory_error(traj))
        slope = np.polyfit(np.log([4e-3, 2e-3, 1e-3]), np.log(errs), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.2)


class TestStepAlgebra:
    def test_zero_data_stays_zero(self, family):
        grid = Grid.line(16)
        pot = make_double_well()
        data = constant_data(grid, family, pot, (0.0, 0.0, 0.0), [0.5])
        traj = solve_trajectory(
            "local", data, pot, SchemeConfig(dt=1e-2, T=0.2, snapshots=5)
        )
        for st in traj.states:
            assert norm(st.theta, "H") + norm(st.phi, "H") + norm(st.v, "H") == 0.0

    def test_velocity_is_exact_difference_quotient(self, family, rng):
        # v^{n+1} = (phi^{n+1} - phi^n)/dt holds by construction
        grid = Grid.line(32)
        pot = make_double_well()
        state = State(
            0.0,
            rough_field(grid, rng, 0.3),
            rough_field(grid, rng, 0.3),
            rough_field(grid, rng, 0.3),
        )
        cfg = SchemeConfig(dt=1e-3, T=1.0)
        nxt = step_local(state, pot, zeros(grid), cfg)
        recon = (nxt.phi.data - state.phi.data) / cfg.dt
        assert np.max(np.abs(nxt.v.data - recon)) == 0.0

    def test_t0_trajectory(self, family):
        grid = Grid.line(16)
        pot = make_double_well()
        data = constant_data(grid, family, pot, (0.3, 0.1, 0.0), [0.5])
        traj = solve_trajectory("local", data, pot, SchemeConfig(dt=1e-2, T=0.0))
        assert len(traj.states) == 1
        assert traj.states[0].t == 0.0

    def test_nonlocal_and_local_agree_on_constants(self, family):
        # both operators annihilate constants, so the trajectories coincide
        grid = Grid.line(40)
        pot = make_linear_potential(0.0)
        data = constant_data(grid, family, pot, (0.4, -0.2, 0.1), [0.2])
        cfg = SchemeConfig(dt=1e-3, T=0.2, snapshots=5)
        op = build_nonlocal_operator(family, 0.2, grid)
        tn = solve_trajectory("nonlocal", data, pot, cfg, op=op)
        tl = solve_trajectory("local", data, pot, cfg)
        for a, b in zip(tn.states, tl.states):
            assert np.max(np.abs(a.phi.data - b.phi.data)) <= 1e-9
            assert np.max(np.abs(a.theta.data - b.theta.data)) <= 1e-9


class TestEnergyBalance:
    def test_zero_trajectory_residual(self, family):
        grid = Grid.line(16)
        pot = make_double_well()
        data = constant_data(grid, family, pot, (0.0, 0.0, 0.0), [0.5])
        traj = solve_trajectory(
            "local", data, pot, SchemeConfig(dt=1e-2, T=0.1, snapshots=5)
        )
        assert all(r.residual == 0.0 for r in traj.records)

    def test_constant_data_residual_second_order(self, family):
        pot = make_linear_potential(0.0)
        grid = Grid.line(16)
        data = constant_data(grid, family, pot, (0.8, -0.5, 0.3), [0.5])
        maxima = []
        dts = (4e-3, 2e-3, 1e-3)
        for dt in dts:
            traj = solve_trajectory(
                "local", data, pot, SchemeConfig(dt=dt, T=0.5, snapshots=5)
            )
            maxima.append(traj.aux["max_step_residual"])
        slope = np.polyfit(np.log(dts), np.log(maxima), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.3)

    def test_double_well_residual_second_order(self, family):
        pot = make_double_well()
        grid = Grid.line(80)
        data = build_initial_data("smooth-default", grid, [0.1], family, pot)
        op = build_nonlocal_operator(family, 0.1, grid)
        maxima = []
        dts = (4e-3, 2e-3, 1e-3)
        for dt in dts:
            traj = solve_trajectory(
                "nonlocal", data, pot, SchemeConfig(dt=dt, T=0.25, snapshots=5), op=op
            )
            maxima.append(traj.aux["max_step_residual"])
        slope = np.polyfit(np.log(dts), np.log(maxima), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.3)

    def test_default_scenario_residuals_small(self, family):
        # full default configuration: every per-step residual stays far
        # below the first-order consistency budget
        pot = make_double_well()
        grid = Grid.line(512)
        data = build_initial_data("smooth-default", grid, [0.1], family, pot)
        op = build_nonlocal_operator(family, 0.1, grid)
        traj = solve_trajectory(
            "nonlocal", data, pot, SchemeConfig(dt=1e-3, T=1.0, snapshots=20), op=op
        )
        assert all(r.residual <= 0.01 for r in traj.records)

    def test_residual_ratio_under_dt_halving(self, family):
        # quadratic per-step residual: halving dt divides the max by ~4
        pot = make_double_well()
        grid = Grid.line(80)
        data = build_initial_data("smooth-default", grid, [0.1], family, pot)
        op = build_nonlocal_operator(family, 0.1, grid)
        maxima = []
        for dt in (2e-3, 1e-3):
            traj = solve_trajectory(
                "nonlocal", data, pot, SchemeConfig(dt=dt, T=0.25, snapshots=5), op=op
            )
            maxima.append(traj.aux["max_step_residual"])
        ratio = maxima[1] / maxima[0]
        assert 0.15 <= ratio <= 0.45

    def test_energy_nonincreasing_without_forcing(self, family, rng):
        # beta = pi = 0, f = 0: the implicit scheme only removes energy
        pot = make_linear_potential(0.0)
        grid = Grid.line(64)
        smooth = field_from_function(grid, lambda x: np.cos(np.pi * x))
        theta0 = field_from_function(grid, lambda x: 0.3 * np.cos(2.0 * np.pi * x))
        data = build_initial_data(
            "custom",
            grid,
            [0.1],
            family,
            pot,
            c1_bound=1e3,
            custom={
                "theta0": theta0,
                "phi0": smooth,
                "v0": rough_field(grid, rng, 0.5),
            },
        )
        op = build_nonlocal_operator(family, 0.1, grid)
        traj = solve_trajectory(
            "nonlocal", data, pot, SchemeConfig(dt=2e-3, T=0.2, snapshots=5), op=op
        )
        energies = [r.total_energy for r in traj.records]
        for a, b in zip(energies, energies[1:]):
            assert b <= a + 1e-12 * max(1.0, a)

    def test_mass_rate_matches_source(self, family, rng):
        from pfnl.physics import make_source

        pot = make_double_well()
        grid = Grid.line(64)
        data = build_initial_data("smooth-default", grid, [0.1], family, pot)
        op = build_nonlocal_operator(family, 0.1, grid)
        traj = solve_trajectory(
            "nonlocal",
            data,
            pot,
            SchemeConfig(dt=1e-3, T=0.1, snapshots=5),
            op=op,
            source=make_source("cosine-decay", 1.0),
        )
        assert traj.aux["max_mass_residual"] <= 1e-9

    def test_balance_residual_function(self, family):
        pot = make_double_well()
        grid = Grid.line(32)
        zero = zeros(grid)
        st = State(0.0, zero, zero, zero)
        assert (
            energy_balance_residual(st, st, energy_local, pot, zero, 1e-3) == 0.0
        )


class TestSchemeConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SchemeConfig(dt=0.2, T=0.1)
        with pytest.raises(ValueError):
            SchemeConfig(dt=1e-3, T=1.0, newton_tol=1e-3)

    def test_num_steps(self):
        assert SchemeConfig(dt=1e-3, T=0.5).num_steps == 500
        assert SchemeConfig(dt=1e-3, T=0.0).num_steps == 0


class TestManufacturedSolution:
    """Forcing chosen so theta* = phi* = exp(-t) cos(pi x) solves the
    coupled system with beta = 0 and linear pi."""

    POT = make_linear_potential(-(math.pi**2 - 1.0))

    @staticmethod
    def source(grid, t):
        x = grid.meshgrid()[0]
        return Field(grid, (math.pi**2 - 2.0) * math.exp(-t) * np.cos(math.pi * x))

    RULE = InitialDataRule(
        theta0=lambda *x: np.cos(np.pi * x[0]),
        phi0=lambda *x: np.cos(np.pi * x[0]),
        v0=lambda *x: -np.cos(np.pi * x[0]),
    )

    def c0h_error(self, traj):
        errs = []
        for t, st in zip(traj.times, traj.states):
            exact = field_from_function(
                st.theta.grid, lambda x: math.exp(-t) * np.cos(np.pi * x)
            )
            errs.append(max(norm(st.theta - exact, "H"), norm(st.phi - exact, "H")))
        return max(errs)

    def run(self, n, dt, T=0.5):
        grid = Grid.line(n)
        fam = build_kernel_family(make_profile("polynomial-bump"), 1, 0.0)
        data = build_initial_data(
            "smooth-default", grid, [0.5], fam, self.POT, c1_bound=100.0, rule=self.RULE
        )
        return solve_trajectory(
            "local",
            data,
            self.POT,
            SchemeConfig(dt=dt, T=T, snapshots=10),
            source=self.source,
        )

    def test_time_order(self):
        dts = (4e-3, 2e-3, 1e-3)
        errs = [self.c0h_error(self.run(512, dt)) for dt in dts]
        slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.2)

    def test_space_order_quick(self):
        # trimmed version (full-budget sweep lives in the acceptance suite)
        ns = (16, 32, 64)
        errs = [self.c0h_error(self.run(n, 2e-5, T=0.1)) for n in ns]
        slope = np.polyfit(np.log([1.0 / n for n in ns]), np.log(errs), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.3)
