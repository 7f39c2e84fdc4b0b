import numpy as np
import pytest

from slabmhd import mhd2d
from slabmhd.errors import GridError
from slabmhd.fields import Family, InitialParams, make_initial, sheet_limit_2d
from slabmhd.grid import GridSpec, make_grid
from slabmhd.harness.experiments import log_kernel_case
from slabmhd.integrator import StepperConfig


@pytest.fixture
def grid():
    return make_grid(GridSpec(Lx=6.0, Ly=np.pi, delta=0.2, Nx=64, Ny=16, Nz=4))


def sheet2d(grid, **kw):
    zp, zm = sheet_limit_2d(grid, InitialParams(eps=0.05, **kw))
    return mhd2d.State2D(zp, zm, 0.0, grid)


class TestPressure2D:
    def test_zero_state(self, grid):
        z = np.zeros((2, grid.Nx, grid.Ny))
        st = mhd2d.State2D(z, z, 0.0, grid)
        assert np.all(mhd2d.solve_pressure_2d(st) == 0)
        dp, dm = mhd2d.rhs_2d(st)
        assert np.all(dp == 0) and np.all(dm == 0)

    def test_one_field_has_no_pressure(self, grid):
        st = sheet2d(grid, minus=False)
        assert np.abs(mhd2d.solve_pressure_2d(st)).max() < 1e-18

    def test_manufactured_poisson(self, grid):
        X, Y = np.meshgrid(grid.x1, grid.x2, indexing="ij")
        a, b = np.pi / grid.spec.Lx, 2 * np.pi / grid.spec.Ly
        p = np.cos(3 * a * X) * np.sin(b * Y) + 0.5 * np.sin(a * X)
        lap = -(9 * a * a + b * b) * np.cos(3 * a * X) * np.sin(b * Y) - 0.5 * a * a * np.sin(a * X)
        assert np.abs(mhd2d.solve_poisson_2d(lap, grid) - p).max() <= 1e-12

    def test_log_kernel_agrees(self):
        assert log_kernel_case(32)["rel_err"] < 0.02
        assert log_kernel_case(64)["rel_err"] < log_kernel_case(32)["rel_err"]


class TestDynamics2D:
    def test_rhs_divergence_free(self, grid):
        dp, dm = mhd2d.rhs_2d(sheet2d(grid))
        assert mhd2d.divergence_residual_2d(dp, grid) < 1e-12
        assert mhd2d.divergence_residual_2d(dm, grid) < 1e-12

    def test_one_sided_transport(self, grid):
        st = sheet2d(grid, minus=False)
        tr = mhd2d.run_2d(st, StepperConfig(cfl=0.2, t_end=1.0, snapshot_cadence=0.5))
        kx = 2 * np.pi * np.fft.fftfreq(grid.Nx, grid.hx)
        want = np.real(np.fft.ifft(np.fft.fft(st.zp, axis=1) * np.exp(1j * kx)[None, :, None], axis=1))
        assert np.linalg.norm(tr.final.zp - want) <= 1e-5 * np.linalg.norm(want)
        assert [s.t for s in tr.snapshots] == [0.0, 0.5, 1.0]

    def test_energy_conserved(self, grid):
        tr = mhd2d.run_2d(sheet2d(grid, center_plus=1.0, center_minus=-1.0), StepperConfig(t_end=1.0, snapshot_cadence=0.5))
        assert tr.summary()["energy_drift"] < 1e-6
        assert tr.fluxes[0][("+", 0)] == 0.0 and tr.fluxes[-1][("+", 0)] > 0

    def test_lockstep_with_3d(self, grid):
        s3 = make_initial(Family.SHEET, grid, InitialParams(eps=0.05, center_plus=1.0, center_minus=-1.0))
        s2 = mhd2d.state2d_from_mean(s3)
        pair = mhd2d.run_paired(s3, s2, StepperConfig(t_end=0.5, snapshot_cadence=0.25))
        assert len(pair.snaps3d) == len(pair.traj2d.snapshots) == 3
        for a, b in zip(pair.snaps3d, pair.traj2d.snapshots):
            d = np.abs(a.zp.values[:2] - b.zp[..., None]).max()
            assert d <= 1e-8 * np.abs(b.zp).max()
            assert np.abs(a.zp.values[2]).max() == 0.0
        rows = mhd2d.compare_3d_2d(pair.snaps3d, pair.traj2d.snapshots)
        assert max(r.sup_diff() for r in rows) <= 1e-16
        assert max(r.sup_z3() for r in rows) == 0.0


class TestCompare:
    def test_identical_trajectories(self, grid):
        s3 = make_initial(Family.SHEET, grid)
        rows = mhd2d.compare_3d_2d([s3], [mhd2d.state2d_from_slice(s3)])
        assert rows[0].sup_diff() == 0.0 and rows[0].t == 0.0

    def test_mismatches(self, grid):
        s3 = make_initial(Family.SHEET, grid)
        s2 = mhd2d.state2d_from_slice(s3)
        with pytest.raises(ValueError):
            mhd2d.compare_3d_2d([s3, s3], [s2])
        with pytest.raises(ValueError):
            mhd2d.compare_3d_2d([s3], [s2.with_fields(t=0.1)])
        other = make_grid(GridSpec(Lx=6.0, Ly=np.pi, delta=0.2, Nx=32, Ny=16, Nz=4))
        s3b = make_initial(Family.SHEET, other)
        with pytest.raises(GridError):
            mhd2d.compare_3d_2d([s3b], [s2])
        with pytest.raises(GridError):
            mhd2d.run_paired(s3b, s2, StepperConfig(t_end=0.1))


class TestLongRuns2D:
    def test_zero_data_stays_zero(self, grid):
        z = np.zeros((2, grid.Nx, grid.Ny))
        tr = mhd2d.run_2d(mhd2d.State2D(z, z, 0.0, grid), StepperConfig(t_end=0.5, snapshot_cadence=0.25))
        assert all(np.all(s.zp == 0) and np.all(s.zm == 0) for s in tr.snapshots)
        assert all(v == 0.0 for e in tr.energies for v in e.values())

    def test_energy_conserved_over_two(self):
        g = make_grid(GridSpec(Lx=8.0, Ly=np.pi, delta=0.1, Nx=64, Ny=16, Nz=4))
        zp, zm = sheet_limit_2d(g, InitialParams(eps=1e-3, center_plus=1.0, center_minus=-1.0))
        tr = mhd2d.run_2d(mhd2d.State2D(zp, zm, 0.0, g), StepperConfig(t_end=2.0, snapshot_cadence=0.5))
        assert tr.summary()["energy_drift"] / 2.0 <= 1e-6

    def test_energy_stability_over_five(self):
        g = make_grid(GridSpec(Lx=12.0, Ly=np.pi, delta=0.1, Nx=128, Ny=16, Nz=4))
        zp, zm = sheet_limit_2d(g, InitialParams(eps=1e-3, center_plus=2.0, center_minus=-2.0))
        tr = mhd2d.run_2d(mhd2d.State2D(zp, zm, 0.0, g), StepperConfig(t_end=5.0, snapshot_cadence=0.5))
        totals = [sum(e.values()) for e in tr.energies]
        assert tr.final.t == 5.0 and max(totals) <= 2 * totals[0]
