import io
import os

import numpy as np
import pytest

from slabmhd.errors import BlowUpError
from slabmhd.fields import (
    ElsasserState,
    Family,
    InitialParams,
    VectorField,
    curl,
    divergence_residual,
    make_initial,
    read_snapshot,
)
from slabmhd.grid import PSEUDO_PARITY, VECTOR_PARITY, GridSpec, Parity, make_grid
from slabmhd.integrator import StepperConfig, max_divergence, rhs, run, stable_dt, step
from slabmhd.pressure import solve_pressure


def smooth_pair(grid, amp=0.1):
    """Band-limited divergence-free pair built as curls of low-mode potentials."""
    X1, X2, X3 = grid.X1, grid.X2, grid.X3
    a, b = np.pi / grid.spec.Lx, np.pi / grid.spec.Ly
    odd = np.cos(np.pi * X3 / (2 * grid.delta))
    even = np.cos(np.pi * X3 / grid.delta)
    shape = grid.shape

    def pot(s):
        A1 = np.sin(a * X1 + s) * np.cos(b * X2) * odd
        A2 = np.cos(a * X1) * np.sin(b * X2 + 0.3 * s) * odd
        A3 = np.sin(a * X1 + b * X2 + s) * even
        return VectorField(np.stack([np.broadcast_to(v, shape) for v in (A1, A2, A3)]), PSEUDO_PARITY)

    zp = curl(pot(0.2), grid).scaled(amp)
    zm = curl(pot(1.1), grid).scaled(amp)
    return ElsasserState(VectorField(zp.values), VectorField(zm.values), 0.0, grid)


def fd4(f, axis, h):
    return (-np.roll(f, -2, axis) + 8 * np.roll(f, -1, axis) - 8 * np.roll(f, 1, axis) + np.roll(f, 2, axis)) / (12 * h)


def fd_grad(values, parity, grid):
    """Fourth-order centred gradient on the reflection-extended periodic box, restricted to the slab."""
    ext = grid.extend(values, parity)
    return [grid.restrict(fd4(ext, ax, h)) for ax, h in zip((-3, -2, -1), (grid.hx, grid.hy, grid.hz))]


def fd_rhs(state):
    g = state.grid
    p = solve_pressure(state, dealias=False).values
    gp = fd_grad(p, Parity.EVEN, g)
    out = []
    for sgn, z, other in ((1, state.zp, state.zm), (-1, state.zm, state.zp)):
        comps = []
        for i in range(3):
            gz = fd_grad(z.values[i], VECTOR_PARITY[i], g)
            adv = sum(other.values[j] * gz[j] for j in range(3))
            comps.append(sgn * gz[0] - adv - gp[i])
        out.append(np.stack(comps))
    return out


class TestRhs:
    def test_one_sided_wave(self, small_grid):
        s = smooth_pair(small_grid)
        s = s.with_fields(zm=VectorField.zeros(small_grid))
        assert np.all(solve_pressure(s).values == 0)
        dp, dm = rhs(s)
        g = small_grid
        d1 = np.stack([g.ifft(1j * g.KX * g.fft(s.zp.values[i], VECTOR_PARITY[i])) for i in range(3)])
        assert np.allclose(dp.values, d1, atol=1e-14)
        assert np.abs(dm.values).max() < 1e-15

    def test_constant_counter_field(self, small_grid):
        g = small_grid
        c = 0.3
        s = smooth_pair(g)
        zm = np.zeros((3,) + g.shape)
        zm[1] = c
        s = s.with_fields(zm=VectorField(zm))
        assert np.abs(solve_pressure(s).values).max() < 1e-15
        dp, _ = rhs(s, dealias=False)
        hat = [g.fft(s.zp.values[i], VECTOR_PARITY[i]) for i in range(3)]
        want = np.stack([g.ifft(1j * (g.KX - c * g.KY) * h) for h in hat])
        assert np.allclose(dp.values, want, atol=1e-13)

    def test_fourth_order_fd_oracle(self):
        errs = []
        for n, nz in ((16, 8), (32, 16)):
            g = make_grid(GridSpec(Lx=2.0, Ly=2.0, delta=0.5, Nx=n, Ny=n, Nz=nz))
            s = smooth_pair(g)
            dp, dm = rhs(s, dealias=False)
            fp, fm = fd_rhs(s)
            scale = np.abs(dp.values).max()
            errs.append(max(np.abs(dp.values - fp).max(), np.abs(dm.values - fm).max()) / scale)
        assert errs[0] < 5e-3
        # fourth order: halving h cuts the gap by about 16
        assert errs[0] / errs[1] > 12

    def test_outputs_divergence_free(self, small_grid):
        dp, dm = rhs(smooth_pair(small_grid))
        assert divergence_residual(dp, small_grid) < 1e-10
        assert divergence_residual(dm, small_grid) < 1e-10


class TestStep:
    def test_zero_state_fixed_point(self, small_grid):
        z = VectorField.zeros(small_grid)
        s = step(ElsasserState(z, z, 0.0, small_grid), 0.01)
        assert np.all(s.zp.values == 0) and np.all(s.zm.values == 0) and s.t == 0.01

    def test_parity_and_divergence_preserved(self, small_grid):
        s = step(smooth_pair(small_grid), 0.01)
        assert s.zp.parity == VECTOR_PARITY and s.zm.parity == VECTOR_PARITY
        assert max_divergence(s) < 1e-10

    def test_linear_transport_exact(self):
        g = make_grid(GridSpec(Lx=8.0, Ly=np.pi, delta=0.5, Nx=128, Ny=8, Nz=8))
        s0 = make_initial(Family.SHEET, g, InitialParams(eps=1e-4, minus=False))
        traj = run(s0, StepperConfig(cfl=0.2, t_end=1.0, snapshot_cadence=1.0), diagnostics=False)
        got = traj.final.zp.values
        # exact solution: translation by -1 along x1, evaluated spectrally
        hat = np.fft.fft(s0.zp.values, axis=1)
        kx = 2 * np.pi * np.fft.fftfreq(g.Nx, g.hx)
        want = np.real(np.fft.ifft(hat * np.exp(1j * kx * 1.0)[None, :, None, None], axis=1))
        assert np.linalg.norm(got - want) <= 1e-6 * np.linalg.norm(want)

    def test_time_reversibility(self, small_grid):
        s0 = smooth_pair(small_grid, amp=1e-3)
        dt = stable_dt(s0, 0.4)
        s = s0
        for _ in range(20):
            s = step(s, dt)
        for _ in range(20):
            s = step(s, -dt)
        err = np.linalg.norm(s.zp.values - s0.zp.values) + np.linalg.norm(s.zm.values - s0.zm.values)
        assert err <= 1e-5 * (np.linalg.norm(s0.zp.values) + np.linalg.norm(s0.zm.values))

    def test_blowup_guard(self, small_grid):
        s = smooth_pair(small_grid, amp=1e7)
        with pytest.raises(BlowUpError) as info:
            step(s, 1e-3)
        assert info.value.last_state is s


def vorticity_rhs(state):
    """``dt j_+ = d1 j_+ - (z_- . grad) j_+ - sum_k grad z_-^k x d_k z_+`` and its mirror."""
    g = state.grid

    def grads(z):
        return [[g.ifft(1j * k * g.fft(z.values[i], z.parity[i])) for i in range(3)] for k in g.K]

    out = []
    for sgn, z, other in ((1, state.zp, state.zm), (-1, state.zm, state.zp)):
        j = curl(z, g)
        gj = grads(j)
        gz, go = grads(z), grads(other)
        res = []
        for i in range(3):
            adv = sum(other.values[a] * gj[a][i] for a in range(3))
            res.append(sgn * gj[0][i] - adv)
        res = np.stack(res)
        for k in range(3):
            grad_ok = np.stack([go[a][k] for a in range(3)])
            dkz = np.stack(gz[k])
            res -= np.cross(grad_ok, dkz, axis=0)
        out.append(res)
    return out


class TestVorticityConsistency:
    def test_instantaneous(self):
        g = make_grid(GridSpec(Lx=2.0, Ly=2.0, delta=0.5, Nx=32, Ny=32, Nz=16))
        s = smooth_pair(g)
        dp, dm = rhs(s, dealias=False)
        jp, jm = vorticity_rhs(s)
        for d, j in ((dp, jp), (dm, jm)):
            cd = curl(d, g).values
            assert np.abs(cd - j).max() <= 1e-10 * np.abs(j).max()

    def test_one_step_difference(self):
        g = make_grid(GridSpec(Lx=2.0, Ly=2.0, delta=0.5, Nx=32, Ny=32, Nz=16))
        s = smooth_pair(g)
        errs = []
        for dt in (1e-3, 5e-4):
            s1 = step(s, dt, dealias=False)
            jp, _ = vorticity_rhs(s)
            jp1, _ = vorticity_rhs(s1)
            diff = (curl(s1.zp, g).values - curl(s.zp, g).values) / dt
            errs.append(np.abs(diff - 0.5 * (jp + jp1)).max() / np.abs(jp).max())
        assert errs[0] < 1e-5
        assert errs[1] < errs[0]


class TestRun:
    def test_zero_end_time(self, small_grid):
        traj = run(smooth_pair(small_grid), StepperConfig(t_end=0.0))
        assert len(traj.snapshots) == 1 and len(traj.reports) == 1
        assert traj.summary()["n_steps"] == 0

    def test_snapshots_and_log(self, small_grid, tmp_path):
        log = io.StringIO()
        cfg = StepperConfig(t_end=0.1, snapshot_cadence=0.05)
        traj = run(smooth_pair(small_grid, 1e-3), cfg, max_order=2, snapshot_dir=str(tmp_path), run_log=log)
        assert np.allclose(traj.times, [0.0, 0.05, 0.1], atol=0)
        assert sorted(os.listdir(tmp_path)) == ["snap_00000.bin", "snap_00001.bin", "snap_00002.bin"]
        assert read_snapshot(tmp_path / "snap_00002.bin").t == 0.1
        lines = log.getvalue().splitlines()
        assert len(lines) == len(traj.records) and len(lines[1].split()) == 5
        assert all(r.divergence <= 1e-10 for r in traj.records)
        # steps inside one snapshot interval are equal
        dts = [r.dt for r in traj.records[1:]]
        first = [d for r, d in zip(traj.records[1:], dts) if r.t <= 0.05 + 1e-15]
        assert np.ptp(first) < 1e-15

    def test_blowup_aborts_with_last_healthy(self, small_grid, tmp_path):
        s = smooth_pair(small_grid, amp=1e7)
        traj = run(s, StepperConfig(t_end=1.0), diagnostics=False, snapshot_dir=str(tmp_path), dt_override=lambda st: 1e-3)
        assert traj.aborted and "t=" in traj.message
        assert (tmp_path / "last_healthy.bin").exists()
        assert traj.final is s

    def test_counter_propagating_pulses_separate(self):
        g = make_grid(GridSpec(Lx=10.0, Ly=np.pi, delta=0.5, Nx=128, Ny=8, Nz=4))
        p = InitialParams(eps=1e-3, width=0.5, center_plus=2.0, center_minus=-2.0)
        s0 = make_initial(Family.SHEET, g, p)
        # cfl 0.2 keeps the RK4 phase error of the narrow pulses near 1e-4
        traj = run(s0, StepperConfig(cfl=0.2, t_end=4.0, snapshot_cadence=4.0), diagnostics=False)
        kx = 2 * np.pi * np.fft.fftfreq(g.Nx, g.hx)
        for z0, z1, shift in ((s0.zp, traj.final.zp, -4.0), (s0.zm, traj.final.zm, 4.0)):
            back = np.real(np.fft.ifft(np.fft.fft(z1.values, axis=1) * np.exp(1j * kx * shift)[None, :, None, None], axis=1))
            assert np.linalg.norm(back - z0.values) <= 1e-3 * np.linalg.norm(z0.values)
