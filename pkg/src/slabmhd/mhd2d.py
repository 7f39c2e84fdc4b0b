"""Planar ideal MHD in Elsässer form, the thin-slab limit system.

``d_t z_+ - d1 z_+ + z_- . grad_h z_+ = -grad_h p`` and the mirror equation
for ``z_-``, with ``Lap_h p = -d_a z_+^b d_b z_-^a`` on the horizontal torus.
Horizontal transforms and wavenumbers come from the 3D :class:`Grid` so that
paired runs share every discretization choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import diagnostics as diag
from .errors import BlowUpError, GridError
from .fields import ElsasserState
from .grid import Grid
from .integrator import BLOWUP_THRESHOLD, StepperConfig, clip_to_target, stable_dt, step

DEFAULT_H_ORDER = 2


@dataclass(frozen=True)
class State2D:
    """Horizontal fields ``zp``, ``zm`` of shape ``(2, Nx, Ny)`` at time ``t``."""

    zp: np.ndarray
    zm: np.ndarray
    t: float
    grid: Grid

    def with_fields(self, zp=None, zm=None, t=None) -> "State2D":
        return State2D(self.zp if zp is None else zp, self.zm if zm is None else zm, self.t if t is None else t, self.grid)


def state2d_from_slice(state: ElsasserState, j: int = 0) -> State2D:
    return State2D(state.zp.values[:2, :, :, j].copy(), state.zm.values[:2, :, :, j].copy(), state.t, state.grid)


def state2d_from_mean(state: ElsasserState) -> State2D:
    """Vertical mean of the horizontal components."""
    return State2D(diag.mean_project(state.zp.values[:2]), diag.mean_project(state.zm.values[:2]), state.t, state.grid)


def _project_2d(hat: np.ndarray, grid: Grid) -> np.ndarray:
    kdotu = (grid.KX2 * hat[0] + grid.KY2 * hat[1]) * grid.inv_k2_h
    return np.stack([hat[0] - grid.KX2 * kdotu, hat[1] - grid.KY2 * kdotu])


def divergence_residual_2d(f: np.ndarray, grid: Grid) -> float:
    hat = grid.fft_h(f)
    div = np.abs(grid.KX2 * hat[0] + grid.KY2 * hat[1]).max()
    scale = max(np.abs(k * hat[i]).max() for i in range(2) for k in (grid.KX2, grid.KY2))
    return float(div / scale) if scale > 0 else 0.0


def pressure_source_2d(zp: np.ndarray, zm: np.ndarray, grid: Grid, dealias: bool = True) -> np.ndarray:
    """Spectral ``d_a zp^b d_b zm^a`` (dealiased when requested)."""
    mask = grid.mask_h if dealias else 1.0
    ph = grid.fft_h(zp) * mask
    mh = grid.fft_h(zm) * mask
    K = (grid.KX2, grid.KY2)
    gp = [[grid.ifft_h(1j * K[a] * ph[b]) for b in range(2)] for a in range(2)]
    gm = [[grid.ifft_h(1j * K[a] * mh[b]) for b in range(2)] for a in range(2)]
    src = sum(gp[a][b] * gm[b][a] for a in range(2) for b in range(2))
    return grid.fft_h(src) * mask


def solve_pressure_2d(state: State2D, dealias: bool = True) -> np.ndarray:
    """``p_hat = f_hat / |k_h|^2`` with ``f = d_a zp^b d_b zm^a``, mean-zero gauge."""
    g = state.grid
    return g.ifft_h(pressure_source_2d(state.zp, state.zm, g, dealias) * g.inv_k2_h)


def solve_poisson_2d(rhs: np.ndarray, grid: Grid) -> np.ndarray:
    """Solve ``Lap_h p = rhs`` on the torus, mean-zero gauge."""
    return grid.ifft_h(-grid.fft_h(rhs) * grid.inv_k2_h)


def _rhs_hat_2d(ph: np.ndarray, mh: np.ndarray, grid: Grid, dealias: bool = True):
    mask = grid.mask_h if dealias else 1.0
    K = (grid.KX2, grid.KY2)
    zp_e = [grid.ifft_h(ph[i] * mask) for i in range(2)]
    zm_e = [grid.ifft_h(mh[i] * mask) for i in range(2)]
    T = [[grid.fft_h(zp_e[a] * zm_e[b]) * mask for b in range(2)] for a in range(2)]
    adv_p = [1j * (K[0] * T[i][0] + K[1] * T[i][1]) for i in range(2)]
    adv_m = [1j * (K[0] * T[0][i] + K[1] * T[1][i]) for i in range(2)]
    src = -sum(K[a] * K[b] * T[b][a] for a in range(2) for b in range(2))
    p_hat = src * grid.inv_k2_h
    dp = np.stack([1j * grid.KX2 * ph[i] - adv_p[i] - 1j * K[i] * p_hat for i in range(2)])
    dm = np.stack([-1j * grid.KX2 * mh[i] - adv_m[i] - 1j * K[i] * p_hat for i in range(2)])
    return _project_2d(dp, grid), _project_2d(dm, grid)


def rhs_2d(state: State2D, dealias: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    g = state.grid
    dp, dm = _rhs_hat_2d(g.fft_h(state.zp), g.fft_h(state.zm), g, dealias)
    return g.ifft_h(dp), g.ifft_h(dm)


def step_2d(state: State2D, dt: float, dealias: bool = True) -> State2D:
    """Classical RK4 with the projection inside every stage."""
    g = state.grid
    p0, m0 = g.fft_h(state.zp), g.fft_h(state.zm)
    k1p, k1m = _rhs_hat_2d(p0, m0, g, dealias)
    k2p, k2m = _rhs_hat_2d(p0 + 0.5 * dt * k1p, m0 + 0.5 * dt * k1m, g, dealias)
    k3p, k3m = _rhs_hat_2d(p0 + 0.5 * dt * k2p, m0 + 0.5 * dt * k2m, g, dealias)
    k4p, k4m = _rhs_hat_2d(p0 + dt * k3p, m0 + dt * k3m, g, dealias)
    zp = g.ifft_h(p0 + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p))
    zm = g.ifft_h(m0 + dt / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m))
    for v in (zp, zm):
        if not (np.all(np.isfinite(v)) and np.abs(v).max(initial=0.0) <= BLOWUP_THRESHOLD):
            raise BlowUpError(f"non-finite or runaway values after step to t={state.t + dt:.6g}", last_state=state)
    return State2D(zp, zm, state.t + dt, g)


def stable_dt_2d(state: State2D, cfl: float) -> float:
    """The 3D rule on the shared grid, vertical spacing included.

    A standalone 2D run then takes the same steps as the 2D half of a paired
    run, and its time error matches the 3D counterpart's.
    """
    g = state.grid
    amp = max(np.abs(state.zp).max(), np.abs(state.zm).max())
    return cfl * g.min_spacing() / (1.0 + amp)


def unweighted_energy_2d(state: State2D) -> float:
    g = state.grid
    return float((np.sum(state.zp**2) + np.sum(state.zm**2)) * g.hx * g.hy)


def energies_2d(state: State2D, max_k: int = DEFAULT_H_ORDER) -> Dict[Tuple[str, int], float]:
    g = state.grid
    out = {}
    for s, f in (("+", state.zp), ("-", state.zm)):
        for k in range(max_k + 1):
            out[(s, k)] = diag.horizontal_energy(f, s, k, state.t, g)
    return out


def flux_integrands_2d(state: State2D, max_k: int = DEFAULT_H_ORDER) -> Dict[Tuple[str, int], float]:
    """Horizontal flux integrands ``int <u_-+>^(2(1+s)) / <u_+->^(1+s) |d_h^k z|^2 dx_h``."""
    g = state.grid
    out = {}
    for s, f in (("+", state.zp), ("-", state.zm)):
        w = diag.flux_weight(s, state.t, g.x1, g.sigma)
        hat = g.fft_h(f)
        for k in range(max_k + 1):
            tot = 0.0
            for a1, a2 in diag.multi_indices(k):
                d = g.ifft_h(g.deriv_hat_h(hat, a1, a2))
                tot += float(np.dot(w, np.einsum("cij,cij->i", d, d)))
            out[(s, k)] = tot * g.hx * g.hy
    return out


@dataclass
class Trajectory2D:
    snapshots: List[State2D] = field(default_factory=list)
    energies: List[Dict[Tuple[str, int], float]] = field(default_factory=list)
    fluxes: List[Dict[Tuple[str, int], float]] = field(default_factory=list)
    unweighted: List[float] = field(default_factory=list)
    aborted: bool = False
    message: str = ""

    @property
    def final(self) -> State2D:
        return self.snapshots[-1]

    def summary(self) -> dict:
        e = np.array(self.unweighted)
        return {
            "n_snapshots": len(self.snapshots),
            "t_final": float(self.snapshots[-1].t) if self.snapshots else 0.0,
            "aborted": self.aborted,
            "message": self.message,
            "energy_drift": float(np.abs(e - e[0]).max() / e[0]) if e.size and e[0] > 0 else 0.0,
        }


class _Recorder2D:
    def __init__(self, traj: Trajectory2D, max_k: int):
        self.traj = traj
        self.max_k = max_k
        self._last = None

    def snapshot(self, st: State2D):
        tr = self.traj
        tr.snapshots.append(st)
        tr.energies.append(energies_2d(st, self.max_k))
        cur = flux_integrands_2d(st, self.max_k)
        if self._last is None:
            acc = {key: 0.0 for key in cur}
        else:
            t0, prev = self._last
            acc = {key: tr.fluxes[-1][key] + 0.5 * (st.t - t0) * (prev[key] + cur[key]) for key in cur}
        tr.fluxes.append(acc)
        self._last = (st.t, cur)


def run_2d(state: State2D, config: StepperConfig, max_k: int = DEFAULT_H_ORDER) -> Trajectory2D:
    """Advance to ``config.t_end`` with CFL steps clipped to the snapshot times."""
    traj = Trajectory2D()
    rec = _Recorder2D(traj, max_k)
    rec.snapshot(state)
    traj.unweighted.append(unweighted_energy_2d(state))
    cur = state
    n_snap = 1
    eps_t = 1e-12 * max(1.0, config.t_end)
    while cur.t < config.t_end - eps_t:
        target = min(n_snap * config.snapshot_cadence, config.t_end)
        dt = stable_dt_2d(cur, config.cfl)
        dt, hit = clip_to_target(cur.t, dt, target)
        try:
            nxt = step_2d(cur, dt, config.dealias)
        except BlowUpError as exc:
            traj.aborted, traj.message = True, str(exc)
            break
        cur = nxt.with_fields(t=target) if hit else nxt
        traj.unweighted.append(unweighted_energy_2d(cur))
        if hit:
            rec.snapshot(cur)
            n_snap += 1
    return traj


@dataclass
class PairedTrajectory:
    """Snapshots of a 3D run and a 2D run advanced with identical time steps."""

    snaps3d: List[ElsasserState] = field(default_factory=list)
    traj2d: Trajectory2D = field(default_factory=Trajectory2D)
    dts: List[float] = field(default_factory=list)
    aborted: bool = False
    message: str = ""


def run_paired(state3d: ElsasserState, state2d: State2D, config: StepperConfig, max_k: int = DEFAULT_H_ORDER) -> PairedTrajectory:
    """Advance a 3D state and a 2D state in lockstep.

    The time step is the smaller of the two CFL limits, so both runs see the
    same sequence of steps and snapshot times.
    """
    if not state3d.grid.same_as(state2d.grid):
        raise GridError("paired runs need the same grid")
    out = PairedTrajectory()
    rec = _Recorder2D(out.traj2d, max_k)
    out.snaps3d.append(state3d)
    rec.snapshot(state2d)
    out.traj2d.unweighted.append(unweighted_energy_2d(state2d))
    a, b = state3d, state2d
    n_snap = 1
    eps_t = 1e-12 * max(1.0, config.t_end)
    while a.t < config.t_end - eps_t:
        target = min(n_snap * config.snapshot_cadence, config.t_end)
        dt = min(stable_dt(a, config.cfl), stable_dt_2d(b, config.cfl))
        dt, hit = clip_to_target(a.t, dt, target)
        try:
            a2 = step(a, dt, config.dealias)
            b2 = step_2d(b, dt, config.dealias)
        except BlowUpError as exc:
            out.aborted, out.message = True, str(exc)
            break
        if hit:
            a2, b2 = a2.with_fields(t=target), b2.with_fields(t=target)
        a, b = a2, b2
        out.dts.append(dt)
        out.traj2d.unweighted.append(unweighted_energy_2d(b))
        if hit:
            out.snaps3d.append(a)
            rec.snapshot(b)
            n_snap += 1
    return out


@dataclass(frozen=True)
class ComparisonRow:
    t: float
    diff_h: Dict[Tuple[str, int], np.ndarray]
    z3: Dict[Tuple[str, int], np.ndarray]

    def sup_diff(self, max_k: int = DEFAULT_H_ORDER) -> float:
        """``sum_+- sum_{k<=max_k} sup_x3 E_h^(k)(z_(delta)^h - z_(0)^h)``."""
        return float(sum(v.max() for (s, k), v in self.diff_h.items() if k <= max_k))

    def sup_z3(self, max_k: int = DEFAULT_H_ORDER - 1) -> float:
        """``sum_+- sum_{k<=max_k} sup_x3 E_h^(k)(z_(delta)^3)``."""
        return float(sum(v.max() for (s, k), v in self.z3.items() if k <= max_k))


def compare_3d_2d(snaps3d: Sequence[ElsasserState], snaps2d: Sequence[State2D], max_k: int = DEFAULT_H_ORDER) -> List[ComparisonRow]:
    """Per-slice horizontal energies of the 3D-2D difference and of the rescaled z^3.

    The rescaled vertical component is ``z^3 / delta``; horizontal slices of
    the rescaled state coincide with the physical ones.
    """
    if len(snaps3d) != len(snaps2d):
        raise ValueError("trajectories have different snapshot counts")
    rows = []
    for a, b in zip(snaps3d, snaps2d):
        if not a.grid.same_as(b.grid):
            raise GridError("3D and 2D snapshots use different grids")
        if not math.isclose(a.t, b.t, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"snapshot times differ: {a.t} vs {b.t}")
        g = a.grid
        diff, z3 = {}, {}
        for s, z, z2 in (("+", a.zp.values, b.zp), ("-", a.zm.values, b.zm)):
            d = z[:2] - z2[:, :, :, None]
            for k in range(max_k + 1):
                diff[(s, k)] = diag.horizontal_energy_slices(d, s, k, a.t, g)
                z3[(s, k)] = diag.horizontal_energy_slices(z[2:3] / g.delta, s, k, a.t, g)
        rows.append(ComparisonRow(a.t, diff, z3))
    return rows


def log_kernel_pressure(state: State2D, samples, dealias: bool = True, source: Optional[np.ndarray] = None) -> np.ndarray:
    """``p(x) = -(1/2pi) sum_y log|x - y|_torus f(y) hx hy`` at sample points.

    ``f = d_a zp^b d_b zm^a`` (or ``source``) and ``|.|_torus`` is the
    nearest-image distance, which is accurate for sources localized well
    inside the torus. The log singularity is integrable; samples should sit
    between nodes. The result carries an arbitrary additive constant relative
    to the spectral pressure, so compare differences between samples.
    """
    g = state.grid
    if source is None:
        f = g.ifft_h(pressure_source_2d(state.zp, state.zm, g, dealias))
    else:
        f = np.asarray(source, dtype=float)
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    Px, Py = 2 * g.spec.Lx, 2 * g.spec.Ly
    out = np.empty(len(pts))
    for n, (a, b) in enumerate(pts[:, :2]):
        dx = a - g.x1[:, None]
        dy = b - g.x2[None, :]
        dx = dx - Px * np.round(dx / Px)
        dy = dy - Py * np.round(dy / Py)
        r = np.sqrt(dx * dx + dy * dy)
        if np.any(r < 1e-12):
            raise ValueError("log-kernel samples must not coincide with grid nodes")
        out[n] = -np.sum(np.log(r) * f) * g.hx * g.hy / (2 * np.pi)
    return out


def interpolate_2d(values: np.ndarray, grid: Grid, samples) -> np.ndarray:
    """Trigonometric interpolation of a horizontal field at arbitrary points."""
    coef = np.fft.fft2(values) / values.size
    kx = 2 * np.pi * np.fft.fftfreq(grid.Nx, grid.hx)
    ky = 2 * np.pi * np.fft.fftfreq(grid.Ny, grid.hy)
    out = []
    for a, b in np.atleast_2d(np.asarray(samples, dtype=float))[:, :2]:
        ex = np.exp(1j * kx * (a - grid.x1[0]))
        ey = np.exp(1j * ky * (b - grid.x2[0]))
        out.append(np.real(ex @ coef @ ey))
    return np.array(out)
