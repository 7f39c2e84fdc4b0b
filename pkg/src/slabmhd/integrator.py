"""Time stepping of the Elsässer system with a stage-level pressure projection.

Each right-hand side evaluation solves the Neumann pressure problem on the
reflection extension, so every Runge-Kutta stage is divergence-free.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, List, Optional, TextIO

import numpy as np

from . import diagnostics as diag
from .errors import BlowUpError
from .fields import ElsasserState, VectorField, divergence_residual_hat, project_hat, to_hat, write_snapshot
from .grid import VECTOR_PARITY, Grid

log = logging.getLogger(__name__)

#: magnitude above which a run is declared blown up
BLOWUP_THRESHOLD = 1e6


@dataclass(frozen=True)
class StepperConfig:
    """Courant factor, final time, snapshot interval and dealiasing flag."""

    cfl: float = 0.4
    t_end: float = 1.0
    snapshot_cadence: float = 0.1
    dealias: bool = True

    def __post_init__(self):
        if not (0 < self.cfl < 1):
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.snapshot_cadence <= 0:
            raise ValueError("snapshot_cadence must be positive")


def _mask(grid: Grid, dealias: bool):
    return grid.mask if dealias else 1.0


def _rhs_from_hat(ph: np.ndarray, mh: np.ndarray, grid: Grid, dealias: bool = True):
    """Spectral right-hand sides from spectral fields; returns ``(dzp_hat, dzm_hat, p_hat)``.

    With both fields divergence-free the quadratic terms are written through
    ``T[a, b] = zp^a zm^b``: ``(zm.grad) zp^i = d_j T[i, j]``,
    ``(zp.grad) zm^i = d_j T[j, i]`` and the pressure source
    ``d_i zp^j d_j zm^i = d_i d_j T[j, i]``.
    """
    mask = _mask(grid, dealias)
    # quadratic terms see 2/3-truncated inputs and are truncated again on output
    zp_e = [grid.ifft_ext(ph[i] * mask) for i in range(3)]
    zm_e = [grid.ifft_ext(mh[i] * mask) for i in range(3)]
    T = [[grid.fft_ext(zp_e[a] * zm_e[b]) * mask for b in range(3)] for a in range(3)]
    K = grid.K
    adv_p = [1j * (K[0] * T[i][0] + K[1] * T[i][1] + K[2] * T[i][2]) for i in range(3)]
    adv_m = [1j * (K[0] * T[0][i] + K[1] * T[1][i] + K[2] * T[2][i]) for i in range(3)]
    src = -sum(K[i] * K[j] * T[j][i] for i in range(3) for j in range(3))
    p_hat = src * grid.inv_k2
    dp = np.stack([1j * grid.KX * ph[i] - adv_p[i] - 1j * K[i] * p_hat for i in range(3)])
    dm = np.stack([-1j * grid.KX * mh[i] - adv_m[i] - 1j * K[i] * p_hat for i in range(3)])
    return project_hat(dp, grid), project_hat(dm, grid), p_hat


def rhs_hat(zp: np.ndarray, zm: np.ndarray, grid: Grid, dealias: bool = True):
    """Spectral right-hand sides from slab samples ``(3, Nx, Ny, Nz)``."""
    ph = np.stack([grid.fft(zp[i], VECTOR_PARITY[i]) for i in range(3)])
    mh = np.stack([grid.fft(zm[i], VECTOR_PARITY[i]) for i in range(3)])
    return _rhs_from_hat(ph, mh, grid, dealias)


def rhs(state: ElsasserState, dealias: bool = True):
    """``dzp = d1 zp - (zm.grad) zp - grad p``, ``dzm = -d1 zm - (zp.grad) zm - grad p``.

    Both are returned as divergence-free :class:`VectorField` objects.
    """
    grid = state.grid
    dp, dm, _ = rhs_hat(state.zp.values, state.zm.values, grid, dealias)
    return _slab(dp, grid), _slab(dm, grid)


def _slab(hat: np.ndarray, grid: Grid) -> VectorField:
    return VectorField(np.stack([grid.ifft(hat[i]) for i in range(3)]))


def _check_healthy(values: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(values)) and np.abs(values).max(initial=0.0) <= BLOWUP_THRESHOLD)


def step(state: ElsasserState, dt: float, dealias: bool = True) -> ElsasserState:
    """One classical RK4 step; negative ``dt`` integrates backwards.

    Stages are combined in spectral space; the result is restricted to the
    slab at the end, which also re-imposes the reflection parities exactly.
    """
    grid = state.grid
    p0 = to_hat(state.zp, grid)
    m0 = to_hat(state.zm, grid)
    k1p, k1m, _ = _rhs_from_hat(p0, m0, grid, dealias)
    k2p, k2m, _ = _rhs_from_hat(p0 + 0.5 * dt * k1p, m0 + 0.5 * dt * k1m, grid, dealias)
    k3p, k3m, _ = _rhs_from_hat(p0 + 0.5 * dt * k2p, m0 + 0.5 * dt * k2m, grid, dealias)
    k4p, k4m, _ = _rhs_from_hat(p0 + dt * k3p, m0 + dt * k3m, grid, dealias)
    zp = _slab(p0 + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p), grid)
    zm = _slab(m0 + dt / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m), grid)
    if not (_check_healthy(zp.values) and _check_healthy(zm.values)):
        raise BlowUpError(f"non-finite or runaway values after step to t={state.t + dt:.6g}", last_state=state)
    return ElsasserState(zp, zm, state.t + dt, grid)


def stable_dt(state: ElsasserState, cfl: float) -> float:
    """``cfl * min(h) / (1 + max(|zp|, |zm|))``; the 1 is the background Alfvén speed."""
    amp = max(np.abs(state.zp.values).max(), np.abs(state.zm.values).max())
    return cfl * state.grid.min_spacing() / (1.0 + amp)


def clip_to_target(t: float, dt: float, target: float):
    """Step toward ``target`` without overshooting and without sliver steps.

    Returns ``(dt', hit)``: when ``target`` is within reach the remaining
    interval is split into equal steps no longer than ``dt``.
    """
    remaining = target - t
    n = max(1, math.ceil(remaining / dt * (1 - 1e-12)))
    dt = remaining / n
    return dt, n == 1


def max_divergence(state: ElsasserState) -> float:
    g = state.grid
    return max(divergence_residual_hat(to_hat(state.zp, g), g), divergence_residual_hat(to_hat(state.zm, g), g))


@dataclass
class StepRecord:
    step: int
    t: float
    dt: float
    energy: float
    divergence: float


@dataclass
class Trajectory:
    """Snapshots at the configured cadence plus per-step records and accumulated fluxes."""

    snapshots: List[ElsasserState] = field(default_factory=list)
    reports: List[diag.EnergyReport] = field(default_factory=list)
    fluxes: List[diag.FluxAccumulator] = field(default_factory=list)
    records: List[StepRecord] = field(default_factory=list)
    aborted: bool = False
    message: str = ""

    @property
    def final(self) -> ElsasserState:
        return self.snapshots[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def summary(self) -> dict:
        e = np.array([r.energy for r in self.records]) if self.records else np.array([])
        out = {
            "n_steps": max(0, len(self.records) - 1),
            "n_snapshots": len(self.snapshots),
            "t_final": float(self.snapshots[-1].t) if self.snapshots else 0.0,
            "aborted": self.aborted,
            "message": self.message,
            "max_divergence": float(max((r.divergence for r in self.records), default=0.0)),
        }
        if e.size and e[0] > 0:
            out["energy_drift"] = float(np.abs(e - e[0]).max() / e[0])
        else:
            out["energy_drift"] = 0.0
        return out


def run(
    state: ElsasserState,
    config: StepperConfig,
    *,
    max_order: int = diag.DEFAULT_MAX_ORDER,
    diagnostics: bool = True,
    keep_snapshots: bool = True,
    snapshot_dir: Optional[str] = None,
    run_log: Optional[TextIO] = None,
    on_snapshot: Optional[Callable[[ElsasserState], None]] = None,
    dt_override: Optional[Callable[[ElsasserState], float]] = None,
) -> Trajectory:
    """Advance ``state`` to ``config.t_end``.

    Time steps follow the CFL rule and are clipped to land on every snapshot
    time. At each snapshot the energy report is computed and fluxes are
    accumulated with the trapezoidal rule. On blow-up the trajectory is
    returned with ``aborted`` set and the last healthy state as final snapshot
    (also written to ``snapshot_dir`` when given).
    """
    traj = Trajectory()
    acc = diag.FluxAccumulator(max_order=max_order)
    if snapshot_dir:
        os.makedirs(snapshot_dir, exist_ok=True)

    def record_snapshot(st: ElsasserState, idx: int):
        nonlocal acc
        if keep_snapshots or not traj.snapshots:
            traj.snapshots.append(st)
        else:
            traj.snapshots[-1:] = [st]
        if diagnostics:
            traj.reports.append(diag.energy_report(st, max_order))
            acc = diag.accumulate_flux(acc, st)
            traj.fluxes.append(acc)
        if snapshot_dir:
            write_snapshot(os.path.join(snapshot_dir, f"snap_{idx:05d}.bin"), st)
        if on_snapshot is not None:
            on_snapshot(st)

    def record_step(n: int, st: ElsasserState, dt: float):
        rec = StepRecord(n, st.t, dt, diag.unweighted_energy(st), max_divergence(st))
        traj.records.append(rec)
        if run_log is not None:
            run_log.write(f"{rec.step} {rec.t:.12g} {rec.dt:.6e} {rec.energy:.16e} {rec.divergence:.3e}\n")

    record_step(0, state, 0.0)
    record_snapshot(state, 0)
    t_end = config.t_end
    cadence = config.snapshot_cadence
    n_snap = 1
    n = 0
    cur = state
    eps_t = 1e-12 * max(1.0, t_end)
    while cur.t < t_end - eps_t:
        target = min(n_snap * cadence, t_end)
        dt = dt_override(cur) if dt_override is not None else stable_dt(cur, config.cfl)
        dt, hit = clip_to_target(cur.t, dt, target)
        try:
            nxt = step(cur, dt, config.dealias)
        except BlowUpError as exc:
            traj.aborted = True
            traj.message = str(exc)
            log.warning("run aborted: %s", exc)
            if snapshot_dir:
                write_snapshot(os.path.join(snapshot_dir, "last_healthy.bin"), cur)
            if traj.snapshots[-1].t != cur.t:
                traj.snapshots.append(cur)
            break
        n += 1
        if hit:
            nxt = nxt.with_fields(t=target)
        record_step(n, nxt, dt)
        cur = nxt
        if hit:
            record_snapshot(cur, n_snap)
            n_snap += 1
    return traj
