"""Weighted energies and fluxes, mean projection and the delta-weighted functional.

Energies are ``|| <u_-+>^(1+sigma) d_h^alpha d3^l z_+- ||^2`` summed over
horizontal multi-indices of length ``k``, each multi-index counted once.
Quadrature is the rectangle rule horizontally and the midpoint rule on the
cell-centred vertical points, which is exact for the trigonometric
interpolant of the reflection extension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .fields import ElsasserState, VectorField
from .grid import Grid, characteristic_coords, weight

SIGNS = ("+", "-")
PARTS = ("full", "horizontal", "vertical", "d3")
_COMPONENTS = {"full": (0, 1, 2), "horizontal": (0, 1), "vertical": (2,), "d3": (0, 1, 2)}

DEFAULT_MAX_ORDER = 4


def _check_sign(sign: str) -> str:
    if sign not in SIGNS:
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return sign


def multi_indices(k: int):
    """Horizontal multi-indices ``(a1, a2)`` with ``a1 + a2 = k``."""
    return [(a1, k - a1) for a1 in range(k, -1, -1)]


def energy_weight_sq(sign: str, t: float, x1, sigma: float) -> np.ndarray:
    """``<u_-+>^(2(1+sigma))``: for ``z_+`` the weight follows ``u_- = x1 + t``."""
    u_plus, u_minus = characteristic_coords(t, np.asarray(x1, dtype=float))
    u = u_minus if _check_sign(sign) == "+" else u_plus
    return weight(u, sigma) ** 2


def flux_weight(sign: str, t: float, x1, sigma: float) -> np.ndarray:
    """``<u_-+>^(2(1+sigma)) / <u_+->^(1+sigma)``."""
    u_plus, u_minus = characteristic_coords(t, np.asarray(x1, dtype=float))
    same, other = (u_plus, u_minus) if _check_sign(sign) == "+" else (u_minus, u_plus)
    return weight(other, sigma) ** 2 / weight(same, sigma)


def _field(state: ElsasserState, sign: str) -> VectorField:
    return state.zp if _check_sign(sign) == "+" else state.zm


def derivative_profile(z: VectorField, grid: Grid, alpha, l: int, comps: Sequence[int]) -> np.ndarray:
    """``sum_{x2, x3} |d^alpha d3^l z^i|^2 * hy * hz`` summed over ``comps``, as a function of x1."""
    a1, a2 = alpha
    prof = np.zeros(grid.Nx)
    for i in comps:
        hat = grid.fft(z.values[i], z.parity[i])
        d = grid.ifft(grid.deriv_hat(hat, a1, a2, l))
        prof += np.einsum("ijk,ijk->i", d, d)
    return prof * grid.hy * grid.hz


def weighted_energy(
    state: ElsasserState,
    sign: str,
    k: int,
    l: int,
    part: str = "full",
    sigma: Optional[float] = None,
    by_alpha: bool = False,
):
    """Discrete ``E_+-^(k,l)`` of ``z_+-`` or of one of its parts.

    ``part`` selects the full field, its horizontal or vertical components, or
    ``d3`` for the full field differentiated once more in x3.
    With ``by_alpha`` the per-multi-index terms are returned as a dict.
    """
    if part not in PARTS:
        raise ValueError(f"unknown part {part!r}")
    if k < 0 or l < 0:
        raise ValueError("derivative orders must be non-negative")
    grid = state.grid
    s = grid.sigma if sigma is None else sigma
    z = _field(state, sign)
    ll = l + 1 if part == "d3" else l
    w2 = energy_weight_sq(sign, state.t, grid.x1, s)
    terms = {}
    for alpha in multi_indices(k):
        prof = derivative_profile(z, grid, alpha, ll, _COMPONENTS[part])
        terms[alpha] = float(np.dot(w2, prof) * grid.hx)
    if by_alpha:
        return terms
    return float(sum(terms.values()))


def _energy_table(state: ElsasserState, weights: Dict[str, np.ndarray], max_order: int, parts) -> dict:
    """All ``(sign, k, l, part)`` sums for ``k + l <= max_order`` with the given x1 weights."""
    grid = state.grid
    out = {}
    for sign in SIGNS:
        z = _field(state, sign)
        hats = [grid.fft(z.values[i], z.parity[i]) for i in range(3)]
        w = weights[sign]
        cache = {}

        def comp_sum(alpha, l, i):
            key = (alpha, l, i)
            if key not in cache:
                d = grid.ifft(grid.deriv_hat(hats[i], alpha[0], alpha[1], l))
                prof = np.einsum("ijk,ijk->i", d, d) * grid.hy * grid.hz
                cache[key] = float(np.dot(w, prof) * grid.hx)
            return cache[key]

        for k in range(max_order + 1):
            for l in range(max_order + 1 - k):
                for part in parts:
                    ll = l + 1 if part == "d3" else l
                    out[(sign, k, l, part)] = sum(
                        comp_sum(a, ll, i) for a in multi_indices(k) for i in _COMPONENTS[part]
                    )
    return out


@dataclass
class EnergyReport:
    """Weighted energies ``E_+-^(k,l)`` at one time, keyed by ``(sign, k, l, part)``."""

    t: float
    sigma: float
    max_order: int
    energies: Dict[Tuple[str, int, int, str], float]

    def get(self, sign: str, k: int, l: int, part: str = "full") -> float:
        return self.energies[(sign, k, l, part)]

    def total(self, part: str = "full", max_order: Optional[int] = None) -> float:
        m = self.max_order if max_order is None else max_order
        return float(sum(v for (s, k, l, p), v in self.energies.items() if p == part and k + l <= m))

    def as_row(self) -> Dict[str, float]:
        return {f"E{s}_{k}_{l}_{p}": v for (s, k, l, p), v in sorted(self.energies.items())}


def energy_report(state: ElsasserState, max_order: int = DEFAULT_MAX_ORDER, parts: Iterable[str] = PARTS) -> EnergyReport:
    """Energies for all ``k + l <= max_order``; the ``d3`` part reaches x3 order ``l + 1``."""
    grid = state.grid
    parts = tuple(parts)
    w = {s: energy_weight_sq(s, state.t, grid.x1, grid.sigma) for s in SIGNS}
    return EnergyReport(state.t, grid.sigma, max_order, _energy_table(state, w, max_order, parts))


def flux_integrands(state: ElsasserState, max_order: int = DEFAULT_MAX_ORDER, parts: Iterable[str] = PARTS) -> dict:
    """Spatial integrals ``int <u_-+>^(2(1+s)) / <u_+->^(1+s) |d z|^2 dx`` at one time."""
    grid = state.grid
    w = {s: flux_weight(s, state.t, grid.x1, grid.sigma) for s in SIGNS}
    return _energy_table(state, w, max_order, tuple(parts))


@dataclass(frozen=True)
class FluxAccumulator:
    """Running trapezoidal time integrals of the flux integrands."""

    values: Dict[Tuple[str, int, int, str], float] = field(default_factory=dict)
    last_t: Optional[float] = None
    last_integrand: Optional[Dict[Tuple[str, int, int, str], float]] = None
    max_order: int = DEFAULT_MAX_ORDER
    parts: Tuple[str, ...] = PARTS

    def get(self, sign: str, k: int, l: int, part: str = "full") -> float:
        return self.values.get((sign, k, l, part), 0.0)


def accumulate_flux(acc: FluxAccumulator, state: ElsasserState) -> FluxAccumulator:
    """Add the trapezoid from the last snapshot to ``state``; the first call only records."""
    if acc.last_t is not None and state.t < acc.last_t:
        raise ValueError(f"snapshot at t={state.t} precedes the last accumulated time {acc.last_t}")
    cur = flux_integrands(state, acc.max_order, acc.parts)
    if acc.last_t is None:
        values = {key: 0.0 for key in cur}
    else:
        dt = state.t - acc.last_t
        values = {key: acc.values.get(key, 0.0) + 0.5 * dt * (acc.last_integrand[key] + cur[key]) for key in cur}
    return FluxAccumulator(values, state.t, cur, acc.max_order, acc.parts)


# -- delta-weighted functional ---------------------------------------------------------


def functional_terms(report: EnergyReport, delta: float, n_star: Optional[int] = None, n: Optional[int] = None) -> dict:
    """The three groups of the delta-weighted total, per sign.

    ``sum_{k+l<=N*} delta^(2(l-1/2)) E^(k,l)(z)``,
    ``sum_{k<=N*-1} delta^-3 E^(k,0)(z^3)`` and
    ``sum_{k+l<=N+2} delta^(2(l-1/2)) E^(k,l)(d3 z)``.
    """
    ns = report.max_order if n_star is None else n_star
    nn = ns // 2 if n is None else n
    if ns > report.max_order or nn + 2 > report.max_order:
        raise ValueError("report does not contain the orders needed by the functional")
    out = {}
    for s in SIGNS:
        a = sum(delta ** (2 * (l - 0.5)) * report.get(s, k, l) for k in range(ns + 1) for l in range(ns + 1 - k))
        b = sum(delta**-3 * report.get(s, k, 0, "vertical") for k in range(ns))
        c = sum(
            delta ** (2 * (l - 0.5)) * report.get(s, k, l, "d3") for k in range(nn + 3) for l in range(nn + 3 - k)
        )
        out[s] = (a, b, c)
    return out


def total_energy_functional(report: EnergyReport, delta: float, n_star: Optional[int] = None, n: Optional[int] = None) -> float:
    """delta-weighted total of the weighted energies at one time (flux part excluded)."""
    return float(sum(sum(v) for v in functional_terms(report, delta, n_star, n).values()))


def state_functional(state: ElsasserState, max_order: int = DEFAULT_MAX_ORDER) -> float:
    return total_energy_functional(energy_report(state, max_order), state.grid.delta)


def unweighted_energy(state: ElsasserState) -> float:
    """``int |z_+|^2 + |z_-|^2 dx``."""
    g = state.grid
    return float((np.sum(state.zp.values**2) + np.sum(state.zm.values**2)) * g.cell_volume)


# -- mean projection --------------------------------------------------------------------


def mean_project(values: np.ndarray) -> np.ndarray:
    """Vertical average over the slab (last axis); output drops the x3 axis.

    The midpoint rule on the cell-centred points picks out exactly the zero
    vertical mode of the reflection extension.
    """
    return np.asarray(values, dtype=float).mean(axis=-1)


def lift(values2d: np.ndarray, grid: Grid) -> np.ndarray:
    """Constant-in-x3 slab field from a horizontal one."""
    v = np.asarray(values2d, dtype=float)
    return np.repeat(v[..., None], grid.Nz, axis=-1)


@dataclass(frozen=True)
class Decomposition:
    """``zbar[s]`` is ``M z_s^h`` with shape ``(2, Nx, Ny)``; ``w[s]`` is the fluctuation."""

    zbar: Dict[str, np.ndarray]
    w: Dict[str, VectorField]

    def reassemble(self, grid: Grid) -> Dict[str, VectorField]:
        out = {}
        for s in SIGNS:
            v = self.w[s].values.copy()
            v[:2] = v[:2] + lift(self.zbar[s], grid)
            out[s] = VectorField(v, self.w[s].parity)
        return out


def decompose(state: ElsasserState) -> Decomposition:
    """``zbar^h = M z^h``, ``w^h = z^h - zbar^h``, ``w^3 = z^3``."""
    grid = state.grid
    zbar, w = {}, {}
    for s in SIGNS:
        z = _field(state, s)
        zb = mean_project(z.values[:2])
        wv = z.values.copy()
        wv[:2] = z.values[:2] - lift(zb, grid)
        zbar[s] = zb
        w[s] = VectorField(wv, z.parity)
    return Decomposition(zbar, w)


def horizontal_divergence_2d(f2d: np.ndarray, grid: Grid) -> np.ndarray:
    hat = grid.fft_h(f2d)
    return grid.ifft_h(1j * grid.KX2 * hat[0] + 1j * grid.KY2 * hat[1])


# -- horizontal energies ---------------------------------------------------------------


def horizontal_energy(f2d: np.ndarray, sign: str, k: int, t: float, grid: Grid, sigma: Optional[float] = None) -> float:
    """``sum_{|alpha|=k} || <u_-+>^(1+sigma) d_h^alpha f ||^2_{L^2(R^2)}`` for ``f`` of shape ``(ncomp, Nx, Ny)``."""
    s = grid.sigma if sigma is None else sigma
    f = np.asarray(f2d, dtype=float)
    if f.ndim == 2:
        f = f[None]
    w2 = energy_weight_sq(sign, t, grid.x1, s)
    hat = grid.fft_h(f)
    total = 0.0
    for a1, a2 in multi_indices(k):
        d = grid.ifft_h(grid.deriv_hat_h(hat, a1, a2))
        total += float(np.dot(w2, np.einsum("cij,cij->i", d, d)))
    return total * grid.hx * grid.hy


def horizontal_energy_slices(f3d: np.ndarray, sign: str, k: int, t: float, grid: Grid, sigma: Optional[float] = None) -> np.ndarray:
    """Per-x3-slice horizontal energies of a slab field ``(ncomp, Nx, Ny, Nz)``."""
    s = grid.sigma if sigma is None else sigma
    f = np.asarray(f3d, dtype=float)
    if f.ndim == 3:
        f = f[None]
    w2 = energy_weight_sq(sign, t, grid.x1, s)
    hat = grid.fft_h(np.moveaxis(f, -1, 1))  # (ncomp, Nz, Nx, Ny)
    out = np.zeros(grid.Nz)
    for a1, a2 in multi_indices(k):
        d = grid.ifft_h(grid.deriv_hat_h(hat, a1, a2))
        out += np.einsum("i,czij->z", w2, d * d)
    return out * grid.hx * grid.hy


def sup_slice_energy(f3d: np.ndarray, sign: str, k: int, t: float, grid: Grid) -> float:
    return float(horizontal_energy_slices(f3d, sign, k, t, grid).max())


# -- z^3 gain, run health ---------------------------------------------------------------


def z3_gain_ratios(state: ElsasserState, max_k: int = 3) -> Dict[Tuple[str, int], float]:
    """``E^(k,0)(z^3) / (delta * E^(k+1,0)(z^h))`` for each sign and ``k <= max_k``."""
    out = {}
    for s in SIGNS:
        for k in range(max_k + 1):
            num = weighted_energy(state, s, k, 0, "vertical")
            den = state.grid.delta * weighted_energy(state, s, k + 1, 0, "horizontal")
            out[(s, k)] = num / den if den > 0 else (0.0 if num == 0 else math.inf)
    return out


def wraparound_mass(state: ElsasserState) -> Dict[str, float]:
    """Fraction of ``int |z|^2`` outside ``|x1| <= Lx/2``."""
    grid = state.grid
    outside = np.abs(grid.x1) > grid.spec.Lx / 2
    out = {}
    for s in SIGNS:
        prof = np.einsum("cijk,cijk->i", _field(state, s).values, _field(state, s).values)
        tot = prof.sum()
        out[s] = float(prof[outside].sum() / tot) if tot > 0 else 0.0
    return out


def centroid(state: ElsasserState, sign: str) -> float:
    """x1-centroid of ``|z|^2`` on the fundamental domain."""
    grid = state.grid
    z = _field(state, sign).values
    prof = np.einsum("cijk,cijk->i", z, z)
    tot = prof.sum()
    if tot == 0:
        return float("nan")
    return float(np.dot(grid.x1, prof) / tot)


# -- characteristic-surface identity -------------------------------------------------------


def _profiles_x1_hat(snapshots, sign, alpha, l, comps):
    """x1-Fourier coefficients of the derivative field at each snapshot, shape (n, ncomp, Nx, Ny, Nz)."""
    out = []
    for st in snapshots:
        g = st.grid
        z = _field(st, sign)
        vals = []
        for i in comps:
            hat = g.fft(z.values[i], z.parity[i])
            vals.append(g.ifft(g.deriv_hat(hat, alpha[0], alpha[1], l)))
        out.append(np.fft.fft(np.stack(vals), axis=1))
    return np.stack(out)


@dataclass(frozen=True)
class FluxSurfaceReport:
    spacetime: float
    surface: float
    rel_diff: float
    n_snapshots: int
    n_tau: int


def flux_surface_identity_check(
    snapshots: Sequence[ElsasserState],
    sign: str = "+",
    k: int = 0,
    l: int = 0,
    part: str = "full",
    n_tau: int = 400,
) -> FluxSurfaceReport:
    """Compute one flux two ways.

    (a) ``sqrt(2) * int_0^T int <u_-+>^(2(1+s)) / <u_+->^(1+s) |f|^2 dx dt`` with
    the trapezoidal rule over snapshots.
    (b) Integrate ``<u_-+>^(2(1+s)) |f|^2`` over each characteristic surface
    ``x1 = u -+ ... `` with area element ``sqrt(2) dtau dx2 dx3``, weight by
    ``<u>^-(1+s)`` and integrate over ``u``. Along the surface the field is
    linearly interpolated in time between snapshots and shifted spectrally
    in x1, on a fixed fine tau grid of ``n_tau`` intervals.
    """
    _check_sign(sign)
    snaps = list(snapshots)
    if not snaps:
        raise ValueError("need at least one snapshot")
    times = np.array([s.t for s in snaps])
    if len(snaps) > 2:
        steps = np.diff(times)
        if np.ptp(steps) > 1e-9 * max(1.0, times[-1]):
            raise ValueError("snapshots must be uniformly spaced in time")
    grid = snaps[0].grid
    sigma = grid.sigma
    comps = _COMPONENTS[part]
    ll = l + 1 if part == "d3" else l
    if len(snaps) == 1 or times[-1] == times[0]:
        return FluxSurfaceReport(0.0, 0.0, 0.0, len(snaps), n_tau)

    # (a) spacetime quadrature
    vals = []
    for st in snaps:
        w = flux_weight(sign, st.t, grid.x1, sigma)
        tot = 0.0
        for a in multi_indices(k):
            tot += float(np.dot(w, derivative_profile(_field(st, sign), grid, a, ll, comps)) * grid.hx)
        vals.append(tot)
    spacetime = math.sqrt(2.0) * float(integrate.trapezoid(vals, times))

    # (b) surface route; x1 = u + tau for z_+ (u_+ = x1 - t fixed), x1 = u - tau for z_-
    direction = 1.0 if sign == "+" else -1.0
    u = grid.x1
    kx = 2 * np.pi * np.fft.fftfreq(grid.Nx, grid.hx)
    taus = np.linspace(times[0], times[-1], n_tau + 1)
    tw = np.full(n_tau + 1, (taus[1] - taus[0]))
    tw[0] *= 0.5
    tw[-1] *= 0.5
    surface = 0.0
    for a in multi_indices(k):
        coef = _profiles_x1_hat(snaps, sign, a, ll, comps)
        inner = np.zeros(grid.Nx)
        for tau, wt in zip(taus, tw):
            j = min(np.searchsorted(times, tau, side="right") - 1, len(times) - 2)
            th = (tau - times[j]) / (times[j + 1] - times[j])
            c = (1 - th) * coef[j] + th * coef[j + 1]
            shift = np.exp(1j * kx * direction * tau)[None, :, None, None]
            f = np.real(np.fft.ifft(c * shift, axis=1))
            prof = np.einsum("cijk,cijk->i", f, f) * grid.hy * grid.hz
            x1 = u + direction * tau
            other = x1 + tau if sign == "+" else x1 - tau
            inner += wt * weight(other, sigma) ** 2 * prof
        surface += math.sqrt(2.0) * float(np.sum(inner / weight(u, sigma)) * grid.hx)
    ref = max(abs(spacetime), abs(surface))
    rel = abs(spacetime - surface) / ref if ref > 0 else 0.0
    return FluxSurfaceReport(spacetime, surface, rel, len(snaps), n_tau)
