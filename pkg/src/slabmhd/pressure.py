"""Slab pressure: spectral Neumann solve and the image-series Green's function.

The production path solves ``Lap p = -d_i zp^j d_j zm^i`` on the reflection
extension, where the even continuation makes ``d3 p = 0`` on the walls
automatic. The image series for ``grad_x G`` is an independent route used to
validate the spectral solve and to measure the kernel decay constant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import ParityError
from .fields import ElsasserState, to_hat
from .grid import Grid, Parity, ScalarField

#: kernel decay constant delta * |x_h - y_h| * |grad G| <= 3/16
GREEN_BOUND_CONSTANT = 3.0 / 16.0


@dataclass(frozen=True)
class PressureField:
    """Even-parity, mean-zero pressure on the slab."""

    field: ScalarField
    grid: Grid

    @property
    def values(self):
        return self.field.values

    def gradient(self) -> np.ndarray:
        hat = self.grid.fft(self.values, Parity.EVEN)
        return np.stack([self.grid.ifft(1j * k * hat) for k in self.grid.K])


def _physical_gradients(hat: np.ndarray, grid: Grid) -> np.ndarray:
    """``out[j, i] = d_j z^i`` on the extended box."""
    return np.stack([[grid.ifft_ext(1j * k * hat[i]) for i in range(3)] for k in grid.K])


def pressure_source_ext(zp_hat: np.ndarray, zm_hat: np.ndarray, grid: Grid) -> np.ndarray:
    """``d_i zp^j d_j zm^i`` on the extended box (before dealiasing)."""
    gp = _physical_gradients(zp_hat, grid)
    gm = _physical_gradients(zm_hat, grid)
    return np.einsum("ij...,ji...->...", gp, gm)


def pressure_hat_from_source(src_ext: np.ndarray, grid: Grid, dealias: bool = True) -> np.ndarray:
    """Solve ``Lap p = -src`` spectrally with the mean-zero gauge."""
    src_hat = grid.fft_ext(src_ext) * (grid.mask if dealias else 1.0)
    return src_hat * grid.inv_k2


def _check_source_parity(src_ext: np.ndarray, grid: Grid, tol: float = 1e-9) -> None:
    lower = src_ext[..., : grid.Nz]
    upper = src_ext[..., grid.Nz :][..., ::-1]
    scale = np.abs(src_ext).max()
    if scale > 0 and np.abs(lower - upper).max() > tol * scale:
        raise ParityError("pressure source is not even under wall reflection")


def solve_neumann_poisson(rhs: ScalarField, grid: Grid) -> PressureField:
    """Solve ``Lap p = rhs`` with ``d3 p = 0`` on the walls, mean-zero gauge."""
    if rhs.parity is not Parity.EVEN:
        raise ParityError("a Neumann right-hand side must have even parity")
    hat = grid.fft(rhs.values, Parity.EVEN)
    p = grid.ifft(-hat * grid.inv_k2)
    return PressureField(ScalarField(p, Parity.EVEN), grid)


def _source_ext(state: ElsasserState, dealias: bool) -> np.ndarray:
    """Source on the extended box from 2/3-truncated inputs, as in the time stepper."""
    grid = state.grid
    mask = grid.mask if dealias else 1.0
    return pressure_source_ext(to_hat(state.zp, grid) * mask, to_hat(state.zm, grid) * mask, grid)


def solve_pressure(state: ElsasserState, dealias: bool = True) -> PressureField:
    """Pressure of an Elsässer state: ``Lap p = -d_i zp^j d_j zm^i``, ``d3 p = 0`` on walls."""
    grid = state.grid
    src = _source_ext(state, dealias)
    _check_source_parity(src, grid)
    p_hat = pressure_hat_from_source(src, grid, dealias)
    return PressureField(ScalarField(grid.ifft(p_hat), Parity.EVEN), grid)


def laplacian(f: ScalarField, grid: Grid) -> ScalarField:
    hat = grid.fft(f.values, f.parity)
    return ScalarField(grid.ifft(-grid.k2 * hat), f.parity)


# -- image series ----------------------------------------------------------------


@dataclass(frozen=True)
class GreenEval:
    """Truncated image-series value of ``grad_x G_delta(x, y)``.

    ``value_reduced`` is the same kernel evaluated at the horizontally
    translated pair ``((x_h - y_h, x3), (0, 0, y3))``.
    """

    x: tuple
    y: tuple
    delta: float
    kmax: int
    value: np.ndarray
    tail_bound: float
    value_reduced: np.ndarray


def _tail_majorant(rho, delta, K):
    """Bound on ``|sum_{k>K} pair_k|`` of the image series (without the 1/4pi).

    The two images of order k sit at vertical offsets ``c +- 2k delta`` with
    ``|c| < 2 delta``. Their horizontal parts are each below
    ``rho / (rho^2 + 4 delta^2 (k-1)^2)^(3/2)``, summed via the integral from
    ``K - 1``. Their vertical parts nearly cancel: the pair is bounded by
    ``1 / (delta^2 (k-1)^3)``, whose tail is below ``1 / (2 delta^2 (K-1)^2)``.
    """
    rho = np.asarray(rho, dtype=float)
    m = max(K - 1, 1)
    v = 2.0 * delta * m / np.where(rho > 0, rho, 1.0)
    s = np.sqrt(1.0 + v * v)
    horiz = np.where(rho > 0, 2.0 / (2.0 * delta * np.where(rho > 0, rho, 1.0)) / (s * (s + v)), 0.0)
    vert = 1.0 / (2.0 * delta**2 * m**2)
    return horiz + vert


def choose_kmax(rho_max: float, delta: float, tol: float) -> int:
    """Smallest K (K >= 2) whose tail majorant, divided by 4pi, is at most ``tol``."""
    def ok(K):
        return _tail_majorant(rho_max, delta, K) / (4 * np.pi) <= tol

    hi = 2
    while not ok(hi):
        hi *= 2
    lo = max(hi // 2, 2)
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    return hi


def green_grad_series(dx_h: np.ndarray, x3, y3, delta: float, K: int, chunk: int = 8192) -> np.ndarray:
    """Vectorized truncated series for many pairs.

    ``dx_h`` has shape ``(..., 2)`` holding ``x_h - y_h``; returns ``(..., 3)``.
    Image orders are processed in blocks from far to near so that the small
    far-field terms are accumulated before the dominant near ones.
    """
    dx_h = np.asarray(dx_h, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    y3 = np.asarray(y3, dtype=float)
    rho2 = dx_h[..., 0] ** 2 + dx_h[..., 1] ** 2
    shape = np.broadcast(x3, y3, rho2).shape
    out = np.zeros(shape + (3,))
    d1 = np.broadcast_to(dx_h[..., 0], shape)[..., None]
    d2 = np.broadcast_to(dx_h[..., 1], shape)[..., None]
    r2h = np.broadcast_to(rho2, shape)[..., None]
    X3 = np.broadcast_to(x3, shape)[..., None]
    Y3 = np.broadcast_to(y3, shape)[..., None]

    def accumulate(d3, sign3):
        inv3 = (r2h + d3 * d3) ** -1.5
        out[..., 0] -= (d1 * inv3).sum(axis=-1)
        out[..., 1] -= (d2 * inv3).sum(axis=-1)
        out[..., 2] -= (sign3 * d3 * inv3).sum(axis=-1)

    step = max(1, chunk // max(1, int(np.prod(shape))))
    for hi in range(K, 0, -step):
        k = np.arange(hi, max(hi - step, 0), -1, dtype=float)
        s = np.where(k % 2 == 1, -1.0, 1.0)
        accumulate(s * (X3 - 2 * k * delta) - Y3, s)
        accumulate(s * (X3 + 2 * k * delta) - Y3, s)
    accumulate(X3 - Y3, np.ones(1))
    return out / (4 * np.pi)


def _check_slab_point(p, delta, closed=False):
    x3 = p[2]
    inside = abs(x3) <= delta if closed else abs(x3) < delta
    if not inside:
        raise ValueError(f"point {tuple(p)} lies outside the slab of half-height {delta}")


def green_grad(x, y, delta: float, tol: float = 1e-9) -> GreenEval:
    """``grad_x G_delta(x, y)`` from the image series, truncated so the tail is below ``tol``.

    ``x`` may sit on a wall (one-sided limit); ``y`` must be in the open slab.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        raise ValueError("green_grad is singular at x = y")
    _check_slab_point(x, delta, closed=True)
    _check_slab_point(y, delta)
    rho = float(np.hypot(*(x[:2] - y[:2])))
    K = choose_kmax(rho, delta, tol)
    val = green_grad_series(x[:2] - y[:2], x[2], y[2], delta, K)
    # translation invariance: the same kernel with y_h moved to the origin
    xr = np.array([x[0] - y[0], x[1] - y[1]])
    red = green_grad_series(xr - np.zeros(2), x[2], y[2], delta, K)
    tail = float(_tail_majorant(rho, delta, K) / (4 * np.pi))
    return GreenEval(tuple(x), tuple(y), delta, K, val, tail, red)


def green_bound_ratio(x, y, delta: float, tol: float = 1e-9) -> float:
    """``delta * |x_h - y_h| * |grad_x G_delta(x, y)|``."""
    g = green_grad(x, y, delta, tol)
    rho = float(np.hypot(x[0] - y[0], x[1] - y[1]))
    return delta * rho * float(np.linalg.norm(g.value))


def sample_green_bound(n: int, rng: np.random.Generator, delta_range=(0.02, 1.0), rho_over_delta=(1.0, 50.0), tol=1e-7):
    """Sample ``delta * rho * |grad G|`` over random admissible pairs.

    The horizontal separation is drawn with ``rho >= delta``: below that the
    free-space singularity dominates and no bound of the form C/(delta rho)
    can hold.
    """
    out = np.empty(n)
    for i in range(n):
        delta = rng.uniform(*delta_range)
        rho = delta * np.exp(rng.uniform(np.log(rho_over_delta[0]), np.log(rho_over_delta[1])))
        ang = rng.uniform(0, 2 * np.pi)
        x = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-delta, delta)])
        y = np.array([x[0] - rho * np.cos(ang), x[1] - rho * np.sin(ang), rng.uniform(-delta, delta)])
        y[2] = np.clip(y[2], -delta * (1 - 1e-12), delta * (1 - 1e-12))
        out[i] = green_bound_ratio(x, y, delta, tol)
    return out


def _nearest_image(d, period):
    return d - period * np.round(d / period)


@lru_cache(maxsize=64)
def box_moment(a: float, b: float, c: float) -> np.ndarray:
    """Diagonal of ``(1/4pi) int_box y y^T / |y|^3 dy`` over the box ``[-a,a]x[-b,b]x[-c,c]``.

    This is the exact contribution of the linear Taylor part of the source to
    the kernel integral over a box centred at the sample point. Each face is
    integrated over the solid angle it subtends, which leaves a smooth 2D
    integrand.
    """
    s = np.array([a, b, c], dtype=float)
    out = np.zeros(3)
    for k in range(3):
        o0, o1 = [j for j in range(3) if j != k]
        for i in range(3):
            def integrand(v, u, k=k, i=i, o0=o0, o1=o1):
                p = np.empty(3)
                p[k], p[o0], p[o1] = s[k], u, v
                return s[k] * p[i] ** 2 / (2.0 * (p @ p) ** 1.5)

            val, _ = integrate.dblquad(integrand, -s[o0], s[o0], -s[o1], s[o1], epsabs=1e-14, epsrel=1e-12)
            out[i] += 2.0 * val
    return out / (4 * np.pi)


def _shift_horizontal(values: np.ndarray, grid: Grid, sx: float, sy: float) -> np.ndarray:
    """Samples of the trigonometric interpolant at ``(x1 + sx, x2 + sy, x3)``."""
    hat = np.fft.fft2(values, axes=(0, 1))
    kx = 2 * np.pi * np.fft.fftfreq(grid.Nx, grid.hx)
    ky = 2 * np.pi * np.fft.fftfreq(grid.Ny, grid.hy)
    phase = np.exp(1j * kx * sx)[:, None, None] * np.exp(1j * ky * sy)[None, :, None]
    return np.real(np.fft.ifft2(hat * phase, axes=(0, 1)))


def pressure_source(state: ElsasserState, dealias: bool = True) -> np.ndarray:
    """Dealiased ``d_i zp^j d_j zm^i`` on the slab grid."""
    grid = state.grid
    src = grid.restrict(_source_ext(state, dealias))
    return grid.ifft(grid.fft(src, Parity.EVEN) * (grid.mask if dealias else 1.0))


def grad_pressure_via_green(state: ElsasserState, samples, tol: float = 1e-7, source: Optional[np.ndarray] = None) -> np.ndarray:
    """Quadrature of ``grad_x G_delta`` against the pressure source at sample points.

    The source is ``d_i zp^j d_j zm^i`` (or ``source``, slab samples of an even
    field) and the kernel sum runs over the slab lattice with cell-volume
    weights, horizontal separations taken to the nearest torus image.

    Singular cell handling: the lattice is shifted horizontally (spectral
    interpolation of the source) so that the sample sits on a cell corner, and
    the cells of the box ``|y_i - x_i| <= h_i`` are replaced by the exact box
    integral of the linear Taylor part of the source. The constant part
    integrates to zero by symmetry. For this to be exact the sample height
    must lie on a vertical cell face ``-delta + j*hz``; other heights fall back
    to the same correction on an asymmetric node set with reduced accuracy.
    """
    grid = state.grid
    src = pressure_source(state) if source is None else np.asarray(source, dtype=float)
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if not np.any(src):
        return np.zeros((len(pts), 3))

    hx, hy, hz = grid.hx, grid.hy, grid.hz
    Px, Py = 2 * grid.spec.Lx, 2 * grid.spec.Ly
    K = choose_kmax(math.hypot(Px / 2, Py / 2), grid.delta, tol)
    D = box_moment(hx, hy, hz)
    src_hat = grid.fft(src, Parity.EVEN)
    grad_src = [grid.ifft(1j * k * src_hat) for k in grid.K]
    grad_par = (Parity.EVEN, Parity.EVEN, Parity.ODD)

    out = np.zeros((len(pts), 3))
    for n, x in enumerate(pts):
        _check_slab_point(x, grid.delta)
        if abs(x[2]) > grid.delta - hz:
            warnings.warn(f"sample {tuple(x)} is within one cell of a wall", RuntimeWarning, stacklevel=2)
        face = (x[2] + grid.delta) / hz
        off3 = abs(face - round(face))
        if off3 > 1e-9:
            dist = min(off3, 1 - off3)
            if abs(dist - 0.5) <= 0.25:
                warnings.warn(
                    f"sample {tuple(x)} is within a quarter cell of a quadrature node height; "
                    "expect reduced accuracy from the singular kernel",
                    RuntimeWarning,
                    stacklevel=2,
                )
        sx = (x[0] - (grid.x1[0] + hx / 2)) % hx
        sy = (x[1] - (grid.x2[0] + hy / 2)) % hy
        f = _shift_horizontal(src, grid, sx, sy)
        y1 = (grid.x1 + sx)[:, None, None]
        y2 = (grid.x2 + sy)[None, :, None]
        y3 = grid.x3[None, None, :]
        d1 = np.broadcast_to(_nearest_image(x[0] - y1, Px), grid.shape)
        d2 = np.broadcast_to(_nearest_image(x[1] - y2, Py), grid.shape)
        d3 = np.broadcast_to(x[2] - y3, grid.shape)
        tiny = 1e-9
        keep = (np.abs(d1) > hx * (1 + tiny)) | (np.abs(d2) > hy * (1 + tiny)) | (np.abs(d3) > hz * (1 + tiny))
        ys = np.broadcast_to(y3, grid.shape)[keep]
        g = green_grad_series(np.stack([d1[keep], d2[keep]], axis=-1), x[2], ys, grid.delta, K)
        out[n] = (g * f[keep][:, None]).sum(axis=0) * grid.cell_volume
        grad_f = np.array([grid.interpolate(gs, p, [x])[0] for gs, p in zip(grad_src, grad_par)])
        out[n] += D * grad_f
    return out


def spectral_grad_pressure_at(state: ElsasserState, samples, source: Optional[np.ndarray] = None) -> np.ndarray:
    """Spectral ``grad p`` (``Lap p = -source``) interpolated to arbitrary points."""
    grid = state.grid
    src = pressure_source(state) if source is None else np.asarray(source, dtype=float)
    p_hat = grid.fft(src, Parity.EVEN) * grid.inv_k2
    comps = [grid.ifft(1j * k * p_hat) for k in grid.K]
    par = (Parity.EVEN, Parity.EVEN, Parity.ODD)
    return np.stack([grid.interpolate(c, q, samples) for c, q in zip(comps, par)], axis=-1)
