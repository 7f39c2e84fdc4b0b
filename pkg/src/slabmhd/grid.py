"""Slab discretization, reflection extension and spectral wavenumbers.

The slab ``(-delta, delta)`` is sampled at ``Nz`` cell-centred points, so no
sample sits on a wall. A slab field is continued across both walls by even or
odd reflection, which turns the vertical direction into a periodic one of
length ``4*delta`` with ``2*Nz`` samples. The horizontal plane is a torus
``[-Lx, Lx) x [-Ly, Ly)``. All spectral work happens on this extended box.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sfft

from .errors import GridError

FFT_WORKERS = -1


class Parity(enum.IntEnum):
    """Behaviour of a field under reflection about the walls ``x3 = +-delta``."""

    ODD = -1
    EVEN = 1

    def __mul__(self, other):
        return Parity(int(self) * int(other))

    def flip(self) -> "Parity":
        return Parity(-int(self))


#: component parities of a velocity-like vector field (z^1, z^2, z^3)
VECTOR_PARITY = (Parity.EVEN, Parity.EVEN, Parity.ODD)
#: component parities of a curl of a velocity-like field
PSEUDO_PARITY = (Parity.ODD, Parity.ODD, Parity.EVEN)


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class GridSpec:
    """Discretization parameters of the slab.

    ``Lx``/``Ly`` are horizontal half-periods, ``delta`` the slab half-height
    and ``sigma`` the exponent of the characteristic weights.
    """

    Lx: float = 8.0
    Ly: float = math.pi
    delta: float = 0.1
    Nx: int = 64
    Ny: int = 16
    Nz: int = 16
    sigma: float = 0.25
    dealias: bool = True

    def __post_init__(self):
        for name in ("Nx", "Ny", "Nz"):
            n = getattr(self, name)
            if int(n) != n or n < 4 or n % 2:
                raise GridError(f"{name} must be an even integer >= 4, got {n}")
        for name in ("Nx", "Ny"):
            if not _is_pow2(getattr(self, name)):
                raise GridError(f"{name} must be a power of two, got {getattr(self, name)}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise GridError("horizontal half-periods must be positive")
        if not (0 < self.delta <= 1):
            raise GridError(f"delta must lie in (0, 1], got {self.delta}")
        if not (0 < self.sigma < 1 / 3):
            raise GridError(f"sigma must lie in (0, 1/3), got {self.sigma}")

    def replace(self, **changes) -> "GridSpec":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return GridSpec(**values)


@dataclass(frozen=True)
class ScalarField:
    """Real samples on the ``Nx x Ny x Nz`` slab grid with a declared parity."""

    values: np.ndarray
    parity: Parity = Parity.EVEN

    def __mul__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.values * other.values, self.parity * other.parity)


class Grid:
    """Collocation coordinates and wavenumbers built from a :class:`GridSpec`.

    Spectral arrays use ``rfftn`` layout over the extended box, shape
    ``(Nx, Ny, Nz + 1)``. First-derivative wavenumbers (``kdx`` etc.) have the
    Nyquist entry zeroed so that divergence, curl and projection share one
    consistent discrete symbol.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        s = spec
        self.Nx, self.Ny, self.Nz = s.Nx, s.Ny, s.Nz
        self.Nz_ext = 2 * s.Nz
        self.delta = s.delta
        self.sigma = s.sigma
        self.hx = 2 * s.Lx / s.Nx
        self.hy = 2 * s.Ly / s.Ny
        self.hz = 2 * s.delta / s.Nz
        self.x1 = -s.Lx + self.hx * np.arange(s.Nx)
        self.x2 = -s.Ly + self.hy * np.arange(s.Ny)
        self.x3_ext = -s.delta + self.hz * (np.arange(self.Nz_ext) + 0.5)
        self.x3 = self.x3_ext[: s.Nz]
        self.origin = (self.x1[0], self.x2[0], self.x3_ext[0])

        self.kx = 2 * np.pi * np.fft.fftfreq(s.Nx, self.hx)
        self.ky = 2 * np.pi * np.fft.fftfreq(s.Ny, self.hy)
        self.kz = 2 * np.pi * np.fft.rfftfreq(self.Nz_ext, self.hz)
        self.kdx = self.kx.copy()
        self.kdx[s.Nx // 2] = 0.0
        self.kdy = self.ky.copy()
        self.kdy[s.Ny // 2] = 0.0
        self.kdz = self.kz.copy()
        self.kdz[-1] = 0.0

        self.KX = self.kdx[:, None, None]
        self.KY = self.kdy[None, :, None]
        self.KZ = self.kdz[None, None, :]
        self.K = (self.KX, self.KY, self.KZ)
        self.k2 = self.KX**2 + self.KY**2 + self.KZ**2
        with np.errstate(divide="ignore"):
            self.inv_k2 = np.where(self.k2 > 0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)

        nx = np.abs(np.fft.fftfreq(s.Nx) * s.Nx)
        ny = np.abs(np.fft.fftfreq(s.Ny) * s.Ny)
        nz = np.abs(np.fft.rfftfreq(self.Nz_ext) * self.Nz_ext)
        if s.dealias:
            self.mask = (
                (nx[:, None, None] <= s.Nx / 3)
                & (ny[None, :, None] <= s.Ny / 3)
                & (nz[None, None, :] <= self.Nz_ext / 3)
            )
        else:
            self.mask = np.ones((s.Nx, s.Ny, s.Nz + 1), dtype=bool)

        # horizontal-only transforms (rfft along x2)
        self.ky_r = 2 * np.pi * np.fft.rfftfreq(s.Ny, self.hy)
        kdy_r = self.ky_r.copy()
        kdy_r[-1] = 0.0
        self.KX2 = self.kdx[:, None]
        self.KY2 = kdy_r[None, :]
        self.k2_h = self.KX2**2 + self.KY2**2
        self.inv_k2_h = np.where(self.k2_h > 0, 1.0 / np.where(self.k2_h > 0, self.k2_h, 1.0), 0.0)
        nyr = np.abs(np.fft.rfftfreq(s.Ny) * s.Ny)
        if s.dealias:
            self.mask_h = (nx[:, None] <= s.Nx / 3) & (nyr[None, :] <= s.Ny / 3)
        else:
            self.mask_h = np.ones((s.Nx, s.Ny // 2 + 1), dtype=bool)

    def __repr__(self):
        return f"Grid({self.spec})"

    @cached_property
    def X1(self):
        return self.x1[:, None, None]

    @cached_property
    def X2(self):
        return self.x2[None, :, None]

    @cached_property
    def X3(self):
        return self.x3[None, None, :]

    @property
    def shape(self):
        return (self.Nx, self.Ny, self.Nz)

    @property
    def cell_volume(self):
        return self.hx * self.hy * self.hz

    def min_spacing(self):
        return min(self.hx, self.hy, self.hz)

    def same_as(self, other: "Grid") -> bool:
        return self.spec == other.spec

    # -- reflection extension -------------------------------------------------
    def extend(self, values: np.ndarray, parity: Parity) -> np.ndarray:
        """Continue slab samples (last axis = x3) to the 4*delta periodic box."""
        return np.concatenate([values, int(parity) * values[..., ::-1]], axis=-1)

    def restrict(self, ext: np.ndarray) -> np.ndarray:
        return ext[..., : self.Nz]

    # -- transforms ------------------------------------------------------------
    def fft_ext(self, ext: np.ndarray) -> np.ndarray:
        return sfft.rfftn(ext, axes=(-3, -2, -1), workers=FFT_WORKERS)

    def ifft_ext(self, hat: np.ndarray) -> np.ndarray:
        return sfft.irfftn(hat, s=(self.Nx, self.Ny, self.Nz_ext), axes=(-3, -2, -1), workers=FFT_WORKERS)

    def fft(self, values: np.ndarray, parity: Parity) -> np.ndarray:
        return self.fft_ext(self.extend(values, parity))

    def ifft(self, hat: np.ndarray) -> np.ndarray:
        return self.restrict(self.ifft_ext(hat))

    def deriv_hat(self, hat: np.ndarray, a1: int = 0, a2: int = 0, l: int = 0) -> np.ndarray:
        """Apply d1^a1 d2^a2 d3^l in spectral space."""
        out = hat
        if a1:
            out = out * (1j * self.KX) ** a1
        if a2:
            out = out * (1j * self.KY) ** a2
        if l:
            out = out * (1j * self.KZ) ** l
        return out

    def fft_h(self, values: np.ndarray) -> np.ndarray:
        return sfft.rfftn(values, axes=(-2, -1), workers=FFT_WORKERS)

    def ifft_h(self, hat: np.ndarray) -> np.ndarray:
        return sfft.irfftn(hat, s=(self.Nx, self.Ny), axes=(-2, -1), workers=FFT_WORKERS)

    def deriv_hat_h(self, hat: np.ndarray, a1: int = 0, a2: int = 0) -> np.ndarray:
        out = hat
        if a1:
            out = out * (1j * self.KX2) ** a1
        if a2:
            out = out * (1j * self.KY2) ** a2
        return out

    def interpolate(self, values: np.ndarray, parity: Parity, points) -> np.ndarray:
        """Evaluate the trigonometric interpolant of a slab field at arbitrary points.

        Points may lie anywhere; the extension's periodicity handles walls and
        images. Cost is O(points * Nx * Ny * Nz), meant for validation only.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ext = self.extend(values, parity)
        coef = np.fft.fftn(ext) / ext.size
        kx = 2 * np.pi * np.fft.fftfreq(self.Nx, self.hx)
        ky = 2 * np.pi * np.fft.fftfreq(self.Ny, self.hy)
        kz = 2 * np.pi * np.fft.fftfreq(self.Nz_ext, self.hz)
        out = np.empty(len(pts))
        for n, (a, b, c) in enumerate(pts):
            ex = np.exp(1j * kx * (a - self.origin[0]))
            ey = np.exp(1j * ky * (b - self.origin[1]))
            ez = np.exp(1j * kz * (c - self.origin[2]))
            out[n] = np.real(np.einsum("ijk,i,j,k->", coef, ex, ey, ez))
        return out


def make_grid(spec: GridSpec) -> Grid:
    """Build collocation coordinates and wavenumbers; GridSpec validates itself."""
    if not isinstance(spec, GridSpec):
        raise GridError("make_grid expects a GridSpec")
    return Grid(spec)


def reflect_extend(f: ScalarField, grid: Grid) -> np.ndarray:
    """Even/odd continuation of a slab field to the 4*delta periodic box.

    On the image half ``(delta, 3*delta)`` the result is ``+-f(2*delta - x3)``.
    """
    return grid.extend(np.asarray(f.values), f.parity)


def restrict(ext: np.ndarray, grid: Grid, parity: Parity = Parity.EVEN) -> ScalarField:
    return ScalarField(np.array(grid.restrict(ext)), parity)


def weight(u, sigma):
    """Characteristic weight <u>^(1+sigma) with <u> = sqrt(1 + u^2)."""
    u = np.asarray(u, dtype=float)
    return (1.0 + u * u) ** ((1.0 + sigma) / 2.0)


def characteristic_coords(t, x1):
    """Return ``(u_plus, u_minus) = (x1 - t, x1 + t)``."""
    return x1 - t, x1 + t
