"""Elsässer states, divergence-free projection, curl and initial data.

Vector fields carry per-component reflection parities. A velocity-like field
has parities (even, even, odd), so its vertical component vanishes on the
walls; its curl has (odd, odd, even).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConstraintError, GridError
from .grid import PSEUDO_PARITY, VECTOR_PARITY, Grid, Parity, ScalarField

#: background field B0 = e1
B0 = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class VectorField:
    """Three slab components stacked as ``values[i]`` with shape ``(3, Nx, Ny, Nz)``."""

    values: np.ndarray
    parity: tuple = VECTOR_PARITY

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.values[i], self.parity[i])

    def __add__(self, other):
        _check_parity(self, other)
        return VectorField(self.values + other.values, self.parity)

    def __sub__(self, other):
        _check_parity(self, other)
        return VectorField(self.values - other.values, self.parity)

    def scaled(self, c: float) -> "VectorField":
        return VectorField(c * self.values, self.parity)

    @classmethod
    def zeros(cls, grid: Grid, parity=VECTOR_PARITY) -> "VectorField":
        return cls(np.zeros((3,) + grid.shape), parity)


def _check_parity(a: VectorField, b: VectorField):
    if tuple(a.parity) != tuple(b.parity):
        raise ValueError("cannot combine vector fields of different parity")


@dataclass(frozen=True)
class ElsasserState:
    """Perturbation fields ``zp = Z_+ - B0`` and ``zm = Z_- + B0`` at time ``t``."""

    zp: VectorField
    zm: VectorField
    t: float
    grid: Grid

    def with_fields(self, zp=None, zm=None, t=None) -> "ElsasserState":
        return replace(
            self,
            zp=self.zp if zp is None else zp,
            zm=self.zm if zm is None else zm,
            t=self.t if t is None else t,
        )


# -- spectral helpers -----------------------------------------------------------


def to_hat(z: VectorField, grid: Grid) -> np.ndarray:
    return np.stack([grid.fft(z.values[i], z.parity[i]) for i in range(3)])


def from_hat(hat: np.ndarray, grid: Grid, parity=VECTOR_PARITY) -> VectorField:
    return VectorField(np.stack([grid.ifft(hat[i]) for i in range(3)]), tuple(parity))


def project_hat(hat: np.ndarray, grid: Grid) -> np.ndarray:
    """Leray projection in spectral space: remove the k-parallel part."""
    kdotu = grid.KX * hat[0] + grid.KY * hat[1] + grid.KZ * hat[2]
    kdotu = kdotu * grid.inv_k2
    return np.stack([hat[0] - grid.KX * kdotu, hat[1] - grid.KY * kdotu, hat[2] - grid.KZ * kdotu])


def curl_hat(hat: np.ndarray, grid: Grid) -> np.ndarray:
    kx, ky, kz = grid.K
    return 1j * np.stack(
        [
            ky * hat[2] - kz * hat[1],
            kz * hat[0] - kx * hat[2],
            kx * hat[1] - ky * hat[0],
        ]
    )


def div_hat(hat: np.ndarray, grid: Grid) -> np.ndarray:
    return 1j * (grid.KX * hat[0] + grid.KY * hat[1] + grid.KZ * hat[2])


def divergence_residual_hat(hat: np.ndarray, grid: Grid) -> float:
    """max|k.u_hat| relative to the largest single-term |k_j u_hat_i|."""
    div = np.abs(grid.KX * hat[0] + grid.KY * hat[1] + grid.KZ * hat[2]).max()
    scale = max(np.abs(k * hat[i]).max() for i in range(3) for k in grid.K)
    if scale == 0:
        return 0.0
    return float(div / scale)


# -- public operations ------------------------------------------------------------


def project_divfree(z: VectorField, grid: Grid) -> VectorField:
    """Spectral divergence-free projection on the reflection-extended box."""
    if tuple(z.parity) != VECTOR_PARITY:
        raise ValueError("projection expects (even, even, odd) component parities")
    return from_hat(project_hat(to_hat(z, grid), grid), grid)


def curl(z: VectorField, grid: Grid) -> VectorField:
    """Spectral curl. Output parities are the flips of the input parities."""
    out_parity = tuple(p.flip() for p in z.parity)
    return from_hat(curl_hat(to_hat(z, grid), grid), grid, out_parity)


def divergence(z: VectorField, grid: Grid) -> ScalarField:
    return ScalarField(grid.ifft(div_hat(to_hat(z, grid), grid)), z.parity[2].flip())


def gradient(f: ScalarField, grid: Grid) -> VectorField:
    hat = grid.fft(f.values, f.parity)
    g = np.stack([grid.ifft(1j * k * hat) for k in grid.K])
    return VectorField(g, (f.parity, f.parity, f.parity.flip()))


def divergence_residual(z: VectorField, grid: Grid) -> float:
    return divergence_residual_hat(to_hat(z, grid), grid)


def wall_values(f: ScalarField, grid: Grid, n_points: int = 4) -> np.ndarray:
    """Trigonometric-interpolant values of ``f`` on both walls at a few horizontal points."""
    xs = grid.x1[:: max(1, grid.Nx // n_points)][:n_points]
    ys = grid.x2[:: max(1, grid.Ny // n_points)][:n_points]
    pts = [(a, b, s * grid.delta) for a in xs for b in ys for s in (1.0, -1.0)]
    return grid.interpolate(f.values, f.parity, pts)


def check_admissible(z: VectorField, grid: Grid, tol: float = 1e-8) -> None:
    """Raise if ``z`` is not divergence-free or violates the wall condition."""
    if tuple(z.parity) != VECTOR_PARITY:
        raise ConstraintError("vertical component must have odd parity")
    res = divergence_residual(z, grid)
    if res > tol:
        raise ConstraintError(f"divergence residual {res:.3e} exceeds {tol:.1e}")


def elsasser_from_vb(v: VectorField, b: VectorField, grid: Grid, t: float = 0.0, tol: float = 1e-8) -> ElsasserState:
    """``zp = v + b - B0``, ``zm = v - b + B0``. ``b`` is the total field including B0."""
    b_pert = b.values - B0[:, None, None, None]
    for name, f in (("v", v), ("b - B0", VectorField(b_pert, b.parity))):
        try:
            check_admissible(f, grid, tol)
        except ConstraintError as exc:
            raise ConstraintError(f"{name}: {exc}") from None
    zp = VectorField(v.values + b_pert, VECTOR_PARITY)
    zm = VectorField(v.values - b_pert, VECTOR_PARITY)
    return ElsasserState(zp, zm, t, grid)


def vb_from_elsasser(state: ElsasserState):
    """Inverse of :func:`elsasser_from_vb`; returns ``(v, b)`` with b including B0."""
    v = 0.5 * (state.zp.values + state.zm.values)
    b = 0.5 * (state.zp.values - state.zm.values) + B0[:, None, None, None]
    return VectorField(v, VECTOR_PARITY), VectorField(b, VECTOR_PARITY)


# -- initial data ---------------------------------------------------------------------


class Family(str, enum.Enum):
    SHEET = "sheet"
    TUBE = "tube"
    LIFTED = "lifted2d_plus_delta_perturbation"


@dataclass(frozen=True)
class InitialParams:
    """Parameters of the initial-data families.

    ``eta`` is either a number or a callable of delta; it scales the tube
    perturbation added to sheet data in the lifted family.
    """

    eps: float = 1e-3
    width: float = 1.0
    center_plus: float = 0.0
    center_minus: float = 0.0
    ny_mode: int = 1
    m: int = 1
    plus: bool = True
    minus: bool = True
    eta: Union[float, Callable[[float], float]] = 0.0

    def eta_value(self, delta: float) -> float:
        return float(self.eta(delta)) if callable(self.eta) else float(self.eta)


def _envelope(grid: Grid, center: float, width: float):
    return np.exp(-(((grid.x1 - center) / width) ** 2))[:, None]


def _sheet_component(grid: Grid, p: InitialParams, center: float, phase: float) -> np.ndarray:
    """z^h = curl(psi e3) for a Gaussian-enveloped stream function; unit sup-norm."""
    q = p.ny_mode * np.pi / grid.spec.Ly
    psi = _envelope(grid, center, p.width) * np.cos(q * grid.x2[None, :] + phase)
    psi3 = np.repeat(psi[:, :, None], grid.Nz, axis=2)
    pot = VectorField(np.stack([np.zeros_like(psi3), np.zeros_like(psi3), psi3]), PSEUDO_PARITY)
    z = curl(pot, grid).values
    z[2] = 0.0
    # x3-independence must be exact, not merely up to round-off
    z[:2] = z[:2, :, :, :1]
    return z / np.abs(z).max()


def _tube_component(grid: Grid, p: InitialParams, center: float, phase: float) -> np.ndarray:
    """z = curl(A) with A^h = a(x_h) cos(pi (2m-1) x3 / (2 delta)), A^3 = 0.

    Scaled so the horizontal part has sup-norm one; z^3 is then O(delta).
    """
    q = p.ny_mode * np.pi / grid.spec.Ly
    kv = np.pi * (2 * p.m - 1) / (2 * grid.delta)
    env = _envelope(grid, center, p.width)
    a1 = env * np.cos(q * grid.x2[None, :] + phase)
    a2 = env * np.sin(q * grid.x2[None, :] + 2 * phase + 0.5)
    vert = np.cos(kv * grid.x3)[None, None, :]
    amp = np.abs(np.stack([a1, a2])).max()
    A = np.stack([a1[:, :, None] * vert, a2[:, :, None] * vert, np.zeros(grid.shape)])
    A *= 1.0 / (kv * amp)
    return curl(VectorField(A, PSEUDO_PARITY), grid).values


def make_initial(family, grid: Grid, params: Optional[InitialParams] = None) -> ElsasserState:
    """Build divergence-free, wall-compatible initial data for one of the families.

    sheet: x3-independent horizontal fields from a stream function.
    tube: curl of a vertically structured horizontal vector potential.
    lifted2d_plus_delta_perturbation: sheet + eta(delta) * tube.
    """
    p = params or InitialParams()
    family = Family(family)
    if p.eps < 0:
        raise ValueError("amplitude must be non-negative")
    reach = max(abs(p.center_plus), abs(p.center_minus)) + 4 * p.width
    if reach >= grid.spec.Lx:
        raise GridError(
            f"packet support {reach:.3g} does not fit inside the torus half-period {grid.spec.Lx}"
        )
    if p.width < 2 * grid.hx:
        raise GridError("envelope width is not resolved by the horizontal grid")

    def build(component):
        zp = component(grid, p, p.center_plus, 0.0) if p.plus else np.zeros((3,) + grid.shape)
        zm = component(grid, p, p.center_minus, 0.7) if p.minus else np.zeros((3,) + grid.shape)
        return p.eps * zp, p.eps * zm

    if family is Family.SHEET:
        zp, zm = build(_sheet_component)
    elif family is Family.TUBE:
        zp, zm = build(_tube_component)
    else:
        zp, zm = build(_sheet_component)
        eta = p.eta_value(grid.delta)
        if eta != 0.0:
            tp, tm = build(_tube_component)
            zp = zp + eta * tp
            zm = zm + eta * tm
    return ElsasserState(VectorField(zp), VectorField(zm), 0.0, grid)


def sheet_limit_2d(grid: Grid, params: Optional[InitialParams] = None) -> tuple:
    """Horizontal x3-independent part of the sheet family as 2D arrays ``(2, Nx, Ny)``."""
    s = make_initial(Family.SHEET, grid, replace(params or InitialParams(), eta=0.0))
    return s.zp.values[:2, :, :, 0].copy(), s.zm.values[:2, :, :, 0].copy()


# -- snapshot serialization ------------------------------------------------------------

SNAPSHOT_MAGIC = b"SLABSNAP1\n"


def write_snapshot(path, state: ElsasserState) -> None:
    """Write a state as: magic line, JSON header line, raw little-endian float64 data.

    Data layout: zp then zm, each ``(3, Nx, Ny, Nz)`` in C order.
    """
    spec = state.grid.spec
    header = {
        "grid": {k: getattr(spec, k) for k in spec.__dataclass_fields__},
        "parity": [int(p) for p in state.zp.parity],
        "t": state.t,
        "fields": ["zp", "zm"],
        "shape": [3, spec.Nx, spec.Ny, spec.Nz],
        "dtype": "<f8",
    }
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(state.zp.values, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.zm.values, dtype="<f8").tobytes())


def read_snapshot(path) -> ElsasserState:
    from .grid import GridSpec, make_grid

    with open(path, "rb") as fh:
        if fh.readline() != SNAPSHOT_MAGIC:
            raise ValueError(f"{path} is not a snapshot file")
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype=header["dtype"])
    grid = make_grid(GridSpec(**header["grid"]))
    shape = tuple(header["shape"])
    n = math.prod(shape)
    if data.size != 2 * n:
        raise ValueError("snapshot payload has the wrong size")
    parity = tuple(Parity(p) for p in header["parity"])
    zp = VectorField(data[:n].reshape(shape).copy(), parity)
    zm = VectorField(data[n:].reshape(shape).copy(), parity)
    return ElsasserState(zp, zm, header["t"], grid)
