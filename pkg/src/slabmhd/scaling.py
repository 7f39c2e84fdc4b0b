"""Rescaling between the slab of half-height delta and the unit slab.

``z^h_(delta)(x_h, x3) = z^h(x_h, delta x3)`` and
``z^3_(delta)(x_h, x3) = z^3(x_h, delta x3) / delta``. With the same number of
vertical points the map is a pure relabelling of samples, so the norm
identities between the two descriptions hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from . import diagnostics as diag
from .errors import GridError
from .fields import ElsasserState, VectorField
from .grid import Grid, make_grid


@dataclass(frozen=True)
class RescaledState:
    """State on the unit slab together with the thickness it came from."""

    state: ElsasserState
    delta: float


def unit_grid(grid: Grid) -> Grid:
    return make_grid(grid.spec.replace(delta=1.0))


def _scale_vertical(z: VectorField, factor: float) -> VectorField:
    v = z.values.copy()
    v[2] = v[2] * factor
    return VectorField(v, z.parity)


def rescale_to_unit(state: ElsasserState, delta: float) -> RescaledState:
    """Map a slab state to the unit slab by relabelling x3 and dividing z^3 by delta."""
    if not np.isclose(state.grid.delta, delta, rtol=0, atol=1e-15):
        raise GridError(f"state lives on a slab of half-height {state.grid.delta}, not {delta}")
    ug = unit_grid(state.grid)
    zp = _scale_vertical(state.zp, 1.0 / delta)
    zm = _scale_vertical(state.zm, 1.0 / delta)
    return RescaledState(ElsasserState(zp, zm, state.t, ug), delta)


def rescale_from_unit(rs: RescaledState) -> ElsasserState:
    """Inverse of :func:`rescale_to_unit`.

    The vertical component is multiplied back by delta, which reproduces the
    original bits whenever delta is a power of two and is otherwise within
    one rounding of them.
    """
    if rs.state.grid.delta != 1.0:
        raise GridError("rescaled state must live on the unit slab")
    g = make_grid(rs.state.grid.spec.replace(delta=rs.delta))
    zp = _scale_vertical(rs.state.zp, rs.delta)
    zm = _scale_vertical(rs.state.zm, rs.delta)
    return ElsasserState(zp, zm, rs.state.t, g)


@dataclass(frozen=True)
class IdentityReport:
    """Relative discrepancy of each norm identity, keyed by ``(sign, name, k, l)``."""

    discrepancies: Dict[Tuple[str, str, int, int], float]
    delta: float

    @property
    def max_discrepancy(self) -> float:
        return max(self.discrepancies.values(), default=0.0)

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "max_rel_discrepancy": self.max_discrepancy,
            "entries": {f"{s}|{n}|{k}|{l}": v for (s, n, k, l), v in sorted(self.discrepancies.items())},
        }


#: sides below this fraction of their natural scale count as round-off zeros
ROUNDOFF_FLOOR = 1e-14


def _rel(a: float, b: float, scale: float = 0.0) -> float:
    """Relative difference, with ``ROUNDOFF_FLOOR * scale`` as the smallest denominator."""
    den = max(abs(a), abs(b), ROUNDOFF_FLOOR * abs(scale))
    return abs(a - b) / den if den > 0 else 0.0


def _div_h(z: VectorField, grid: Grid) -> VectorField:
    """``d1 z^1 + d2 z^2`` as a one-component even field packed in a VectorField slot."""
    h0 = grid.fft(z.values[0], z.parity[0])
    h1 = grid.fft(z.values[1], z.parity[1])
    d = grid.ifft(1j * grid.KX * h0 + 1j * grid.KY * h1)
    v = np.zeros_like(z.values)
    v[0] = d
    return VectorField(v, z.parity)


def verify_norm_identities(state: ElsasserState, delta: float, max_order: int = diag.DEFAULT_MAX_ORDER) -> IdentityReport:
    """Check the rescaling identities for every ``k + l <= max_order``.

    ``E(z^h_(delta), k, l) = delta^(2(l-1/2)) E(z^h, k, l)``,
    ``E(z^3_(delta), k, 0) = delta^-3 E(z^3, k, 0)``,
    ``E(z^3_(delta), k, l) = delta^(2(l-3/2)) E(z^3, k, l)`` for ``l >= 1``, and
    ``E(z^3, k, l) = E(div_h z^h, k, l-1)`` for ``l >= 1`` (from ``div z = 0``).
    The flux identities carry the same factors and are checked alongside.
    When both sides of the last identity are round-off zeros (x3-independent
    data) the comparison is scaled by ``E(z^h, k+1, l-1)`` instead.
    """
    rs = rescale_to_unit(state, delta).state
    out = {}
    for s in diag.SIGNS:
        for k in range(max_order + 1):
            for l in range(max_order + 1 - k):
                eh = diag.weighted_energy(state, s, k, l, "horizontal")
                ehu = diag.weighted_energy(rs, s, k, l, "horizontal")
                out[(s, "E_h", k, l)] = _rel(ehu, delta ** (2 * (l - 0.5)) * eh)
                ev = diag.weighted_energy(state, s, k, l, "vertical")
                evu = diag.weighted_energy(rs, s, k, l, "vertical")
                fac = delta**-3 if l == 0 else delta ** (2 * (l - 1.5))
                out[(s, "E_3", k, l)] = _rel(evu, fac * ev)
                if l >= 1:
                    z = state.zp if s == "+" else state.zm
                    dv = _div_h(z, state.grid)
                    tmp = ElsasserState(dv, dv, state.t, state.grid)
                    ed = _energy_comp0(tmp, s, k, l - 1)
                    # div_h z^h carries one horizontal derivative of z^h
                    ref = diag.weighted_energy(state, s, k + 1, l - 1, "horizontal")
                    out[(s, "E_3_div", k, l)] = _rel(ev, ed, ref)
        fx = diag.flux_integrands(state, max_order, ("horizontal", "vertical"))
        fxu = diag.flux_integrands(rs, max_order, ("horizontal", "vertical"))
        for (sg, k, l, part), v in fx.items():
            if sg != s:
                continue
            fac = delta ** (2 * (l - 0.5)) if part == "horizontal" else (delta**-3 if l == 0 else delta ** (2 * (l - 1.5)))
            out[(s, "F_h" if part == "horizontal" else "F_3", k, l)] = _rel(fxu[(sg, k, l, part)], fac * v)
    return IdentityReport(out, delta)


def _energy_comp0(state: ElsasserState, sign: str, k: int, l: int) -> float:
    grid = state.grid
    z = state.zp if sign == "+" else state.zm
    w2 = diag.energy_weight_sq(sign, state.t, grid.x1, grid.sigma)
    total = 0.0
    for a in diag.multi_indices(k):
        total += float(np.dot(w2, diag.derivative_profile(z, grid, a, l, (0,))) * grid.hx)
    return total


def unit_functional_terms(rs: RescaledState, n_star: int = diag.DEFAULT_MAX_ORDER, n: int = None) -> Dict[str, tuple]:
    """The delta-weighted total rewritten in unit-slab energies, group by group.

    ``sum_{k+l<=N*} [E(zd^h,k,l) + delta^2 E(zd^3,k,l)]``,
    ``sum_{k<=N*-1} E(zd^3,k,0)`` and
    ``sum_{k+l<=N+2} [delta^-2 E(zd^h,k,l+1) + E(zd^3,k,l+1)]``,
    where ``zd`` is the rescaled state. Term by term these equal the groups of
    :func:`slabmhd.diagnostics.functional_terms` on the original slab.
    """
    d = rs.delta
    nn = n_star // 2 if n is None else n
    st = rs.state
    top = max(n_star, nn + 3)
    rep = diag.energy_report(st, top, ("horizontal", "vertical"))
    out = {}
    for s in diag.SIGNS:
        a = sum(rep.get(s, k, l, "horizontal") + d**2 * rep.get(s, k, l, "vertical")
                for k in range(n_star + 1) for l in range(n_star + 1 - k))
        b = sum(rep.get(s, k, 0, "vertical") for k in range(n_star))
        c = sum(d**-2 * rep.get(s, k, l + 1, "horizontal") + rep.get(s, k, l + 1, "vertical")
                for k in range(nn + 3) for l in range(nn + 3 - k))
        out[s] = (a, b, c)
    return out


def compare_functionals(state: ElsasserState, n_star: int = diag.DEFAULT_MAX_ORDER) -> Dict[str, float]:
    """Relative differences between the slab groups and their unit-slab rewrites."""
    d = state.grid.delta
    slab = diag.functional_terms(diag.energy_report(state, n_star), d, n_star)
    unit = unit_functional_terms(rescale_to_unit(state, d), n_star)
    out = {}
    for s in diag.SIGNS:
        for i, name in enumerate(("z", "z3", "d3z")):
            out[f"{s}{name}"] = _rel(slab[s][i], unit[s][i])
    return out
