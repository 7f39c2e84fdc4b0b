"""INI experiment configuration with a fixed schema.

Every section and key below is known; anything else is rejected so that
typos fail fast instead of silently falling back to defaults.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, Optional, Tuple

from ..errors import ConfigError
from ..fields import Family, InitialParams
from ..grid import GridSpec
from ..integrator import StepperConfig


@dataclass(frozen=True)
class RunSection:
    name: str = "experiment"
    output_dir: str = "out"
    seed: int = 0


@dataclass(frozen=True)
class GridSection:
    Lx: float = 8.0
    Ly: float = math.pi
    Nx: int = 64
    Ny: int = 16
    Nz: int = 16
    sigma: float = 0.25
    dealias: bool = True
    delta: float = 0.1
    delta_list: Tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)


@dataclass(frozen=True)
class InitialSection:
    family: str = "sheet"
    eps: float = 1e-3
    width: float = 1.0
    center_plus: float = 0.0
    center_minus: float = 0.0
    ny_mode: int = 1
    m: int = 1
    plus: bool = True
    minus: bool = True
    # eta(delta) = eta_coeff * delta ** eta_power
    eta_coeff: float = 0.0
    eta_power: float = 0.0


@dataclass(frozen=True)
class StepperSection:
    cfl: float = 0.4
    t_end: float = 2.0
    snapshot_cadence: float = 0.1
    dealias: bool = True


@dataclass(frozen=True)
class DiagnosticsSection:
    max_order: int = 4
    h_order: int = 2
    write_snapshots: bool = True


@dataclass(frozen=True)
class SweepSection:
    workers: int = 1


@dataclass(frozen=True)
class ValidateSection:
    bound_samples: int = 1000
    delta: float = 0.5
    Nx: int = 16
    Nz: int = 8
    # number of grid doublings after the base grid
    refine: int = 1
    tol: float = 1e-7


@dataclass(frozen=True)
class ExperimentConfig:
    """One run or one sweep; sections mirror the INI file."""

    run: RunSection = field(default_factory=RunSection)
    grid: GridSection = field(default_factory=GridSection)
    initial: InitialSection = field(default_factory=InitialSection)
    stepper: StepperSection = field(default_factory=StepperSection)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    validate: ValidateSection = field(default_factory=ValidateSection)

    def __post_init__(self):
        validate(self)

    # -- derived objects ----------------------------------------------------------
    def grid_spec(self, delta: Optional[float] = None) -> GridSpec:
        g = self.grid
        return GridSpec(
            Lx=g.Lx, Ly=g.Ly, delta=g.delta if delta is None else delta,
            Nx=g.Nx, Ny=g.Ny, Nz=g.Nz, sigma=g.sigma, dealias=g.dealias,
        )

    def eta(self, delta: float) -> float:
        return self.initial.eta_coeff * delta**self.initial.eta_power

    def initial_params(self, delta: float) -> InitialParams:
        i = self.initial
        return InitialParams(
            eps=i.eps, width=i.width, center_plus=i.center_plus, center_minus=i.center_minus,
            ny_mode=i.ny_mode, m=i.m, plus=i.plus, minus=i.minus, eta=self.eta(delta),
        )

    def stepper_config(self) -> StepperConfig:
        s = self.stepper
        return StepperConfig(cfl=s.cfl, t_end=s.t_end, snapshot_cadence=s.snapshot_cadence, dealias=s.dealias)

    def with_overrides(self, overrides: Dict[str, str]) -> "ExperimentConfig":
        return from_mapping(_merge(to_mapping(self), overrides))

    def to_dict(self) -> dict:
        return asdict(self)


SECTIONS = {f.name: f.default_factory for f in fields(ExperimentConfig)}


def validate(cfg: ExperimentConfig) -> None:
    try:
        cfg.grid_spec()
        for d in cfg.grid.delta_list:
            cfg.grid_spec(d)
        cfg.stepper_config()
        Family(cfg.initial.family)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    dl = cfg.grid.delta_list
    if not dl or any(not (0 < d <= 1) for d in dl):
        raise ConfigError("delta_list values must lie in (0, 1]")
    if any(b >= a for a, b in zip(dl, dl[1:])):
        raise ConfigError("delta_list must be strictly decreasing")
    if cfg.initial.eps <= 0:
        raise ConfigError("eps must be positive")
    reach = max(abs(cfg.initial.center_plus), abs(cfg.initial.center_minus)) + 4 * cfg.initial.width
    if reach + cfg.stepper.t_end >= cfg.grid.Lx:
        raise ConfigError(
            f"packet support {reach:g} plus t_end {cfg.stepper.t_end:g} reaches the torus edge Lx={cfg.grid.Lx:g}"
        )
    if cfg.diagnostics.max_order < 0 or cfg.diagnostics.h_order < 1:
        raise ConfigError("diagnostic orders must be non-negative (h_order >= 1)")
    if cfg.validate.refine < 0 or cfg.validate.bound_samples < 1 or cfg.validate.delta <= 0:
        raise ConfigError("validate needs refine >= 0, bound_samples >= 1 and delta > 0")
    if cfg.sweep.workers < 1:
        raise ConfigError("workers must be at least 1")


# -- INI conversion ------------------------------------------------------------------


def _parse_value(proto, text: str, where: str):
    text = text.strip()
    try:
        if isinstance(proto, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(proto, int):
            return int(text)
        if isinstance(proto, float):
            return float(text)
        if isinstance(proto, tuple):
            return tuple(float(v) for v in text.replace(",", " ").split())
        return text
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} as {type(proto).__name__}") from None


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(repr(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_mapping(cfg: ExperimentConfig) -> Dict[str, Dict[str, str]]:
    return {name: {k: _format_value(v) for k, v in asdict(getattr(cfg, name)).items()} for name in SECTIONS}


def _merge(base: Dict[str, Dict[str, str]], overrides: Dict[str, str]) -> Dict[str, Dict[str, str]]:
    out = {k: dict(v) for k, v in base.items()}
    for dotted, value in overrides.items():
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        sec, key = dotted.split(".", 1)
        out.setdefault(sec, {})[key] = value
    return out


def from_mapping(mapping: Dict[str, Dict[str, str]]) -> ExperimentConfig:
    kwargs = {}
    for sec, values in mapping.items():
        if sec == "DEFAULT":
            continue
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        proto = SECTIONS[sec]()
        known = {f.name for f in fields(proto)}
        parsed = {}
        for key, text in values.items():
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            parsed[key] = _parse_value(getattr(proto, key), text, f"[{sec}] {key}")
        kwargs[sec] = replace(proto, **parsed)
    return ExperimentConfig(**kwargs)


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """Read an INI file (or start from defaults) and apply ``section.key`` overrides."""
    mapping: Dict[str, Dict[str, str]] = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        with open(path) as fh:
            parser.read_file(fh)
        mapping = {sec: dict(parser[sec]) for sec in parser.sections()}
    return from_mapping(_merge(mapping, overrides or {}))


def dump_config(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for sec, values in to_mapping(cfg).items():
        parser[sec] = values
    from io import StringIO

    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()
