"""Run configuration: INI text with one section per concern.

Example
-------
::

    [domain]
    length = 1.0
    periodic = true

    [discretization]
    n_elements = 16
    n_layers = 4
    order = 4

    [wave]
    mode = FNPF
    theory = stream
    kh = 1.0
    rel_steepness = 0.5

    [time]
    periods = 2

Every validation failure raises :class:`ConfigError` carrying the dotted key
(``section.key``) that caused it.
"""

from __future__ import annotations

import configparser
import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .basis import DEFAULT_FILTER_STRENGTH

__all__ = [
    "ConfigError",
    "DomainConfig",
    "DiscretizationConfig",
    "WaveConfig",
    "ZonesConfig",
    "TimeConfig",
    "FilterConfig",
    "ProbesConfig",
    "SolverConfig",
    "OutputConfig",
    "RunConfig",
    "load_config",
    "parse_config",
    "BAR_PROFILE",
]

# Depth profile of the submerged-bar flume: 0.4 m, a 1:20 incline to a
# 0.1 m crest, and a 1:10 decline, offset by the 8 m generation zone.
BAR_PROFILE = ((0.0, 0.4), (14.0, 0.4), (20.0, 0.1), (22.0, 0.1), (25.0, 0.4), (38.0, 0.4))


class ConfigError(ValueError):
    """Invalid configuration value; `key` is the dotted name."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class DomainConfig:
    length: float = 1.0
    h: float | None = None
    bathymetry: str | None = None
    periodic: bool = True
    x0: float = 0.0


@dataclass
class DiscretizationConfig:
    n_elements: int = 8
    n_layers: int = 2
    order: int = 4
    quad_order: int | None = None
    fs_degree: int | None = None
    layer_clustering: float = 0.0


@dataclass
class WaveConfig:
    mode: str = "FNPF"
    theory: str = "stream"
    initial: str = "wave"
    kh: float | None = None
    wavelength: float | None = None
    period: float | None = None
    height: float | None = None
    rel_steepness: float | None = None
    depth: float | None = None
    n_modes: int | None = None
    g: float = 9.82


@dataclass
class ZonesConfig:
    generation: tuple | None = None
    absorption: tuple | None = None
    ramp_periods: float = 5.0
    ramp: str = "cosine"
    exponent: float = 3.5
    shape: str = "classical"


@dataclass
class TimeConfig:
    periods: float | None = None
    end_time: float | None = None
    steps: int | None = None
    cfl: float = 0.95
    u_max: float | None = None
    dt: float | None = None


@dataclass
class FilterConfig:
    enabled: bool = True
    cutoff: int | None = None
    strength: float = DEFAULT_FILTER_STRENGTH
    order: int = 2
    cadence: str = "step"
    every: int = 1
    fields: tuple = ("eta", "phi_eta")


@dataclass
class ProbesConfig:
    x: tuple = ()
    every: int = 1


@dataclass
class SolverConfig:
    preconditioner: str = "lu"
    laplace_rtol: float = 1e-6
    laplace_atol: float = 1e-15
    mass_rtol: float = 1e-5
    mass_atol: float = 1e-15
    mesh_update: str = "stage"
    lumped_recovery: bool = False
    keep_reports: bool = False


@dataclass
class OutputConfig:
    directory: str | None = None
    snapshot_every: int = 0
    write_vtk: bool = True
    write_reports: bool = True


_SECTIONS = {
    "domain": DomainConfig,
    "discretization": DiscretizationConfig,
    "wave": WaveConfig,
    "zones": ZonesConfig,
    "time": TimeConfig,
    "filter": FilterConfig,
    "probes": ProbesConfig,
    "solver": SolverConfig,
    "output": OutputConfig,
}


@dataclass
class RunConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    wave: WaveConfig = field(default_factory=WaveConfig)
    zones: ZonesConfig = field(default_factory=ZonesConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    probes: ProbesConfig = field(default_factory=ProbesConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self):
        return asdict(self)

    def to_ini(self):
        lines = []
        for name in _SECTIONS:
            lines.append(f"[{name}]")
            for k, v in asdict(getattr(self, name)).items():
                if v is None:
                    continue
                if isinstance(v, (tuple, list)):
                    v = ", ".join(str(a) for a in v)
                lines.append(f"{k} = {v}")
            lines.append("")
        return "\n".join(lines)

    def replace(self, **dotted):
        """Copy with dotted-key overrides, e.g. ``replace(**{"wave.kh": 3})``."""
        new = copy.deepcopy(self)
        for key, value in dotted.items():
            section, _, name = key.partition(".")
            setattr(getattr(new, section), name, value)
        return new.validate()

    # -- derived quantities ------------------------------------------------

    def depth_function(self):
        """Scalar depth or callable h(x)."""
        from .mesh import piecewise_linear_depth

        b = self.domain.bathymetry
        if b is None:
            return self.domain.h
        points = BAR_PROFILE if b == "bar" else _parse_points(b, "domain.bathymetry")
        return piecewise_linear_depth(points)

    def wave_depth(self):
        """Depth used for the wave theory (generation-zone depth)."""
        if self.wave.depth is not None:
            return self.wave.depth
        d = self.depth_function()
        if callable(d):
            x = self.domain.x0
            if self.zones.generation is not None:
                x = 0.5 * (self.zones.generation[0] + self.zones.generation[1])
            return float(d(np.array([x]))[0])
        return d

    # -- validation ---------------------------------------------------------

    def validate(self):
        d, disc, w, z, t, f, pr, s = (self.domain, self.discretization, self.wave, self.zones,
                                      self.time, self.filter, self.probes, self.solver)
        _positive("domain.length", d.length)
        if d.bathymetry is None and d.h is None:
            if w.kh is not None and (w.wavelength is not None or d.periodic):
                d.h = w.kh * (w.wavelength or d.length) / (2 * np.pi)
            else:
                raise ConfigError("domain.h", "depth missing (give h, bathymetry, or wave.kh on a periodic domain)")
        if d.h is not None:
            _positive("domain.h", d.h)
        if d.bathymetry is not None and d.bathymetry != "bar":
            pts = _parse_points(d.bathymetry, "domain.bathymetry")
            if any(hh <= 0 for _, hh in pts):
                raise ConfigError("domain.bathymetry", "depths must be positive")
        _positive_int("discretization.n_elements", disc.n_elements)
        _positive_int("discretization.n_layers", disc.n_layers)
        _positive_int("discretization.order", disc.order)
        if disc.quad_order is not None:
            _positive_int("discretization.quad_order", disc.quad_order)
        if disc.fs_degree is not None:
            _positive_int("discretization.fs_degree", disc.fs_degree)
        if not 0 <= disc.layer_clustering < 1:
            raise ConfigError("discretization.layer_clustering", "must lie in [0, 1)")

        w.mode = str(w.mode).upper()
        _choice("wave.mode", w.mode, ("LPF", "FNPF"))
        _choice("wave.theory", w.theory, ("stream", "airy"))
        _choice("wave.initial", w.initial, ("wave", "rest"))
        if w.height is not None and w.rel_steepness is not None:
            raise ConfigError("wave.height", "give either height or rel_steepness, not both")
        if w.height is not None:
            _nonnegative("wave.height", w.height)
        if w.rel_steepness is not None and not 0 <= w.rel_steepness < 1:
            raise ConfigError("wave.rel_steepness", "must lie in [0, 1)")
        needs_wave = w.initial == "wave" or z.generation is not None
        if needs_wave:
            if w.height is None and w.rel_steepness is None:
                raise ConfigError("wave.height", "wave height or rel_steepness required")
            if w.period is None and w.wavelength is None and w.kh is None:
                if d.periodic:
                    w.wavelength = d.length
                else:
                    raise ConfigError("wave.period", "give period, wavelength or kh")
            for key in ("kh", "wavelength", "period"):
                v = getattr(w, key)
                if v is not None:
                    _positive(f"wave.{key}", v)
        if w.n_modes is not None:
            _positive_int("wave.n_modes", w.n_modes)
        _positive("wave.g", w.g)

        x1 = d.x0 + d.length
        spans = []
        for key in ("generation", "absorption"):
            span = getattr(z, key)
            if span is None:
                continue
            if len(span) != 2 or not span[1] > span[0]:
                raise ConfigError(f"zones.{key}", "expected an increasing pair x0, x1")
            if span[0] < d.x0 - 1e-12 or span[1] > x1 + 1e-12:
                raise ConfigError(f"zones.{key}", "zone extends outside the domain")
            spans.append((span, key))
        if len(spans) == 2:
            (a, _), (b, _) = sorted(spans)
            if b[0] < a[1]:
                raise ConfigError("zones.absorption", "zones overlap")
        _nonnegative("zones.ramp_periods", z.ramp_periods)
        _choice("zones.ramp", z.ramp, ("cosine", "linear"))
        _choice("zones.shape", z.shape, ("classical", "steep"))
        _positive("zones.exponent", z.exponent)

        if t.end_time is None and t.periods is None and t.steps is None:
            raise ConfigError("time.end_time", "give end_time, periods or steps")
        if t.periods is not None:
            _nonnegative("time.periods", t.periods)
            if not needs_wave:
                raise ConfigError("time.periods", "periods needs a wave definition")
        if t.end_time is not None:
            _nonnegative("time.end_time", t.end_time)
        if t.steps is not None and t.steps < 0:
            raise ConfigError("time.steps", "must be non-negative")
        _positive("time.cfl", t.cfl)
        if t.u_max is not None:
            _positive("time.u_max", t.u_max)
        if t.dt is not None:
            _positive("time.dt", t.dt)
        if t.dt is None and t.u_max is None and not needs_wave:
            raise ConfigError("time.u_max", "no wave to estimate u_max from; give time.dt or time.u_max")

        _choice("filter.cadence", f.cadence, ("step", "stage", "off"))
        _positive_int("filter.every", f.every)
        _positive("filter.strength", f.strength)
        _positive_int("filter.order", f.order)
        for name in f.fields:
            _choice("filter.fields", name, ("eta", "phi_eta"))
        if f.cutoff is not None and not 0 <= f.cutoff <= disc.order:
            raise ConfigError("filter.cutoff", f"must lie in [0, {disc.order}]")

        for xp in pr.x:
            if not d.x0 <= xp <= x1:
                raise ConfigError("probes.x", f"probe {xp} outside the domain")
        _positive_int("probes.every", pr.every)

        _choice("solver.preconditioner", s.preconditioner, ("lu", "jacobi", "sgs"))
        _choice("solver.mesh_update", s.mesh_update, ("stage", "step"))
        for key in ("laplace_rtol", "laplace_atol", "mass_rtol", "mass_atol"):
            _positive(f"solver.{key}", getattr(s, key))
        if self.output.snapshot_every < 0:
            raise ConfigError("output.snapshot_every", "must be non-negative")
        return self


# -- parsing ------------------------------------------------------------------


def _positive(key, v):
    if not (np.isfinite(v) and v > 0):
        raise ConfigError(key, f"must be positive (got {v})")


def _nonnegative(key, v):
    if not (np.isfinite(v) and v >= 0):
        raise ConfigError(key, f"must be non-negative (got {v})")


def _positive_int(key, v):
    if int(v) != v or v < 1:
        raise ConfigError(key, f"must be a positive integer (got {v})")


def _choice(key, v, options):
    if v not in options:
        raise ConfigError(key, f"expected one of {', '.join(options)} (got {v!r})")


def _parse_points(text, key):
    pts = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        try:
            x, h = item.split(":")
            pts.append((float(x), float(h)))
        except ValueError:
            raise ConfigError(key, f"expected 'x:h' pairs, got {item!r}") from None
    if len(pts) < 2:
        raise ConfigError(key, "need at least two x:h points")
    return tuple(pts)


_BOOL = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


def _convert(key, raw, default, annotation):
    raw = raw.strip()
    ann = str(annotation)
    try:
        if "tuple" in ann and raw == "":
            return ()
        if raw.lower() in ("none", ""):
            return None
        if "bool" in ann:
            return _BOOL[raw.lower()]
        if "tuple" in ann:
            items = [a.strip() for a in raw.replace(";", ",").split(",") if a.strip()]
            if key.endswith("fields"):
                return tuple(items)
            return tuple(float(a) for a in items)
        if "int" in ann and "float" not in ann:
            return int(raw)
        if "float" in ann:
            return float(raw)
        return raw
    except (ValueError, KeyError):
        raise ConfigError(key, f"cannot parse {raw!r}") from None


def parse_config(text, validate=True) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc)) from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
        obj = getattr(cfg, section)
        known = {f.name: f for f in fields(obj)}
        for key, raw in parser[section].items():
            dotted = f"{section}.{key}"
            if key not in known:
                raise ConfigError(dotted, "unknown key")
            setattr(obj, key, _convert(dotted, raw, getattr(obj, key), known[key].type))
    return cfg.validate() if validate else cfg


def load_config(path, validate=True) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, validate)
