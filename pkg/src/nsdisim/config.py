"""Run configuration: typed TOML sections, profiles, validation, round-trip.

A run config is a flat TOML file with one table per subsystem.  Unknown
sections or keys are rejected so typos in physics parameters fail loudly.
The ``profile`` key selects the default discretization: ``full`` is the
production box, ``fast`` a reduced box for continuous integration, and
``ci`` a further-reduced box for single-core test machines.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .grid import Grid2D
from .laser import PulseSpec

PROFILES = {
    "full": {"L": 200.0, "Nx": 2048, "traj_n": 10_000, "tdqmc_n": 2000},
    "fast": {"L": 100.0, "Nx": 1024, "traj_n": 10_000, "tdqmc_n": 2000},
    "ci": {"L": 100.0, "Nx": 512, "traj_n": 10_000, "tdqmc_n": 800},
}

INTENSITY_BOUNDS = (1e13, 1e16)


@dataclass(frozen=True)
class GridConfig:
    L: float = 100.0
    Nx: int = 512
    dt: float = 0.03


@dataclass(frozen=True)
class PulseConfig:
    shape: str = "trapezoid"
    wavelength_nm: float = 248.0
    intensity_w_cm2: float = 4.5e14
    n_cycles: int = 6
    ramp_cycles: int = 2
    gaussian_T_au: float = 0.0  # 0 means "use the default width"
    chirp_sign: int = 0
    window_T: float = 6.0


@dataclass(frozen=True)
class TrajectoriesConfig:
    enabled: bool = True
    N: int = 10_000
    seed: int = 20_240_101
    store_decimation: int = 1    # recording stride inside the phase window
    sparse_decimation: int = 10  # recording stride outside it
    dump_max_walkers: int = 200  # walkers written to trajectories.csv


@dataclass(frozen=True)
class PhaseConfig:
    bins: int = 128
    sigma_h: float = 0.15
    window_cycles: float = 3.0
    pooling_mode: str = "mean"


@dataclass(frozen=True)
class TdqmcConfig:
    enabled: bool = False
    N: int = 2000
    seed: int = 7_777
    smoothing_sigma: float = 0.0
    step_multiple: int = 1  # advance the ensemble every k-th grid step


@dataclass(frozen=True)
class RelaxConfig:
    dt_imag: float = 0.01
    tol: float = 1e-10


@dataclass(frozen=True)
class ScanConfig:
    intensities: tuple = ()
    chirp_signs: tuple = (0,)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs"
    save_wavefunction: bool = False


_SECTION_TYPES = {
    "grid": GridConfig,
    "pulse": PulseConfig,
    "trajectories": TrajectoriesConfig,
    "phase": PhaseConfig,
    "tdqmc": TdqmcConfig,
    "relax": RelaxConfig,
    "scan": ScanConfig,
    "output": OutputConfig,
}


@dataclass(frozen=True)
class RunConfig:
    profile: str = "ci"
    grid: GridConfig = GridConfig()
    pulse: PulseConfig = PulseConfig()
    trajectories: TrajectoriesConfig = TrajectoriesConfig()
    phase: PhaseConfig = PhaseConfig()
    tdqmc: TdqmcConfig = TdqmcConfig()
    relax: RelaxConfig = RelaxConfig()
    scan: ScanConfig = ScanConfig()
    output: OutputConfig = OutputConfig()

    def make_grid(self) -> Grid2D:
        return Grid2D(half_width=self.grid.L, points_per_axis=self.grid.Nx)

    def make_pulse(self, intensity: float | None = None,
                   chirp_sign: int | None = None) -> PulseSpec:
        """Pulse for a run, optionally overriding the scanned parameters.

        Chirped gaussian pulses are fluence-normalized against the unchirped
        pulse at the same nominal intensity.
        """
        from .laser import chirp_limit, normalize_energy

        p = self.pulse
        intensity = p.intensity_w_cm2 if intensity is None else intensity
        chirp_sign = p.chirp_sign if chirp_sign is None else chirp_sign
        kwargs = dict(shape=p.shape, wavelength_nm=p.wavelength_nm,
                      intensity_w_cm2=intensity, n_cycles=p.n_cycles,
                      ramp_cycles=p.ramp_cycles, window_T=p.window_T)
        if p.gaussian_T_au > 0:
            kwargs["gaussian_T"] = p.gaussian_T_au
        if p.shape != "gaussian" or chirp_sign == 0:
            return PulseSpec(chirp=0.0, **kwargs)
        reference = PulseSpec(chirp=0.0, **kwargs)
        chirped = PulseSpec(chirp=chirp_sign * chirp_limit(reference.T), **kwargs)
        return normalize_energy(chirped, reference)


def _check_type(section: str, key: str, value, expected):
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
        return float(value)
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}")
        return value
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"[{section}] {key} must be a boolean, got {value!r}")
        return value
    if expected is str:
        if not isinstance(value, str):
            raise ConfigError(f"[{section}] {key} must be a string, got {value!r}")
        return value
    if expected is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"[{section}] {key} must be a list, got {value!r}")
        return tuple(value)
    raise AssertionError(f"unhandled schema type {expected}")


def _build_section(name: str, cls, data: dict, defaults):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {sorted(unknown)}")
    kwargs = {f.name: getattr(defaults, f.name) for f in fields(cls)}
    for key, value in data.items():
        kwargs[key] = _check_type(name, key, value, type(kwargs[key]))
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig from a parsed TOML mapping."""
    data = dict(data)
    profile = data.pop("profile", "ci")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    unknown = set(data) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    preset = PROFILES[profile]
    defaults = {
        "grid": GridConfig(L=preset["L"], Nx=preset["Nx"]),
        "pulse": PulseConfig(),
        "trajectories": TrajectoriesConfig(N=preset["traj_n"]),
        "phase": PhaseConfig(),
        "tdqmc": TdqmcConfig(N=preset["tdqmc_n"]),
        "relax": RelaxConfig(),
        "scan": ScanConfig(),
        "output": OutputConfig(),
    }
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"[{name}] must be a table")
        sections[name] = _build_section(name, cls, raw, defaults[name])
    cfg = RunConfig(profile=profile, **sections)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig):
    g, p = cfg.grid, cfg.pulse
    if g.L <= 0 or g.dt <= 0:
        raise ConfigError("grid L and dt must be positive")
    if g.Nx < 4 or g.Nx & (g.Nx - 1):
        raise ConfigError(f"grid Nx must be a power of two >= 4, got {g.Nx}")
    if p.shape not in ("trapezoid", "gaussian"):
        raise ConfigError(f"pulse shape must be trapezoid or gaussian, got {p.shape!r}")
    if p.chirp_sign not in (-1, 0, 1):
        raise ConfigError("pulse chirp_sign must be -1, 0 or +1")
    if p.shape == "trapezoid" and p.chirp_sign != 0:
        raise ConfigError("chirp is only supported for gaussian pulses")
    if p.wavelength_nm <= 0:
        raise ConfigError("pulse wavelength must be positive")
    if p.n_cycles <= 0 or p.ramp_cycles <= 0:
        raise ConfigError("pulse cycle counts must be positive")
    if p.shape == "trapezoid" and p.n_cycles < 2 * p.ramp_cycles:
        raise ConfigError("trapezoid needs n_cycles >= 2*ramp_cycles")
    if p.window_T <= 0:
        raise ConfigError("pulse window_T must be positive")
    lo, hi = INTENSITY_BOUNDS
    for label, value in [("pulse intensity", p.intensity_w_cm2),
                         *[("scan intensity", v) for v in cfg.scan.intensities]]:
        if not isinstance(value, (int, float)) or not lo <= float(value) <= hi:
            raise ConfigError(
                f"{label} {value!r} outside sanity bounds [{lo:g}, {hi:g}] W/cm^2")
    for sign in cfg.scan.chirp_signs:
        if sign not in (-1, 0, 1):
            raise ConfigError("scan chirp_signs entries must be -1, 0 or +1")
    if any(s != 0 for s in cfg.scan.chirp_signs) and p.shape != "gaussian":
        raise ConfigError("chirp scans require a gaussian pulse shape")
    t = cfg.trajectories
    if t.N <= 0 or t.store_decimation < 1 or t.sparse_decimation < 1:
        raise ConfigError("trajectories N and decimations must be positive")
    ph = cfg.phase
    if ph.bins < 8 or ph.sigma_h <= 0 or ph.window_cycles <= 0:
        raise ConfigError("phase bins/sigma_h/window_cycles must be positive")
    if ph.pooling_mode not in ("mean", "raw"):
        raise ConfigError("phase pooling_mode must be 'mean' or 'raw'")
    if p.shape == "trapezoid":
        flat_plus_rise = p.n_cycles - p.ramp_cycles
        if ph.window_cycles > flat_plus_rise:
            raise ConfigError(
                f"phase window_cycles={ph.window_cycles:g} exceeds the "
                f"flat-top length plus rise ({flat_plus_rise} cycles)")
    if cfg.tdqmc.N <= 0:
        raise ConfigError("tdqmc N must be positive")
    if cfg.tdqmc.smoothing_sigma < 0:
        raise ConfigError("tdqmc smoothing_sigma must be non-negative")
    if cfg.tdqmc.step_multiple < 1:
        raise ConfigError("tdqmc step_multiple must be >= 1")
    if cfg.relax.dt_imag <= 0 or cfg.relax.tol <= 0:
        raise ConfigError("relax dt_imag and tol must be positive")


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    return config_from_dict(data)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Emit the config as TOML; parse(serialize(cfg)) reproduces cfg."""
    lines = [f'profile = "{cfg.profile}"', ""]
    for name, cls in _SECTION_TYPES.items():
        section = getattr(cfg, name)
        lines.append(f"[{name}]")
        for f in fields(cls):
            lines.append(f"{f.name} = {_format_value(getattr(section, f.name))}")
        lines.append("")
    return "\n".join(lines)


def config_to_dict(cfg: RunConfig) -> dict:
    out = {"profile": cfg.profile}
    for name, cls in _SECTION_TYPES.items():
        section = getattr(cfg, name)
        out[name] = {f.name: (list(v) if isinstance(v := getattr(section, f.name), tuple) else v)
                     for f in fields(cls)}
    return out
