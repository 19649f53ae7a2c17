"""Strong-field two-electron ionization simulator and analysis toolkit."""

__version__ = "0.1.0"

from .config import RunConfig, load_config, parse_config, serialize_config
from .grid import (Grid1D, Grid2D, WaveFunction2D, build_potential, energy,
                   load_snapshot, propagate_step, relax_ground_state,
                   save_snapshot)
from .laser import PulseSpec, chirp_limit, field_at, intensity_to_field, normalize_energy

__all__ = [
    "__version__",
    "Grid1D", "Grid2D", "WaveFunction2D", "PulseSpec", "RunConfig",
    "build_potential", "chirp_limit", "energy", "field_at",
    "intensity_to_field", "load_config", "load_snapshot", "normalize_energy",
    "parse_config", "propagate_step", "relax_ground_state", "save_snapshot",
    "serialize_config",
]
