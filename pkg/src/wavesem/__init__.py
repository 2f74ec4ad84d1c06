"""wavesem: spectral element solver for linear and fully nonlinear
potential-flow water waves in a vertical plane."""

__version__ = "0.1.0"

from .basis import ReferenceElement, apply_modal_filter, gll_nodes  # noqa: E402
from .config import ConfigError, RunConfig, load_config, parse_config  # noqa: E402
from .mesh import build_surface_mesh, extrude, update_mesh  # noqa: E402
from .wavetheory import (  # noqa: E402
    AiryWave,
    WaveSpec,
    dispersion_solve,
    stream_function_eval,
    stream_function_solve,
)

__all__ = [
    "__version__",
    "ReferenceElement",
    "apply_modal_filter",
    "gll_nodes",
    "ConfigError",
    "RunConfig",
    "load_config",
    "parse_config",
    "build_surface_mesh",
    "extrude",
    "update_mesh",
    "AiryWave",
    "WaveSpec",
    "dispersion_solve",
    "stream_function_eval",
    "stream_function_solve",
]
