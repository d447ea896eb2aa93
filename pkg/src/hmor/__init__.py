"""Hammerstein surrogate models for approximately memoryless circuit blocks.

The package splits into a static part (a trilinear DC current map), a dynamic
part (a low-order LTI block driven by the map's outputs and their squares),
tooling to identify both from DC-sweep plus swept-sine transient data, a
synthetic full-order bench to generate that data, and a CLI tying it together.
"""

from .dc_map import (
    DcTable,
    build_table,
    eval_idc,
    eval_phi,
    phi_jacobian,
)
from .errors import (
    GridDataError,
    HmorError,
    NumericalOverflowError,
    OutOfDomainError,
    SolverError,
)
from .fom_bench import (
    FomSpec,
    LoadSpec,
    ShParams,
    dc_drive_voltage,
    fom_ac,
    fom_dc,
    fom_dc_sweep,
    fom_transient,
    sh_drain_current,
)
from .ident import (
    FitConfig,
    FitResult,
    TrainingSet,
    assemble_training,
    fit,
    initial_guess,
    order_sweep,
)
from .lti_sim import (
    StateSpace,
    discretize_foh,
    frequency_response,
    simulate,
    simulate_with_grad,
)
from .metrics import MetricsReport, metrics
from .rom_runtime import (
    AcResponse,
    HammersteinModel,
    OperatingPoint,
    dc_transfer_curve,
    load_model,
    rom_ac,
    rom_dc_operating_point,
    rom_transient,
    save_model,
)
from .stimulus import (
    ChirpSpec,
    PulseSpec,
    SineSpec,
    chirp_phase,
    gen_chirp_pair,
    gen_pulse,
    gen_sine,
    instantaneous_frequency,
)
from .svgplot import emit_plot, plot_bode, plot_overlay, plot_series
from .timeseries import TimeSeries, read_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "AcResponse",
    "ChirpSpec",
    "DcTable",
    "FitConfig",
    "FitResult",
    "FomSpec",
    "GridDataError",
    "HammersteinModel",
    "HmorError",
    "LoadSpec",
    "MetricsReport",
    "NumericalOverflowError",
    "OperatingPoint",
    "OutOfDomainError",
    "PulseSpec",
    "ShParams",
    "SineSpec",
    "SolverError",
    "StateSpace",
    "TimeSeries",
    "TrainingSet",
    "assemble_training",
    "build_table",
    "chirp_phase",
    "dc_drive_voltage",
    "dc_transfer_curve",
    "discretize_foh",
    "emit_plot",
    "eval_idc",
    "eval_phi",
    "fit",
    "fom_ac",
    "fom_dc",
    "fom_dc_sweep",
    "fom_transient",
    "frequency_response",
    "gen_chirp_pair",
    "gen_pulse",
    "gen_sine",
    "initial_guess",
    "instantaneous_frequency",
    "load_model",
    "metrics",
    "order_sweep",
    "phi_jacobian",
    "plot_bode",
    "plot_overlay",
    "plot_series",
    "read_csv",
    "rom_ac",
    "rom_dc_operating_point",
    "rom_transient",
    "save_model",
    "sh_drain_current",
    "simulate",
    "simulate_with_grad",
    "write_csv",
    "__version__",
]
