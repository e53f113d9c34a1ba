"""Sampling set selection and reconstruction for bandlimited graph signals."""

from .bench import (
    ExperimentConfig,
    ExperimentReport,
    diag_energy_fraction,
    ingest_external_baseline,
    run_classification,
    run_snr_sweep,
    run_timing_sweep,
)
from .errors import (
    GraphSamplingError,
    InvalidInputError,
    InvalidKernelError,
    InvalidParameterError,
    ParseError,
    RankDeficientWarning,
)
from .graph import *  # noqa: F401,F403
from .reconstruction import *  # noqa: F401,F403
from .samplers import *  # noqa: F401,F403
from .spectral import *  # noqa: F401,F403

__version__ = "0.1.0"
