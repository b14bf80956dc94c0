"""WPE-family speech dereverberation workbench.

Single-channel, iterative and virtual-channel (dual-channel) weighted
prediction error dereverberation, the reverberant observation simulator
used to test it, training-loss functionals evaluated as metrics, and
speaker-verification scoring.
"""

from .audio import TimeSignal, load_wav, save_wav
from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    NumericalError,
    WorkbenchError,
)
from .stft import Spectrogram, StftConfig, istft, stft
from .wpe import (
    LpFilterSet,
    PsdEstimate,
    WpeConfig,
    build_delayed_stack,
    dereverberate,
    estimate_psd,
    iterative_wpe,
    vace_wpe,
    virtual_channel_source,
    wpe_apply,
    wpe_filter_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "ConfigError",
    "DegenerateInputError",
    "FormatError",
    "LpFilterSet",
    "NumericalError",
    "PsdEstimate",
    "Spectrogram",
    "StftConfig",
    "TimeSignal",
    "WorkbenchError",
    "WpeConfig",
    "build_delayed_stack",
    "dereverberate",
    "estimate_psd",
    "istft",
    "iterative_wpe",
    "load_wav",
    "save_wav",
    "stft",
    "vace_wpe",
    "virtual_channel_source",
    "wpe_apply",
    "wpe_filter_estimate",
]
