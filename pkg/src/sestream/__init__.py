"""Streaming generative speech enhancement over an STFT frame buffer."""

from .errors import (
    ConfigError,
    DataError,
    DomainError,
    NumericError,
    ShapeError,
    SingularityError,
    StateError,
)
from .sde import BbedParams
from .spectral import Spectrogram, StftConfig, analyze_stream, compress, decompress, synthesize_stream
from .schedule import LatencyReport, ScheduleVector, algorithmic_latency, inference_schedule, rtf, training_schedule
from .unet import BlockCausalUNet, UNetConfig, left_pad_amount
from .engine import DiffusionBufferEngine, OracleDenoiser, PredictiveEngine, run_stream
from .metrics import si_sdr, si_sir

__version__ = "0.1.0"
