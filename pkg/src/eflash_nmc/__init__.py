"""Behavioral simulator of a 4-bits/cell embedded-flash weight memory coupled
to a near-memory compute unit, with an int8 inference harness."""

from .analog import ChargePump, WlDriver
from .array import DriftParams, DriftReport, EflashMacro
from .codec import ReferenceLadder, StateCodec
from .config import SimConfig
from .dataset import Dataset, load_mnist_idx, make_synthetic_anomaly
from .errors import (
    CapacityError,
    ConfigError,
    ModelError,
    PumpNotReady,
    SimError,
    UnreachableReference,
    VerifyTimeout,
)
from .model import (
    Deployment,
    EvalResult,
    QuantLayer,
    QuantModel,
    deploy,
    evaluate,
    load_model,
    reference_forward,
    run_inference,
    save_model,
)
from .nmcu import LayerDescriptor, Nmcu, PingPongBuffer, pe_dot, requantize
from .program import MarginReport, ProgramJob, program_pattern, program_row

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
