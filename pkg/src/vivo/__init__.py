"""Camera-driven interactive music engine.

Motion in a video stream becomes a quantity-of-motion signal; its rolling
variance (saliency of activity) drives a hysteresis trigger that advances a
stochastic score, which together with direct signal mappings automates the
parameters of a small real-time DSP chain. Sessions are logged as NDJSON and
replay deterministically.
"""

from .audio import (AudioBuffer, ActivationEvent, ChainProcessor, CommandOrigin,
                    ParameterCommand, ProcessingChain, UnitInstance, UnitKind,
                    parse_chain, read_wav, render_offline, serialize_chain, write_wav)
from .engine import EngineConfig, EngineCore, SectionChange
from .errors import (ConfigError, DigestMismatch, InsufficientData, InvalidInput,
                     ReplayDivergence, UnresolvedTarget, VivoError)
from .mapping import CurveKind, MappingConfig, Route, RouteSource, apply_routes, parse_mapping
from .motion import (LuminanceGrid, MotionAnalyzer, MotionConfig, MotionSample,
                     calibrate_noise_floor, compute_qom, to_luminance)
from .saliency import (RollingWindow, SaliencySample, SaliencyTracker, SoaSource,
                       Trigger, TriggerConfig, TriggerEvent)
from .score import (DistributionKind, ParamDistribution, Score, ScoreState, Section,
                    SpreadPolicy, TriggerAction, parse_score, sample_section,
                    serialize_score)
from .session import (SessionLog, SessionWriter, TimelineEntry, TimelineLabel,
                      export_timeline, read_session, replay_session, verify_digests)

__version__ = "0.1.0"

__all__ = [
    "ActivationEvent", "AudioBuffer", "ChainProcessor", "CommandOrigin",
    "ConfigError", "CurveKind", "DigestMismatch", "DistributionKind",
    "EngineConfig", "EngineCore", "InsufficientData", "InvalidInput",
    "LuminanceGrid", "MappingConfig", "MotionAnalyzer", "MotionConfig",
    "MotionSample", "ParamDistribution", "ParameterCommand", "ProcessingChain",
    "ReplayDivergence", "RollingWindow", "Route", "RouteSource",
    "SaliencySample", "SaliencyTracker", "Score", "ScoreState", "Section",
    "SectionChange", "SessionLog", "SessionWriter", "SoaSource", "SpreadPolicy",
    "TimelineEntry", "TimelineLabel", "Trigger", "TriggerAction",
    "TriggerConfig", "TriggerEvent", "UnitInstance", "UnitKind",
    "UnresolvedTarget", "VivoError", "apply_routes", "calibrate_noise_floor",
    "compute_qom", "export_timeline", "parse_chain", "parse_mapping",
    "parse_score", "read_session", "read_wav", "render_offline",
    "replay_session", "sample_section", "serialize_chain", "serialize_score",
    "to_luminance", "verify_digests", "write_wav",
]
