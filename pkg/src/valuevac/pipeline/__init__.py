"""Multi-stage reasoning pipeline: feature extraction, prompt composition,
step-by-step reasoning, trace-feedback decision, and summarization over
pluggable model backends."""

from .backends import BackendDescriptor, BackendError, BackendTimeout, make_backend
from .engine import PipelineEngine, PromptConfig
from .features import ExtractedFeatures, features_from_frames
from .mock import mock_decide
from .parser import ParseFailure, parse_decision, render_decision
from .prompts import DEFAULT_OBJECTIVE, DEFAULT_ROLE, PromptBundle, compose_system_prompt
from .records import DecisionRecord, ReasoningTrace
from .stub_server import StubModelServer

__all__ = [
    "BackendDescriptor",
    "BackendError",
    "BackendTimeout",
    "DecisionRecord",
    "DEFAULT_OBJECTIVE",
    "DEFAULT_ROLE",
    "ExtractedFeatures",
    "ParseFailure",
    "PipelineEngine",
    "PromptBundle",
    "PromptConfig",
    "ReasoningTrace",
    "StubModelServer",
    "compose_system_prompt",
    "features_from_frames",
    "make_backend",
    "mock_decide",
    "parse_decision",
    "render_decision",
]
