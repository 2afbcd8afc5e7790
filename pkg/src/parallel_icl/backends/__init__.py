from .base import ContextRequest, LogitProvider
from .cost import (
    DEFAULT_COST_MODEL,
    REFERENCE_PREFILL_POINTS,
    CostModel,
    CostModelWrapper,
    LatencyBreakdown,
    fit_prefill_coefficients,
    simulate_latency,
)
from .remote import RemoteBackend, parse_logits_response, remote_score, serialize_request
from .synthetic import SyntheticTaskModel, synthetic_score

__all__ = [
    "ContextRequest",
    "LogitProvider",
    "CostModel",
    "CostModelWrapper",
    "LatencyBreakdown",
    "DEFAULT_COST_MODEL",
    "REFERENCE_PREFILL_POINTS",
    "fit_prefill_coefficients",
    "simulate_latency",
    "RemoteBackend",
    "remote_score",
    "serialize_request",
    "parse_logits_response",
    "SyntheticTaskModel",
    "synthetic_score",
]
