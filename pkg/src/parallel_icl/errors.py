"""Exception types shared across the engine."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(InvalidInputError):
    """Input is structurally valid but numerically degenerate (e.g. zero-norm vector)."""


class DatasetError(InvalidInputError):
    """A dataset file failed to parse or validate; message names the offending line."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""


class BackendError(RuntimeError):
    """Base class for logit-provider failures."""


class RetryableBackendError(BackendError):
    """Transient transport failure; the request may be retried."""


class ProtocolError(BackendError):
    """Fatal wire-protocol violation (wrong vocabulary size, non-finite logits, bad JSON)."""


class DecodeStepError(BackendError):
    """A chunk evaluation failed mid-decode; carries the step index."""

    def __init__(self, step: int, chunk: int, message: str):
        super().__init__(f"step {step}, chunk {chunk}: {message}")
        self.step = step
        self.chunk = chunk
