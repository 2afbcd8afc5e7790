"""Server configuration and prompt templating."""

from __future__ import annotations

from dataclasses import dataclass, field


class TemplateError(ValueError):
    """A payload does not provide the fields the template needs."""


@dataclass(frozen=True)
class PromptTemplate:
    """How structured payloads become model input text.

    Every demonstration renders as an (input, output) pair that precedes the
    query; the query renders without its answer so the model's next-token
    logits continue it. Placeholders are payload keys.
    """

    demonstration: str = "Q: {question}\nA: {answer}"
    query: str = "Q: {question}\nA:"
    separator: str = "\n\n"

    def __post_init__(self):
        if "{" not in self.demonstration or "{" not in self.query:
            raise ValueError("templates must reference at least one payload field")

    def render(self, demonstrations: list[dict], query: dict) -> str:
        parts = []
        for i, payload in enumerate(demonstrations):
            try:
                parts.append(self.demonstration.format(**payload))
            except (KeyError, IndexError) as exc:
                raise TemplateError(f"demonstration {i} payload lacks field {exc}") from None
        try:
            parts.append(self.query.format(**query))
        except (KeyError, IndexError) as exc:
            raise TemplateError(f"query payload lacks field {exc}") from None
        return self.separator.join(parts)

    def describe(self) -> dict:
        return {
            "demonstration": self.demonstration,
            "query": self.query,
            "separator": self.separator,
        }


@dataclass(frozen=True)
class ServerConfig:
    model_id: str
    device: str = "cpu"
    host: str = "127.0.0.1"
    port: int = 8100
    template: PromptTemplate = field(default_factory=PromptTemplate)
    max_context_tokens: int = 2048

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id is required")
        if self.max_context_tokens < 1:
            raise ValueError("max_context_tokens must be positive")
