"""Causal-LM scorer: renders a prompt, appends the partial output as token
ids, and returns the model's next-token logits."""

from __future__ import annotations

import torch
from transformers import AutoModelForCausalLM, AutoTokenizer


class ContextOverflowError(ValueError):
    def __init__(self, tokens: int, limit: int):
        super().__init__(f"context of {tokens} tokens exceeds the limit of {limit}")
        self.tokens = tokens
        self.limit = limit


class CausalLMScorer:
    """Wraps a local transformers checkpoint in deterministic inference mode.

    Partial-output entries arrive as token ids in the model's own vocabulary
    and are appended verbatim after the rendered prompt, so the engine and the
    server never need to agree on a detokenization.
    """

    def __init__(self, model_id: str, device: str = "cpu", max_context_tokens: int = 2048):
        self.model_id = model_id
        self.device = device
        self.max_context_tokens = max_context_tokens
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForCausalLM.from_pretrained(model_id)
        self.model.to(device)
        self.model.eval()
        self.vocab_size = int(self.model.get_output_embeddings().weight.shape[0])

    def score_text(self, prompt: str, partial_output: list[int]) -> tuple[list[float], int]:
        ids = self.tokenizer.encode(prompt)
        for token in partial_output:
            if not 0 <= int(token) < self.vocab_size:
                raise ValueError(f"partial-output token {token} outside the vocabulary")
        ids = list(ids) + [int(t) for t in partial_output]
        if not ids:
            raise ValueError("rendered context is empty")
        if len(ids) > self.max_context_tokens:
            raise ContextOverflowError(len(ids), self.max_context_tokens)
        with torch.no_grad():
            output = self.model(torch.tensor([ids], dtype=torch.long, device=self.device))
        logits = output.logits[0, -1, :].to(torch.float64).cpu()
        return logits.tolist(), len(ids)
