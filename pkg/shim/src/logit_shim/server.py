"""The HTTP service: a handshake endpoint plus next-token scoring.

Wire protocol (JSON over HTTP, UTF-8):

* ``GET /v1/handshake`` -> ``{"vocab_size": int, "model_id": str, ...}``
* ``POST /v1/logits`` with ``{"demonstrations": [{"payload": ...}],
  "query": {"payload": ...}, "partial_output": [int]}``
  -> ``{"logits": [float], "token_count": int}``

Malformed requests get HTTP 400; a rendered context longer than the
configured limit gets HTTP 422 with a structured error body. Requests are
scored serially per model instance.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import PromptTemplate, ServerConfig, TemplateError
from .model import ContextOverflowError


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"error": {"code": "bad_request", "message": message}}, status_code=400)


def _parse_body(body) -> tuple[list[dict], dict, list[int]]:
    if not isinstance(body, dict):
        raise ValueError("body must be a JSON object")
    demonstrations = body.get("demonstrations")
    if not isinstance(demonstrations, list):
        raise ValueError("'demonstrations' must be a list")
    payloads = []
    for i, item in enumerate(demonstrations):
        if not isinstance(item, dict) or not isinstance(item.get("payload"), dict):
            raise ValueError(f"demonstration {i} must be an object with a 'payload' object")
        payloads.append(item["payload"])
    query = body.get("query")
    if not isinstance(query, dict) or not isinstance(query.get("payload"), dict):
        raise ValueError("'query' must be an object with a 'payload' object")
    partial = body.get("partial_output", [])
    if not isinstance(partial, list) or not all(
        isinstance(t, int) and not isinstance(t, bool) for t in partial
    ):
        raise ValueError("'partial_output' must be a list of integers")
    return payloads, query["payload"], partial


def create_app(scorer, template: PromptTemplate | None = None) -> FastAPI:
    """Build the app around any scorer exposing vocab_size, model_id, score_text."""
    template = template or PromptTemplate()
    app = FastAPI()
    lock = threading.Lock()

    @app.get("/v1/handshake")
    def handshake():
        return JSONResponse(
            {
                "vocab_size": scorer.vocab_size,
                "model_id": scorer.model_id,
                "prompt_template": template.describe(),
            }
        )

    @app.post("/v1/logits")
    async def logits(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _bad_request("body is not valid JSON")
        try:
            demo_payloads, query_payload, partial = _parse_body(body)
            prompt = template.render(demo_payloads, query_payload)
        except (ValueError, TemplateError) as exc:
            return _bad_request(str(exc))
        try:
            with lock:
                values, token_count = scorer.score_text(prompt, partial)
        except ContextOverflowError as exc:
            return JSONResponse(
                {
                    "error": {
                        "code": "context_overflow",
                        "message": str(exc),
                        "tokens": exc.tokens,
                        "max_tokens": exc.limit,
                    }
                },
                status_code=422,
            )
        except ValueError as exc:
            return _bad_request(str(exc))
        return JSONResponse({"logits": values, "token_count": token_count})

    return app


def serve(cfg: ServerConfig):
    """Load the model and block serving the protocol."""
    import uvicorn

    from .model import CausalLMScorer

    scorer = CausalLMScorer(cfg.model_id, cfg.device, cfg.max_context_tokens)
    app = create_app(scorer, cfg.template)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
