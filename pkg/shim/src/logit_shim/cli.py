"""Command line entry point: serve a local causal LM over the wire protocol."""

from __future__ import annotations

import argparse

from .config import PromptTemplate, ServerConfig
from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="logit-shim",
        description="Serve next-token logits of a local causal LM over HTTP",
    )
    parser.add_argument("--model", required=True, help="model path or hub identifier")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8100)
    parser.add_argument("--max-context-tokens", type=int, default=2048)
    parser.add_argument(
        "--demo-template",
        default=PromptTemplate.demonstration,
        help="format string rendering one demonstration payload",
    )
    parser.add_argument(
        "--query-template",
        default=PromptTemplate.query,
        help="format string rendering the query payload",
    )
    args = parser.parse_args(argv)

    cfg = ServerConfig(
        model_id=args.model,
        device=args.device,
        host=args.host,
        port=args.port,
        template=PromptTemplate(args.demo_template, args.query_template),
        max_context_tokens=args.max_context_tokens,
    )
    serve(cfg)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
