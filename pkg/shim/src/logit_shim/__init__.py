from .config import PromptTemplate, ServerConfig, TemplateError
from .model import CausalLMScorer, ContextOverflowError
from .server import create_app, serve

__version__ = "0.1.0"

__all__ = [
    "PromptTemplate",
    "ServerConfig",
    "TemplateError",
    "CausalLMScorer",
    "ContextOverflowError",
    "create_app",
    "serve",
]
