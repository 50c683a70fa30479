"""Deterministic toy language model served over the remote LM wire protocol."""

from .tokenizer import Tokenizer, build_pieces, WORDS, CONTINUATIONS
from .model import BridgeModel, TOP_K, ODD_TAGS, EVEN_TAGS
from .server import ApiError, Bridge, BridgeServer, main
from .fixtures import conformance_fixtures, write_conformance_fixtures, DEFAULT_TEXTS

__all__ = [
    "Tokenizer", "build_pieces", "WORDS", "CONTINUATIONS",
    "BridgeModel", "TOP_K", "ODD_TAGS", "EVEN_TAGS",
    "ApiError", "Bridge", "BridgeServer", "main",
    "conformance_fixtures", "write_conformance_fixtures", "DEFAULT_TEXTS",
]
