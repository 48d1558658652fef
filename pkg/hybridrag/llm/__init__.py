from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.llm.types import CompletionRequest, EmbeddingVector, cosine

__all__ = ["AbstractGateway", "CompletionRequest", "EmbeddingVector", "cosine"]
