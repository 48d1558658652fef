import logging
from typing import List

from hybridrag.config import BackendConfig
from hybridrag.exceptions import DimensionMismatch, EmptyResponse, TransportError
from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.llm.types import CompletionRequest, EmbeddingVector
from hybridrag.utils import api_headers, request_with_retries

log = logging.getLogger(__name__)


class HttpGateway(AbstractGateway):
    """Client for OpenAI compatible ``/chat/completions`` and ``/embeddings``."""

    kind = "http"

    def __init__(self, backend: BackendConfig):
        self.backend = backend
        self.embed_dim = backend.embed_dim
        self.base_url = backend.endpoint_url.rstrip("/")

    @classmethod
    def from_config(cls, backend: BackendConfig) -> "HttpGateway":
        return cls(backend)

    def _post(self, route: str, payload: dict) -> dict:
        response = request_with_retries(
            "POST",
            f"{self.base_url}/{route}",
            json=payload,
            headers=api_headers(self.backend.api_key_env_var),
            timeout=self.backend.timeout,
            max_retries=self.backend.max_retries,
        )
        try:
            return response.json()
        except ValueError:
            raise TransportError(f"{route} answered with a non JSON body")

    def complete(self, req: CompletionRequest) -> str:
        messages = []
        if req.system_prompt:
            messages.append({"role": "system", "content": req.system_prompt})
        messages.append({"role": "user", "content": req.user_prompt})
        body = self._post(
            "chat/completions",
            {
                "model": self.backend.model_name,
                "messages": messages,
                "max_tokens": req.max_tokens,
                "temperature": req.temperature,
            },
        )
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise TransportError(f"Unexpected chat completion payload: {body!r:.200}")
        if not content or not content.strip():
            raise EmptyResponse(f"{self.backend.model_name} returned an empty answer")
        return content

    def embed(self, texts: List[str]) -> List[EmbeddingVector]:
        self.check_texts(texts)
        body = self._post(
            "embeddings", {"model": self.backend.embed_model_name, "input": texts}
        )
        try:
            data = sorted(body["data"], key=lambda item: item.get("index", 0))
            raw_vectors = [item["embedding"] for item in data]
        except (KeyError, TypeError, AttributeError):
            raise TransportError(f"Unexpected embeddings payload: {body!r:.200}")
        if len(raw_vectors) != len(texts):
            raise TransportError(
                f"Requested {len(texts)} embeddings, received {len(raw_vectors)}"
            )
        result = []
        for values in raw_vectors:
            if len(values) != self.embed_dim:
                raise DimensionMismatch(self.embed_dim, len(values))
            result.append(EmbeddingVector.normalized(values))
        log.debug(f"Embedded {len(texts)} texts with {self.backend.embed_model_name}")
        return result
