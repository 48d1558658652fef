import hashlib
import logging
import string
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from hybridrag.exceptions import EmptyResponse, FormatError
from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.llm.types import CompletionRequest, EmbeddingVector
from hybridrag.utils import iter_jsonl, sha256_text

log = logging.getLogger(__name__)

ECHO_PREFIX = "echo:"


def prompt_hash(system_prompt: str, user_prompt: str) -> str:
    return sha256_text(system_prompt, user_prompt)


def embedding_tokens(text: str) -> List[str]:
    tokens = (tok.strip(string.punctuation) for tok in text.lower().split())
    return [tok for tok in tokens if tok]


def hashed_unigram_embedding(text: str, dim: int = 256) -> EmbeddingVector:
    """Deterministic bag of words embedding.

    Every token is hashed with SHA-256: the first four bytes pick the slot and
    the lowest bit of the fifth byte picks the sign. Texts sharing tokens end
    up close to each other, which is all the retrieval tests rely on.
    """
    acc = np.zeros(dim, dtype=np.float64)
    for token in embedding_tokens(text):
        token_digest = hashlib.sha256(token.encode("utf-8")).digest()
        slot = int.from_bytes(token_digest[:4], "little") % dim
        acc[slot] += 1.0 if token_digest[4] & 1 else -1.0
    if not acc.any():
        # only punctuation, or colliding tokens cancelled each other
        text_digest = hashlib.sha256(text.encode("utf-8")).digest()
        acc[int.from_bytes(text_digest[:4], "little") % dim] = 1.0
    return EmbeddingVector.normalized(acc)


def load_fixtures(fixtures_path: Union[Path, str]) -> Dict[str, str]:
    """Load mock responses from JSONL.

    A record is either ``{"prompt_hash", "response"}`` or
    ``{"system_prompt", "user_prompt", "response"}``.
    """
    fixtures = {}
    for line_no, record in iter_jsonl(fixtures_path):
        if not isinstance(record, dict) or "response" not in record:
            raise FormatError(str(line_no), "mock fixture needs a response field")
        if "prompt_hash" in record:
            key = record["prompt_hash"]
        elif "user_prompt" in record:
            key = prompt_hash(record.get("system_prompt", ""), record["user_prompt"])
        else:
            raise FormatError(
                str(line_no), "mock fixture needs prompt_hash or user_prompt"
            )
        fixtures[key] = record["response"]
    log.debug(f"Loaded {len(fixtures)} mock fixtures from {fixtures_path}")
    return fixtures


class MockGateway(AbstractGateway):
    kind = "mock"

    def __init__(
        self,
        embed_dim: int = 256,
        fixtures: Optional[Dict[str, str]] = None,
        fixtures_path: Union[Path, str, None] = None,
    ):
        self.embed_dim = embed_dim
        self._fixtures: Dict[str, str] = {}
        if fixtures_path:
            self._fixtures.update(load_fixtures(fixtures_path))
        self._fixtures.update(fixtures or {})

    @classmethod
    def from_config(cls, backend) -> "MockGateway":
        return cls(embed_dim=backend.embed_dim, fixtures_path=backend.fixtures_path)

    def add_fixture(self, system_prompt: str, user_prompt: str, response: str):
        """Register a canned response. Meant for setting up a gateway before it
        is handed to the pipeline."""
        self._fixtures[prompt_hash(system_prompt, user_prompt)] = response

    def has_fixture(self, system_prompt: str, user_prompt: str) -> bool:
        return prompt_hash(system_prompt, user_prompt) in self._fixtures

    def complete(self, req: CompletionRequest) -> str:
        response = self._fixtures.get(prompt_hash(req.system_prompt, req.user_prompt))
        if response is None:
            response = echo(req.user_prompt)
        if not response.strip():
            raise EmptyResponse("Mock backend produced an empty response.")
        return response

    def embed(self, texts: List[str]) -> List[EmbeddingVector]:
        self.check_texts(texts)
        return [hashed_unigram_embedding(text, self.embed_dim) for text in texts]


def echo(user_prompt: str) -> str:
    if user_prompt.startswith(ECHO_PREFIX):
        return user_prompt[len(ECHO_PREFIX) :]
    return user_prompt
