from abc import ABCMeta, abstractmethod
from typing import List

from hybridrag.exceptions import InvalidQuery
from hybridrag.llm.types import CompletionRequest, EmbeddingVector


class AbstractGateway(metaclass=ABCMeta):
    """Text completion and embedding backend.

    Implementations are immutable once built and can be shared by threads.
    """

    kind: str = ""
    embed_dim: int = 256

    @abstractmethod
    def complete(self, req: CompletionRequest) -> str:
        ...

    @abstractmethod
    def embed(self, texts: List[str]) -> List[EmbeddingVector]:
        ...

    def ask(
        self,
        system_prompt: str,
        user_prompt: str,
        max_tokens: int = 512,
        temperature: float = 0.0,
    ) -> str:
        return self.complete(
            CompletionRequest(
                system_prompt=system_prompt,
                user_prompt=user_prompt,
                max_tokens=max_tokens,
                temperature=temperature,
            )
        )

    def embed_one(self, text: str) -> EmbeddingVector:
        return self.embed([text])[0]

    @staticmethod
    def check_texts(texts: List[str]):
        for pos, text in enumerate(texts):
            if not isinstance(text, str) or not text.strip():
                raise InvalidQuery(f"Cannot embed empty text (position {pos}).")
