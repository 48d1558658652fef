from dataclasses import dataclass
from typing import Iterable, List, Union

import numpy as np

from hybridrag.exceptions import DimensionMismatch, InvalidConfig, InvalidQuery


@dataclass(frozen=True)
class CompletionRequest:
    system_prompt: str
    user_prompt: str
    max_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self):
        if not self.user_prompt or not self.user_prompt.strip():
            raise InvalidQuery("user_prompt must not be empty")
        if self.max_tokens < 1:
            raise InvalidConfig(f"max_tokens must be >= 1, received {self.max_tokens}")
        if not 0 <= self.temperature <= 1:
            raise InvalidConfig(
                f"temperature must be in [0, 1], received {self.temperature}"
            )

    def as_dict(self) -> dict:
        return {
            "system_prompt": self.system_prompt,
            "user_prompt": self.user_prompt,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        }


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """Dense float32 vector. The underlying array is read only."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float32)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("An embedding must be a non empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Embedding values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def normalized(cls, values: Union[Iterable[float], np.ndarray]) -> "EmbeddingVector":
        arr = np.asarray(values, dtype=np.float64)
        norm = np.linalg.norm(arr)
        if not np.isfinite(norm) or norm == 0:
            raise ValueError("Cannot normalize a zero or non finite vector")
        return cls(arr / norm)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values.astype(np.float64)))

    def is_unit(self, tol: float = 1e-6) -> bool:
        return abs(self.norm - 1.0) <= tol

    def cosine(self, other: "EmbeddingVector") -> float:
        # both sides are unit vectors, so the dot product is the cosine
        if other.dim != self.dim:
            raise DimensionMismatch(self.dim, other.dim)
        return float(
            np.dot(self.values.astype(np.float64), other.values.astype(np.float64))
        )

    def tolist(self) -> List[float]:
        return self.values.tolist()

    def __eq__(self, other):
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __len__(self):
        return self.dim


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    return a.cosine(b)
