import numpy as np
import pytest

from hybridrag.exceptions import DimensionMismatch, InvalidConfig, InvalidQuery
from hybridrag.llm.types import CompletionRequest, EmbeddingVector, cosine


def test_completion_request():
    req = CompletionRequest("system", "user", max_tokens=5)
    assert req.as_dict() == {
        "system_prompt": "system",
        "user_prompt": "user",
        "max_tokens": 5,
        "temperature": 0.0,
    }


@pytest.mark.parametrize(
    "kwargs, error",
    [
        ({"user_prompt": "  "}, InvalidQuery),
        ({"user_prompt": "hi", "max_tokens": 0}, InvalidConfig),
        ({"user_prompt": "hi", "temperature": 1.5}, InvalidConfig),
    ],
)
def test_completion_request_invalid(kwargs, error):
    with pytest.raises(error):
        CompletionRequest(system_prompt="", **kwargs)


def test_normalized_vector():
    vector = EmbeddingVector.normalized([3.0, 4.0])
    assert vector.dim == 2
    assert vector.is_unit()
    assert vector.tolist() == pytest.approx([0.6, 0.8])
    with pytest.raises(ValueError):
        vector.values[0] = 1.0


@pytest.mark.parametrize("values", [[0.0, 0.0], [np.inf, 1.0]])
def test_cannot_normalize(values):
    with pytest.raises(ValueError):
        EmbeddingVector.normalized(values)


def test_cosine():
    a = EmbeddingVector.normalized([1.0, 0.0])
    b = EmbeddingVector.normalized([1.0, 1.0])
    assert cosine(a, b) == pytest.approx(2 ** -0.5)
    assert a.cosine(a) == pytest.approx(1.0)
    with pytest.raises(DimensionMismatch) as err:
        a.cosine(EmbeddingVector.normalized([1.0, 0.0, 0.0]))
    assert err.value.expected == 2
    assert err.value.received == 3


def test_equality_and_hash():
    a = EmbeddingVector.normalized([3.0, 4.0])
    b = EmbeddingVector.normalized([6.0, 8.0])
    assert a == b
    assert hash(a) == hash(b)
    assert a != EmbeddingVector.normalized([4.0, 3.0])
