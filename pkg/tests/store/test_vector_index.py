import numpy as np
import pytest

from hybridrag.exceptions import (
    ChecksumMismatch,
    DimensionMismatch,
    InvalidConfig,
    VersionMismatch,
)
from hybridrag.llm.types import EmbeddingVector
from hybridrag.store.vector_index import Origin, VectorIndex


def _random_index(dim=16, size=60, seed=7):
    rng = np.random.default_rng(seed)
    index = VectorIndex(dim)
    for pos in range(size):
        index.upsert(f"doc{pos:03d}#0", EmbeddingVector.normalized(rng.normal(size=dim)))
    return index, rng


def test_search_matches_brute_force():
    index, rng = _random_index()
    for _ in range(10):
        qv = EmbeddingVector.normalized(rng.normal(size=16))
        expected = sorted(
            ((qv.cosine(v), chunk_id) for chunk_id, v in index.entries),
            key=lambda item: (-item[0], item[1]),
        )[:5]
        hits = index.search(qv, 5)
        assert [h.chunk_id for h in hits] == [chunk_id for _, chunk_id in expected]
        assert [h.score for h in hits] == pytest.approx([s for s, _ in expected])
        assert all(h.origin is Origin.VECTOR for h in hits)


def test_ties_broken_by_chunk_id():
    index = VectorIndex(2)
    same = EmbeddingVector.normalized([1.0, 0.0])
    for chunk_id in ("b#0", "a#0", "c#0"):
        index.upsert(chunk_id, same)
    assert [h.chunk_id for h in index.search(same, 2)] == ["a#0", "b#0"]


def test_search_empty_and_large_k():
    index = VectorIndex(2)
    qv = EmbeddingVector.normalized([1.0, 1.0])
    assert index.search(qv, 3) == []
    index.upsert("a#0", qv)
    assert len(index.search(qv, 10)) == 1
    with pytest.raises(InvalidConfig):
        index.search(qv, 0)


def test_upsert_replaces_and_remove():
    index = VectorIndex(2)
    index.upsert("a#0", EmbeddingVector.normalized([1.0, 0.0]))
    index.upsert("a#0", EmbeddingVector.normalized([0.0, 1.0]))
    assert len(index) == 1
    assert index.get("a#0").tolist() == pytest.approx([0.0, 1.0])
    assert index.remove(["a#0", "missing"]) == 1
    assert "a#0" not in index
    assert index.get("a#0") is None


def test_upsert_checks_vectors():
    index = VectorIndex(2)
    with pytest.raises(DimensionMismatch):
        index.upsert("a#0", EmbeddingVector.normalized([1.0, 0.0, 0.0]))
    with pytest.raises(ValueError, match="unit norm"):
        index.upsert("a#0", EmbeddingVector([2.0, 0.0]))


def test_copy_is_independent():
    index, _ = _random_index(size=3)
    other = index.copy()
    other.remove(["doc000#0"])
    assert len(index) == 3
    assert len(other) == 2


def test_save_and_load(tmpdir):
    index, rng = _random_index()
    path = str(tmpdir / "vectors.idx")
    index.save(path)
    loaded = VectorIndex.load(path)
    assert loaded == index
    qv = EmbeddingVector.normalized(rng.normal(size=16))
    assert loaded.search(qv, 5) == index.search(qv, 5)


def test_flipped_byte_is_detected():
    index, _ = _random_index(size=4)
    data = bytearray(index.to_bytes())
    data[40] ^= 0xFF
    with pytest.raises(ChecksumMismatch):
        VectorIndex.from_bytes(bytes(data))


def test_truncated_file():
    with pytest.raises(ChecksumMismatch):
        VectorIndex.from_bytes(b"HRVI")


@pytest.mark.parametrize("offset, value", [(0, b"XXXX"), (4, b"\x09\x00\x00\x00")])
def test_wrong_magic_or_version(offset, value):
    index, _ = _random_index(size=2)
    data = bytearray(index.to_bytes())
    data[offset : offset + 4] = value
    with pytest.raises(VersionMismatch):
        VectorIndex.from_bytes(bytes(data))


def test_search_is_exact_on_a_thousand_vectors():
    index, rng = _random_index(dim=32, size=1000, seed=11)
    matrix = np.stack([v.values for _, v in index.entries]).astype(np.float64)
    ids = index.ids()
    for _ in range(100):
        qv = EmbeddingVector.normalized(rng.normal(size=32))
        scores = matrix @ qv.values.astype(np.float64)
        expected = [ids[pos] for pos in np.argsort(-scores, kind="stable")[:10]]
        assert [h.chunk_id for h in index.search(qv, 10)] == expected


@pytest.mark.parametrize("seed", range(20))
def test_save_and_load_random_indexes(tmpdir, seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(1, 65))
    index = VectorIndex(dim)
    for pos in range(int(rng.integers(0, 80))):
        vector = EmbeddingVector.normalized(rng.normal(size=dim))
        index.upsert(f"doc-{seed}-ü{pos}#{pos % 3}", vector)
    index.remove([chunk_id for chunk_id in index.ids() if rng.random() < 0.2])
    path = str(tmpdir / f"vectors-{seed}.idx")
    index.save(path)
    loaded = VectorIndex.load(path)
    assert loaded == index
    assert loaded.ids() == index.ids()
    if len(index):
        qv = EmbeddingVector.normalized(rng.normal(size=dim))
        assert loaded.search(qv, 5) == index.search(qv, 5)
