import pytest

from hybridrag.exceptions import InvalidConfig
from hybridrag.store.documents import (
    Chunk,
    Document,
    DocumentSource,
    chunk_id_for,
    reconstruct,
    split,
)


def test_document_validation():
    with pytest.raises(ValueError):
        Document("d1", "Title", "   ")
    with pytest.raises(ValueError):
        Document(" ", "Title", "body")
    doc = Document("d1", "Title", "body", "web_snippet")
    assert doc.source is DocumentSource.WEB_SNIPPET
    assert Document.from_dict(doc.to_dict()) == doc


def test_split_windows_without_whitespace():
    doc = Document("long", "Long", "a" * 1000)
    chunks = split(doc, chunk_chars=512, overlap_chars=64)
    assert [(c.char_start, c.char_end) for c in chunks] == [
        (0, 512),
        (448, 960),
        (896, 1000),
    ]
    assert [c.chunk_id for c in chunks] == ["long#0", "long#1", "long#2"]
    assert reconstruct(chunks) == doc.body


def test_split_cuts_after_whitespace():
    body = "alpha beta gamma delta epsilon"
    chunks = split(Document("d", "", body), chunk_chars=12, overlap_chars=2)
    assert chunks[0].text == "alpha beta "
    assert all(len(c.text) <= 12 for c in chunks)
    assert all(
        nxt.char_start == prev.char_end - 2 for prev, nxt in zip(chunks, chunks[1:])
    )
    assert reconstruct(chunks) == body


def test_short_document_is_one_chunk():
    chunks = split(Document("short", "", "Ulm."))
    assert len(chunks) == 1
    assert chunks[0] == Chunk("short#0", "short", "Ulm.", 0, 4, 0)


def test_split_invalid_sizes():
    with pytest.raises(InvalidConfig):
        split(Document("d", "", "text"), chunk_chars=10, overlap_chars=10)


def test_reconstruct_ignores_order():
    chunks = split(Document("d", "", "x" * 50), chunk_chars=20, overlap_chars=5)
    assert reconstruct(list(reversed(chunks))) == "x" * 50
    assert reconstruct([]) == ""


def test_chunk_round_trip():
    chunk = Chunk(chunk_id_for("d", 3), "d", "text", 10, 14, 3)
    assert chunk.chunk_id == "d#3"
    assert Chunk.from_dict(chunk.to_dict()) == chunk
