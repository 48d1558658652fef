import os

import pytest

from hybridrag.exceptions import ChecksumMismatch, StoreFileError
from hybridrag.store.documents import Document
from hybridrag.store.stores import CHUNKS_FILE, STORE_FILES, VECTORS_FILE, Stores


def test_stats(corpus_stores):
    assert corpus_stores.stats() == {"docs": 3, "chunks": 3, "nodes": 6, "edges": 3}
    assert corpus_stores.dim == 256


def test_find_title(corpus_stores):
    assert corpus_stores.find_title("reinforcement   LEARNING").doc_id == "rl"
    assert corpus_stores.find_title("Marie Curie") is None


def test_chunk_lookup(corpus_stores):
    assert corpus_stores.chunk_ids_for("einstein") == {"einstein#0"}
    assert corpus_stores.chunk_texts(["einstein#0"])[0].startswith("Albert Einstein")


def test_snapshot_keeps_old_state(corpus_stores):
    view = corpus_stores.snapshot()
    work = corpus_stores.copy()
    work.documents["extra"] = Document("extra", "Extra", "More text.")
    corpus_stores.swap(work)
    assert "extra" not in view.documents
    assert "extra" in corpus_stores.documents


def test_save_and_load(tmpdir, corpus_stores):
    folder = str(tmpdir / "store")
    corpus_stores.save(folder)
    assert sorted(os.listdir(folder)) == sorted(STORE_FILES)
    assert Stores.load(folder) == corpus_stores


def test_load_missing_files(tmpdir):
    with pytest.raises(StoreFileError, match="missing"):
        Stores.load(str(tmpdir))


def test_load_inconsistent_tables(tmpdir, corpus_stores):
    folder = tmpdir / "store"
    corpus_stores.save(str(folder))
    lines = (folder / CHUNKS_FILE).read().splitlines(keepends=True)
    (folder / CHUNKS_FILE).write("".join(lines[:-1]))
    with pytest.raises(ChecksumMismatch):
        Stores.load(str(folder))


def test_load_corrupted_index(tmpdir, corpus_stores):
    folder = tmpdir / "store"
    corpus_stores.save(str(folder))
    data = bytearray((folder / VECTORS_FILE).read_binary())
    data[-10] ^= 0x01
    (folder / VECTORS_FILE).write_binary(bytes(data))
    with pytest.raises(ChecksumMismatch):
        Stores.load(str(folder))
