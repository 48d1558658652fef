import json
import logging
import threading
from pathlib import Path
from typing import Dict, List, Optional, Set, Union

from hybridrag.exceptions import ChecksumMismatch, StoreFileError
from hybridrag.store.documents import Chunk, Document
from hybridrag.store.graph_store import GraphStore
from hybridrag.store.vector_index import VectorIndex
from hybridrag.utils import atomic_write, dumps_jsonl, iter_jsonl

log = logging.getLogger(__name__)

VECTORS_FILE = "vectors.idx"
GRAPH_FILE = "graph.jsonl"
DOCUMENTS_FILE = "documents.jsonl"
CHUNKS_FILE = "chunks.jsonl"
STORE_FILES = (VECTORS_FILE, GRAPH_FILE, DOCUMENTS_FILE, CHUNKS_FILE)


class Stores:
    """Vector index, graph and the document/chunk tables behind them.

    Writers build on a :meth:`copy` and publish it with :meth:`swap`; readers
    take a :meth:`snapshot`, so nobody sees a half built state.
    """

    def __init__(
        self,
        vectors: VectorIndex,
        graph: Optional[GraphStore] = None,
        chunks: Optional[Dict[str, Chunk]] = None,
        documents: Optional[Dict[str, Document]] = None,
    ):
        self.vectors = vectors
        self.graph = graph or GraphStore()
        self.chunks: Dict[str, Chunk] = chunks or {}
        self.documents: Dict[str, Document] = documents or {}
        self._lock = threading.Lock()

    @classmethod
    def empty(cls, dim: int) -> "Stores":
        return cls(VectorIndex(dim))

    @property
    def dim(self) -> int:
        return self.vectors.dim

    def __eq__(self, other):
        if not isinstance(other, Stores):
            return NotImplemented
        return (
            self.vectors == other.vectors
            and self.graph == other.graph
            and self.chunks == other.chunks
            and self.documents == other.documents
        )

    def stats(self) -> Dict[str, int]:
        return {
            "docs": len(self.documents),
            "chunks": len(self.chunks),
            "nodes": self.graph.node_count,
            "edges": self.graph.edge_count,
        }

    def copy(self) -> "Stores":
        with self._lock:
            return Stores(
                self.vectors.copy(),
                self.graph.copy(),
                dict(self.chunks),
                dict(self.documents),
            )

    def snapshot(self) -> "Stores":
        """Read only view sharing the current components."""
        with self._lock:
            return Stores(self.vectors, self.graph, self.chunks, self.documents)

    def swap(self, other: "Stores"):
        with self._lock:
            self.vectors = other.vectors
            self.graph = other.graph
            self.chunks = other.chunks
            self.documents = other.documents

    def chunk_ids_for(self, doc_id: str) -> Set[str]:
        return {cid for cid, chunk in self.chunks.items() if chunk.doc_id == doc_id}

    def find_title(self, title: str) -> Optional[Document]:
        wanted = " ".join(title.split()).casefold()
        matches = [
            doc
            for doc in self.documents.values()
            if " ".join(doc.title.split()).casefold() == wanted
        ]
        return min(matches, key=lambda doc: doc.doc_id) if matches else None

    def chunk_texts(self, chunk_ids: List[str]) -> List[str]:
        return [self.chunks[cid].text for cid in chunk_ids]

    def save(self, directory: Union[Path, str]):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.vectors.save(directory / VECTORS_FILE)
        self.graph.save(directory / GRAPH_FILE)
        atomic_write(
            directory / DOCUMENTS_FILE,
            dumps_jsonl([self.documents[key].to_dict() for key in sorted(self.documents)]),
        )
        atomic_write(
            directory / CHUNKS_FILE,
            dumps_jsonl(
                [
                    chunk.to_dict()
                    for chunk in sorted(
                        self.chunks.values(), key=lambda c: (c.doc_id, c.seq)
                    )
                ]
            ),
        )
        log.info(f"Stores saved to {directory}: {json.dumps(self.stats())}")

    @classmethod
    def load(cls, directory: Union[Path, str]) -> "Stores":
        directory = Path(directory)
        missing = [name for name in STORE_FILES if not (directory / name).is_file()]
        if missing:
            raise StoreFileError(
                f"{directory} is not a store folder, missing: {', '.join(missing)}"
            )
        vectors = VectorIndex.load(directory / VECTORS_FILE)
        graph = GraphStore.load(directory / GRAPH_FILE)
        documents, chunks = {}, {}
        try:
            for _, record in iter_jsonl(directory / DOCUMENTS_FILE):
                doc = Document.from_dict(record)
                documents[doc.doc_id] = doc
            for _, record in iter_jsonl(directory / CHUNKS_FILE):
                chunk = Chunk.from_dict(record)
                chunks[chunk.chunk_id] = chunk
        except (KeyError, TypeError, ValueError) as err:
            raise ChecksumMismatch(f"{directory}: corrupted table ({err})")
        if set(chunks) != set(vectors.ids()):
            raise ChecksumMismatch(f"{directory}: chunk table does not match the index")
        return cls(vectors, graph, chunks, documents)
