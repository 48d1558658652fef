import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from hybridrag.base.aliases import AliasStore
from hybridrag.cli.stdout import manage_progressbar
from hybridrag.config import PipelineConfig
from hybridrag.exceptions import CorpusParseError
from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.store.documents import Document, DocumentSource, split
from hybridrag.store.graph_store import extract_triples
from hybridrag.store.stores import Stores
from hybridrag.utils import iter_jsonl

log = logging.getLogger(__name__)

EMBED_BATCH_SIZE = 32
EMBED_WORKERS = 4


@dataclass
class IngestReport:
    docs: int = 0
    chunks: int = 0
    nodes: int = 0
    edges: int = 0
    rejected_self_loops: int = 0
    skipped: List[Dict] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.skipped)

    def to_dict(self) -> Dict:
        return {
            "docs": self.docs,
            "chunks": self.chunks,
            "nodes": self.nodes,
            "edges": self.edges,
            "rejected_self_loops": self.rejected_self_loops,
            "skipped": list(self.skipped),
        }


def read_corpus(path: Union[Path, str]) -> Tuple[List[Document], List[CorpusParseError]]:
    """Documents of a ``{doc_id, title, text}`` JSONL corpus plus the errors of
    the lines which could not be used."""
    documents, errors = [], []
    for line_no, record in iter_jsonl(path):
        try:
            if not isinstance(record, dict):
                raise CorpusParseError(line_no, "line is not a JSON object")
            if "doc_id" not in record or not str(record["doc_id"]).strip():
                raise CorpusParseError(line_no, "missing doc_id")
            if not isinstance(record.get("text"), str) or not record["text"].strip():
                raise CorpusParseError(
                    line_no, f"document {record['doc_id']} has no text"
                )
            documents.append(
                Document(
                    doc_id=str(record["doc_id"]),
                    title=str(record.get("title") or ""),
                    body=record["text"],
                    source=DocumentSource.CORPUS_FILE,
                )
            )
        except CorpusParseError as err:
            log.warning(f"Skipping corpus {err}")
            errors.append(err)
    return documents, errors


def _embed_all(gateway: AbstractGateway, texts: List[str], parallel: bool):
    batches = [
        texts[pos : pos + EMBED_BATCH_SIZE]
        for pos in range(0, len(texts), EMBED_BATCH_SIZE)
    ]
    if parallel and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=EMBED_WORKERS) as executor:
            results = list(executor.map(gateway.embed, batches))
    else:
        results = [gateway.embed(batch) for batch in batches]
    return [vector for batch in results for vector in batch]


def ingest_documents(
    documents: List[Document],
    stores: Stores,
    gateway: AbstractGateway,
    aliases: Optional[AliasStore] = None,
    cfg: Optional[PipelineConfig] = None,
    progress: bool = True,
) -> IngestReport:
    """Chunk, embed and graph-extract ``documents`` into ``stores``.

    The work happens on a copy of the stores which is swapped in at the end.
    Re-ingesting a ``doc_id`` replaces every trace of its previous version.

    :return: report whose counts are the store sizes after the swap
    """
    cfg = cfg or PipelineConfig()
    aliases = aliases or AliasStore()
    work = stores.copy()
    rejected = 0
    with manage_progressbar(
        max_value=len(documents) if progress else 0, prefix="Ingesting "
    ) as bar:
        for pos, doc in enumerate(documents):
            previous = work.chunk_ids_for(doc.doc_id)
            chunks = [
                chunk
                for chunk in split(doc, cfg.chunk_chars, cfg.overlap_chars)
                if chunk.text.strip()
            ]
            stale = previous - {chunk.chunk_id for chunk in chunks}
            work.graph.remove_chunks(previous)
            work.vectors.remove(stale)
            for chunk_id in stale:
                del work.chunks[chunk_id]
            vectors = _embed_all(gateway, [c.text for c in chunks], cfg.parallel)
            for chunk, vector in zip(chunks, vectors):
                work.vectors.upsert(chunk.chunk_id, vector)
                work.chunks[chunk.chunk_id] = chunk
            for chunk in chunks:
                triples = extract_triples(chunk, gateway, aliases)
                rejected += work.graph.upsert_triples(
                    triples, chunk.chunk_id
                ).rejected_self_loops
            work.documents[doc.doc_id] = doc
            bar.update(pos + 1)
    stores.swap(work)
    report = IngestReport(rejected_self_loops=rejected, **stores.stats())
    log.info(
        f"Ingested {len(documents)} documents: {report.docs} docs, "
        f"{report.chunks} chunks, {report.nodes} nodes, {report.edges} edges"
    )
    return report


def ingest_corpus(
    path: Union[Path, str],
    stores: Stores,
    gateway: AbstractGateway,
    aliases: Optional[AliasStore] = None,
    cfg: Optional[PipelineConfig] = None,
) -> IngestReport:
    """Ingest a JSONL corpus file. Unusable lines are skipped and listed in
    ``IngestReport.skipped``."""
    documents, errors = read_corpus(path)
    report = ingest_documents(documents, stores, gateway, aliases, cfg)
    report.skipped = [{"line": err.line_no, "error": err.message} for err in errors]
    return report
