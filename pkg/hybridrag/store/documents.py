from dataclasses import dataclass
from enum import Enum
from typing import Dict, List

from hybridrag.exceptions import InvalidConfig


class DocumentSource(str, Enum):
    CORPUS_FILE = "corpus_file"
    REMOTE_FETCH = "remote_fetch"
    WEB_SNIPPET = "web_snippet"


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str
    source: DocumentSource = DocumentSource.CORPUS_FILE

    def __post_init__(self):
        if not str(self.doc_id).strip():
            raise ValueError("doc_id must not be empty")
        if not self.body or not self.body.strip():
            raise ValueError(f"Document {self.doc_id} has an empty body")
        object.__setattr__(self, "source", DocumentSource(self.source))

    def to_dict(self) -> Dict:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "text": self.body,
            "source": self.source.value,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Document":
        return cls(
            doc_id=str(data["doc_id"]),
            title=data.get("title") or "",
            body=data["text"],
            source=data.get("source", DocumentSource.CORPUS_FILE.value),
        )


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    char_start: int
    char_end: int
    seq: int

    def to_dict(self) -> Dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "text": self.text,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "seq": self.seq,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Chunk":
        return cls(**{key: data[key] for key in cls.__dataclass_fields__})


def chunk_id_for(doc_id: str, seq: int) -> str:
    return f"{doc_id}#{seq}"


def split(doc: Document, chunk_chars: int = 512, overlap_chars: int = 64) -> List[Chunk]:
    """Sliding character windows over ``doc.body``.

    A window that does not reach the end of the body is cut right after the
    last whitespace found past ``start + overlap_chars``, when there is one.
    The next window starts ``overlap_chars`` before the previous end.

    :param doc: document to split
    :param chunk_chars: maximum window size
    :param overlap_chars: characters shared by consecutive windows
    :return: chunks ordered by ``seq``
    """
    if not chunk_chars > overlap_chars >= 0:
        raise InvalidConfig(
            f"chunk_chars ({chunk_chars}) must be greater than overlap_chars "
            f"({overlap_chars}) and overlap_chars must be >= 0"
        )
    body = doc.body
    size = len(body)
    chunks = []
    start = 0
    while True:
        end = min(start + chunk_chars, size)
        if end < size:
            for pos in range(end - 1, start + overlap_chars, -1):
                if body[pos].isspace():
                    end = pos + 1
                    break
        seq = len(chunks)
        chunks.append(
            Chunk(
                chunk_id=chunk_id_for(doc.doc_id, seq),
                doc_id=doc.doc_id,
                text=body[start:end],
                char_start=start,
                char_end=end,
                seq=seq,
            )
        )
        if end >= size:
            return chunks
        start = end - overlap_chars


def reconstruct(chunks: List[Chunk]) -> str:
    """Concatenate chunks of one document dropping the overlapping prefixes."""
    if not chunks:
        return ""
    ordered = sorted(chunks, key=lambda c: c.seq)
    parts = [ordered[0].text]
    for prev, chunk in zip(ordered, ordered[1:]):
        parts.append(chunk.text[prev.char_end - chunk.char_start :])
    return "".join(parts)
