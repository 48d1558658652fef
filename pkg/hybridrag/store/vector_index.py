import logging
import struct
import zlib
from enum import Enum
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from hybridrag.exceptions import (
    ChecksumMismatch,
    DimensionMismatch,
    InvalidConfig,
    VersionMismatch,
)
from hybridrag.llm.types import EmbeddingVector
from hybridrag.utils import atomic_write

log = logging.getLogger(__name__)

INDEX_MAGIC = b"HRVI"
INDEX_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_ID_LEN = struct.Struct("<I")
_CRC = struct.Struct("<I")
UNIT_NORM_TOL = 1e-5


class Origin(str, Enum):
    VECTOR = "vector"
    GRAPH = "graph"


class ScoredHit(NamedTuple):
    chunk_id: str
    score: float
    origin: Origin = Origin.VECTOR


class VectorIndex:
    """Exact flat cosine index over unit vectors."""

    def __init__(self, dim: int):
        if dim < 1:
            raise InvalidConfig(f"Index dimension must be >= 1, received {dim}")
        self.dim = dim
        self._entries: List[Tuple[str, EmbeddingVector]] = []
        self._id_map: Dict[str, int] = {}
        self._matrix: Optional[np.ndarray] = None

    def __len__(self):
        return len(self._entries)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._id_map

    def __eq__(self, other):
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return self.dim == other.dim and self._entries == other._entries

    @property
    def entries(self) -> List[Tuple[str, EmbeddingVector]]:
        return list(self._entries)

    def ids(self) -> List[str]:
        return [chunk_id for chunk_id, _ in self._entries]

    def get(self, chunk_id: str) -> Optional[EmbeddingVector]:
        pos = self._id_map.get(chunk_id)
        return None if pos is None else self._entries[pos][1]

    def _check(self, v: EmbeddingVector):
        if v.dim != self.dim:
            raise DimensionMismatch(self.dim, v.dim)

    def upsert(self, chunk_id: str, v: EmbeddingVector):
        self._check(v)
        if not v.is_unit(UNIT_NORM_TOL):
            raise ValueError(f"Vector for {chunk_id} is not unit norm ({v.norm})")
        pos = self._id_map.get(chunk_id)
        if pos is None:
            self._id_map[chunk_id] = len(self._entries)
            self._entries.append((chunk_id, v))
        else:
            self._entries[pos] = (chunk_id, v)
        self._matrix = None

    def remove(self, chunk_ids) -> int:
        drop = {cid for cid in chunk_ids if cid in self._id_map}
        if not drop:
            return 0
        self._entries = [entry for entry in self._entries if entry[0] not in drop]
        self._id_map = {cid: pos for pos, (cid, _) in enumerate(self._entries)}
        self._matrix = None
        return len(drop)

    def _get_matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.stack(
                [v.values.astype(np.float64) for _, v in self._entries]
            )
        return self._matrix

    def search(self, qv: EmbeddingVector, k: int) -> List[ScoredHit]:
        """Exact top ``k`` by cosine, ties broken by ascending chunk id."""
        if k < 1:
            raise InvalidConfig(f"k must be >= 1, received {k}")
        self._check(qv)
        if not self._entries:
            return []
        scores = (self._get_matrix() @ qv.values.astype(np.float64)).tolist()
        ids = self.ids()
        order = sorted(range(len(ids)), key=lambda pos: (-scores[pos], ids[pos]))
        return [ScoredHit(ids[pos], scores[pos], Origin.VECTOR) for pos in order[:k]]

    def copy(self) -> "VectorIndex":
        other = VectorIndex(self.dim)
        other._entries = list(self._entries)
        other._id_map = dict(self._id_map)
        return other

    def to_bytes(self) -> bytes:
        parts = [_HEADER.pack(INDEX_MAGIC, INDEX_VERSION, self.dim, len(self._entries))]
        for chunk_id, v in self._entries:
            raw_id = chunk_id.encode("utf-8")
            parts.append(_ID_LEN.pack(len(raw_id)))
            parts.append(raw_id)
            parts.append(v.values.astype("<f4").tobytes())
        payload = b"".join(parts)
        return payload + _CRC.pack(zlib.crc32(payload) & 0xFFFFFFFF)

    @classmethod
    def from_bytes(cls, data: bytes, source: str = "<bytes>") -> "VectorIndex":
        if len(data) < _HEADER.size + _CRC.size:
            raise ChecksumMismatch(f"{source}: vector index file is truncated")
        payload, (crc,) = data[: -_CRC.size], _CRC.unpack(data[-_CRC.size :])
        magic, version, dim, count = _HEADER.unpack_from(payload, 0)
        if magic != INDEX_MAGIC:
            raise VersionMismatch(f"{source}: not a vector index file ({magic!r})")
        if version != INDEX_VERSION:
            raise VersionMismatch(
                f"{source}: index version {version} is not supported "
                f"(expected {INDEX_VERSION})"
            )
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise ChecksumMismatch(f"{source}: vector index checksum does not match")
        index = cls(dim)
        offset = _HEADER.size
        vec_size = 4 * dim
        try:
            for _ in range(count):
                (id_len,) = _ID_LEN.unpack_from(payload, offset)
                offset += _ID_LEN.size
                chunk_id = payload[offset : offset + id_len].decode("utf-8")
                offset += id_len
                raw = payload[offset : offset + vec_size]
                if len(raw) != vec_size:
                    raise ValueError("short vector")
                offset += vec_size
                index._id_map[chunk_id] = len(index._entries)
                index._entries.append(
                    (chunk_id, EmbeddingVector(np.frombuffer(raw, dtype="<f4")))
                )
        except (struct.error, ValueError, UnicodeDecodeError) as err:
            raise ChecksumMismatch(f"{source}: corrupted vector index ({err})")
        if offset != len(payload):
            raise ChecksumMismatch(f"{source}: trailing bytes in vector index")
        return index

    def save(self, path: Union[Path, str]):
        atomic_write(path, self.to_bytes())
        log.debug(f"Saved {len(self)} vectors to {path}")

    @classmethod
    def load(cls, path: Union[Path, str]) -> "VectorIndex":
        with open(path, "rb") as index_file:
            return cls.from_bytes(index_file.read(), source=str(path))
