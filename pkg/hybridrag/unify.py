import logging
import re
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, List, Sequence, Tuple

from hybridrag.exceptions import InvalidConfig
from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.llm.types import EmbeddingVector
from hybridrag.store.graph_store import LinearizedText
from hybridrag.store.vector_index import Origin, ScoredHit
from hybridrag.utils import normalize_text

log = logging.getLogger(__name__)

REDUNDANCY_SYSTEM_PROMPT = (
    "The user message lists numbered passages. Find the passages that repeat"
    " information already given by a passage with a lower number. Reply NONE"
    " when there are none, otherwise reply only with their numbers separated"
    " by commas."
)
RE_REDUNDANT = re.compile(r"^\s*(NONE|\d+(?:\s*,\s*\d+)*)\s*\.?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class EvidenceCandidate:
    text: str
    vector: EmbeddingVector
    score: float
    origin: Origin
    provenance: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("Evidence text must not be empty")
        object.__setattr__(self, "origin", Origin(self.origin))
        object.__setattr__(self, "provenance", frozenset(self.provenance))

    def to_dict(self) -> Dict:
        return {
            "text": self.text,
            "score": self.score,
            "origin": self.origin.value,
            "provenance": sorted(self.provenance),
        }


@dataclass(frozen=True)
class UnifiedContext:
    items: Tuple[EvidenceCandidate, ...]
    k: int

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self):
        return len(self.items)

    def texts(self) -> List[str]:
        return [item.text for item in self.items]

    def to_dict(self) -> Dict:
        return {"k": self.k, "items": [item.to_dict() for item in self.items]}


def candidate_key(candidate: EvidenceCandidate):
    return (
        -candidate.score,
        0 if candidate.origin is Origin.VECTOR else 1,
        candidate.text,
    )


def hits_to_candidates(hits: Sequence[ScoredHit], stores) -> List[EvidenceCandidate]:
    return [
        EvidenceCandidate(
            text=stores.chunks[hit.chunk_id].text,
            vector=stores.vectors.get(hit.chunk_id),
            score=hit.score,
            origin=Origin.VECTOR,
            provenance=frozenset([hit.chunk_id]),
        )
        for hit in hits
    ]


def get_top_2k(
    qv: EmbeddingVector, candidates: Sequence[EvidenceCandidate], k: int
) -> List[EvidenceCandidate]:
    """Rescore against ``qv`` and keep the best ``2k``.

    Ties go to vector candidates, then to the lexicographically smaller text.
    """
    if k < 1:
        raise InvalidConfig(f"k must be >= 1, received {k}")
    rescored = [replace(c, score=qv.cosine(c.vector)) for c in candidates]
    return sorted(rescored, key=candidate_key)[: 2 * k]


def text_dedup(
    items: Sequence[EvidenceCandidate], sim_threshold: float = 0.95
) -> List[EvidenceCandidate]:
    """Drop exact duplicates of the normalized text, then every item whose
    cosine to an item already kept reaches ``sim_threshold``. ``items`` must be
    sorted by score so the first of each duplicate group survives."""
    if not 0 < sim_threshold <= 1:
        raise InvalidConfig(f"sim_threshold must be in (0, 1], received {sim_threshold}")
    seen = set()
    distinct = []
    for item in items:
        key = normalize_text(item.text)
        if key not in seen:
            seen.add(key)
            distinct.append(item)
    kept: List[EvidenceCandidate] = []
    for item in distinct:
        if all(item.vector.cosine(other.vector) < sim_threshold for other in kept):
            kept.append(item)
    return kept


def redundancy_prompt(items: Sequence[EvidenceCandidate]) -> Tuple[str, str]:
    user = "\n".join(f"[{pos}] {item.text}" for pos, item in enumerate(items, start=1))
    return REDUNDANCY_SYSTEM_PROMPT, user


def llm_dedup(
    items: List[EvidenceCandidate], gateway: AbstractGateway
) -> List[EvidenceCandidate]:
    """Let the model flag redundant items. Anything but ``NONE`` or a list of
    numbers leaves ``items`` untouched."""
    if len(items) < 2:
        return items
    raw = gateway.ask(*redundancy_prompt(items))
    match = RE_REDUNDANT.match(raw)
    if not match:
        log.debug(f"Ignoring redundancy answer {raw[:60]!r}")
        return items
    if match.group(1).upper() == "NONE":
        return items
    drop = {int(num) for num in re.findall(r"\d+", match.group(1))}
    return [item for pos, item in enumerate(items, start=1) if pos not in drop]


def unify(
    qv: EmbeddingVector,
    vector_hits: Sequence[EvidenceCandidate],
    graph_texts: Sequence[LinearizedText],
    k: int,
    gateway: AbstractGateway,
    sim_threshold: float = 0.95,
    use_llm_dedup: bool = False,
) -> UnifiedContext:
    """Merge vector hits and embedded graph texts into the top ``k`` context.

    :param qv: query vector
    :param vector_hits: candidates from the vector index
    :param graph_texts: linearized subgraph texts
    :param k: context size
    :param gateway: embeds the graph texts and answers the optional
        redundancy question
    :return: deduplicated context ordered by score
    """
    graph_candidates = []
    if graph_texts:
        vectors = gateway.embed([text.text for text in graph_texts])
        graph_candidates = [
            EvidenceCandidate(text.text, vector, 0.0, Origin.GRAPH, text.provenance)
            for text, vector in zip(graph_texts, vectors)
        ]
    pool = get_top_2k(qv, [*vector_hits, *graph_candidates], k)
    survivors = text_dedup(pool, sim_threshold)
    if use_llm_dedup:
        survivors = llm_dedup(survivors, gateway)
    return UnifiedContext(tuple(survivors[:k]), k)
