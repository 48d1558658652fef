import json
import logging
import re
import zlib
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Set, Tuple, Union

from hybridrag.base.aliases import ENTITY_KINDS, AliasStore
from hybridrag.exceptions import ChecksumMismatch, InvalidConfig, VersionMismatch
from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.store.documents import Chunk
from hybridrag.utils import atomic_write, get_lexicon

log = logging.getLogger(__name__)

GRAPH_FORMAT = "hybridrag-graph"
GRAPH_VERSION = 1

TRIPLES_SYSTEM_PROMPT = (
    "Extract the entity relationships stated in the user text. Respond only with"
    ' a JSON list of objects with the keys "subject", "relation", "object" and'
    ' optionally "subject_kind" and "object_kind" (one of person, organization,'
    " location, date, concept, other). Use short snake_case relations such as"
    " born_in, is_a, founded, part_of. Respond with [] when there is nothing to"
    " extract."
)
LINEARIZE_SYSTEM_PROMPT = (
    "Rewrite the following knowledge graph facts as fluent English sentences."
    " Keep every entity name verbatim and do not add facts."
)

CAPITALIZED_SPAN = r"[A-Z][\w\-]*(?:\s+(?:of\s+|de\s+|von\s+|van\s+)?[A-Z][\w\-]*)*"
RE_BORN_IN = re.compile(
    rf"(?P<subject>{CAPITALIZED_SPAN})\s+was\s+born\s+in\s+(?P<object>{CAPITALIZED_SPAN})"
)
RE_IS_A = re.compile(
    rf"(?P<subject>{CAPITALIZED_SPAN})\s+(?:is|was)\s+an?\s+(?P<object>[^.,;:!?\n]+)"
)
IS_A_MAX_WORDS = 5
IS_A_STOP_WORDS = frozenset(
    "who that which and with in of from for at by whose where known on to as".split()
)


class Triple(NamedTuple):
    subject: str
    relation: str
    object: str
    subject_kind: str = "other"
    object_kind: str = "other"

    @property
    def spo(self) -> Tuple[str, str, str]:
        return self.subject, self.relation, self.object


@dataclass(frozen=True)
class Node:
    node_id: str
    label: str
    kind: str
    provenance: FrozenSet[str]

    def to_dict(self) -> Dict:
        return {
            "type": "node",
            "node_id": self.node_id,
            "label": self.label,
            "kind": self.kind,
            "provenance": sorted(self.provenance),
        }


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    relation: str
    provenance: FrozenSet[str]

    @property
    def key(self) -> Tuple[str, str, str]:
        return self.src, self.dst, self.relation

    def to_dict(self) -> Dict:
        return {
            "type": "edge",
            "src": self.src,
            "dst": self.dst,
            "relation": self.relation,
            "provenance": sorted(self.provenance),
        }


@dataclass
class Subgraph:
    nodes: List[Node] = field(default_factory=list)
    edges: List[Edge] = field(default_factory=list)

    def __bool__(self):
        return bool(self.nodes)


class LinearizedText(NamedTuple):
    text: str
    provenance: FrozenSet[str]
    node_id: str


@dataclass
class UpsertReport:
    nodes_added: int = 0
    edges_added: int = 0
    rejected_self_loops: int = 0


def node_id_for(label: str) -> str:
    return " ".join(label.split()).casefold()


def normalize_relation(relation: str) -> str:
    return "_".join(relation.strip().lower().split())


class GraphStore:
    """In memory entity graph with undirected traversal."""

    def __init__(self):
        self._nodes: Dict[str, Node] = {}
        self._edges: Dict[Tuple[str, str, str], Edge] = {}
        self._adjacency: Dict[str, Set[str]] = {}

    def __eq__(self, other):
        if not isinstance(other, GraphStore):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def nodes(self) -> List[Node]:
        return [self._nodes[key] for key in sorted(self._nodes)]

    def edges(self) -> List[Edge]:
        return [self._edges[key] for key in sorted(self._edges)]

    def get_node(self, label: str) -> Optional[Node]:
        return self._nodes.get(node_id_for(label))

    def copy(self) -> "GraphStore":
        other = GraphStore()
        other._nodes = dict(self._nodes)
        other._edges = dict(self._edges)
        other._adjacency = {key: set(value) for key, value in self._adjacency.items()}
        return other

    def _merge_node(self, label: str, kind: str, chunk_id: str) -> bool:
        node_id = node_id_for(label)
        kind = kind if kind in ENTITY_KINDS else "other"
        current = self._nodes.get(node_id)
        if current is None:
            self._nodes[node_id] = Node(node_id, label.strip(), kind, frozenset([chunk_id]))
            self._adjacency.setdefault(node_id, set())
            return True
        if current.kind == "other" and kind != "other":
            current = Node(current.node_id, current.label, kind, current.provenance)
        self._nodes[node_id] = Node(
            current.node_id,
            current.label,
            current.kind,
            current.provenance | {chunk_id},
        )
        return False

    def upsert_triples(self, triples: Iterable[Triple], chunk_id: str) -> UpsertReport:
        """Merge triples found in ``chunk_id``.

        Nodes are keyed by the case folded label and edges by
        ``(src, dst, relation)``; provenance is unioned on repeats. Self loops
        are rejected and counted.
        """
        report = UpsertReport()
        for triple in triples:
            subject, obj = triple.subject.strip(), triple.object.strip()
            relation = normalize_relation(triple.relation)
            if not subject or not obj or not relation:
                continue
            src, dst = node_id_for(subject), node_id_for(obj)
            if src == dst:
                log.warning(f"Rejected self loop {subject!r} {relation} in {chunk_id}")
                report.rejected_self_loops += 1
                continue
            report.nodes_added += self._merge_node(subject, triple.subject_kind, chunk_id)
            report.nodes_added += self._merge_node(obj, triple.object_kind, chunk_id)
            key = (src, dst, relation)
            current = self._edges.get(key)
            if current is None:
                self._edges[key] = Edge(src, dst, relation, frozenset([chunk_id]))
                report.edges_added += 1
            else:
                self._edges[key] = Edge(
                    src, dst, relation, current.provenance | {chunk_id}
                )
            self._adjacency[src].add(dst)
            self._adjacency[dst].add(src)
        return report

    def remove_chunks(self, chunk_ids: Iterable[str]) -> int:
        """Drop ``chunk_ids`` from every provenance set, deleting what is left
        without provenance. Returns the number of removed nodes and edges."""
        drop = set(chunk_ids)
        if not drop:
            return 0
        removed = 0
        for key, edge in list(self._edges.items()):
            if edge.provenance & drop:
                remaining = edge.provenance - drop
                if remaining:
                    self._edges[key] = Edge(edge.src, edge.dst, edge.relation, remaining)
                else:
                    del self._edges[key]
                    removed += 1
        for node_id, node in list(self._nodes.items()):
            if node.provenance & drop:
                remaining = node.provenance - drop
                if remaining:
                    self._nodes[node_id] = Node(
                        node.node_id, node.label, node.kind, remaining
                    )
                else:
                    del self._nodes[node_id]
                    removed += 1
        self._edges = {
            key: edge
            for key, edge in self._edges.items()
            if edge.src in self._nodes and edge.dst in self._nodes
        }
        self._rebuild_adjacency()
        return removed

    def _rebuild_adjacency(self):
        self._adjacency = {node_id: set() for node_id in self._nodes}
        for src, dst, _ in self._edges:
            self._adjacency[src].add(dst)
            self._adjacency[dst].add(src)

    def query_subgraph(self, entities, hops: int = 1) -> Subgraph:
        """Nodes within ``hops`` undirected steps of the entities plus every
        edge between them, ordered by node id and edge key.

        :param entities: entities (anything with ``canonical``) or labels
        :param hops: 1 or 2
        """
        if hops not in (1, 2):
            raise InvalidConfig(f"hops must be 1 or 2, received {hops}")
        seeds = []
        for entity in entities:
            label = getattr(entity, "canonical", entity)
            node_id = node_id_for(label)
            if node_id in self._nodes and node_id not in seeds:
                seeds.append(node_id)
        depth = {node_id: 0 for node_id in seeds}
        queue = deque(seeds)
        while queue:
            current = queue.popleft()
            if depth[current] == hops:
                continue
            for neighbor in sorted(self._adjacency.get(current, ())):
                if neighbor not in depth:
                    depth[neighbor] = depth[current] + 1
                    queue.append(neighbor)
        nodes = [self._nodes[node_id] for node_id in sorted(depth)]
        edges = [
            self._edges[key]
            for key in sorted(self._edges)
            if key[0] in depth and key[1] in depth
        ]
        return Subgraph(nodes, edges)

    def to_jsonl(self) -> str:
        body = "".join(
            json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False) + "\n"
            for record in [*self.nodes(), *self.edges()]
        )
        header = {
            "format": GRAPH_FORMAT,
            "version": GRAPH_VERSION,
            "nodes": self.node_count,
            "edges": self.edge_count,
            "crc32": zlib.crc32(body.encode("utf-8")) & 0xFFFFFFFF,
        }
        return json.dumps(header, sort_keys=True) + "\n" + body

    @classmethod
    def from_jsonl(cls, content: str, source: str = "<graph>") -> "GraphStore":
        header_line, _, body = content.partition("\n")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError:
            raise ChecksumMismatch(f"{source}: unreadable graph header")
        if not isinstance(header, dict) or header.get("format") != GRAPH_FORMAT:
            raise VersionMismatch(f"{source}: not a graph store file")
        if header.get("version") != GRAPH_VERSION:
            raise VersionMismatch(
                f"{source}: graph version {header.get('version')} is not supported"
            )
        if zlib.crc32(body.encode("utf-8")) & 0xFFFFFFFF != header.get("crc32"):
            raise ChecksumMismatch(f"{source}: graph checksum does not match")
        graph = cls()
        try:
            # records end in "\n" only; labels may hold other line separators
            for line in body.split("\n"):
                if not line:
                    continue
                record = json.loads(line)
                if record["type"] == "node":
                    graph._nodes[record["node_id"]] = Node(
                        record["node_id"],
                        record["label"],
                        record["kind"],
                        frozenset(record["provenance"]),
                    )
                else:
                    edge = Edge(
                        record["src"],
                        record["dst"],
                        record["relation"],
                        frozenset(record["provenance"]),
                    )
                    graph._edges[edge.key] = edge
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise ChecksumMismatch(f"{source}: corrupted graph record ({err})")
        if graph.node_count != header.get("nodes") or graph.edge_count != header.get(
            "edges"
        ):
            raise ChecksumMismatch(f"{source}: graph counts do not match its header")
        graph._rebuild_adjacency()
        return graph

    def save(self, path: Union[Path, str]):
        atomic_write(path, self.to_jsonl())
        log.debug(f"Saved graph with {self.node_count} nodes to {path}")

    @classmethod
    def load(cls, path: Union[Path, str]) -> "GraphStore":
        with open(path, "r", encoding="utf_8") as graph_file:
            return cls.from_jsonl(graph_file.read(), source=str(path))


@lru_cache(maxsize=1)
def _sentence_stopwords() -> FrozenSet[str]:
    return frozenset(get_lexicon()["sentence_initial_stopwords"])


def _strip_leading_stopwords(span: str) -> str:
    words = span.split()
    while words and words[0] in _sentence_stopwords():
        words.pop(0)
    return " ".join(words)


def _canonical(name: str, aliases: AliasStore) -> str:
    return aliases.canonicalize(name) or aliases.snap(name) or name.strip()


def _span_canonical(span: str, aliases: AliasStore) -> str:
    # an alias closing the span names the subject ("physicist Albert Einstein")
    mentions = aliases.find_mentions(span)
    if mentions and mentions[-1].end == len(span):
        return mentions[-1].canonical
    return _canonical(span, aliases)


def _kind(label: str, aliases: AliasStore, default: str) -> str:
    return aliases.kind_of(label) or default


def rule_triples(text: str, aliases: AliasStore) -> List[Triple]:
    """Deterministic triples: ``X was born in Y``, ``X is a Y`` and a
    ``related_to`` edge for every pair of alias entities co-occurring in the
    text that no pattern already connects."""
    triples: List[Triple] = []
    linked: Set[FrozenSet[str]] = set()

    def add(subject, relation, obj, subject_kind, object_kind):
        if not subject.strip() or not obj.strip():
            return
        subject, obj = _span_canonical(subject, aliases), obj.strip()
        triple = Triple(
            subject,
            relation,
            obj,
            _kind(subject, aliases, subject_kind),
            _kind(obj, aliases, object_kind),
        )
        if triple not in triples:
            triples.append(triple)
            linked.add(frozenset((node_id_for(subject), node_id_for(obj))))

    for match in RE_BORN_IN.finditer(text):
        subject = _strip_leading_stopwords(match.group("subject"))
        add(subject, "born_in", _canonical(match.group("object"), aliases), "person", "location")
    for match in RE_IS_A.finditer(text):
        subject = _strip_leading_stopwords(match.group("subject"))
        words = []
        for word in match.group("object").split():
            if word.lower() in IS_A_STOP_WORDS or len(words) == IS_A_MAX_WORDS:
                break
            words.append(word)
        if words:
            add(subject, "is_a", " ".join(words), "other", "concept")

    mentioned: List[str] = []
    for mention in aliases.find_mentions(text):
        if mention.canonical not in mentioned:
            mentioned.append(mention.canonical)
    for pos, first in enumerate(mentioned):
        for second in mentioned[pos + 1 :]:
            if frozenset((node_id_for(first), node_id_for(second))) in linked:
                continue
            triples.append(
                Triple(
                    first,
                    "related_to",
                    second,
                    aliases.kind_of(first) or "other",
                    aliases.kind_of(second) or "other",
                )
            )
    return triples


def parse_triples(raw: str) -> Optional[List[Triple]]:
    """Triples from an LLM answer, ``None`` when it is not a JSON triple list."""
    start, end = raw.find("["), raw.rfind("]")
    if start == -1 or end < start:
        return None
    try:
        data = json.loads(raw[start : end + 1])
    except json.JSONDecodeError:
        return None
    if not isinstance(data, list):
        return None
    triples = []
    for item in data:
        if isinstance(item, dict):
            values = [item.get("subject"), item.get("relation"), item.get("object")]
            kinds = [item.get("subject_kind") or "other", item.get("object_kind") or "other"]
        elif isinstance(item, (list, tuple)) and len(item) == 3:
            values, kinds = list(item), ["other", "other"]
        else:
            return None
        if not all(isinstance(value, str) and value.strip() for value in values):
            return None
        triples.append(Triple(*[value.strip() for value in values], *kinds))
    return triples


def extract_triples(
    chunk: Chunk,
    gateway: AbstractGateway,
    aliases: Optional[AliasStore] = None,
) -> List[Triple]:
    """Ask the gateway for the triples of ``chunk``.

    The mock backend falls back to :func:`rule_triples` when its answer is not
    a triple list; for a real backend the chunk is skipped with a warning.
    """
    if not chunk.text.strip():
        return []
    aliases = aliases or AliasStore()
    raw = gateway.ask(TRIPLES_SYSTEM_PROMPT, chunk.text)
    # an echoed chunk is not an answer
    parsed = None if raw.strip() == chunk.text.strip() else parse_triples(raw)
    if parsed is None:
        if gateway.kind == "mock":
            log.debug(f"Rule based triples for {chunk.chunk_id}")
            return rule_triples(chunk.text, aliases)
        log.warning(f"Malformed triple list for {chunk.chunk_id}: {raw[:80]!r}")
        return []
    return [
        Triple(
            _canonical(t.subject, aliases),
            normalize_relation(t.relation),
            _canonical(t.object, aliases),
            t.subject_kind if t.subject_kind in ENTITY_KINDS else "other",
            t.object_kind if t.object_kind in ENTITY_KINDS else "other",
        )
        for t in parsed
    ]


def linearize_template(node: Node, subgraph: Subgraph) -> Tuple[str, FrozenSet[str]]:
    labels = {n.node_id: n.label for n in subgraph.nodes}
    incident = [e for e in subgraph.edges if node.node_id in (e.src, e.dst)]
    if not incident:
        return f"{node.label}.", node.provenance

    def neighbor_label(edge: Edge) -> str:
        return labels[edge.dst if edge.src == node.node_id else edge.src]

    incident.sort(key=lambda e: (neighbor_label(e).casefold(), e.relation, e.src))
    sentences = [f"{labels[e.src]} {e.relation} {labels[e.dst]}." for e in incident]
    provenance = node.provenance.union(*(e.provenance for e in incident))
    return " ".join(sentences), provenance


def linearize(subgraph: Subgraph, gateway: AbstractGateway) -> List[LinearizedText]:
    """One text per node covering every incident edge of the subgraph.

    The template text is sent to the gateway, so the mock echo keeps it as is
    while a real model turns it into fluent sentences.
    """
    result = []
    for node in subgraph.nodes:
        template, provenance = linearize_template(node, subgraph)
        text = gateway.ask(LINEARIZE_SYSTEM_PROMPT, template).strip() or template
        result.append(LinearizedText(text, provenance, node.node_id))
    return result
