import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple

from hybridrag.base.facts import FactLookupClient
from hybridrag.exceptions import UnparseableLabel
from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.query.augment import AugmentedQuery
from hybridrag.store.documents import Document, DocumentSource

log = logging.getLogger(__name__)

ROUTER_SYSTEM_PROMPT = (
    "Classify the user query. Answer TEMPORAL when it depends on recent or time"
    " sensitive information and FACTUAL otherwise. Reply with that single word."
)


class RouteLabel(str, Enum):
    TEMPORAL = "TEMPORAL"
    FACTUAL = "FACTUAL"


class RouteSource(str, Enum):
    WEB_SEARCH = "WebSearch"
    LOCAL_CORPUS = "LocalCorpus"
    LOCAL_API_FETCH = "LocalAPIFetch"


class DecidedBy(str, Enum):
    RULE = "rule"
    LLM = "llm"


@dataclass(frozen=True)
class RouteDecision:
    label: RouteLabel
    source: RouteSource
    reason: str
    decided_by: DecidedBy
    attempts: Tuple[str, ...] = ()
    fetched: Tuple[Document, ...] = ()

    def __post_init__(self):
        if self.label is RouteLabel.TEMPORAL and self.source is not RouteSource.WEB_SEARCH:
            raise ValueError("Temporal queries are always sent to web search")

    def to_dict(self) -> Dict:
        return {
            "label": self.label.value,
            "source": self.source.value,
            "reason": self.reason,
            "decided_by": self.decided_by.value,
            "attempts": list(self.attempts),
            "fetched": [doc.doc_id for doc in self.fetched],
        }


def classify_prompt(aq: AugmentedQuery) -> Tuple[str, str]:
    return ROUTER_SYSTEM_PROMPT, aq.text


def parse_label(raw: str) -> RouteLabel:
    try:
        return RouteLabel(raw.strip().upper())
    except ValueError:
        raise UnparseableLabel(raw)


def classify(aq: AugmentedQuery, gateway: AbstractGateway) -> Tuple[RouteLabel, DecidedBy]:
    """Cue rules first; the gateway is asked only when no cue is set."""
    if aq.cues.temporal:
        return RouteLabel.TEMPORAL, DecidedBy.RULE
    if aq.cues.factual:
        return RouteLabel.FACTUAL, DecidedBy.RULE
    return parse_label(gateway.ask(*classify_prompt(aq), max_tokens=5)), DecidedBy.LLM


def route(
    aq: AugmentedQuery, facts: FactLookupClient, gateway: AbstractGateway
) -> RouteDecision:
    """Pick the evidence source of ``aq``.

    Factual queries try the local corpus for every entity, then the remote
    fact source, then web search. Every attempt is recorded in order.
    """
    try:
        label, decided_by = classify(aq, gateway)
    except UnparseableLabel as err:
        log.warning(f"{err}. Routing query {aq.original.id} as FACTUAL.")
        label, decided_by = RouteLabel.FACTUAL, DecidedBy.RULE

    if label is RouteLabel.TEMPORAL:
        decision = RouteDecision(
            label, RouteSource.WEB_SEARCH, "time sensitive query", decided_by
        )
    elif not aq.entities:
        log.warning(f"Factual query {aq.original.id} has no entities, using web search")
        decision = RouteDecision(label, RouteSource.WEB_SEARCH, "no entities", decided_by)
    else:
        decision = _route_factual(aq, facts, label, decided_by)
    log.info(
        f"Route {aq.original.id}: {decision.label.value} -> {decision.source.value}"
        f" ({decision.reason})"
    )
    return decision


def _route_factual(aq, facts: FactLookupClient, label, decided_by) -> RouteDecision:
    attempts = []
    for entity in aq.entities:
        attempts.append(f"lookup:{entity.canonical}")
        if facts.lookup(entity.canonical):
            return RouteDecision(
                label,
                RouteSource.LOCAL_CORPUS,
                f"local hit: {entity.canonical}",
                decided_by,
                tuple(attempts),
            )
    fetched = []
    for entity in aq.entities:
        attempts.append(f"fetch:{entity.canonical}")
        text = facts.fetch_remote(entity.canonical)
        if text:
            fetched.append(
                Document(
                    doc_id=f"remote:{entity.canonical}",
                    title=entity.canonical,
                    body=text,
                    source=DocumentSource.REMOTE_FETCH,
                )
            )
    if fetched:
        return RouteDecision(
            label,
            RouteSource.LOCAL_API_FETCH,
            "remote fetch: " + ", ".join(doc.title for doc in fetched),
            decided_by,
            tuple(attempts),
            tuple(fetched),
        )
    return RouteDecision(
        label, RouteSource.WEB_SEARCH, "local miss", decided_by, tuple(attempts)
    )
