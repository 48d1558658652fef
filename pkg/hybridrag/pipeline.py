import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from hybridrag.base.aliases import AliasStore
from hybridrag.base.facts import FactLookupClient
from hybridrag.base.web import WebSearchClient
from hybridrag.config import PipelineConfig
from hybridrag.exceptions import StageError, UnsupportedStrategy
from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.llm.types import CompletionRequest
from hybridrag.query.augment import AugmentedQuery, RawQuery, augment
from hybridrag.query.router import RouteDecision, RouteSource, route
from hybridrag.store.documents import Document, DocumentSource
from hybridrag.store.graph_store import linearize
from hybridrag.store.ingest import ingest_documents
from hybridrag.store.stores import Stores
from hybridrag.unify import UnifiedContext, hits_to_candidates, unify
from hybridrag.utils import digest, get_lexicon

log = logging.getLogger(__name__)

ANSWER_SYSTEM_PROMPT = (
    "Answer the question using only the numbered evidence below. Cite the"
    " evidence numbers you rely on. When the evidence does not contain the"
    " answer, say that you do not know."
)
NO_EVIDENCE_MARKER = "NO EVIDENCE FOUND"


@dataclass(frozen=True)
class StageRecord:
    stage: str
    duration_ms: float
    input_digest: str
    output_digest: str

    def to_dict(self, timings: bool = True) -> Dict:
        result = {
            "stage": self.stage,
            "input_digest": self.input_digest,
            "output_digest": self.output_digest,
        }
        if timings:
            result["duration_ms"] = round(self.duration_ms, 3)
        return result


@dataclass(frozen=True)
class Answer:
    text: str
    context: UnifiedContext
    route: RouteDecision
    query: AugmentedQuery
    prompt: CompletionRequest
    trace: Tuple[StageRecord, ...] = ()

    def to_dict(self, timings: bool = True) -> Dict:
        return {
            "text": self.text,
            "query": self.query.to_dict(),
            "route": self.route.to_dict(),
            "context": self.context.to_dict(),
            "prompt_digest": digest(self.prompt.as_dict()),
            "trace": [record.to_dict(timings) for record in self.trace],
        }


@dataclass(frozen=True)
class Retrieval:
    query: AugmentedQuery
    route: RouteDecision
    context: UnifiedContext
    trace: Tuple[StageRecord, ...] = ()


@dataclass
class Clients:
    web: WebSearchClient
    facts: FactLookupClient
    aliases: AliasStore = field(default_factory=AliasStore)
    acronyms: Optional[Dict[str, str]] = None


def build_prompt(
    aq: AugmentedQuery, ctx: UnifiedContext, cfg: Optional[PipelineConfig] = None
) -> CompletionRequest:
    """Generation request: numbered evidence in context order, then the
    augmented query."""
    cfg = cfg or PipelineConfig()
    if ctx.items:
        evidence = "\n".join(
            f"[{pos}] ({item.origin.value}) {item.text}"
            for pos, item in enumerate(ctx.items, start=1)
        )
    else:
        evidence = NO_EVIDENCE_MARKER
    user = f"Evidence:\n{evidence}\n\nQuestion: {aq.text}"
    return CompletionRequest(
        system_prompt=ANSWER_SYSTEM_PROMPT,
        user_prompt=user,
        max_tokens=cfg.max_tokens,
        temperature=cfg.temperature,
    )


class _StageRunner:
    def __init__(self):
        self.records: List[StageRecord] = []

    def run(self, stage: str, func: Callable, payload, describe: Callable = None):
        start = time.perf_counter()
        try:
            result = func()
        except StageError:
            raise
        except Exception as err:
            log.debug(f"Stage {stage} failed: {err!r}")
            raise StageError(stage, err) from err
        self.records.append(
            StageRecord(
                stage=stage,
                duration_ms=(time.perf_counter() - start) * 1000,
                input_digest=digest(payload),
                output_digest=digest(describe(result) if describe else result),
            )
        )
        return result


def _describe_candidates(candidates) -> List:
    return [[c.text, c.score, c.origin.value] for c in candidates]


class Pipeline:
    """Augment, route, retrieve from the vector index and the graph, unify and
    generate. ``stores`` is read through a snapshot, so concurrent ingestion
    never shows a half built state to a running question."""

    def __init__(
        self,
        cfg: PipelineConfig,
        stores: Stores,
        clients: Clients,
        gateway: AbstractGateway,
    ):
        self.cfg = cfg
        self.stores = stores
        self.clients = clients
        self.gateway = gateway
        if clients.acronyms is None:
            clients.acronyms = dict(get_lexicon()["acronyms"])

    def _check_strategy(self):
        if self.cfg.prompt_strategy != "direct":
            raise UnsupportedStrategy(
                f"Prompt strategy {self.cfg.prompt_strategy} is not implemented."
            )

    def answer(self, q: RawQuery) -> Answer:
        self._check_strategy()
        runner = _StageRunner()
        retrieval = self._retrieve(q, runner)
        prompt = runner.run(
            "build_prompt",
            lambda: build_prompt(retrieval.query, retrieval.context, self.cfg),
            [retrieval.query.text, retrieval.context.texts()],
            lambda req: req.as_dict(),
        )
        text = runner.run(
            "generate", lambda: self.gateway.complete(prompt), prompt.as_dict()
        )
        return Answer(
            text=text,
            context=retrieval.context,
            route=retrieval.route,
            query=retrieval.query,
            prompt=prompt,
            trace=tuple(runner.records) if self.cfg.trace else (),
        )

    def retrieve(self, q: RawQuery) -> Retrieval:
        """Everything :meth:`answer` does before generation."""
        return self._retrieve(q, _StageRunner())

    def _retrieve(self, q: RawQuery, runner: _StageRunner) -> Retrieval:
        view = self.stores.snapshot()
        facts = FactLookupClient(
            view, self.clients.facts.title_aliases, self.clients.facts.remote
        )
        aq = runner.run(
            "augment",
            lambda: augment(
                q, self.gateway, self.clients.aliases, self.clients.acronyms, self.cfg
            ),
            q.text,
            lambda result: result.to_dict(),
        )
        decision = runner.run(
            "route",
            lambda: route(aq, facts, self.gateway),
            aq.to_dict(),
            lambda result: result.to_dict(),
        )
        evidence = runner.run(
            "evidence",
            lambda: self._evidence_stores(aq, decision, view),
            decision.to_dict(),
            lambda result: result.stats(),
        )
        context = self.retrieve_context(aq, evidence, runner)
        return Retrieval(aq, decision, context, tuple(runner.records))

    def _evidence_stores(
        self, aq: AugmentedQuery, decision: RouteDecision, view: Stores
    ) -> Stores:
        if decision.source is RouteSource.LOCAL_CORPUS:
            return view
        if decision.source is RouteSource.LOCAL_API_FETCH:
            documents = list(decision.fetched)
            stores = view.copy()
        else:
            results = self.clients.web.search(aq.text, self.cfg.web_max_results)
            documents = [
                Document(
                    doc_id=f"web:{pos}",
                    title=result.title,
                    body=result.snippet,
                    source=DocumentSource.WEB_SNIPPET,
                )
                for pos, result in enumerate(results)
                if result.snippet.strip()
            ]
            log.info(f"Web search returned {len(documents)} usable snippets")
            stores = Stores.empty(view.dim)
        if documents:
            ingest_documents(
                documents,
                stores,
                self.gateway,
                self.clients.aliases,
                self.cfg,
                progress=False,
            )
        return stores

    def retrieve_context(
        self,
        aq: AugmentedQuery,
        stores: Stores,
        runner: Optional[_StageRunner] = None,
    ) -> UnifiedContext:
        """Vector search and graph expansion over ``stores``, unified into
        the top ``k`` context. The branches run concurrently when
        ``cfg.parallel`` is set; records are appended in a fixed order."""
        runner = runner or _StageRunner()
        qv = runner.run(
            "embed_query",
            lambda: self.gateway.embed_one(aq.text),
            aq.text,
            lambda vector: vector.tolist(),
        )
        mode = self.cfg.retrieval_mode

        def vector_branch():
            if mode == "graph":
                return []
            return hits_to_candidates(stores.vectors.search(qv, self.cfg.k), stores)

        def graph_branch():
            if mode == "vector":
                return []
            subgraph = stores.graph.query_subgraph(aq.entities, self.cfg.hops)
            return linearize(subgraph, self.gateway)

        branch_runners = (_StageRunner(), _StageRunner())
        calls = (
            lambda: branch_runners[0].run(
                "vector_search", vector_branch, [aq.text, mode], _describe_candidates
            ),
            lambda: branch_runners[1].run(
                "graph_search",
                graph_branch,
                [[e.canonical for e in aq.entities], mode],
                lambda texts: [[t.text, sorted(t.provenance)] for t in texts],
            ),
        )
        if self.cfg.parallel:
            with ThreadPoolExecutor(max_workers=2) as executor:
                futures = [executor.submit(call) for call in calls]
                vector_hits, graph_texts = [future.result() for future in futures]
        else:
            vector_hits, graph_texts = [call() for call in calls]
        for branch in branch_runners:
            runner.records.extend(branch.records)

        return runner.run(
            "unify",
            lambda: unify(
                qv,
                vector_hits,
                graph_texts,
                self.cfg.k,
                self.gateway,
                self.cfg.sim_threshold,
                self.cfg.llm_dedup,
            ),
            [_describe_candidates(vector_hits), [t.text for t in graph_texts]],
            lambda ctx: _describe_candidates(ctx.items),
        )


def answer(
    q: RawQuery,
    cfg: PipelineConfig,
    stores: Stores,
    clients: Clients,
    gateway: AbstractGateway,
) -> Answer:
    return Pipeline(cfg, stores, clients, gateway).answer(q)
