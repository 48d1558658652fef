import os

from pytest import fixture

from hybridrag.base.aliases import AliasStore, load_acronyms, load_title_aliases
from hybridrag.base.facts import FactLookupClient, FixtureFactSource
from hybridrag.base.web import FixtureWebSearch
from hybridrag.config import PipelineConfig
from hybridrag.llm.mock import MockGateway
from hybridrag.pipeline import Clients, Pipeline
from hybridrag.store.ingest import ingest_corpus
from hybridrag.store.stores import Stores

EMBED_DIM = 256


@fixture(scope="session")
def data_dir() -> str:
    return os.path.join(os.path.dirname(__file__), "data")


@fixture
def mock_gateway() -> MockGateway:
    return MockGateway(embed_dim=EMBED_DIM)


@fixture
def alias_store(data_dir) -> AliasStore:
    return AliasStore.from_file(os.path.join(data_dir, "aliases.tsv"))


@fixture
def acronyms(data_dir):
    return load_acronyms(os.path.join(data_dir, "acronyms.tsv"))


@fixture
def corpus_stores(data_dir, mock_gateway, alias_store) -> Stores:
    stores = Stores.empty(EMBED_DIM)
    ingest_corpus(
        os.path.join(data_dir, "corpus.jsonl"),
        stores,
        mock_gateway,
        alias_store,
        PipelineConfig(parallel=False),
    )
    return stores


@fixture
def make_clients(data_dir, alias_store, acronyms):
    def _make(stores: Stores, remote: bool = True) -> Clients:
        facts = FactLookupClient(
            stores,
            load_title_aliases(os.path.join(data_dir, "title_aliases.tsv")),
            FixtureFactSource.from_file(os.path.join(data_dir, "facts.jsonl"))
            if remote
            else None,
        )
        return Clients(
            web=FixtureWebSearch.from_file(os.path.join(data_dir, "web.jsonl")),
            facts=facts,
            aliases=alias_store,
            acronyms=acronyms,
        )

    return _make


@fixture
def make_pipeline(corpus_stores, make_clients, mock_gateway):
    def _make(remote: bool = True, **cfg_values) -> Pipeline:
        return Pipeline(
            PipelineConfig(**cfg_values),
            corpus_stores,
            make_clients(corpus_stores, remote),
            mock_gateway,
        )

    return _make
