import logging
from abc import ABC

from hybridrag.base.aliases import AliasStore, load_acronyms, load_title_aliases
from hybridrag.base.facts import FactLookupClient, FixtureFactSource, MediaWikiFactSource
from hybridrag.base.web import FixtureWebSearch, HttpWebSearch
from hybridrag.config import BackendConfig, Configuration
from hybridrag.exceptions import InvalidConfig
from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.llm.http import HttpGateway
from hybridrag.llm.mock import MockGateway
from hybridrag.pipeline import Clients
from hybridrag.store.stores import Stores

log = logging.getLogger(__name__)


class HybridRagFactory(ABC):
    REGISTERED_GATEWAY = {
        "mock": MockGateway,
        "http": HttpGateway,
    }

    @staticmethod
    def create_gateway(backend: BackendConfig) -> AbstractGateway:
        if backend.kind.lower() not in HybridRagFactory.REGISTERED_GATEWAY:
            raise InvalidConfig(
                f"Backend {backend.kind.lower()} does not exist.\n"
                f"Please inform a valid one: "
                f"{', '.join(HybridRagFactory.REGISTERED_GATEWAY.keys())}"
            )
        gateway = HybridRagFactory.REGISTERED_GATEWAY[backend.kind.lower()]
        log.debug(f"Creating {backend.kind} gateway (embed_dim={backend.embed_dim})")
        return gateway.from_config(backend)

    @staticmethod
    def create_clients(config: Configuration, stores: Stores) -> Clients:
        backend = config.backend
        if config.web_endpoint:
            web = HttpWebSearch(
                config.web_endpoint,
                config.web_api_key_env_var,
                timeout=backend.timeout,
                max_retries=backend.max_retries,
            )
        else:
            web = FixtureWebSearch.from_file(config.web_fixtures_path)
        if config.remote_facts_endpoint:
            remote = MediaWikiFactSource(
                config.remote_facts_endpoint,
                timeout=backend.timeout,
                max_retries=backend.max_retries,
            )
        elif config.facts_fixtures_path:
            remote = FixtureFactSource.from_file(config.facts_fixtures_path)
        else:
            remote = None
        facts = FactLookupClient(
            stores, load_title_aliases(config.title_aliases_path), remote
        )
        return Clients(
            web=web,
            facts=facts,
            aliases=AliasStore.from_file(config.aliases_path),
            acronyms=load_acronyms(config.acronyms_path),
        )
