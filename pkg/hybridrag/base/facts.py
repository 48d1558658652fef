import logging
from abc import ABCMeta, abstractmethod
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional, Union
from urllib.parse import quote

from hybridrag.exceptions import FormatError
from hybridrag.store.documents import Document
from hybridrag.store.stores import Stores
from hybridrag.utils import iter_jsonl, request_with_retries

log = logging.getLogger(__name__)


class RemoteFactSource(metaclass=ABCMeta):
    @abstractmethod
    def fetch(self, title: str) -> Optional[str]:
        ...


class FixtureFactSource(RemoteFactSource):
    """Remote articles served from ``{title, extract}`` JSONL fixtures."""

    def __init__(self, articles: Optional[Dict[str, str]] = None):
        self._articles = {k.casefold(): v for k, v in (articles or {}).items()}

    @classmethod
    def from_file(cls, fixtures_path: Union[Path, str, None]) -> "FixtureFactSource":
        if not fixtures_path:
            return cls()
        return cls(_read_fact_fixtures(str(fixtures_path)))

    def fetch(self, title: str) -> Optional[str]:
        return self._articles.get(title.casefold()) or None


@lru_cache(maxsize=5)
def _read_fact_fixtures(fixtures_path: str) -> Dict[str, str]:
    articles = {}
    for line_no, record in iter_jsonl(fixtures_path):
        if not isinstance(record, dict) or "title" not in record:
            raise FormatError(str(line_no), "fact fixture needs a title field")
        articles[record["title"]] = record.get("extract", "")
    return articles


class MediaWikiFactSource(RemoteFactSource):
    """REST summary endpoint: ``GET {endpoint}/{title}`` answering JSON with an
    ``extract`` field; 404 means the article does not exist."""

    def __init__(self, endpoint: str, timeout: float = 30.0, max_retries: int = 3):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries

    def fetch(self, title: str) -> Optional[str]:
        url = f"{self.endpoint}/{quote(title.replace(' ', '_'), safe='')}"
        response = request_with_retries(
            "GET",
            url,
            timeout=self.timeout,
            max_retries=self.max_retries,
            ok_statuses=(404,),
        )
        if response.status_code == 404:
            log.debug(f"No remote article for {title!r}")
            return None
        extract = response.json().get("extract") or ""
        return extract.strip() or None


class FactLookupClient:
    """Article lookup for canonical entity names.

    ``lookup`` only looks at the ingested corpus: titles compared ignoring
    case, then the title alias table. ``fetch_remote`` asks the remote source.
    """

    def __init__(
        self,
        stores: Stores,
        title_aliases: Optional[Dict[str, str]] = None,
        remote: Optional[RemoteFactSource] = None,
    ):
        self.stores = stores
        self.title_aliases = title_aliases or {}
        self.remote = remote

    def lookup_document(self, canonical: str) -> Optional[Document]:
        doc = self.stores.find_title(canonical)
        if doc is None and canonical.casefold() in self.title_aliases:
            doc = self.stores.find_title(self.title_aliases[canonical.casefold()])
        return doc

    def lookup(self, canonical: str) -> Optional[str]:
        doc = self.lookup_document(canonical)
        return doc.body if doc else None

    def fetch_remote(self, canonical: str) -> Optional[str]:
        if self.remote is None:
            return None
        title = self.title_aliases.get(canonical.casefold(), canonical)
        return self.remote.fetch(title)
