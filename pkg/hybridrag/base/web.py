import logging
import os
from abc import ABCMeta, abstractmethod
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

from bs4 import BeautifulSoup

from hybridrag.exceptions import FormatError
from hybridrag.utils import iter_jsonl, request_with_retries

log = logging.getLogger(__name__)


class WebResult(NamedTuple):
    title: str
    url: str
    snippet: str


def clean_snippet(snippet: str) -> str:
    """Plain text of a search snippet which may carry HTML markup."""
    if "<" not in snippet and "&" not in snippet:
        return " ".join(snippet.split())
    return BeautifulSoup(snippet, "html.parser").get_text(" ", strip=True)


def _normalize_query(query: str) -> str:
    return " ".join(query.split()).casefold()


class WebSearchClient(metaclass=ABCMeta):
    @abstractmethod
    def search(self, query: str, max_results: int = 10) -> List[WebResult]:
        ...


class FixtureWebSearch(WebSearchClient):
    """Serves ``{query, results: [{title, url, snippet}]}`` JSONL fixtures.

    Queries match exactly first and then ignoring case and spacing. Unknown
    queries have no results.
    """

    def __init__(self, fixtures: Optional[Dict[str, List[WebResult]]] = None):
        self._fixtures = dict(fixtures or {})
        self._normalized = {_normalize_query(q): r for q, r in self._fixtures.items()}

    @classmethod
    def from_file(cls, fixtures_path: Union[Path, str, None]) -> "FixtureWebSearch":
        if not fixtures_path:
            return cls()
        return cls(dict(_read_web_fixtures(str(fixtures_path))))

    def search(self, query: str, max_results: int = 10) -> List[WebResult]:
        results = self._fixtures.get(query)
        if results is None:
            results = self._normalized.get(_normalize_query(query), [])
        log.debug(f"Web fixtures: {len(results)} results for {query!r}")
        return [
            WebResult(r.title, r.url, clean_snippet(r.snippet))
            for r in results[:max_results]
        ]


@lru_cache(maxsize=5)
def _read_web_fixtures(fixtures_path: str) -> Tuple[Tuple[str, List[WebResult]], ...]:
    fixtures = []
    for line_no, record in iter_jsonl(fixtures_path):
        if not isinstance(record, dict) or "query" not in record:
            raise FormatError(str(line_no), "web fixture needs a query field")
        results = [
            WebResult(
                str(item.get("title", "")),
                str(item.get("url", "")),
                str(item.get("snippet", "")),
            )
            for item in record.get("results", [])
        ]
        fixtures.append((record["query"], results))
    return tuple(fixtures)


class HttpWebSearch(WebSearchClient):
    """Search API speaking the Custom Search JSON shape (``items`` with
    ``title``, ``link`` and ``snippet``)."""

    def __init__(
        self,
        endpoint: str,
        api_key_env_var: Optional[str] = None,
        timeout: float = 30.0,
        max_retries: int = 3,
        extra_params: Optional[Dict[str, str]] = None,
    ):
        self.endpoint = endpoint
        self.api_key_env_var = api_key_env_var
        self.timeout = timeout
        self.max_retries = max_retries
        self.extra_params = dict(extra_params or {})

    def search(self, query: str, max_results: int = 10) -> List[WebResult]:
        params = {"q": query, "num": max_results, **self.extra_params}
        api_key = os.environ.get(self.api_key_env_var) if self.api_key_env_var else None
        if api_key:
            params["key"] = api_key
        response = request_with_retries(
            "GET",
            self.endpoint,
            params=params,
            timeout=self.timeout,
            max_retries=self.max_retries,
        )
        body = response.json()
        items = body.get("items") or body.get("results") or []
        results = [
            WebResult(
                str(item.get("title", "")),
                str(item.get("link") or item.get("url") or ""),
                clean_snippet(str(item.get("snippet", ""))),
            )
            for item in items[:max_results]
        ]
        log.info(f"Web search returned {len(results)} results for {query!r}")
        return results
