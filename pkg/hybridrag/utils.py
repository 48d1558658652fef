import hashlib
import json
import logging
import os
import re
import tempfile
import time
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import requests
from ruamel.yaml import YAML

from hybridrag.exceptions import AuthError, TransportError

log = logging.getLogger(__name__)

LEXICON_FILE = Path(__file__).parent / "data" / "lexicon.yaml"

RE_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)
RE_SPACES = re.compile(r"\s+")
RE_TRAILING_PUNCT = re.compile(r"[\s\.\,\;\:\!\?]+$")


@lru_cache(maxsize=5)
def get_lexicon(lexicon_file: Union[Path, str] = LEXICON_FILE) -> Dict:
    yaml = YAML(typ="safe")
    with open(lexicon_file, "r", encoding="utf_8") as yaml_file:
        return yaml.load(yaml_file)


def count_tokens(text: str) -> int:
    return len(text.split())


def tokenize(text: str) -> List[str]:
    """Lowercase, drop punctuation and split on whitespace."""
    return RE_PUNCT.sub("", text.lower()).split()


def normalize_text(text: str) -> str:
    """Normalized form used to spot exact duplicates of evidence texts."""
    text = RE_SPACES.sub(" ", text.lower()).strip()
    return RE_TRAILING_PUNCT.sub("", text)


def sha256_checksum(filename, block_size=65536):
    sha256 = hashlib.sha256()
    with open(filename, "rb") as f:
        for block in iter(lambda: f.read(block_size), b""):
            sha256.update(block)
    return sha256.hexdigest()


def sha256_text(*parts: str, sep: str = "\x1f") -> str:
    return hashlib.sha256(sep.join(parts).encode("utf-8")).hexdigest()


def digest(obj: Any) -> str:
    """Stable SHA-256 of any JSON serializable object."""
    payload = json.dumps(obj, sort_keys=True, ensure_ascii=False, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def iter_jsonl(path: Union[Path, str]) -> Iterator[Tuple[int, Union[Dict, str]]]:
    """Yield ``(line_no, record)`` for every non blank line of a JSONL file.

    Lines which are not valid JSON are yielded as the raw string so the
    caller can decide whether to skip or fail.
    """
    with open(path, "r", encoding="utf_8") as jsonl_file:
        for line_no, line in enumerate(jsonl_file, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError:
                yield line_no, line


def atomic_write(path: Union[Path, str], data: Union[bytes, str]):
    """Write to a temporary file in the same folder and move it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp_name = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf_8"})) as f:
            f.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def dumps_jsonl(records: List[Dict]) -> str:
    return "".join(
        json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n" for rec in records
    )


RETRY_BASE_DELAY = 0.5


def api_headers(api_key_env_var: Optional[str]) -> Dict[str, str]:
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(api_key_env_var) if api_key_env_var else None
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    return headers


def request_with_retries(
    method: str,
    url: str,
    *,
    max_retries: int = 3,
    timeout: float = 30.0,
    ok_statuses: Tuple[int, ...] = (),
    **kwargs,
) -> requests.Response:
    """Issue an HTTP request retrying connection errors, timeouts and 5xx.

    At most ``max_retries + 1`` attempts are made, sleeping 0.5 s, 1 s, 2 s, ...
    between them. 401/403 raise :class:`AuthError` straight away and any other
    non successful answer raises :class:`TransportError`.

    :param method: HTTP verb
    :param url: full url
    :param max_retries: number of retries after the first attempt
    :param timeout: timeout in seconds for each attempt
    :param ok_statuses: error statuses handed back to the caller untouched
    :return: successful response
    """
    last_error = ""
    for attempt in range(max_retries + 1):
        if attempt:
            delay = RETRY_BASE_DELAY * 2 ** (attempt - 1)
            log.debug(f"Retrying {method} {url} in {delay}s ({last_error})")
            time.sleep(delay)
        try:
            response = requests.request(method, url, timeout=timeout, **kwargs)
        except (requests.ConnectionError, requests.Timeout) as err:
            last_error = f"{type(err).__name__}: {err}"
            continue
        if response.status_code in ok_statuses:
            return response
        if response.status_code in (401, 403):
            raise AuthError(f"{url} rejected the credentials ({response.status_code})")
        if response.status_code >= 500:
            last_error = f"HTTP {response.status_code}"
            continue
        if response.status_code >= 400:
            raise TransportError(
                f"{method} {url} failed with HTTP {response.status_code}: "
                f"{response.text[:200]}"
            )
        return response
    raise TransportError(
        f"{method} {url} failed after {max_retries + 1} attempts: {last_error}"
    )
