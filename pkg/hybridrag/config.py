import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from hybridrag.exceptions import InvalidConfig

PROMPT_STRATEGIES = ("direct", "cot", "cove")
RETRIEVAL_MODES = ("vector", "graph", "hybrid")
BACKEND_KINDS = ("mock", "http")


@dataclass(frozen=True)
class PipelineConfig:
    k: int = 10
    sim_threshold: float = 0.95
    hops: int = 1
    prompt_strategy: str = "direct"
    trace: bool = False
    retrieval_mode: str = "hybrid"
    chunk_chars: int = 512
    overlap_chars: int = 64
    current_year: int = 2025
    web_max_results: int = 10
    llm_dedup: bool = False
    parallel: bool = True
    max_tokens: int = 512
    temperature: float = 0.0
    seed: int = 42

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig(f"k must be >= 1, received {self.k}")
        if not 0 < self.sim_threshold <= 1:
            raise InvalidConfig(
                f"sim_threshold must be in (0, 1], received {self.sim_threshold}"
            )
        if self.hops not in (1, 2):
            raise InvalidConfig(f"hops must be 1 or 2, received {self.hops}")
        if self.prompt_strategy not in PROMPT_STRATEGIES:
            raise InvalidConfig(
                f"Unknown prompt strategy {self.prompt_strategy}. "
                f"Valid options: {', '.join(PROMPT_STRATEGIES)}"
            )
        if self.retrieval_mode not in RETRIEVAL_MODES:
            raise InvalidConfig(
                f"Unknown retrieval mode {self.retrieval_mode}. "
                f"Valid options: {', '.join(RETRIEVAL_MODES)}"
            )
        if not self.chunk_chars > self.overlap_chars >= 0:
            raise InvalidConfig(
                "chunk_chars must be greater than overlap_chars and overlap_chars"
                f" must be >= 0 (received {self.chunk_chars}, {self.overlap_chars})"
            )
        if self.max_tokens < 1:
            raise InvalidConfig(f"max_tokens must be >= 1, received {self.max_tokens}")
        if not 0 <= self.temperature <= 1:
            raise InvalidConfig(
                f"temperature must be in [0, 1], received {self.temperature}"
            )
        if self.web_max_results < 1:
            raise InvalidConfig("web_max_results must be >= 1")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"
    endpoint_url: Optional[str] = None
    api_key_env_var: Optional[str] = "OPENAI_API_KEY"
    model_name: Optional[str] = "gpt-4o-mini"
    embed_model_name: Optional[str] = "text-embedding-3-small"
    embed_dim: int = 256
    timeout: float = 30.0
    max_retries: int = 3
    fixtures_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise InvalidConfig(
                f"Backend {self.kind} does not exist. "
                f"Valid options: {', '.join(BACKEND_KINDS)}"
            )
        if self.kind == "http" and not self.endpoint_url:
            raise InvalidConfig("The http backend requires endpoint_url.")
        if self.embed_dim < 1:
            raise InvalidConfig(f"embed_dim must be >= 1, received {self.embed_dim}")
        if self.timeout <= 0:
            raise InvalidConfig("timeout must be positive")
        if not 0 <= self.max_retries <= 10:
            raise InvalidConfig("max_retries must be between 0 and 10")


@dataclass(frozen=True)
class Configuration:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    store_dir: Optional[str] = None
    runs_dir: Optional[str] = "runs"
    aliases_path: Optional[str] = None
    acronyms_path: Optional[str] = None
    title_aliases_path: Optional[str] = None
    web_fixtures_path: Optional[str] = None
    facts_fixtures_path: Optional[str] = None
    web_endpoint: Optional[str] = None
    web_api_key_env_var: Optional[str] = "SEARCH_API_KEY"
    remote_facts_endpoint: Optional[str] = None

    def as_dict(self) -> Dict:
        return dataclasses.asdict(self)


# Flat config keys for backend fields are prefixed to keep the namespace flat.
_BACKEND_PREFIX = "backend_"
_BACKEND_ALIASES = {"backend": "kind", "endpoint": "endpoint_url"}


def _field_types(cls) -> Dict[str, type]:
    hints = {}
    for f in fields(cls):
        hints[f.name] = f.type
    return hints


def _coerce(raw: str, target, key: str):
    target_name = getattr(target, "__name__", str(target))
    try:
        if target in (bool, "bool"):
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if target in (int, "int"):
            return int(raw)
        if target in (float, "float"):
            return float(raw)
    except ValueError:
        raise InvalidConfig(f"Invalid value for {key}: {raw!r} ({target_name})")
    value = raw.strip()
    return None if value.lower() in ("", "none", "null") else value


def build_configuration(
    overrides: Optional[Dict[str, Union[str, int, float, bool]]] = None,
    base: Optional[Configuration] = None,
) -> Configuration:
    """Apply flat ``key -> value`` overrides on top of ``base``.

    Keys are the field names of :class:`PipelineConfig`, the field names of
    :class:`BackendConfig` prefixed with ``backend_`` (plus the shortcuts
    ``backend`` and ``endpoint``) or the top level fields of
    :class:`Configuration`. String values are coerced to the field type.

    :param overrides: flat mapping of overrides
    :param base: configuration the overrides are applied to
    :return: new configuration
    """
    base = base or Configuration()
    overrides = overrides or {}
    pipeline_types = _field_types(PipelineConfig)
    backend_types = _field_types(BackendConfig)
    top_types = {
        k: v
        for k, v in _field_types(Configuration).items()
        if k not in ("pipeline", "backend")
    }
    pipeline_kw, backend_kw, top_kw = {}, {}, {}
    for key, value in overrides.items():
        if value is None:
            continue
        key = key.strip().replace("-", "_")
        if key in _BACKEND_ALIASES:
            key = f"{_BACKEND_PREFIX}{_BACKEND_ALIASES[key]}"
        if key in pipeline_types:
            target, bucket, name = pipeline_types[key], pipeline_kw, key
        elif key.startswith(_BACKEND_PREFIX) and key[len(_BACKEND_PREFIX) :] in (
            backend_types
        ):
            name = key[len(_BACKEND_PREFIX) :]
            target, bucket = backend_types[name], backend_kw
        elif key in top_types:
            target, bucket, name = str, top_kw, key
        else:
            raise InvalidConfig(f"Unknown configuration key: {key}")
        bucket[name] = _coerce(value, target, key) if isinstance(value, str) else value
    return dataclasses.replace(
        base,
        pipeline=dataclasses.replace(base.pipeline, **pipeline_kw),
        backend=dataclasses.replace(base.backend, **backend_kw),
        **top_kw,
    )


def load_configuration(
    config_file: Union[str, Path, None] = None,
    overrides: Optional[Dict] = None,
) -> Tuple[Configuration, Dict[str, str]]:
    """Defaults, then the config file, then the overrides (CLI flags).

    :return: the effective configuration and the raw values read from the file
    """
    from hybridrag.cli.parser import parse_config_file

    file_values = parse_config_file(config_file) if config_file else {}
    config = build_configuration(file_values)
    config = build_configuration(overrides, base=config)
    return config, file_values
