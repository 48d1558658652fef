import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Tuple

from hybridrag.base.aliases import ENTITY_KINDS, AliasStore
from hybridrag.config import PipelineConfig
from hybridrag.exceptions import InvalidQuery, TokenBudgetUnsatisfiable
from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.utils import count_tokens, get_lexicon, sha256_text

log = logging.getLogger(__name__)

MAX_QUERY_TOKENS = 40

DECOMPOSE_SYSTEM_PROMPT = (
    "Split the user question into the independent questions it contains, one"
    " per line. A question asking a single thing is returned unchanged."
)
ENTITIES_SYSTEM_PROMPT = (
    "List the named entities of the user text (people, organizations,"
    " locations, dates and named concepts). Respond only with a JSON list of"
    ' objects with the keys "name" and "kind", copying each name exactly as it'
    " is written in the text."
)
ENHANCE_SYSTEM_PROMPT = (
    "Rewrite the user query as one self-contained search query.\n"
    "Entities: {entities}\n"
    "Time hints: {time_hints}\n"
    "Intent: {intent}\n"
    "Spell out acronyms on first use with the acronym in parentheses, keep"
    " every entity name exactly as given and stay within {max_tokens} words."
    " Respond with the query only."
)

RE_NUMBERING = re.compile(r"^\s*(?:[-*•]|\d+[\.\)])\s*")
RE_CAPITALIZED = re.compile(r"(?<![\w'’])[A-Z][\w\-]*(?:\s+[A-Z][\w\-]*)*")
RE_ACRONYM = re.compile(r"^[A-Z]{2,}s?$")
RE_YEAR = re.compile(r"(?<!\d)(1[0-9]{3}|20[0-9]{2})(?!\d)")
RE_POSSESSIVE = re.compile(r"['’]s$")
RE_LEAD_IN = re.compile(
    r"^(?:please\s+)?(?:tell\s+me\s+(?:about\s+)?|explain\s+|describe\s+|"
    r"information\s+(?:on|about)\s+)",
    re.IGNORECASE,
)


class WhIntent(str, Enum):
    WHO = "who"
    WHAT = "what"
    WHEN = "when"
    WHERE = "where"
    HOW = "how"
    WHY = "why"
    NONE = "none"


@dataclass(frozen=True)
class RawQuery:
    text: str
    id: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise InvalidQuery("The query text is empty.")
        if self.id is None:
            object.__setattr__(self, "id", sha256_text(self.text)[:12])


@dataclass(frozen=True)
class Entity:
    surface: str
    canonical: str
    kind: str = "other"

    def __post_init__(self):
        if not self.canonical.strip():
            raise ValueError("Entity canonical form must not be empty")
        if self.kind not in ENTITY_KINDS:
            raise ValueError(f"Unknown entity kind {self.kind}")

    def to_dict(self) -> Dict:
        return {"surface": self.surface, "canonical": self.canonical, "kind": self.kind}


@dataclass(frozen=True)
class IntentCues:
    wh_intent: WhIntent = WhIntent.NONE
    temporal: bool = False
    factual: bool = False

    def __post_init__(self):
        object.__setattr__(self, "wh_intent", WhIntent(self.wh_intent))
        if self.temporal and self.factual:
            raise ValueError("A query cannot be temporal and factual at once")

    def to_dict(self) -> Dict:
        return {
            "wh_intent": self.wh_intent.value,
            "temporal": self.temporal,
            "factual": self.factual,
        }


@dataclass(frozen=True)
class AugmentedQuery:
    original: RawQuery
    text: str
    entities: Tuple[Entity, ...] = field(default_factory=tuple)
    cues: IntentCues = field(default_factory=IntentCues)

    def __post_init__(self):
        object.__setattr__(self, "entities", tuple(self.entities))
        if count_tokens(self.text) > MAX_QUERY_TOKENS:
            raise InvalidQuery(
                f"Augmented query has more than {MAX_QUERY_TOKENS} tokens: {self.text}"
            )
        missing = [e.canonical for e in self.entities if e.canonical not in self.text]
        if missing:
            raise InvalidQuery(f"Augmented query lost the entities {missing}")

    def to_dict(self) -> Dict:
        return {
            "id": self.original.id,
            "original": self.original.text,
            "text": self.text,
            "entities": [e.to_dict() for e in self.entities],
            "cues": self.cues.to_dict(),
        }


class _Span(NamedTuple):
    start: int
    end: int
    surface: str
    canonical: str
    kind: str


@lru_cache(maxsize=1)
def _compiled_lexicon() -> Dict:
    lexicon = get_lexicon()
    temporal = sorted(lexicon["temporal"], key=lambda p: (-len(p), p))
    return {
        "temporal": re.compile(
            r"(?<!\w)(" + "|".join(re.escape(p) for p in temporal) + r")(?!\w)",
            re.IGNORECASE,
        ),
        "definitions": [
            re.compile(pattern, re.IGNORECASE)
            for pattern in lexicon["definition_patterns"]
        ],
        "stopwords": frozenset(lexicon["sentence_initial_stopwords"]),
        "honorifics": frozenset(lexicon["honorifics"]),
        "org_suffixes": frozenset(lexicon["organization_suffixes"]),
        "location_preps": frozenset(lexicon["location_prepositions"]),
        "interrogatives": dict(lexicon["interrogatives"]),
        "wh_templates": [
            (re.compile(item["pattern"], re.IGNORECASE), item["template"], item["wh"])
            for item in lexicon["wh_templates"]
        ],
        "fallback": lexicon["fallback_template"],
    }


def decompose_prompt(text: str) -> Tuple[str, str]:
    return DECOMPOSE_SYSTEM_PROMPT, text


def entities_prompt(text: str) -> Tuple[str, str]:
    return ENTITIES_SYSTEM_PROMPT, text


def decompose_query(q: RawQuery, gateway: AbstractGateway) -> List[str]:
    """Sub-questions of ``q``; a single clause comes back as ``[q.text]``."""
    if not q.text.strip():
        raise InvalidQuery("The query text is empty.")
    raw = gateway.ask(*decompose_prompt(q.text))
    parts = []
    for line in raw.splitlines():
        line = RE_NUMBERING.sub("", line).strip()
        if line:
            parts.append(line)
    if not parts:
        return [q.text]
    if len(parts) > 1:
        log.debug(f"Query {q.id} decomposed into {len(parts)} parts")
    return parts


def _previous_word(text: str, start: int) -> str:
    before = text[:start].split()
    return before[-1].lower().strip(".,;:!?") if before else ""


def _guess_kind(surface: str, text: str, start: int, acronyms: Dict[str, str]) -> str:
    lex = _compiled_lexicon()
    tokens = surface.split()
    if RE_YEAR.fullmatch(surface):
        return "date"
    if len(tokens) == 1 and RE_ACRONYM.match(surface):
        if surface in acronyms:
            return "concept"
        if _previous_word(text, start) in lex["location_preps"]:
            return "location"
        return "organization"
    if tokens[-1] in lex["org_suffixes"]:
        return "organization"
    if tokens[0] in lex["honorifics"]:
        return "person"
    if _previous_word(text, start) in lex["location_preps"]:
        return "location"
    if len(tokens) > 1:
        return "person"
    return "other"


def rule_entities(
    text: str, aliases: AliasStore, acronyms: Optional[Dict[str, str]] = None
) -> List[_Span]:
    """Alias mentions, capitalised spans, acronyms and years, in text order."""
    lex = _compiled_lexicon()
    acronyms = acronyms or {}
    spans: List[_Span] = []
    for mention in aliases.find_mentions(text):
        spans.append(
            _Span(
                mention.start,
                mention.end,
                mention.surface,
                mention.canonical,
                aliases.kind_of(mention.canonical)
                or _guess_kind(mention.surface, text, mention.start, acronyms),
            )
        )

    spelled_out = []
    for acronym, expansion in acronyms.items():
        for m in re.finditer(re.escape(f"{expansion} ({acronym})"), text, re.IGNORECASE):
            spelled_out.append((m.start(), m.start() + len(expansion)))
        for m in re.finditer(re.escape(f"{acronym} ({expansion})"), text, re.IGNORECASE):
            spelled_out.append((m.end() - len(expansion) - 1, m.end() - 1))

    def free(start: int, end: int) -> bool:
        # an expansion written next to its acronym is not an entity of its own
        return all(end <= s.start or start >= s.end for s in spans) and all(
            end <= lo or start >= hi for lo, hi in spelled_out
        )

    for match in RE_CAPITALIZED.finditer(text):
        words = list(re.finditer(r"\S+", match.group(0)))
        while words and words[0].group(0) in lex["stopwords"]:
            words.pop(0)
        if not words:
            continue
        start = match.start() + words[0].start()
        surface = RE_POSSESSIVE.sub("", text[start : match.end()])
        end = start + len(surface)
        if surface and free(start, end):
            spans.append(
                _Span(start, end, surface, surface, _guess_kind(surface, text, start, acronyms))
            )
    for match in RE_YEAR.finditer(text):
        if free(match.start(), match.end()):
            spans.append(
                _Span(match.start(), match.end(), match.group(0), match.group(0), "date")
            )
    return sorted(spans, key=lambda s: s.start)


def _parse_llm_entities(raw: str) -> Optional[List[Tuple[str, str]]]:
    start, end = raw.find("["), raw.rfind("]")
    if start == -1 or end < start:
        return None
    try:
        data = json.loads(raw[start : end + 1])
    except json.JSONDecodeError:
        return None
    if not isinstance(data, list):
        return None
    result = []
    for item in data:
        if isinstance(item, str):
            result.append((item, ""))
        elif isinstance(item, dict) and isinstance(item.get("name"), str):
            result.append((item["name"], str(item.get("kind") or "")))
        else:
            return None
    return result


def _llm_spans(
    part: str,
    found: List[Tuple[str, str]],
    aliases: AliasStore,
    acronyms: Dict[str, str],
) -> List[_Span]:
    spans = []
    folded = part.casefold()
    for name, kind in found:
        name = name.strip()
        pos = folded.find(name.casefold()) if name else -1
        if pos == -1:
            log.debug(f"Dropping entity {name!r}, not present in {part!r}")
            continue
        surface = part[pos : pos + len(name)]
        canonical = aliases.canonicalize(surface) or aliases.snap(surface) or surface
        kind = (
            aliases.kind_of(canonical)
            or (kind if kind in ENTITY_KINDS else None)
            or _guess_kind(surface, part, pos, acronyms)
        )
        spans.append(_Span(pos, pos + len(surface), surface, canonical, kind))
    return sorted(spans, key=lambda s: s.start)


def extract_entities(
    parts: List[str],
    aliases: AliasStore,
    gateway: AbstractGateway,
    acronyms: Optional[Dict[str, str]] = None,
) -> List[Entity]:
    """Entities of the query parts, one per canonical form, in order of first
    appearance.

    The gateway is asked for a JSON entity list; when the answer is anything
    else the deterministic rules of :func:`rule_entities` are used.
    """
    if not parts:
        raise InvalidQuery("No query parts to extract entities from.")
    acronyms = acronyms if acronyms is not None else {}
    entities: List[Entity] = []
    seen = set()
    for part in parts:
        raw = gateway.ask(*entities_prompt(part))
        found = None if raw.strip() == part.strip() else _parse_llm_entities(raw)
        if found is None:
            log.debug(f"Rule based entity extraction for {part!r}")
            spans = rule_entities(part, aliases, acronyms)
        else:
            spans = _llm_spans(part, found, aliases, acronyms)
        for span in spans:
            key = span.canonical.casefold()
            if key in seen:
                continue
            seen.add(key)
            entities.append(Entity(span.surface, span.canonical, span.kind))
    return entities


def temporal_hints(text: str, current_year: int) -> List[str]:
    hints = [m.group(0) for m in _compiled_lexicon()["temporal"].finditer(text)]
    hints.extend(
        m.group(0) for m in RE_YEAR.finditer(text) if int(m.group(0)) >= current_year - 1
    )
    return hints


def detect_wh_intent(text: str) -> WhIntent:
    interrogatives = _compiled_lexicon()["interrogatives"]
    for token in text.split():
        token = token.strip(".,;:!?\"'()").lower()
        if token in interrogatives:
            return WhIntent(interrogatives[token])
    return WhIntent.NONE


def detect_intent(
    parts: List[str], entities: List[Entity], current_year: int = 2025
) -> IntentCues:
    """Temporal when a temporal phrase or a year from ``current_year - 1`` on is
    present. Otherwise factual when there are entities or a definition
    pattern matches."""
    text = " ".join(parts)
    temporal = bool(temporal_hints(text, current_year))
    definition = any(p.search(part) for p in _compiled_lexicon()["definitions"] for part in parts)
    return IntentCues(
        wh_intent=detect_wh_intent(text),
        temporal=temporal,
        factual=not temporal and (bool(entities) or definition),
    )


def substitute_canonicals(text: str, aliases: AliasStore, entities: List[Entity]) -> str:
    replacements = {
        m.start: (m.end, m.canonical) for m in aliases.find_mentions(text)
    }
    for entity in entities:
        if entity.surface == entity.canonical or entity.canonical in text:
            continue
        pos = text.find(entity.surface)
        if pos != -1 and all(
            pos >= end or pos + len(entity.surface) <= start
            for start, (end, _) in replacements.items()
        ):
            replacements[pos] = (pos + len(entity.surface), entity.canonical)
    for start in sorted(replacements, reverse=True):
        end, canonical = replacements[start]
        text = text[:start] + canonical + text[end:]
    return text


def expand_acronyms(
    text: str, acronyms: Dict[str, str], protected: Tuple[str, ...] = ()
) -> str:
    """Spell out every known acronym on its first mention as
    ``expansion (ACRONYM)`` unless the text already carries an expansion.
    Occurrences inside a ``protected`` phrase are left alone."""
    for acronym in sorted(acronyms):
        expansion = acronyms[acronym]
        folded = text.casefold()
        if (
            f"{expansion} ({acronym})".casefold() in folded
            or f"{acronym} ({expansion})".casefold() in folded
        ):
            continue
        guarded = [
            (m.start(), m.end())
            for phrase in protected
            if phrase != acronym
            for m in re.finditer(re.escape(phrase), text)
        ]
        match = next(
            (
                m
                for m in re.finditer(rf"(?<![\w(]){re.escape(acronym)}(?![\w)])", text)
                if not any(s <= m.start() < e for s, e in guarded)
            ),
            None,
        )
        if match:
            text = f"{text[: match.start()]}{expansion} ({acronym}){text[match.end():]}"
    return text


def synthesize_wh(text: str) -> Tuple[str, WhIntent]:
    lex = _compiled_lexicon()
    for pattern, template, wh in lex["wh_templates"]:
        match = pattern.match(text)
        if match:
            return template.format(**match.groupdict()), WhIntent(wh)
    subject = RE_LEAD_IN.sub("", text.strip()).rstrip("?.! ")
    fallback = lex["fallback"]
    return fallback["template"].format(subject=subject), WhIntent(fallback["wh"])


def fit_token_budget(text: str, canonicals: List[str], budget: int = MAX_QUERY_TOKENS) -> str:
    """Cut ``text`` at a word boundary so it has at most ``budget`` tokens while
    still containing every canonical form."""
    needed = sum(count_tokens(c) for c in canonicals)
    if needed > budget:
        raise TokenBudgetUnsatisfiable(
            f"The entities alone need {needed} tokens, the budget is {budget}"
        )
    words = text.split()
    if len(words) <= budget and all(c in text for c in canonicals):
        return text
    for cut in range(min(budget, len(words)), -1, -1):
        head = " ".join(words[:cut])
        missing = [c for c in canonicals if c not in head]
        if cut + sum(count_tokens(c) for c in missing) <= budget:
            return " ".join([head, *missing]).strip()
    return " ".join(canonicals)


def enhance_prompt(draft: str, cues: IntentCues, entities: List[Entity], hints) -> Tuple[str, str]:
    system = ENHANCE_SYSTEM_PROMPT.format(
        entities=", ".join(e.canonical for e in entities) or "none",
        time_hints=", ".join(hints) or "none",
        intent=cues.wh_intent.value,
        max_tokens=MAX_QUERY_TOKENS,
    )
    return system, draft


def _first_line(raw: str) -> str:
    for line in raw.splitlines():
        line = line.strip().strip('"').strip()
        if line:
            return line
    return ""


def enhance_query(
    q: RawQuery,
    cues: IntentCues,
    entities: List[Entity],
    gateway: AbstractGateway,
    aliases: Optional[AliasStore] = None,
    acronyms: Optional[Dict[str, str]] = None,
    current_year: int = 2025,
) -> AugmentedQuery:
    """Build the augmented query.

    Entity surfaces become canonicals, known acronyms are expanded, a question
    word is synthesised when missing and the gateway rewrites the draft. A
    rewrite that drops an entity is ignored. The result is cut to the token
    budget keeping every canonical form.
    """
    aliases = aliases or AliasStore()
    acronyms = acronyms if acronyms is not None else {}
    canonicals = []
    for entity in entities:
        if entity.canonical not in canonicals:
            canonicals.append(entity.canonical)
    if sum(count_tokens(c) for c in canonicals) > MAX_QUERY_TOKENS:
        raise TokenBudgetUnsatisfiable(
            f"The entities of query {q.id} exceed {MAX_QUERY_TOKENS} tokens"
        )

    draft = " ".join(q.text.split())
    draft = substitute_canonicals(draft, aliases, entities)
    draft = expand_acronyms(draft, acronyms, tuple(canonicals))
    if cues.wh_intent is WhIntent.NONE:
        draft, _ = synthesize_wh(draft)

    rewritten = _first_line(
        gateway.ask(*enhance_prompt(draft, cues, entities, temporal_hints(draft, current_year)))
    )
    if rewritten and rewritten != draft:
        if all(c in rewritten for c in canonicals):
            draft = rewritten
        else:
            log.debug(f"Ignoring rewrite of {q.id} which dropped an entity: {rewritten!r}")
    text = fit_token_budget(draft, canonicals)

    final_cues = detect_intent([text], entities, current_year)
    if cues.temporal and not final_cues.temporal:
        final_cues = IntentCues(final_cues.wh_intent, temporal=True, factual=False)
    return AugmentedQuery(q, text, tuple(entities), final_cues)


def augment(
    q: RawQuery,
    gateway: AbstractGateway,
    aliases: Optional[AliasStore] = None,
    acronyms: Optional[Dict[str, str]] = None,
    cfg: Optional[PipelineConfig] = None,
) -> AugmentedQuery:
    """Decompose, extract entities, detect intent and enhance ``q``."""
    cfg = cfg or PipelineConfig()
    aliases = aliases or AliasStore()
    acronyms = acronyms if acronyms is not None else get_lexicon()["acronyms"]
    parts = decompose_query(q, gateway)
    entities = extract_entities(parts, aliases, gateway, acronyms)
    cues = detect_intent(parts, entities, cfg.current_year)
    aq = enhance_query(q, cues, entities, gateway, aliases, acronyms, cfg.current_year)
    log.debug(f"Augmented {q.id}: {aq.text!r} {aq.cues.to_dict()}")
    return aq
