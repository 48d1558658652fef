import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

from rapidfuzz import fuzz, process

from hybridrag.exceptions import FormatError
from hybridrag.utils import get_lexicon

log = logging.getLogger(__name__)

ENTITY_KINDS = ("person", "organization", "location", "date", "concept", "other")
SNAP_SCORE_CUTOFF = 90


@lru_cache(maxsize=10)
def read_tsv(tsv_file: Union[Path, str]) -> Tuple[Tuple[str, ...], ...]:
    """Rows of a ``surface<TAB>canonical[<TAB>kind]`` file, ``#`` comments
    skipped."""
    rows = []
    with open(tsv_file, "r", encoding="utf_8") as tsv:
        for line_no, line in enumerate(tsv, start=1):
            line = line.rstrip("\n\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = [col.strip() for col in line.split("\t")]
            if len(cols) < 2 or not cols[0] or not cols[1]:
                raise FormatError(
                    f"{Path(tsv_file).name}:{line_no}", "expected surface<TAB>target"
                )
            rows.append(tuple(cols[:3]))
    return tuple(rows)


class Mention(NamedTuple):
    start: int
    end: int
    surface: str
    canonical: str


@dataclass
class AliasGroup:
    canonical: str
    surfaces: List[str]
    kind: Optional[str] = None


def _pick_canonical(surfaces: Iterable[str]) -> str:
    # longest surface, ties broken lexicographically
    return sorted(surfaces, key=lambda s: (-len(s), s))[0]


class AliasStore:
    """Maps case folded surface forms to the canonical form of their group.

    Surfaces declared for the same canonical, or chained through each other,
    form one group. The canonical form of a group is its longest surface.
    """

    def __init__(self, rows: Iterable[Tuple[str, ...]] = ()):
        parent: Dict[str, str] = {}
        written: Dict[str, str] = {}
        kinds: Dict[str, str] = {}

        def find(key: str) -> str:
            while parent[key] != key:
                parent[key] = parent[parent[key]]
                key = parent[key]
            return key

        def add(text: str):
            key = text.casefold()
            parent.setdefault(key, key)
            written.setdefault(key, text)
            return key

        for row in rows:
            surface, canonical = row[0], row[1]
            a, b = add(surface), add(canonical)
            parent[find(a)] = find(b)
            if len(row) > 2 and row[2]:
                if row[2] not in ENTITY_KINDS:
                    raise FormatError(surface, f"unknown entity kind {row[2]!r}")
                kinds[b] = row[2]

        members: Dict[str, List[str]] = {}
        for key in parent:
            members.setdefault(find(key), []).append(written[key])
        self._surface_to_canonical: Dict[str, str] = {}
        self._groups: Dict[str, AliasGroup] = {}
        for root, surfaces in members.items():
            canonical = _pick_canonical(surfaces)
            kind = next(
                (kinds[s.casefold()] for s in surfaces if s.casefold() in kinds), None
            )
            self._groups[canonical.casefold()] = AliasGroup(
                canonical, sorted(surfaces), kind
            )
            for surface in surfaces:
                self._surface_to_canonical[surface.casefold()] = canonical
        self._surfaces = sorted(
            {s for g in self._groups.values() for s in g.surfaces},
            key=lambda s: (-len(s), s.casefold()),
        )
        self._re_mention = (
            re.compile(
                r"(?<!\w)(" + "|".join(re.escape(s) for s in self._surfaces) + r")(?!\w)",
                re.IGNORECASE,
            )
            if self._surfaces
            else None
        )

    @classmethod
    def from_file(cls, alias_file: Union[Path, str, None]) -> "AliasStore":
        if not alias_file:
            return cls()
        store = cls(read_tsv(str(alias_file)))
        log.debug(f"Loaded {len(store)} alias groups from {alias_file}")
        return store

    def __len__(self):
        return len(self._groups)

    def __contains__(self, surface: str) -> bool:
        return surface.casefold() in self._surface_to_canonical

    def canonicalize(self, surface: str) -> Optional[str]:
        return self._surface_to_canonical.get(surface.strip().casefold())

    def kind_of(self, canonical: str) -> Optional[str]:
        group = self._groups.get(canonical.casefold())
        return group.kind if group else None

    def groups(self) -> List[AliasGroup]:
        return [self._groups[key] for key in sorted(self._groups)]

    @property
    def surfaces(self) -> List[str]:
        return list(self._surfaces)

    def find_mentions(self, text: str) -> List[Mention]:
        """Non overlapping alias mentions, leftmost first and longest at each
        position."""
        if self._re_mention is None:
            return []
        return [
            Mention(m.start(), m.end(), m.group(0), self.canonicalize(m.group(0)))
            for m in self._re_mention.finditer(text)
        ]

    def snap(self, name: str) -> Optional[str]:
        """Canonical of the closest known surface, ``None`` under the cutoff."""
        exact = self.canonicalize(name)
        if exact or not self._surfaces:
            return exact
        match = process.extractOne(
            name,
            self._surfaces,
            scorer=fuzz.ratio,
            processor=str.casefold,
            score_cutoff=SNAP_SCORE_CUTOFF,
        )
        if match is None:
            return None
        log.debug(f"Snapped {name!r} to alias {match[0]!r} (score {match[1]:.1f})")
        return self.canonicalize(match[0])


def load_acronyms(acronym_file: Union[Path, str, None] = None) -> Dict[str, str]:
    """Packaged acronyms updated with the ones from ``acronym_file``."""
    acronyms = dict(get_lexicon()["acronyms"])
    if acronym_file:
        acronyms.update({row[0]: row[1] for row in read_tsv(str(acronym_file))})
    return acronyms


def load_title_aliases(title_file: Union[Path, str, None]) -> Dict[str, str]:
    if not title_file:
        return {}
    return {row[0].casefold(): row[1] for row in read_tsv(str(title_file))}
