import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

from hybridrag.exceptions import FormatError, InvalidConfig
from hybridrag.utils import iter_jsonl

log = logging.getLogger(__name__)

DATASET_FORMATS = ("truthfulqa_like", "squad_like", "wikiqa_like")


@dataclass(frozen=True)
class QAExample:
    id: str
    question: str
    reference_answers: Tuple[str, ...]
    dataset: str

    def __post_init__(self):
        object.__setattr__(self, "reference_answers", tuple(self.reference_answers))
        if not self.reference_answers:
            raise FormatError(self.id, "example has no reference answer")
        if not self.question.strip():
            raise FormatError(self.id, "example has no question")


def _unique(values) -> List[str]:
    result = []
    for value in values:
        value = str(value).strip()
        if value and value not in result:
            result.append(value)
    return result


def _truthfulqa_like(record: Dict) -> List[str]:
    return _unique([record.get("best_answer", ""), *record.get("correct_answers", [])])


def _answers_list(record: Dict) -> List[str]:
    answers = record.get("answers", [])
    if isinstance(answers, str):
        answers = [answers]
    return _unique(answers)


# field mapping of each JSONL adapter: question + the references
ADAPTERS = {
    "truthfulqa_like": _truthfulqa_like,
    "squad_like": _answers_list,
    "wikiqa_like": _answers_list,
}


def load_dataset(path: Union[Path, str], dataset_format: str) -> List[QAExample]:
    """Read a JSONL dataset with ``id`` and ``question`` fields plus the
    reference fields of its adapter:

    - ``truthfulqa_like``: ``best_answer`` and ``correct_answers``
    - ``squad_like`` and ``wikiqa_like``: ``answers``
    """
    if dataset_format not in ADAPTERS:
        raise InvalidConfig(
            f"Unknown dataset format {dataset_format}. "
            f"Valid options: {', '.join(DATASET_FORMATS)}"
        )
    adapter = ADAPTERS[dataset_format]
    examples, seen = [], set()
    for line_no, record in iter_jsonl(path):
        if not isinstance(record, dict):
            raise FormatError(f"line {line_no}", "record is not a JSON object")
        record_id = str(record.get("id") or f"line {line_no}")
        if "id" not in record or "question" not in record:
            raise FormatError(record_id, "record needs id and question fields")
        if record_id in seen:
            raise FormatError(record_id, "duplicated id")
        seen.add(record_id)
        try:
            references = adapter(record)
        except (AttributeError, TypeError) as err:
            raise FormatError(record_id, f"invalid reference fields ({err})")
        examples.append(
            QAExample(record_id, str(record["question"]), references, dataset_format)
        )
    log.info(f"Loaded {len(examples)} {dataset_format} examples from {path}")
    return examples


def sample(examples: List[QAExample], n: int, seed: int = 42) -> List[QAExample]:
    """Seeded uniform shuffle of ``examples`` truncated to ``n``."""
    shuffled = list(examples)
    random.Random(seed).shuffle(shuffled)
    return shuffled[:n]
