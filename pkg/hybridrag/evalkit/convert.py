import csv
import json
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Union

from hybridrag.exceptions import FormatError, InvalidConfig
from hybridrag.utils import atomic_write, dumps_jsonl

log = logging.getLogger(__name__)


def convert_squad(path: Union[Path, str]) -> List[Dict]:
    """SQuAD v2 JSON into ``squad_like`` records. Unanswerable questions are
    left out."""
    with open(path, "r", encoding="utf_8") as squad_file:
        try:
            content = json.load(squad_file)
        except json.JSONDecodeError as err:
            raise FormatError(None, f"{path} is not valid JSON ({err})")
    records = []
    for article in content.get("data", []):
        for paragraph in article.get("paragraphs", []):
            for qa in paragraph.get("qas", []):
                if "id" not in qa:
                    raise FormatError(None, "SQuAD question without id")
                answers = []
                for answer in qa.get("answers", []):
                    text = answer.get("text", "").strip()
                    if text and text not in answers:
                        answers.append(text)
                if qa.get("is_impossible") or not answers:
                    continue
                records.append(
                    {"id": qa["id"], "question": qa["question"], "answers": answers}
                )
    return records


def convert_truthfulqa(path: Union[Path, str]) -> List[Dict]:
    """TruthfulQA CSV (``Question``, ``Best Answer``, ``Correct Answers``)
    into ``truthfulqa_like`` records."""
    records = []
    with open(path, "r", encoding="utf_8", newline="") as csv_file:
        reader = csv.DictReader(csv_file)
        missing = {"Question", "Best Answer"} - set(reader.fieldnames or [])
        if missing:
            raise FormatError(None, f"missing columns {sorted(missing)}")
        for row_no, row in enumerate(reader, start=1):
            correct = [
                answer.strip()
                for answer in (row.get("Correct Answers") or "").split(";")
                if answer.strip()
            ]
            records.append(
                {
                    "id": f"tqa-{row_no:04d}",
                    "question": row["Question"].strip(),
                    "best_answer": row["Best Answer"].strip(),
                    "correct_answers": correct,
                }
            )
    return records


def convert_wikiqa(path: Union[Path, str]) -> List[Dict]:
    """WikiQA TSV into ``wikiqa_like`` records, one per question with at
    least one sentence labelled 1."""
    questions: Dict[str, Dict] = OrderedDict()
    with open(path, "r", encoding="utf_8", newline="") as tsv_file:
        reader = csv.DictReader(tsv_file, delimiter="\t", quoting=csv.QUOTE_NONE)
        missing = {"QuestionID", "Question", "Sentence", "Label"} - set(
            reader.fieldnames or []
        )
        if missing:
            raise FormatError(None, f"missing columns {sorted(missing)}")
        for row in reader:
            entry = questions.setdefault(
                row["QuestionID"],
                {"id": row["QuestionID"], "question": row["Question"], "answers": []},
            )
            if row["Label"].strip() == "1":
                entry["answers"].append(row["Sentence"].strip())
    return [entry for entry in questions.values() if entry["answers"]]


CONVERTERS = {
    "squad": (convert_squad, "squad_like"),
    "truthfulqa": (convert_truthfulqa, "truthfulqa_like"),
    "wikiqa": (convert_wikiqa, "wikiqa_like"),
}


def convert_dataset(
    source_format: str, src: Union[Path, str], dest: Union[Path, str]
) -> int:
    """Convert ``src`` and write the JSONL records to ``dest``.

    :return: number of records written
    """
    if source_format not in CONVERTERS:
        raise InvalidConfig(
            f"Unknown source format {source_format}. "
            f"Valid options: {', '.join(CONVERTERS)}"
        )
    converter, target = CONVERTERS[source_format]
    records = converter(src)
    atomic_write(dest, dumps_jsonl(records))
    log.info(f"Converted {len(records)} {source_format} records into {target} at {dest}")
    return len(records)
