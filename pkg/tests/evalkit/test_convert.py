import os

import pytest

from hybridrag.evalkit.convert import (
    convert_dataset,
    convert_squad,
    convert_truthfulqa,
    convert_wikiqa,
)
from hybridrag.evalkit.datasets import load_dataset
from hybridrag.exceptions import FormatError, InvalidConfig


def _raw(data_dir, name):
    return os.path.join(data_dir, "raw", name)


def test_convert_squad_skips_impossible(data_dir):
    assert convert_squad(_raw(data_dir, "squad_v2.json")) == [
        {"id": "s1", "question": "Where was Einstein born?", "answers": ["Ulm"]}
    ]


def test_convert_truthfulqa(data_dir):
    records = convert_truthfulqa(_raw(data_dir, "truthfulqa.csv"))
    assert [r["id"] for r in records] == ["tqa-0001", "tqa-0002"]
    assert records[1]["correct_answers"] == [
        "The sun is white",
        "The sun appears white from space",
    ]


def test_convert_wikiqa_keeps_labelled_sentences(data_dir):
    assert convert_wikiqa(_raw(data_dir, "wikiqa.tsv")) == [
        {
            "id": "Q1",
            "question": "how are glacier caves formed?",
            "answers": ["A glacier cave is a cave formed within the ice of a glacier."],
        }
    ]


@pytest.mark.parametrize(
    "source_format, raw, dataset_format, count",
    [
        ("squad", "squad_v2.json", "squad_like", 1),
        ("truthfulqa", "truthfulqa.csv", "truthfulqa_like", 2),
        ("wikiqa", "wikiqa.tsv", "wikiqa_like", 1),
    ],
)
def test_converted_files_load(tmpdir, data_dir, source_format, raw, dataset_format, count):
    dest = str(tmpdir / "out.jsonl")
    assert convert_dataset(source_format, _raw(data_dir, raw), dest) == count
    assert len(load_dataset(dest, dataset_format)) == count


def test_convert_unknown_format(tmpdir, data_dir):
    with pytest.raises(InvalidConfig):
        convert_dataset("hotpot", _raw(data_dir, "wikiqa.tsv"), str(tmpdir / "x.jsonl"))


def test_convert_truthfulqa_missing_columns(tmpdir):
    path = tmpdir / "bad.csv"
    path.write("Type,Category\nA,B\n")
    with pytest.raises(FormatError, match="missing columns"):
        convert_truthfulqa(str(path))
