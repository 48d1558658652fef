import csv
import io
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

from hybridrag.cli.stdout import manage_progressbar
from hybridrag.config import PipelineConfig
from hybridrag.evalkit.datasets import QAExample
from hybridrag.evalkit.judge import Judge
from hybridrag.evalkit.metrics import bleu1, mean, rouge1
from hybridrag.exceptions import HybridRagError
from hybridrag.llm.abstract_gateway import AbstractGateway
from hybridrag.pipeline import Clients, Pipeline
from hybridrag.query.augment import RawQuery
from hybridrag.store.stores import Stores

log = logging.getLogger(__name__)

LEXICAL_HEADERS = ("BLEU-1", "ROUGE-1")
JUDGE_HEADERS = {
    "faithfulness": "Faithfulness",
    "answer_relevancy": "Answer Relevancy",
    "context_relevancy": "Context Relevancy",
    "context_precision": "Context Precision",
}


@dataclass
class ExampleScore:
    example_id: str
    bleu1: float = 0.0
    rouge1: float = 0.0
    judge: Dict[str, float] = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class MetricReport:
    n_retrieved: int
    examples: List[ExampleScore] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return any(score.error for score in self.examples)

    @property
    def failed(self) -> List[str]:
        return [score.example_id for score in self.examples if score.error]

    def means(self) -> Dict[str, float]:
        """Arithmetic means over the examples which ran, folded in id order."""
        scored = sorted(
            (s for s in self.examples if not s.error), key=lambda s: s.example_id
        )
        result = {
            "bleu1": mean([s.bleu1 for s in scored]),
            "rouge1": mean([s.rouge1 for s in scored]),
        }
        for column in sorted({c for s in scored for c in s.judge}):
            result[column] = mean([s.judge.get(column, 0.0) for s in scored])
        return result


def evaluate_example(
    pipeline: Pipeline, example: QAExample, judge: Optional[Judge] = None
) -> ExampleScore:
    try:
        answer = pipeline.answer(RawQuery(example.question, id=example.id))
    except HybridRagError as err:
        log.warning(f"Example {example.id} failed: {err}")
        return ExampleScore(example.id, error=str(err))
    score = ExampleScore(
        example.id,
        bleu1=bleu1(answer.text, example.reference_answers),
        rouge1=rouge1(answer.text, example.reference_answers),
    )
    if judge is not None:
        score.judge = judge.score(
            example.question,
            answer.text,
            answer.context.texts(),
            example.reference_answers,
        )
    return score


def run_sweep(
    examples: Sequence[QAExample],
    n_values: Sequence[int],
    cfg: PipelineConfig,
    stores: Stores,
    clients: Clients,
    gateway: AbstractGateway,
    judge: Optional[Judge] = None,
) -> List[MetricReport]:
    """Answer every example once per N (the context size ``k``).

    Failing examples are recorded on their row and the sweep goes on.
    """
    reports = []
    for n in n_values:
        pipeline = Pipeline(replace(cfg, k=n), stores, clients, gateway)
        report = MetricReport(n)
        with manage_progressbar(max_value=len(examples), prefix=f"N={n} ") as bar:
            for pos, example in enumerate(examples):
                report.examples.append(evaluate_example(pipeline, example, judge))
                bar.update(pos + 1)
        if report.partial:
            log.warning(f"N={n}: {len(report.failed)} examples failed")
        reports.append(report)
    return reports


def sweep_csv(reports: Sequence[MetricReport], with_judge: bool = False) -> str:
    """One row per N. The judge columns replace the lexical ones when a judge
    scored the sweep."""
    columns = list(JUDGE_HEADERS) if with_judge else ["bleu1", "rouge1"]
    headers = list(JUDGE_HEADERS.values()) if with_judge else list(LEXICAL_HEADERS)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["N", *headers])
    for report in reports:
        means = report.means()
        writer.writerow(
            [report.n_retrieved, *(f"{means.get(c, 0.0):.4f}" for c in columns)]
        )
    return buffer.getvalue()
