from abc import ABCMeta, abstractmethod
from typing import Dict, List, Sequence

from hybridrag.utils import tokenize

JUDGE_COLUMNS = (
    "faithfulness",
    "answer_relevancy",
    "context_relevancy",
    "context_precision",
)


class Judge(metaclass=ABCMeta):
    columns = JUDGE_COLUMNS

    @abstractmethod
    def score(
        self,
        question: str,
        answer: str,
        contexts: Sequence[str],
        references: Sequence[str],
    ) -> Dict[str, float]:
        """Scores in [0, 1] for every name of ``columns``."""


def _coverage(covered: set, tokens: List[str]) -> float:
    unique = set(tokens)
    if not unique:
        return 0.0
    return len(unique & covered) / len(unique)


class MockJudge(Judge):
    """Lexical stand-ins for the model graded columns.

    faithfulness: answer tokens found in the context.
    answer_relevancy: question tokens found in the answer.
    context_relevancy: question tokens found in each context item, averaged.
    context_precision: context items holding at least half of some reference.
    """

    def score(self, question, answer, contexts, references) -> Dict[str, float]:
        question_tokens = tokenize(question)
        answer_tokens = tokenize(answer)
        context_sets = [set(tokenize(text)) for text in contexts]
        all_context = set().union(*context_sets) if context_sets else set()
        reference_tokens = [tokenize(ref) for ref in references]
        if context_sets:
            relevancy = sum(_coverage(c, question_tokens) for c in context_sets) / len(
                context_sets
            )
            precise = [
                any(_coverage(c, ref) >= 0.5 for ref in reference_tokens if ref)
                for c in context_sets
            ]
            precision = sum(precise) / len(precise)
        else:
            relevancy = precision = 0.0
        return {
            "faithfulness": _coverage(all_context, answer_tokens),
            "answer_relevancy": _coverage(set(answer_tokens), question_tokens),
            "context_relevancy": relevancy,
            "context_precision": precision,
        }
