import math
from collections import Counter
from typing import List, Sequence

from hybridrag.utils import tokenize


def _check_references(references: Sequence[str]):
    if not references:
        raise ValueError("At least one reference answer is required.")


def bleu1(candidate: str, references: Sequence[str]) -> float:
    """Unigram BLEU: clipped precision against all references times the
    brevity penalty computed from the closest reference length. A candidate
    without tokens scores 1.0 against a reference without tokens."""
    _check_references(references)
    cand_tokens = tokenize(candidate)
    ref_tokens = [tokenize(ref) for ref in references]
    if not cand_tokens:
        # nothing to score: only a reference without tokens matches
        return 1.0 if any(not tokens for tokens in ref_tokens) else 0.0
    max_ref_counts = Counter()
    for tokens in ref_tokens:
        for token, count in Counter(tokens).items():
            max_ref_counts[token] = max(max_ref_counts[token], count)
    clipped = sum(
        min(count, max_ref_counts[token]) for token, count in Counter(cand_tokens).items()
    )
    precision = clipped / len(cand_tokens)
    cand_len = len(cand_tokens)
    ref_len = min((len(t) for t in ref_tokens), key=lambda n: (abs(n - cand_len), n))
    if cand_len > ref_len:
        brevity = 1.0
    else:
        brevity = math.exp(1 - ref_len / cand_len)
    return precision * brevity


def rouge1(candidate: str, references: Sequence[str]) -> float:
    """Unigram recall: clipped overlap over the reference length, best
    reference wins."""
    _check_references(references)
    cand_counts = Counter(tokenize(candidate))
    best = 0.0
    for ref in references:
        ref_tokens = tokenize(ref)
        if not ref_tokens:
            best = max(best, 0.0 if cand_counts else 1.0)
            continue
        overlap = sum(
            min(count, cand_counts[token]) for token, count in Counter(ref_tokens).items()
        )
        best = max(best, overlap / len(ref_tokens))
    return best


def mean(values: List[float]) -> float:
    return sum(values) / len(values) if values else 0.0
