from hybridrag.evalkit.datasets import QAExample, load_dataset, sample
from hybridrag.evalkit.judge import Judge, MockJudge
from hybridrag.evalkit.metrics import bleu1, rouge1
from hybridrag.evalkit.sweep import MetricReport, run_sweep, sweep_csv

__all__ = [
    "Judge",
    "MetricReport",
    "MockJudge",
    "QAExample",
    "bleu1",
    "load_dataset",
    "rouge1",
    "run_sweep",
    "sample",
    "sweep_csv",
]
