import argparse
import dataclasses
import json
import logging
import platform
import sys
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, Optional

import numpy as np
from colorama import Fore, Style, init

import hybridrag
from hybridrag.base.factory import HybridRagFactory
from hybridrag.cli import CLIConfig
from hybridrag.cli.parser import parse_n_values
from hybridrag.cli.stdout import print_err, print_header, print_msg
from hybridrag.config import RETRIEVAL_MODES, Configuration, load_configuration
from hybridrag.evalkit.convert import CONVERTERS, convert_dataset
from hybridrag.evalkit.datasets import DATASET_FORMATS, load_dataset, sample
from hybridrag.evalkit.judge import MockJudge
from hybridrag.evalkit.sweep import run_sweep, sweep_csv
from hybridrag.exceptions import (
    DimensionMismatch,
    HybridRagError,
    InvalidConfig,
    StageError,
)
from hybridrag.pipeline import Answer, Pipeline
from hybridrag.query.augment import RawQuery, augment
from hybridrag.query.router import route
from hybridrag.store.ingest import ingest_corpus
from hybridrag.store.stores import VECTORS_FILE, Stores
from hybridrag.utils import atomic_write, digest, sha256_checksum, sha256_text

init(autoreset=True)
logging.basicConfig(format="%(levelname)s:%(message)s")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2
MANIFEST_FILE = "manifest.json"
REPL_PROMPT = ">>> "
REPL_QUIT = ":quit"


def _config_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--config", "-c", dest="config", default=None, help="Flat key=value config file."
    )
    parent.add_argument("--k", dest="k", type=int, default=None, help="Context size.")
    parent.add_argument(
        "--sim-threshold",
        dest="sim_threshold",
        type=float,
        default=None,
        help="Cosine at which two context items count as duplicates.",
    )
    parent.add_argument(
        "--hops", dest="hops", type=int, choices=(1, 2), default=None, help="Graph hops."
    )
    parent.add_argument(
        "--backend",
        dest="backend",
        default=None,
        choices=tuple(HybridRagFactory.REGISTERED_GATEWAY),
        help="Language model backend.",
    )
    parent.add_argument(
        "--endpoint", dest="endpoint", default=None, help="Base URL of the http backend."
    )
    parent.add_argument("--seed", dest="seed", type=int, default=None)
    parent.add_argument(
        "--mode",
        dest="retrieval_mode",
        choices=RETRIEVAL_MODES,
        default=None,
        help="Retrieval branches used to build the context.",
    )
    parent.add_argument(
        "--trace",
        dest="trace",
        action="store_true",
        default=None,
        help="Print the JSON trace of the stages.",
    )
    parent.add_argument(
        "--store",
        "-s",
        dest="store_dir",
        default=None,
        help="Folder holding the ingested stores.",
    )
    parent.add_argument(
        "--runs-dir",
        dest="runs_dir",
        default=None,
        help="Folder receiving the manifests of ask, repl and inspect-route.",
    )
    parent.add_argument(
        "--verbose", "-v", dest="verbose", action="store_true", default=False
    )
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="hybridrag - hybrid vector and graph question answering"
    )
    parser.add_argument(
        "--version",
        default=False,
        action="store_true",
        dest="version",
        help="Print hybridrag version and exit",
    )
    subparsers = parser.add_subparsers(dest="command", help="sub-command help")
    parent = _config_parent()

    ingest_parser = subparsers.add_parser(
        "ingest", parents=[parent], help="Chunk, embed and graph a JSONL corpus"
    )
    ingest_parser.add_argument("corpus", help="JSONL corpus of {doc_id, title, text}.")
    ingest_parser.add_argument(
        "--out", "-o", dest="out_dir", default=None, help="Store folder to write."
    )

    for name, help_msg in (
        ("ask", "Answer one question"),
        ("inspect-route", "Show the augmented query and its route"),
    ):
        sub = subparsers.add_parser(name, parents=[parent], help=help_msg)
        sub.add_argument("question", help="Question text.")
        sub.add_argument(
            "--web-only",
            dest="web_only",
            action="store_true",
            default=False,
            help="Run without an ingested store.",
        )

    repl_parser = subparsers.add_parser(
        "repl", parents=[parent], help="Answer one question per input line"
    )
    repl_parser.add_argument(
        "--web-only", dest="web_only", action="store_true", default=False
    )

    eval_parser = subparsers.add_parser(
        "eval", parents=[parent], help="Sweep the context size over a QA dataset"
    )
    eval_parser.add_argument("dataset", help="JSONL dataset.")
    eval_parser.add_argument(
        "--format",
        "-f",
        dest="dataset_format",
        choices=DATASET_FORMATS,
        default="wikiqa_like",
    )
    eval_parser.add_argument(
        "--n-values", dest="n_values", default="5,10,15,20", help="Comma separated N."
    )
    eval_parser.add_argument(
        "--sample", dest="sample", type=int, default=None, help="Examples to draw."
    )
    eval_parser.add_argument(
        "--judge", dest="judge", choices=("none", "mock"), default="none"
    )
    eval_parser.add_argument(
        "--out", "-o", dest="out_csv", default="sweep.csv", help="CSV to write."
    )

    convert_parser = subparsers.add_parser(
        "convert-dataset", help="Convert an upstream QA dataset into JSONL"
    )
    convert_parser.add_argument("source_format", choices=tuple(CONVERTERS))
    convert_parser.add_argument("src")
    convert_parser.add_argument("dest")
    convert_parser.add_argument(
        "--verbose", "-v", dest="verbose", action="store_true", default=False
    )
    return parser


def main(args=None):
    if not args:
        args = sys.argv[1:] or ["--help"]
    parser = build_parser()
    args = parser.parse_args(args)

    if args.version:
        print(hybridrag.__version__)
        return EXIT_OK
    if not args.command:
        parser.print_help()
        return EXIT_FATAL

    logging.getLogger().setLevel(logging.DEBUG if args.verbose else logging.WARNING)
    logging.debug(f"All arguments received: args: {args}")
    CLIConfig().stdout = True

    try:
        return COMMANDS[args.command](args)
    except (HybridRagError, OSError) as err:
        print_err(f"{type(err).__name__}: {err}")
        return EXIT_FATAL


def effective_configuration(args) -> Configuration:
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "k",
            "sim_threshold",
            "hops",
            "backend",
            "endpoint",
            "seed",
            "retrieval_mode",
            "trace",
            "store_dir",
            "runs_dir",
        )
    }
    config, _ = load_configuration(getattr(args, "config", None), overrides)
    return config


def write_manifest(
    path: Path, command: str, config: Optional[Configuration] = None, **extra
):
    manifest = {
        "command": command,
        "config": config.as_dict() if config else None,
        "seed": config.pipeline.seed if config else None,
        "versions": {
            "hybridrag": hybridrag.__version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        **extra,
    }
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logging.debug(f"Manifest written to {path}")


def run_manifest_path(config: Configuration, command: str, run_id: str) -> Path:
    return Path(config.runs_dir or ".") / f"{command}-{run_id}.manifest.json"


def open_stores(config: Configuration, required: bool = True) -> Stores:
    if not config.store_dir:
        if required:
            raise InvalidConfig("No store folder given, use --store or --web-only.")
        return Stores.empty(config.backend.embed_dim)
    stores = Stores.load(config.store_dir)
    if stores.dim != config.backend.embed_dim:
        raise DimensionMismatch(config.backend.embed_dim, stores.dim)
    return stores


def _pipeline(config: Configuration, stores: Stores) -> Pipeline:
    gateway = HybridRagFactory.create_gateway(config.backend)
    clients = HybridRagFactory.create_clients(config, stores)
    return Pipeline(config.pipeline, stores, clients, gateway)


def cmd_ingest(args) -> int:
    config = effective_configuration(args)
    corpus = Path(args.corpus)
    if not corpus.is_file():
        print_err(f"Corpus file {corpus} does not exist.")
        return EXIT_FATAL
    out_dir = Path(args.out_dir or config.store_dir or "store")
    if (out_dir / VECTORS_FILE).exists():
        stores = open_stores(dataclasses.replace(config, store_dir=str(out_dir)))
    else:
        stores = Stores.empty(config.backend.embed_dim)
    gateway = HybridRagFactory.create_gateway(config.backend)
    clients = HybridRagFactory.create_clients(config, stores)
    report = ingest_corpus(corpus, stores, gateway, clients.aliases, config.pipeline)
    stores.save(out_dir)
    write_manifest(
        out_dir / MANIFEST_FILE,
        "ingest",
        config,
        corpus=str(corpus),
        corpus_digest=sha256_checksum(corpus),
        report=report.to_dict(),
    )
    print_msg(json.dumps(report.to_dict(), sort_keys=True))
    for skipped in report.skipped:
        print_err(f"Skipped corpus line {skipped['line']}: {skipped['error']}")
    return EXIT_PARTIAL if report.partial else EXIT_OK


def _print_answer(pipeline: Pipeline, query: RawQuery, trace: bool) -> Answer:
    answer = pipeline.answer(query)
    print_msg(answer.text)
    if trace:
        print_msg(json.dumps(answer.to_dict(), sort_keys=True, ensure_ascii=False))
    return answer


def _answer_summary(query: RawQuery, answer: Optional[Answer], error=None) -> Dict:
    summary = {"id": query.id, "question": query.text}
    if answer is not None:
        summary["source"] = answer.route.source.value
        summary["prompt_digest"] = digest(answer.prompt.as_dict())
        summary["answer_digest"] = sha256_text(answer.text)
    if error is not None:
        summary["error"] = f"{type(error).__name__}: {error}"
    return summary


def cmd_ask(args) -> int:
    config = effective_configuration(args)
    stores = open_stores(config, required=not args.web_only)
    pipeline = _pipeline(config, stores)
    query = RawQuery(args.question)
    answer, failure = None, None
    try:
        answer = _print_answer(pipeline, query, config.pipeline.trace)
    except StageError as err:
        print_err(str(err))
        failure = err
    write_manifest(
        run_manifest_path(config, "ask", query.id),
        "ask",
        config,
        questions=[_answer_summary(query, answer, failure)],
    )
    return EXIT_FATAL if failure else EXIT_OK


def cmd_repl(args, input_func=input) -> int:
    config = effective_configuration(args)
    stores = open_stores(config, required=not args.web_only)
    pipeline = _pipeline(config, stores)
    run_id = datetime.now().strftime("%Y%m%dT%H%M%S%f")
    asked = []
    try:
        while True:
            try:
                line = input_func(REPL_PROMPT)
            except EOFError:
                return EXIT_OK
            question = line.strip()
            if question == REPL_QUIT:
                return EXIT_OK
            if not question:
                continue
            query, answer, failure = None, None, None
            try:
                query = RawQuery(question)
                answer = _print_answer(pipeline, query, config.pipeline.trace)
            except HybridRagError as err:
                print_err(str(err))
                failure = err
            if query is not None:
                asked.append(_answer_summary(query, answer, failure))
    finally:
        write_manifest(
            run_manifest_path(config, "repl", run_id), "repl", config, questions=asked
        )


def cmd_inspect_route(args) -> int:
    config = effective_configuration(args)
    stores = open_stores(config, required=not args.web_only)
    pipeline = _pipeline(config, stores)
    aq = augment(
        RawQuery(args.question),
        pipeline.gateway,
        pipeline.clients.aliases,
        pipeline.clients.acronyms,
        config.pipeline,
    )
    decision = route(aq, pipeline.clients.facts, pipeline.gateway)
    write_manifest(
        run_manifest_path(config, "inspect-route", aq.original.id),
        "inspect-route",
        config,
        query=aq.to_dict(),
        route=decision.to_dict(),
    )
    print_msg(
        json.dumps(
            {"query": aq.to_dict(), "route": decision.to_dict()},
            indent=2,
            sort_keys=True,
            ensure_ascii=False,
        )
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    config = effective_configuration(args)
    n_values = parse_n_values(args.n_values)
    examples = load_dataset(args.dataset, args.dataset_format)
    if args.sample is not None:
        examples = sample(examples, args.sample, config.pipeline.seed)
    stores = open_stores(config, required=False)
    pipeline = _pipeline(config, stores)
    judge = MockJudge() if args.judge == "mock" else None
    reports = run_sweep(
        examples,
        n_values,
        config.pipeline,
        stores,
        pipeline.clients,
        pipeline.gateway,
        judge,
    )
    out_csv = Path(args.out_csv)
    atomic_write(out_csv, sweep_csv(reports, with_judge=judge is not None))
    write_manifest(
        out_csv.with_suffix(".manifest.json"),
        "eval",
        config,
        dataset=str(args.dataset),
        dataset_digest=sha256_checksum(args.dataset),
        n_values=n_values,
        examples=len(examples),
        partial={str(r.n_retrieved): r.failed for r in reports if r.partial},
    )
    print_header(f"{args.dataset}: {len(examples)} examples")
    for report in reports:
        means = ", ".join(f"{k}={v:.4f}" for k, v in report.means().items())
        flag = f" {Fore.YELLOW}(partial){Style.RESET_ALL}" if report.partial else ""
        print_msg(f"{Fore.GREEN}N={report.n_retrieved}{Style.RESET_ALL}: {means}{flag}")
    print_msg(f"Sweep written to {out_csv}")
    return EXIT_PARTIAL if any(r.partial for r in reports) else EXIT_OK


def cmd_convert_dataset(args) -> int:
    count = convert_dataset(args.source_format, args.src, args.dest)
    write_manifest(
        Path(args.dest).with_suffix(".manifest.json"),
        "convert-dataset",
        source_format=args.source_format,
        source=str(args.src),
        source_digest=sha256_checksum(args.src),
        dest=str(args.dest),
        dest_digest=sha256_checksum(args.dest),
        records=count,
    )
    print_msg(f"{count} records written to {args.dest}")
    return EXIT_OK


COMMANDS: Dict[str, Callable[..., int]] = {
    "ingest": cmd_ingest,
    "ask": cmd_ask,
    "repl": cmd_repl,
    "inspect-route": cmd_inspect_route,
    "eval": cmd_eval,
    "convert-dataset": cmd_convert_dataset,
}


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
