"""Command-line entry points.

Exit codes: 0 success, 1 infrastructure failure (backend/runner/IO),
2 configuration or corpus errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backend import make_backend
from .corpus import load_corpus
from .driver import (
    STRATEGIES,
    PipelineConfig,
    load_results,
    run_corpus,
    run_teacher_phase,
)
from .errors import (
    BackendError,
    ConfigInvalid,
    CorpusEmpty,
    DuplicateId,
    MosaicError,
    SchemaViolation,
    SplitOverlap,
)
from .evaluator import (
    Histograms,
    domain_order,
    error_histogram,
    precision_histogram,
    score,
    write_report,
)
from .teacher import DomainMemory

_CONFIG_ERRORS = (ConfigInvalid, CorpusEmpty, SchemaViolation, DuplicateId, SplitOverlap)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mosaic",
        description="Generate, ground, and evaluate scientific code for "
                    "chained subproblems without I/O test supervision.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    teacher = sub.add_parser("teacher-build",
                             help="distill per-domain guidance templates")
    teacher.add_argument("--corpus", required=True)
    teacher.add_argument("--config", required=True)
    teacher.add_argument("--out", default="mosaic-out",
                         help="directory receiving memory/<domain>.json")
    teacher.add_argument("--replay", help="transcript file for scripted replay")

    run = sub.add_parser("run", help="run a strategy over the corpus test split")
    run.add_argument("--corpus", required=True)
    run.add_argument("--config", required=True)
    run.add_argument("--strategy", required=True, choices=STRATEGIES)
    run.add_argument("--replay", help="transcript file for scripted replay")
    run.add_argument("--out", default="mosaic-out")
    run.add_argument("--memory", help="prebuilt memory directory (skips teacher phase)")

    evaluate = sub.add_parser("evaluate", help="score a results file")
    evaluate.add_argument("--results", required=True)

    report = sub.add_parser("report", help="write report files from a results file")
    report.add_argument("--results", required=True)
    report.add_argument("--out", required=True)
    return parser


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config)
    if getattr(args, "replay", None):
        import dataclasses

        config = dataclasses.replace(
            config, backend=config.backend.with_replay(args.replay)
        )
    return config


def _cmd_teacher_build(args) -> int:
    config = _load_config(args)
    corpus = load_corpus(args.corpus)
    backend = make_backend(config.backend)
    memory, info = run_teacher_phase(corpus, config, backend)
    out = Path(args.out)
    memory.save(out / "memory")
    backend.transcript.write_jsonl(out / "teacher-transcript.jsonl")
    for domain in memory.domains():
        entries = info["domains"].get(domain, [])
        print(f"{domain}: {len(entries)} exemplar(s) distilled")
    if info.get("zero_shot_domains"):
        print(f"zero-shot domains: {', '.join(info['zero_shot_domains'])}")
    print(f"memory written to {out / 'memory'}")
    return 0


def _cmd_run(args) -> int:
    config = _load_config(args)
    corpus = load_corpus(args.corpus)
    memory = DomainMemory.load(args.memory) if args.memory else None
    output = run_corpus(corpus, config, args.strategy, args.out, memory=memory)
    total = output.scoreboard.total
    print(f"strategy={args.strategy} main={total.main_solved}/{total.main_total} "
          f"sub={total.sub_solved}/{total.sub_total}")
    print(f"reports: {output.report_paths[0]} {output.report_paths[1]}")
    return 0


def _print_scoreboard(scoreboard) -> None:
    total = scoreboard.total
    print(f"total: main {total.main_solved}/{total.main_total} | "
          f"sub {total.sub_solved}/{total.sub_total}")
    for domain in domain_order(scoreboard.per_domain):
        tally = scoreboard.per_domain[domain]
        print(f"{domain}: main {tally.main_solved}/{tally.main_total} | "
              f"sub {tally.sub_solved}/{tally.sub_total}")


def _cmd_evaluate(args) -> int:
    results, _ = load_results(args.results)
    _print_scoreboard(score(results))
    return 0


def _cmd_report(args) -> int:
    results, meta = load_results(args.results)
    scoreboard = score(results)
    histograms = Histograms(
        errors=error_histogram(results), precision=precision_histogram(results)
    )
    manifest = {k: meta[k] for k in ("strategy", "corpus_digest") if k in meta}
    json_path, md_path = write_report(scoreboard, histograms, manifest, args.out)
    print(f"wrote {json_path} and {md_path}")
    return 0


_COMMANDS = {
    "teacher-build": _cmd_teacher_build,
    "run": _cmd_run,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BackendError, MosaicError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
