"""End-to-end orchestration: pipeline configuration, the per-problem loop
(teacher lookup -> plan -> code -> ground -> CCW update), the four baseline
strategies, run manifests, and corpus-level runs.

Every strategy funnels through the same grounding loop and scorer, so
comparisons isolate the generation policy.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from . import prompts
from .backend import Backend, BackendConfig, make_backend
from .corpus import (
    Corpus,
    Problem,
    SubProblem,
    assign_domain,
    corpus_digest,
    select_teacher_exemplars,
)
from .errors import CodeExtraction, ConfigInvalid, PlanParse, SignatureMismatch
from .evaluator import (
    Histograms,
    ScoreBoard,
    SubResult,
    error_histogram,
    precision_histogram,
    score,
    write_report,
)
from .grounding import (
    Candidate,
    ErrorClass,
    ExecutionLimits,
    GroundingOutcome,
    ground_loop,
)
from .student import (
    CCW_FULL_CODE,
    CCW_MODES,
    ConsolidatedContextWindow,
    Plan,
    append_ccw,
    extract_candidate,
    generate_code,
    plan_subproblem,
    summarize_function,
)
from .teacher import (
    MODE_STEPWISE,
    MODE_WHOLE,
    VERDICT_APPROVED,
    Critique,
    DomainMemory,
    RefinedExemplar,
    build_guidance_template,
    derive_rationale,
    self_reflect,
)

STRATEGIES = ("mosaic", "direct", "cot", "self_planning", "analogical")

# Recorded in every manifest; identity across strategies is asserted in tests.
GROUNDING_COMPONENT = "grounding.ground_loop/1"
SCORING_COMPONENT = "evaluator.score/1"

TAG_BASE_DIRECT = "baseline.direct"
TAG_BASE_COT = "baseline.cot"
TAG_BASE_PLAN = "baseline.plan"
TAG_BASE_CODE = "baseline.code"
TAG_BASE_RECALL = "baseline.recall"


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    k_debug_rounds: int = 3
    reflection_mode: str = MODE_WHOLE
    reflection_max_iters: int = 3
    ccw_mode: str = "headers"
    teacher_fraction: float = 0.05
    teacher_fraction_unit: str = "subproblems"
    seed: int = 1993
    timeout_s: float = 60.0
    parallel_problems: int = 1
    domain_mode: str = "passthrough"  # passthrough | model_classify
    runner: str = ""
    backend: BackendConfig = field(default_factory=BackendConfig)

    def validate(self) -> None:
        if self.k_debug_rounds < 1:
            raise ConfigInvalid("k_debug_rounds must be >= 1")
        if self.reflection_mode not in (MODE_WHOLE, MODE_STEPWISE):
            raise ConfigInvalid(f"unknown reflection_mode {self.reflection_mode!r}")
        if self.reflection_max_iters < 1:
            raise ConfigInvalid("reflection_max_iters must be >= 1")
        if self.ccw_mode not in CCW_MODES:
            raise ConfigInvalid(f"unknown ccw_mode {self.ccw_mode!r}")
        if not 0 < self.teacher_fraction <= 1:
            raise ConfigInvalid("teacher_fraction must be in (0, 1]")
        if self.teacher_fraction_unit not in ("subproblems", "problems"):
            raise ConfigInvalid("teacher_fraction_unit must be subproblems|problems")
        if self.timeout_s <= 0:
            raise ConfigInvalid("timeout_s must be positive")
        if self.parallel_problems < 1:
            raise ConfigInvalid("parallel_problems must be >= 1")
        if self.domain_mode not in ("passthrough", "model_classify"):
            raise ConfigInvalid(f"unknown domain_mode {self.domain_mode!r}")
        if not self.runner:
            raise ConfigInvalid("runner path is required")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(obj)

    @classmethod
    def from_dict(cls, obj: Mapping) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if "backend" in kwargs:
            backend_obj = kwargs["backend"]
            backend_known = {f.name for f in dataclasses.fields(BackendConfig)}
            backend_unknown = set(backend_obj) - backend_known
            if backend_unknown:
                raise ConfigInvalid(f"unknown backend keys: {sorted(backend_unknown)}")
            kwargs["backend"] = BackendConfig(**backend_obj)
        try:
            config = cls(**kwargs)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from exc
        config.validate()
        return config

    def snapshot(self) -> dict:
        obj = dataclasses.asdict(self)
        obj["backend"] = dataclasses.asdict(self.backend)
        return obj


@dataclass
class ProblemResult:
    problem_id: str
    domain: str
    sub_results: list[SubResult]
    chain: list[Candidate]
    warnings: list[str] = field(default_factory=list)
    zero_shot: bool = False


@dataclass
class RunOutput:
    results: list[SubResult]
    scoreboard: ScoreBoard
    report_paths: tuple[Path, Path]
    manifest: dict
    problem_results: list[ProblemResult]
    out_dir: Path


# --------------------------------------------------------------------------
# Teacher phase
# --------------------------------------------------------------------------

def reflection_stats(critique_log: Sequence[Critique]) -> tuple[int, bool]:
    """(iterations used, converged) from a reflection critique log."""
    if not critique_log:
        return 0, False
    last_iteration = max(c.iteration for c in critique_log)
    final = [c for c in critique_log if c.iteration == last_iteration]
    converged = all(c.verdict == VERDICT_APPROVED for c in final)
    return last_iteration, converged


def run_teacher_phase(
    corpus: Corpus, config: PipelineConfig, backend: Backend
) -> tuple[DomainMemory, dict]:
    """Distill per-domain guidance templates from the validation split."""
    exemplar_map = select_teacher_exemplars(
        corpus, config.teacher_fraction, config.seed, unit=config.teacher_fraction_unit
    )
    memory = DomainMemory()
    info: dict = {"domains": {}, "zero_shot_domains": []}
    for domain in sorted(exemplar_map):
        refined: list[RefinedExemplar] = []
        for sub in exemplar_map[domain]:
            problem = corpus.parent_of(sub.id)
            rationale = derive_rationale(sub, backend)
            pseudocode, critique_log = self_reflect(
                rationale,
                sub,
                mode=config.reflection_mode,
                max_iters=config.reflection_max_iters,
                backend=backend,
            )
            iterations, converged = reflection_stats(critique_log)
            refined.append(
                RefinedExemplar(
                    problem_id=problem.id,
                    domain=domain,
                    subproblem=sub,
                    pseudocode=pseudocode,
                    iterations=iterations,
                    converged=converged,
                )
            )
        template = build_guidance_template(domain, refined, memory)
        info["domains"][domain] = [
            {"exemplar_id": p.exemplar_id, "iterations": p.iterations,
             "converged": p.converged}
            for p in template.provenance
        ]
    info["zero_shot_domains"] = sorted(
        {p.domain for p in corpus.test_problems()} - set(exemplar_map)
    )
    return memory, info


# --------------------------------------------------------------------------
# Per-problem pipelines
# --------------------------------------------------------------------------

def _fallback_candidate(exc: Exception, sub: SubProblem) -> Candidate:
    """Candidate-level generation failures still produce a chain member so
    later steps run; grounding classifies whatever the response was."""
    raw = getattr(exc, "raw", "") or ""
    code = raw if raw.strip() else (
        f"raise NotImplementedError('no code generated for {sub.signature.name}')"
    )
    return Candidate(code=code, signature=sub.signature, subproblem=sub.id)


def _sub_result(problem: Problem, sub: SubProblem,
                outcome: GroundingOutcome) -> SubResult:
    last = outcome.reports[-1]
    deviations = tuple(
        c.deviation for c in last.case_results if c.deviation is not None
    )
    return SubResult(
        problem_id=problem.id,
        subproblem_id=sub.id,
        domain=problem.domain,
        passed=last.passed,
        error_class=last.error_class,
        deviations=deviations,
        rounds_used=outcome.rounds_used,
    )


def solve_problem(
    problem: Problem,
    config: PipelineConfig,
    memory: DomainMemory | None,
    backend: Backend,
    runner: str,
    scratch_dir: str | Path,
) -> ProblemResult:
    """The mosaic per-problem loop: plan -> code -> ground -> CCW update,
    strictly in step order with a fresh CCW. Candidate-level failures are
    recorded, never fatal; the final candidate always joins the chain."""
    template = memory.get(problem.domain) if memory is not None else None
    result = ProblemResult(
        problem_id=problem.id,
        domain=problem.domain,
        sub_results=[],
        chain=[],
        zero_shot=template is None,
    )
    ccw = ConsolidatedContextWindow(mode=config.ccw_mode)
    limits = ExecutionLimits(scratch_dir=Path(scratch_dir), timeout_s=config.timeout_s)

    for sub in problem.subproblems:
        try:
            plan = plan_subproblem(sub, template, ccw, backend)
            result.warnings.extend(plan.warnings)
        except PlanParse as exc:
            result.warnings.append(f"{sub.id}: plan fallback: {exc}")
            plan = Plan(
                steps=(f"Implement {sub.signature.name} exactly as the header specifies.",),
                referenced_functions=frozenset(),
                subproblem=sub.id,
            )
        try:
            candidate = generate_code(plan, sub, ccw, backend)
        except (CodeExtraction, SignatureMismatch) as exc:
            result.warnings.append(f"{sub.id}: generation fallback: {exc}")
            candidate = _fallback_candidate(exc, sub)

        outcome = ground_loop(
            candidate, result.chain, sub.eval_suite, config.k_debug_rounds,
            backend, runner, limits,
        )
        result.chain.append(outcome.final_candidate)
        result.sub_results.append(_sub_result(problem, sub, outcome))

        summary = summarize_function(outcome.final_candidate, backend)
        body = outcome.final_candidate.code if config.ccw_mode == CCW_FULL_CODE else None
        ccw = append_ccw(ccw, sub.signature, summary, body=body)
    return result


def _baseline_candidate(
    strategy: str, sub: SubProblem, chain: Sequence[Candidate], backend: Backend
) -> Candidate:
    if strategy == "direct":
        system, user = prompts.render(
            "baseline_direct",
            statement=sub.step_statement,
            background=sub.background or "(none)",
            header=sub.signature.header_text,
        )
        response = backend.complete(backend.build_request(system, user, tag=TAG_BASE_DIRECT))
        return extract_candidate(response.content, sub.signature, sub.id)
    if strategy == "cot":
        system, user = prompts.render(
            "baseline_cot",
            statement=sub.step_statement,
            background=sub.background or "(none)",
            header=sub.signature.header_text,
        )
        response = backend.complete(backend.build_request(system, user, tag=TAG_BASE_COT))
        return extract_candidate(response.content, sub.signature, sub.id)

    prior_code = "\n\n".join(c.code for c in chain) or "(none yet)"
    if strategy == "self_planning":
        system, user = prompts.render(
            "baseline_plan",
            statement=sub.step_statement,
            background=sub.background or "(none)",
            prior_code=prior_code,
            header=sub.signature.header_text,
        )
        plan_text = backend.complete(
            backend.build_request(system, user, tag=TAG_BASE_PLAN)
        ).content
        system, user = prompts.render(
            "baseline_plan_code",
            plan=plan_text,
            prior_code=prior_code,
            header=sub.signature.header_text,
        )
        response = backend.complete(backend.build_request(system, user, tag=TAG_BASE_CODE))
        return extract_candidate(response.content, sub.signature, sub.id)
    if strategy == "analogical":
        system, user = prompts.render(
            "baseline_analogical_recall", statement=sub.step_statement
        )
        example = backend.complete(
            backend.build_request(system, user, tag=TAG_BASE_RECALL)
        ).content
        system, user = prompts.render(
            "baseline_analogical_code",
            statement=sub.step_statement,
            background=sub.background or "(none)",
            example=example,
            header=sub.signature.header_text,
        )
        response = backend.complete(backend.build_request(system, user, tag=TAG_BASE_CODE))
        return extract_candidate(response.content, sub.signature, sub.id)
    raise ConfigInvalid(f"unknown baseline strategy {strategy!r}")


def run_baseline(
    strategy: str,
    problem: Problem,
    config: PipelineConfig,
    backend: Backend,
    runner: str,
    scratch_dir: str | Path,
) -> ProblemResult:
    """Baseline per-problem loop sharing the mosaic grounding path."""
    result = ProblemResult(
        problem_id=problem.id, domain=problem.domain, sub_results=[], chain=[]
    )
    limits = ExecutionLimits(scratch_dir=Path(scratch_dir), timeout_s=config.timeout_s)
    for sub in problem.subproblems:
        try:
            candidate = _baseline_candidate(strategy, sub, result.chain, backend)
        except (CodeExtraction, SignatureMismatch) as exc:
            result.warnings.append(f"{sub.id}: generation fallback: {exc}")
            candidate = _fallback_candidate(exc, sub)
        outcome = ground_loop(
            candidate, result.chain, sub.eval_suite, config.k_debug_rounds,
            backend, runner, limits,
        )
        result.chain.append(outcome.final_candidate)
        result.sub_results.append(_sub_result(problem, sub, outcome))
    return result


# --------------------------------------------------------------------------
# Corpus-level run
# --------------------------------------------------------------------------

def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def run_corpus(
    corpus: Corpus,
    config: PipelineConfig,
    strategy: str,
    out_dir: str | Path,
    backend: Backend | None = None,
    memory: DomainMemory | None = None,
) -> RunOutput:
    """Full run: (mosaic-only) teacher phase, student phase over the test
    split with bounded problem concurrency, scoring, and report emission."""
    if strategy not in STRATEGIES:
        raise ConfigInvalid(f"unknown strategy {strategy!r}")
    config.validate()
    test_problems = corpus.test_problems()
    if not test_problems:
        raise ConfigInvalid("corpus has an empty test split")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scratch = out_dir / "scratch"
    scratch.mkdir(exist_ok=True)
    if backend is None:
        backend = make_backend(config.backend)

    started_at = _utc_now()
    digest = corpus_digest(corpus)
    teacher_info: dict = {"ran": False}
    if strategy == "mosaic":
        if memory is None:
            memory, teacher_info = run_teacher_phase(corpus, config, backend)
            teacher_info["ran"] = True
        else:
            teacher_info = {"ran": False, "loaded": True,
                            "domains": {d: [] for d in memory.domains()}}
        memory.save(out_dir / "memory")

    assignments = []
    runnable: list[Problem] = []
    for problem in test_problems:
        label = assign_domain(problem, config.domain_mode, backend,
                              domains=corpus.domains)
        assignments.append(
            {"problem": problem.id, "mode": config.domain_mode, "label": label}
        )
        runnable.append(
            problem if label == problem.domain else replace(problem, domain=label)
        )

    def run_one(problem: Problem) -> ProblemResult:
        if strategy == "mosaic":
            return solve_problem(problem, config, memory, backend, config.runner, scratch)
        return run_baseline(strategy, problem, config, backend, config.runner, scratch)

    try:
        if config.parallel_problems > 1:
            with ThreadPoolExecutor(max_workers=config.parallel_problems) as pool:
                problem_results = list(pool.map(run_one, runnable))
        else:
            problem_results = [run_one(p) for p in runnable]
    except Exception as exc:
        # infrastructure failure: leave a partial manifest behind, then raise
        partial = {
            "strategy": strategy,
            "corpus_digest": digest,
            "config": config.snapshot(),
            "aborted": f"{type(exc).__name__}: {exc}",
            "started_at": started_at,
            "finished_at": _utc_now(),
        }
        (out_dir / "manifest.json").write_text(
            json.dumps(partial, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        backend.transcript.write_jsonl(out_dir / "transcript.jsonl")
        raise

    results = [r for pr in problem_results for r in pr.sub_results]
    expected = {p.id: [s.id for s in p.subproblems] for p in runnable}
    scoreboard = score(results, expected=expected)
    histograms = Histograms(
        errors=error_histogram(results), precision=precision_histogram(results)
    )

    report_manifest = {
        "strategy": strategy,
        "corpus_digest": digest,
        "config": config.snapshot(),
        "template_versions": prompts.template_versions(),
        "components": {"grounding": GROUNDING_COMPONENT, "scoring": SCORING_COMPONENT},
    }
    report_paths = write_report(scoreboard, histograms, report_manifest, out_dir)
    _write_results(out_dir / "results.json", strategy, digest, results)

    transcript_path = out_dir / "transcript.jsonl"
    backend.transcript.write_jsonl(transcript_path)
    manifest = {
        **report_manifest,
        "decoding_note": "temperature and max_tokens are engine defaults "
                         "unless the config overrides them",
        "teacher": teacher_info,
        "domain_assignment": assignments,
        "problems": [
            {
                "id": pr.problem_id,
                "domain": pr.domain,
                "zero_shot": pr.zero_shot,
                "warnings": pr.warnings,
                "subproblems": [
                    {
                        "id": r.subproblem_id,
                        "passed": r.passed,
                        "error_class": r.error_class.value,
                        "rounds_used": r.rounds_used,
                    }
                    for r in pr.sub_results
                ],
            }
            for pr in problem_results
        ],
        "transcript": transcript_path.name,
        "started_at": started_at,
        "finished_at": _utc_now(),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return RunOutput(
        results=results,
        scoreboard=scoreboard,
        report_paths=report_paths,
        manifest=manifest,
        problem_results=problem_results,
        out_dir=out_dir,
    )


# --------------------------------------------------------------------------
# Results file round-trip (consumed by the evaluate/report CLI commands)
# --------------------------------------------------------------------------

def _encode_deviation(d: float):
    return "inf" if math.isinf(d) else d


def _write_results(path: Path, strategy: str, digest: str,
                   results: Sequence[SubResult]) -> None:
    payload = {
        "v": 1,
        "strategy": strategy,
        "corpus_digest": digest,
        "results": [
            {
                "problem_id": r.problem_id,
                "subproblem_id": r.subproblem_id,
                "domain": r.domain,
                "passed": r.passed,
                "error_class": r.error_class.value,
                "deviations": [_encode_deviation(d) for d in r.deviations],
                "rounds_used": r.rounds_used,
            }
            for r in results
        ],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def load_results(path: str | Path) -> tuple[list[SubResult], dict]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    results = [
        SubResult(
            problem_id=r["problem_id"],
            subproblem_id=r["subproblem_id"],
            domain=r["domain"],
            passed=r["passed"],
            error_class=ErrorClass(r["error_class"]),
            deviations=tuple(
                math.inf if d == "inf" else float(d) for d in r.get("deviations", [])
            ),
            rounds_used=int(r.get("rounds_used", 0)),
        )
        for r in obj["results"]
    ]
    meta = {k: v for k, v in obj.items() if k != "results"}
    return results, meta
