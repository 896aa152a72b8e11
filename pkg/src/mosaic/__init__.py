"""Multi-agent engine for scientific code generation without I/O test
supervision: a teacher distills per-domain guidance from validation ground
truth, a student plans and generates chained subproblem code under a
consolidated context window, a debugger grounds it syntactically, and an
evaluator scores runs under the all-subproblems-pass rule."""

from .backend import (
    BackendConfig,
    ChatRequest,
    ChatResponse,
    LiveBackend,
    ScriptedBackend,
    Transcript,
    canonical_digest,
    make_backend,
    scripted_complete,
)
from .corpus import (
    Corpus,
    EvalCase,
    FunctionSignature,
    Problem,
    SubProblem,
    TargetValue,
    assign_domain,
    corpus_digest,
    load_corpus,
    select_teacher_exemplars,
    write_corpus,
)
from .driver import (
    STRATEGIES,
    PipelineConfig,
    ProblemResult,
    RunOutput,
    run_baseline,
    run_corpus,
    run_teacher_phase,
    solve_problem,
)
from .evaluator import (
    PrecisionHistogram,
    ScoreBoard,
    SubResult,
    deviation_bin,
    error_histogram,
    precision_histogram,
    score,
    write_report,
)
from .grounding import (
    ErrorClass,
    ExecutionLimits,
    GroundingOutcome,
    RunReport,
    classify_run,
    execute_chain,
    ground_loop,
    repair_eligible,
    stat_category,
)
from .student import (
    Candidate,
    ConsolidatedContextWindow,
    Plan,
    append_ccw,
    generate_code,
    plan_subproblem,
    render_ccw,
    summarize_function,
)
from .teacher import (
    Critique,
    DomainMemory,
    GuidanceTemplate,
    Rationale,
    build_guidance_template,
    derive_rationale,
    self_reflect,
)

__version__ = "0.1.0"
