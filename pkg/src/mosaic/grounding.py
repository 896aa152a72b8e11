"""Syntactic grounding: run candidate chains through an external runner,
classify outcomes into the error taxonomy, and drive the debugger repair
loop, which is strictly limited to syntax/import failures.

Runner contract (shared wire schema, version 1):
  input  — ``input.json`` file passed as the runner's sole argument:
           {"v": 1, "code": str, "cases": [{entry, args, expected, rtol,
            atol, setup}], "timeout_s": number}
  output — one JSON document on stdout:
           {"v": 1, "phase": "load"|"call"|"compare"|"none",
            "exception_type": str|null, "traceback": str,
            "case_results": [{"index": int, "pass": bool,
                              "deviation": number|"inf"|null}],
            "wall_ms": int}
  exit code 0 for any well-formed report; nonzero only on harness failure.
"""

from __future__ import annotations

import ast
import json
import logging
import math
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from . import prompts
from .corpus import EvalCase
from .errors import (
    CodeExtraction,
    RunnerProtocol,
    RunnerSpawn,
    SignatureMismatch,
    UnknownPhase,
)
from .student import Candidate, extract_candidate
from .textparse import tail_excerpt

log = logging.getLogger(__name__)

TAG_DEBUG = "debugger.repair"

WIRE_VERSION = 1
PHASES = ("load", "call", "compare", "none")
TRACEBACK_LIMIT = 4000
DEFAULT_GRACE_S = 2.0


class ErrorClass(str, Enum):
    NONE = "none"
    SYNTAX_ERROR = "syntax_error"
    IMPORT_ERROR = "import_error"
    RUNTIME_EXCEPTION = "runtime_exception"
    ASSERTION_MISMATCH = "assertion_mismatch"
    TIMEOUT = "timeout"
    RUNNER_CRASH = "runner_crash"


REPAIR_ELIGIBLE = frozenset({ErrorClass.SYNTAX_ERROR, ErrorClass.IMPORT_ERROR})

_SYNTAX_EXCEPTIONS = ("SyntaxError", "IndentationError", "TabError")
_IMPORT_EXCEPTIONS = ("ImportError", "ModuleNotFoundError")


def repair_eligible(error_class: ErrorClass) -> bool:
    return error_class in REPAIR_ELIGIBLE


def stat_category(error_class: ErrorClass) -> str:
    """Two-way split: mismatches are semantic, everything else that fails
    is an execution failure."""
    if error_class is ErrorClass.NONE:
        return "pass"
    if error_class is ErrorClass.ASSERTION_MISMATCH:
        return "semantic"
    return "execution_failure"


@dataclass(frozen=True)
class CaseResult:
    index: int
    passed: bool
    deviation: float | None  # None when the case never reached comparison


@dataclass(frozen=True)
class RunnerOutput:
    """Parsed runner record, before classification."""

    phase: str
    exception_type: str | None
    traceback: str
    case_results: tuple[CaseResult, ...]
    wall_ms: int


@dataclass(frozen=True)
class RunReport:
    status: str  # pass | fail
    error_class: ErrorClass
    phase: str  # load | call | compare | none
    exception_type: str | None
    traceback_excerpt: str
    case_results: tuple[CaseResult, ...]
    wall_ms: int

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass(frozen=True)
class ExecutionLimits:
    scratch_dir: Path
    timeout_s: float = 60.0
    grace_s: float = DEFAULT_GRACE_S


@dataclass(frozen=True)
class GroundingOutcome:
    final_candidate: Candidate
    reports: tuple[RunReport, ...]
    rounds_used: int
    terminal_reason: str  # passed | not_repairable | rounds_exhausted


# --------------------------------------------------------------------------
# Wire encoding / decoding
# --------------------------------------------------------------------------

def encode_runner_input(chain_code: str, suite: Sequence[EvalCase],
                        timeout_s: float) -> dict:
    return {
        "v": WIRE_VERSION,
        "code": chain_code,
        "cases": [case.to_json() for case in suite],
        "timeout_s": timeout_s,
    }


def _decode_deviation(raw) -> float | None:
    if raw is None:
        return None
    if raw == "inf":
        return math.inf
    value = float(raw)
    if value < 0:
        raise ValueError(f"negative deviation {value}")
    return value


def parse_runner_output(text: str) -> RunnerOutput:
    """Strict parse of the runner's stdout record; raises RunnerProtocol."""
    try:
        obj = json.loads(text)
    except ValueError as exc:
        raise RunnerProtocol(f"runner output is not JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise RunnerProtocol("runner output is not an object")
    if obj.get("v", WIRE_VERSION) != WIRE_VERSION:
        raise RunnerProtocol(f"unsupported wire version {obj.get('v')!r}")
    try:
        phase = obj["phase"]
        raw_cases = obj["case_results"]
        wall_ms = int(obj["wall_ms"])
        cases = tuple(
            CaseResult(
                index=int(c["index"]),
                passed=bool(c["pass"]),
                deviation=_decode_deviation(c.get("deviation")),
            )
            for c in raw_cases
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RunnerProtocol(f"malformed runner record: {exc}") from exc
    if phase not in PHASES:
        raise RunnerProtocol(f"runner record carries unknown phase {phase!r}")
    return RunnerOutput(
        phase=phase,
        exception_type=obj.get("exception_type"),
        traceback=str(obj.get("traceback") or ""),
        case_results=cases,
        wall_ms=wall_ms,
    )


# --------------------------------------------------------------------------
# Classification
# --------------------------------------------------------------------------

def classify_run(raw: RunnerOutput) -> ErrorClass:
    """Map a parsed runner record onto the fine error taxonomy."""
    if raw.phase not in PHASES:
        raise UnknownPhase(f"phase {raw.phase!r} (engine/runner version skew?)")
    if raw.phase == "none":
        return ErrorClass.NONE
    if raw.phase == "load":
        if raw.exception_type in _SYNTAX_EXCEPTIONS:
            return ErrorClass.SYNTAX_ERROR
        if raw.exception_type in _IMPORT_EXCEPTIONS:
            return ErrorClass.IMPORT_ERROR
        # Load-time NameError and friends run code, so they are runtime
        # failures and not repair-eligible.
        return ErrorClass.RUNTIME_EXCEPTION
    if raw.phase == "call":
        return ErrorClass.RUNTIME_EXCEPTION
    return ErrorClass.ASSERTION_MISMATCH


def _report_from_output(raw: RunnerOutput) -> RunReport:
    error_class = classify_run(raw)
    return RunReport(
        status="pass" if error_class is ErrorClass.NONE else "fail",
        error_class=error_class,
        phase=raw.phase,
        exception_type=raw.exception_type,
        traceback_excerpt=tail_excerpt(raw.traceback, TRACEBACK_LIMIT),
        case_results=raw.case_results,
        wall_ms=raw.wall_ms,
    )


def _failure_report(error_class: ErrorClass, excerpt: str, wall_ms: int = 0) -> RunReport:
    return RunReport(
        status="fail",
        error_class=error_class,
        phase="none",
        exception_type=None,
        traceback_excerpt=tail_excerpt(excerpt, TRACEBACK_LIMIT),
        case_results=(),
        wall_ms=wall_ms,
    )


# --------------------------------------------------------------------------
# Execution
# --------------------------------------------------------------------------

def chain_code(chain: Sequence[Candidate]) -> str:
    return "\n\n".join(candidate.code for candidate in chain)


def _runner_command(runner: str | Path, input_path: Path) -> list[str]:
    # resolve now: the subprocess runs from the scratch dir, so a relative
    # runner path must be anchored to the engine's working directory
    path = Path(runner).expanduser()
    if not path.is_absolute():
        path = Path.cwd() / path
    if not path.exists():
        raise RunnerSpawn(f"runner executable not found: {path}")
    if path.suffix == ".py":
        return [sys.executable, str(path), str(input_path)]
    return [str(path), str(input_path)]


def _defined_names(code: str) -> set[str]:
    try:
        tree = ast.parse(code)
    except SyntaxError:
        return set()
    return {n.name for n in tree.body if isinstance(n, ast.FunctionDef)}


def execute_chain(
    chain: Sequence[Candidate],
    suite: Sequence[EvalCase],
    runner: str | Path,
    limits: ExecutionLimits,
) -> RunReport:
    """Run the concatenated chain against the suite in a fresh scratch dir.
    A runner that outlives timeout_s + grace_s is killed and reported as a
    timeout; unparsable output becomes a runner_crash report."""
    if not chain:
        raise ValueError("chain must be non-empty")
    code = chain_code(chain)
    defined = _defined_names(code)
    if defined:
        missing = {case.entry for case in suite} - defined
        if missing:
            raise ValueError(f"suite entries not defined in chain: {sorted(missing)}")

    # resolve: the runner gets the input path as an argument while running
    # with the scratch dir as cwd, so a relative scratch root would break it
    workdir = Path(tempfile.mkdtemp(prefix="exec_", dir=limits.scratch_dir)).resolve()
    input_path = workdir / "input.json"
    input_path.write_text(
        json.dumps(encode_runner_input(code, suite, limits.timeout_s)),
        encoding="utf-8",
    )
    command = _runner_command(runner, input_path)
    try:
        proc = subprocess.run(
            command,
            cwd=workdir,
            capture_output=True,
            text=True,
            timeout=limits.timeout_s + limits.grace_s,
        )
    except subprocess.TimeoutExpired:
        return _failure_report(
            ErrorClass.TIMEOUT,
            f"runner exceeded {limits.timeout_s}s deadline (grace {limits.grace_s}s)",
            wall_ms=int((limits.timeout_s + limits.grace_s) * 1000),
        )
    except FileNotFoundError as exc:
        raise RunnerSpawn(f"runner executable not found: {command[0]}") from exc

    if proc.returncode != 0:
        return _failure_report(
            ErrorClass.RUNNER_CRASH,
            f"runner exited {proc.returncode}\nstderr:\n{proc.stderr}",
        )
    try:
        raw = parse_runner_output(proc.stdout)
    except RunnerProtocol as exc:
        return _failure_report(
            ErrorClass.RUNNER_CRASH,
            f"{exc}\nraw output:\n{proc.stdout}",
        )
    return _report_from_output(raw)


# --------------------------------------------------------------------------
# Repair loop
# --------------------------------------------------------------------------

def _repair(candidate: Candidate, report: RunReport, backend) -> Candidate:
    """One debugger call: the failing code and its traceback, nothing else
    (expected values never reach this prompt)."""
    system, user = prompts.render(
        "debug",
        code=candidate.code,
        traceback=report.traceback_excerpt or "(no traceback captured)",
        header=candidate.signature.header_text,
    )
    response = backend.complete(backend.build_request(system, user, tag=TAG_DEBUG))
    return extract_candidate(
        response.content,
        candidate.signature,
        candidate.subproblem,
        generation_round=candidate.generation_round + 1,
    )


def ground_loop(
    candidate: Candidate,
    prior_chain: Sequence[Candidate],
    suite: Sequence[EvalCase],
    k: int,
    backend,
    runner: str | Path,
    limits: ExecutionLimits,
) -> GroundingOutcome:
    """Execute, then repair-and-re-execute while the failure is a syntax or
    import error, up to k rounds. Anything else ends the loop immediately."""
    if k < 1:
        raise ValueError("k must be >= 1")
    current = candidate
    reports: list[RunReport] = []
    rounds_used = 0
    while True:
        report = execute_chain(list(prior_chain) + [current], suite, runner, limits)
        reports.append(report)
        if report.passed or not repair_eligible(report.error_class):
            break
        if rounds_used >= k:
            break
        try:
            current = _repair(current, report, backend)
        except (CodeExtraction, SignatureMismatch) as exc:
            log.warning("debugger response unusable for %s: %s", current.subproblem, exc)
            break
        rounds_used += 1

    last = reports[-1]
    if last.passed:
        terminal = "passed"
    elif not repair_eligible(last.error_class):
        terminal = "not_repairable"
    else:
        terminal = "rounds_exhausted"
    return GroundingOutcome(
        final_candidate=current,
        reports=tuple(reports),
        rounds_used=rounds_used,
        terminal_reason=terminal,
    )
