"""Student module: rationale-agent planning with few-shot guidance, the
consolidated context window (CCW), code generation against the required
signature, and per-function summaries feeding CCW updates."""

from __future__ import annotations

import ast
import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from . import prompts
from .corpus import FunctionSignature, SubProblem
from .errors import CodeExtraction, PlanParse, SignatureMismatch
from .teacher import GuidanceTemplate, render_guidance
from .textparse import (
    called_names,
    extract_fenced_code,
    first_sentence,
    is_builtin_name,
    mentioned_names,
    one_sentence,
    parse_numbered_steps,
)

log = logging.getLogger(__name__)

TAG_PLAN = "student.plan"
TAG_CODE = "student.code"
TAG_SUMMARY = "student.summarize"

CCW_HEADERS = "headers"
CCW_FULL_CODE = "full_code"
CCW_NONE = "none"
CCW_MODES = (CCW_HEADERS, CCW_FULL_CODE, CCW_NONE)

CCW_EMPTY_MARKER = "# (no prior context)"
SUMMARY_MAX_CHARS = 160


@dataclass(frozen=True)
class CcwEntry:
    signature: FunctionSignature
    summary: str


@dataclass(frozen=True)
class ConsolidatedContextWindow:
    """Ordered (signature, one-sentence summary) pairs threaded through a
    problem's steps. Bodies are retained only in full_code mode."""

    entries: tuple[CcwEntry, ...] = ()
    mode: str = CCW_HEADERS
    full_bodies: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in CCW_MODES:
            raise ValueError(f"unknown CCW mode {self.mode!r}")
        object.__setattr__(self, "full_bodies", MappingProxyType(dict(self.full_bodies)))

    def names(self) -> list[str]:
        return [e.signature.name for e in self.entries]


def normalize_summary(text: str) -> str:
    summary = one_sentence(text, SUMMARY_MAX_CHARS)
    return summary if summary else "No summary available."


def render_ccw(ccw: ConsolidatedContextWindow) -> str:
    """headers: one block per entry (header + '# ' + summary, nothing else);
    full_code: the stored bodies verbatim; none: just the empty marker."""
    if ccw.mode == CCW_NONE or not ccw.entries:
        return CCW_EMPTY_MARKER
    blocks = []
    for entry in ccw.entries:
        if ccw.mode == CCW_FULL_CODE:
            body = ccw.full_bodies.get(entry.signature.name)
            if body is None:
                body = f"{entry.signature.header_text}\n# {entry.summary}"
            blocks.append(body)
        else:
            blocks.append(f"{entry.signature.header_text}\n# {entry.summary}")
    return "\n\n".join(blocks)


def append_ccw(
    ccw: ConsolidatedContextWindow,
    signature: FunctionSignature,
    summary: str,
    body: str | None = None,
) -> ConsolidatedContextWindow:
    """Non-destructive append; a same-name entry is replaced in place
    (latest wins). `body` is retained only in full_code mode."""
    if "\n" in summary or len(summary) > SUMMARY_MAX_CHARS:
        raise ValueError("summary must be a single sentence of <= 160 chars")
    entry = CcwEntry(signature=signature, summary=summary)
    entries = list(ccw.entries)
    for i, existing in enumerate(entries):
        if existing.signature.name == signature.name:
            entries[i] = entry
            break
    else:
        entries.append(entry)
    bodies = dict(ccw.full_bodies)
    if ccw.mode == CCW_FULL_CODE and body is not None:
        bodies[signature.name] = body
    return ConsolidatedContextWindow(entries=tuple(entries), mode=ccw.mode,
                                     full_bodies=bodies)


# --------------------------------------------------------------------------
# Plans
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Plan:
    steps: tuple[str, ...]
    referenced_functions: frozenset[str]
    subproblem: str
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.steps:
            raise ValueError("plan steps must be non-empty")


def plan_subproblem(
    sub: SubProblem,
    template: GuidanceTemplate | None,
    ccw: ConsolidatedContextWindow,
    backend,
) -> Plan:
    """One planning call. Prompt order: few-shot exemplars (if any),
    rendered CCW, then statement + background + required header."""
    system, user = prompts.render(
        "plan",
        exemplar_block=render_guidance(template),
        ccw=render_ccw(ccw),
        statement=sub.step_statement,
        background=sub.background or "(none)",
        header=sub.signature.header_text,
    )
    response = backend.complete(backend.build_request(system, user, tag=TAG_PLAN))
    steps = parse_numbered_steps(response.content)
    if not steps:
        raise PlanParse(f"no numbered plan steps for {sub.id}")

    known = set(ccw.names()) | {sub.signature.name}
    plan_text = "\n".join(steps)
    referenced = frozenset(mentioned_names(plan_text) & known)
    warnings = tuple(
        f"plan for {sub.id} references unknown function {name!r}"
        for name in called_names(plan_text)
        if name not in known and not is_builtin_name(name)
    )
    for warning in warnings:
        log.warning(warning)
    return Plan(steps=tuple(steps), referenced_functions=referenced,
                subproblem=sub.id, warnings=warnings)


# --------------------------------------------------------------------------
# Candidates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Candidate:
    code: str
    signature: FunctionSignature
    subproblem: str
    generation_round: int = 0  # 0 = initial, >=1 = repair


def validate_candidate_code(code: str, signature: FunctionSignature) -> None:
    """The code must define exactly one top-level function with the required
    name, and its parameter count must match the header."""
    try:
        tree = ast.parse(code)
    except SyntaxError:
        # Leave syntax problems to the grounding phase; only the declared
        # name/arity contract is checked here.
        return
    matches = [
        node for node in tree.body
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef))
        and node.name == signature.name
    ]
    if not matches:
        raise SignatureMismatch(
            f"code defines no top-level function named {signature.name!r}", raw=code
        )
    if len(matches) > 1:
        raise SignatureMismatch(
            f"code defines {signature.name!r} more than once", raw=code
        )
    args = matches[0].args
    arity = len(args.posonlyargs) + len(args.args) + len(args.kwonlyargs)
    if arity != signature.arity:
        raise SignatureMismatch(
            f"{signature.name} takes {arity} parameters, header requires "
            f"{signature.arity}", raw=code,
        )


def extract_candidate(
    response_text: str,
    signature: FunctionSignature,
    subproblem_id: str,
    generation_round: int = 0,
) -> Candidate:
    """First fenced code block wins; the declared name/arity must match."""
    code = extract_fenced_code(response_text)
    if code is None:
        raise CodeExtraction(
            f"no fenced code block in response for {subproblem_id}", raw=response_text
        )
    validate_candidate_code(code, signature)
    return Candidate(code=code, signature=signature, subproblem=subproblem_id,
                     generation_round=generation_round)


def generate_code(
    plan: Plan,
    sub: SubProblem,
    ccw: ConsolidatedContextWindow,
    backend,
) -> Candidate:
    """One generation call: plan + rendered CCW + required header, plus the
    visible I/O examples when the subproblem carries them."""
    if plan.subproblem != sub.id:
        raise ValueError(f"plan is for {plan.subproblem}, not {sub.id}")
    io_block = ""
    if sub.io_tests:
        shown = "\n".join(f"  {p.call} -> {p.expected}" for p in sub.io_tests)
        io_block = f"\nVisible examples the function must satisfy:\n{shown}\n"
    system, user = prompts.render(
        "codegen",
        plan="\n".join(f"{i}. {s}" for i, s in enumerate(plan.steps, 1)),
        ccw=render_ccw(ccw),
        header=sub.signature.header_text,
        io_block=io_block,
    )
    response = backend.complete(backend.build_request(system, user, tag=TAG_CODE))
    return extract_candidate(response.content, sub.signature, sub.id, generation_round=0)


def summarize_function(candidate: Candidate, backend=None) -> str:
    """One-sentence summary for the CCW. With a backend, one call (truncated
    to 160 chars); without, the docstring's first sentence or a stock line."""
    if backend is not None:
        system, user = prompts.render("summarize", code=candidate.code)
        response = backend.complete(backend.build_request(system, user, tag=TAG_SUMMARY))
        return normalize_summary(response.content)
    docstring = None
    try:
        tree = ast.parse(candidate.code)
    except SyntaxError:
        tree = None
    if tree is not None:
        for node in tree.body:
            if isinstance(node, ast.FunctionDef) and node.name == candidate.signature.name:
                docstring = ast.get_docstring(node)
                break
        else:
            docstring = ast.get_docstring(tree)
    if docstring:
        sentence = first_sentence(docstring)
        if sentence:
            return normalize_summary(sentence)
    return f"Implements {candidate.signature.name}."
