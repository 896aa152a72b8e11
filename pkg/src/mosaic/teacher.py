"""Teacher module: derives rationales from validation ground truth, refines
them through the self-reflection agent, and stores per-domain guidance
templates in isolated domain memories.

The whole phase is execution-free: nothing here ever touches a runner.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import prompts
from .corpus import FunctionSignature, SubProblem
from .errors import CritiqueParse, DomainMismatch, EmptyExemplarSet, RationaleParse
from .textparse import parse_numbered_steps

log = logging.getLogger(__name__)

TAG_RATIONALE = "teacher.rationale"
TAG_REFINE = "teacher.refine"
TAG_CRITIQUE = "teacher.critique"

MODE_WHOLE = "whole"
MODE_STEPWISE = "stepwise"

VERDICT_APPROVED = "approved"
VERDICT_REVISE = "revise"


@dataclass(frozen=True)
class Rationale:
    steps: tuple[str, ...]
    source: str  # exemplar subproblem id

    def __post_init__(self):
        if not self.steps or any(not s.strip() for s in self.steps):
            raise ValueError("rationale steps must be non-empty and non-blank")


@dataclass(frozen=True)
class Critique:
    verdict: str  # approved | revise
    issues: tuple[str, ...]
    iteration: int

    def __post_init__(self):
        if self.verdict == VERDICT_REVISE and not self.issues:
            raise ValueError("revise verdict requires issues")


@dataclass(frozen=True)
class GuidanceExemplar:
    statement: str
    pseudocode: str
    signature: FunctionSignature


@dataclass(frozen=True)
class Provenance:
    exemplar_id: str
    iterations: int
    converged: bool


@dataclass(frozen=True)
class GuidanceTemplate:
    domain: str
    exemplars: tuple[GuidanceExemplar, ...]
    provenance: tuple[Provenance, ...]


@dataclass(frozen=True)
class RefinedExemplar:
    """One teacher output ready for template assembly."""

    problem_id: str
    domain: str
    subproblem: SubProblem
    pseudocode: str
    iterations: int
    converged: bool


class DomainMemory:
    """Per-domain guidance store; lookups never cross domains."""

    def __init__(self):
        self._store: dict[str, GuidanceTemplate] = {}

    def put(self, template: GuidanceTemplate) -> None:
        self._store[template.domain] = template

    def get(self, domain: str) -> GuidanceTemplate | None:
        return self._store.get(domain)

    def domains(self) -> list[str]:
        return sorted(self._store)

    def save(self, memory_dir: str | Path) -> None:
        root = Path(memory_dir)
        root.mkdir(parents=True, exist_ok=True)
        for domain in self.domains():
            template = self._store[domain]
            payload = {
                "domain": template.domain,
                "exemplars": [
                    {
                        "statement": e.statement,
                        "pseudocode": e.pseudocode,
                        "signature": {
                            "name": e.signature.name,
                            "header_text": e.signature.header_text,
                            "arity": e.signature.arity,
                        },
                    }
                    for e in template.exemplars
                ],
                "provenance": [
                    {"exemplar_id": p.exemplar_id, "iterations": p.iterations,
                     "converged": p.converged}
                    for p in template.provenance
                ],
            }
            (root / f"{domain}.json").write_text(
                json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )

    @classmethod
    def load(cls, memory_dir: str | Path) -> "DomainMemory":
        memory = cls()
        for fp in sorted(Path(memory_dir).glob("*.json")):
            obj = json.loads(fp.read_text(encoding="utf-8"))
            template = GuidanceTemplate(
                domain=obj["domain"],
                exemplars=tuple(
                    GuidanceExemplar(
                        statement=e["statement"],
                        pseudocode=e["pseudocode"],
                        signature=FunctionSignature(
                            name=e["signature"]["name"],
                            header_text=e["signature"]["header_text"],
                            arity=e["signature"]["arity"],
                        ),
                    )
                    for e in obj["exemplars"]
                ),
                provenance=tuple(
                    Provenance(p["exemplar_id"], p["iterations"], p["converged"])
                    for p in obj["provenance"]
                ),
            )
            memory.put(template)
        return memory


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------

def derive_rationale(exemplar: SubProblem, backend) -> Rationale:
    """One backend call turning (statement, ground truth) into numbered steps."""
    if exemplar.ground_truth_code is None:
        raise ValueError(f"exemplar {exemplar.id} has no ground truth code")
    system, user = prompts.render(
        "rationale_derive",
        statement=exemplar.step_statement,
        ground_truth=exemplar.ground_truth_code,
    )
    response = backend.complete(backend.build_request(system, user, tag=TAG_RATIONALE))
    steps = parse_numbered_steps(response.content)
    if not steps:
        raise RationaleParse(
            f"no numbered steps in rationale response for {exemplar.id}"
        )
    return Rationale(steps=tuple(steps), source=exemplar.id)


def parse_critique(text: str, iteration: int) -> Critique:
    """APPROVED on its own line approves; a REVISE line revises with issues."""
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    for i, line in enumerate(lines):
        if line == prompts.APPROVE_TOKEN:
            return Critique(verdict=VERDICT_APPROVED, issues=(), iteration=iteration)
        if line.upper().startswith(prompts.REVISE_TOKEN):
            remainder = line[len(prompts.REVISE_TOKEN):].lstrip(":").strip()
            issues = [remainder] if remainder else []
            issues.extend(l for l in lines[i + 1:] if l)
            if not issues:
                issues = ["revision requested without stated issues"]
            return Critique(verdict=VERDICT_REVISE, issues=tuple(issues), iteration=iteration)
    raise CritiqueParse(f"no verdict token in critique response: {text[:200]!r}")


def _refine(rationale: Rationale, exemplar: SubProblem, issues: tuple[str, ...],
            backend) -> str:
    critique_block = ""
    if issues:
        listed = "\n".join(f"- {issue}" for issue in issues)
        critique_block = f"\nAddress these review issues:\n{listed}\n"
    system, user = prompts.render(
        "reflect_refine",
        statement=exemplar.step_statement,
        ground_truth=exemplar.ground_truth_code or "",
        rationale="\n".join(f"{i}. {s}" for i, s in enumerate(rationale.steps, 1)),
        critique_block=critique_block,
    )
    response = backend.complete(backend.build_request(system, user, tag=TAG_REFINE))
    return response.content.strip()


def _critique_whole(exemplar: SubProblem, pseudocode: str, iteration: int,
                    backend) -> Critique:
    system, user = prompts.render(
        "reflect_critique_whole",
        statement=exemplar.step_statement,
        ground_truth=exemplar.ground_truth_code or "",
        pseudocode=pseudocode,
    )
    response = backend.complete(backend.build_request(system, user, tag=TAG_CRITIQUE))
    return parse_critique(response.content, iteration)


def _critique_step(exemplar: SubProblem, pseudocode: str, step: str,
                   iteration: int, backend) -> Critique:
    system, user = prompts.render(
        "reflect_critique_step",
        statement=exemplar.step_statement,
        ground_truth=exemplar.ground_truth_code or "",
        pseudocode=pseudocode,
        step=step,
    )
    response = backend.complete(backend.build_request(system, user, tag=TAG_CRITIQUE))
    return parse_critique(response.content, iteration)


def self_reflect(
    rationale: Rationale,
    exemplar: SubProblem,
    mode: str = MODE_WHOLE,
    max_iters: int = 3,
    backend=None,
) -> tuple[str, list[Critique]]:
    """Refine-then-critique loop; stops at the first approval or after
    max_iters (left unconverged). Whole mode critiques the entire rationale
    once per iteration; stepwise critiques each step (N calls per iteration).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if mode not in (MODE_WHOLE, MODE_STEPWISE):
        raise ValueError(f"unknown reflection mode {mode!r}")

    pseudocode = ""
    critique_log: list[Critique] = []
    issues: tuple[str, ...] = ()
    for iteration in range(1, max_iters + 1):
        pseudocode = _refine(rationale, exemplar, issues, backend)
        if mode == MODE_WHOLE:
            critique = _critique_whole(exemplar, pseudocode, iteration, backend)
            critique_log.append(critique)
            approved = critique.verdict == VERDICT_APPROVED
            issues = critique.issues
        else:
            step_critiques = [
                _critique_step(exemplar, pseudocode, step, iteration, backend)
                for step in rationale.steps
            ]
            critique_log.extend(step_critiques)
            approved = all(c.verdict == VERDICT_APPROVED for c in step_critiques)
            issues = tuple(i for c in step_critiques for i in c.issues)
        if approved:
            break
    else:
        log.warning("reflection on %s left unconverged after %d iterations",
                    exemplar.id, max_iters)
    return pseudocode, critique_log


def build_guidance_template(
    domain: str,
    refined: list[RefinedExemplar],
    memory: DomainMemory | None = None,
) -> GuidanceTemplate:
    """Assemble refined exemplars into the domain's guidance template;
    stores it in `memory` (replacing any prior entry) when given."""
    if not refined:
        raise EmptyExemplarSet(f"no refined exemplars for domain {domain!r}")
    wrong = sorted({r.domain for r in refined if r.domain != domain})
    if wrong:
        raise DomainMismatch(f"exemplars from {wrong} mixed into {domain!r}")
    ordered = sorted(refined, key=lambda r: (r.problem_id, r.subproblem.step_index))
    template = GuidanceTemplate(
        domain=domain,
        exemplars=tuple(
            GuidanceExemplar(
                statement=r.subproblem.step_statement,
                pseudocode=r.pseudocode,
                signature=r.subproblem.signature,
            )
            for r in ordered
        ),
        provenance=tuple(
            Provenance(r.subproblem.id, r.iterations, r.converged) for r in ordered
        ),
    )
    if memory is not None:
        memory.put(template)
    return template


def render_guidance(template: GuidanceTemplate | None) -> str:
    """Few-shot block the student prepends to its planning prompt."""
    if template is None or not template.exemplars:
        return ""
    blocks = []
    for i, exemplar in enumerate(template.exemplars, 1):
        blocks.append(
            f"Example {i}:\n"
            f"Problem: {exemplar.statement}\n"
            f"Function header:\n{exemplar.signature.header_text}\n"
            f"Refined pseudocode:\n{exemplar.pseudocode}"
        )
    joined = "\n\n".join(blocks)
    return f"Worked examples from this domain:\n\n{joined}\n\n"
