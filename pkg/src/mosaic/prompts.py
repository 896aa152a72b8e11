"""Versioned prompt template assets.

Each asset under templates/ starts with ``#:`` header lines (version, system
message); the remainder is a string.Template body with ``${placeholder}``
substitutions. Header lines never reach the rendered prompt.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

TEMPLATE_NAMES = (
    "domain_classify",
    "rationale_derive",
    "reflect_refine",
    "reflect_critique_whole",
    "reflect_critique_step",
    "plan",
    "codegen",
    "summarize",
    "debug",
    "baseline_direct",
    "baseline_cot",
    "baseline_plan",
    "baseline_plan_code",
    "baseline_analogical_recall",
    "baseline_analogical_code",
)

APPROVE_TOKEN = "APPROVED"
REVISE_TOKEN = "REVISE"
HEADER_MARKER = "REQUIRED FUNCTION HEADER:"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    version: str
    system: str
    body: string.Template


@lru_cache(maxsize=None)
def get_template(name: str) -> PromptTemplate:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r}")
    text = resources.files(__package__).joinpath(f"templates/{name}.txt").read_text("utf-8")
    version = "0"
    system = ""
    body_lines: list[str] = []
    for line in text.splitlines():
        if line.startswith("#:"):
            key, _, value = line[2:].strip().partition("=")
            if key.strip() == "version":
                version = value.strip()
            elif key.strip() == "system":
                system = value.strip()
        else:
            body_lines.append(line)
    body = "\n".join(body_lines).strip("\n") + "\n"
    return PromptTemplate(name=name, version=version, system=system,
                          body=string.Template(body))


def render(name: str, **subs: str) -> tuple[str, str]:
    """Render a template; returns (system message, user message)."""
    template = get_template(name)
    return template.system, template.body.substitute(**subs)


def template_versions() -> dict[str, str]:
    return {name: get_template(name).version for name in TEMPLATE_NAMES}
