"""Small text-parsing helpers shared by the agents: numbered lists, fenced
code blocks, one-sentence summaries, identifier scans, traceback excerpts."""

from __future__ import annotations

import builtins
import re

_STEP_RE = re.compile(r"^\s*\d+[.)]\s+(.*)$")
_FENCE_RE = re.compile(r"```[ \t]*[A-Za-z0-9_+-]*[ \t]*\r?\n(.*?)```", re.DOTALL)
_CALL_RE = re.compile(r"(?<![\w.])([A-Za-z_]\w*)\s*\(")
_WORD_RE = re.compile(r"[A-Za-z_]\w*")
_SENTENCE_END = re.compile(r"(?<=[.!?])\s")

_BUILTIN_NAMES = frozenset(dir(builtins))


def parse_numbered_steps(text: str) -> list[str]:
    """Collect ``1.``/``2)``-prefixed lines in order of appearance.

    Unnumbered lines following a numbered one are treated as continuations.
    Returns [] when the text contains no numbered line at all.
    """
    steps: list[str] = []
    for line in text.splitlines():
        match = _STEP_RE.match(line)
        if match:
            steps.append(match.group(1).strip())
        elif steps and line.strip():
            steps[-1] = f"{steps[-1]} {line.strip()}"
    return [s for s in steps if s]


def extract_fenced_code(text: str) -> str | None:
    """Return the body of the first fenced code block, or None."""
    match = _FENCE_RE.search(text)
    if match is None:
        return None
    return match.group(1).strip("\n")


def first_sentence(text: str) -> str:
    flattened = " ".join(text.split())
    if not flattened:
        return ""
    return _SENTENCE_END.split(flattened, maxsplit=1)[0].strip()


def one_sentence(text: str, limit: int = 160) -> str:
    """Flatten to a single line and truncate to `limit` at a word boundary."""
    flattened = " ".join(text.split())
    if len(flattened) <= limit:
        return flattened
    cut = flattened[:limit]
    if " " in cut:
        cut = cut[: cut.rfind(" ")]
    return cut.rstrip(" ,;:")


def called_names(text: str) -> list[str]:
    """Bare (non-attribute) call-like identifiers, in order, deduplicated."""
    seen: list[str] = []
    for name in _CALL_RE.findall(text):
        if name not in seen:
            seen.append(name)
    return seen


def mentioned_names(text: str) -> set[str]:
    return set(_WORD_RE.findall(text))


def is_builtin_name(name: str) -> bool:
    return name in _BUILTIN_NAMES


def tail_excerpt(text: str, limit: int = 4000) -> str:
    """Trim to at most `limit` chars, keeping the tail (final frames)."""
    if len(text) <= limit:
        return text
    marker = "...[truncated]...\n"
    return marker + text[-(limit - len(marker)):]
