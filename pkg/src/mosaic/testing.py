"""Deterministic doubles for desk-scale runs: a responder-driven backend
(record transcripts without a live endpoint) and canned runner scripts that
honor the runner wire contract."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Callable, Mapping

from .backend import Backend, ChatRequest, ChatResponse

_HEADER_NAME_RE = re.compile(r"REQUIRED FUNCTION HEADER:\s*\n\s*def\s+(\w+)")
_DEF_NAME_RE = re.compile(r"def\s+(\w+)")


class ResponderBackend(Backend):
    """Backend whose responses come from a pure function of the request."""

    def __init__(self, responder: Callable[[ChatRequest], str], **params):
        super().__init__(**params)
        self._responder = responder

    def _respond(self, request: ChatRequest, digest: str) -> tuple[ChatResponse, dict]:
        return ChatResponse(content=self._responder(request)), {"mode": "responder"}


def required_function_name(request: ChatRequest) -> str | None:
    """Name declared under the REQUIRED FUNCTION HEADER prompt marker."""
    text = "\n".join(content for _, content in request.messages)
    match = _HEADER_NAME_RE.search(text)
    if match:
        return match.group(1)
    match = _DEF_NAME_RE.search(text)
    return match.group(1) if match else None


def pipeline_responder(
    code_by_name: Mapping[str, str],
    *,
    critique: str | Callable[[ChatRequest], str] = "APPROVED",
    repair_by_name: Mapping[str, str] | None = None,
    domain: str = "physics",
) -> Callable[[ChatRequest], str]:
    """Responder covering every agent tag with deterministic content.

    Code-producing tags answer with a fenced block for the function the
    prompt requires; the mapping must cover every required name.
    """

    def respond(request: ChatRequest) -> str:
        tag = request.tag
        if tag.startswith("teacher.rationale"):
            return "1. Read the statement and identify the inputs.\n" \
                   "2. Combine the inputs exactly as specified."
        if tag.startswith("teacher.refine"):
            return "1. take the declared inputs\n2. compute the required value\n3. return it"
        if tag.startswith("teacher.critique"):
            return critique(request) if callable(critique) else critique
        if tag.startswith(("student.plan", "baseline.plan")):
            return "1. Parse the inputs.\n2. Compute the result per the statement.\n3. Return it."
        if tag.startswith("baseline.recall"):
            return "Related example: accumulate values over a list, then return the aggregate."
        if tag.startswith("bucketing.classify"):
            return domain
        if tag.startswith("student.summarize"):
            name = required_function_name(request) or "the function"
            return f"Computes {name} for this problem."
        if tag.startswith("debugger.repair"):
            name = required_function_name(request)
            table = repair_by_name if repair_by_name is not None else code_by_name
            if name is None or name not in table:
                return "I cannot repair this."
            return f"```python\n{table[name]}\n```"
        if tag.startswith(("student.code", "baseline.direct", "baseline.cot", "baseline.code")):
            name = required_function_name(request)
            if name is None or name not in code_by_name:
                raise KeyError(f"no canned code for {name!r} (tag={tag})")
            return f"```python\n{code_by_name[name]}\n```"
        raise KeyError(f"unhandled request tag {tag!r}")

    return respond


# --------------------------------------------------------------------------
# Canned runner scripts (wire-contract compliant)
# --------------------------------------------------------------------------

def canned_pass(n_cases: int = 1) -> dict:
    return {
        "v": 1,
        "phase": "none",
        "exception_type": None,
        "traceback": "",
        "case_results": [
            {"index": i, "pass": True, "deviation": 0.0} for i in range(n_cases)
        ],
        "wall_ms": 1,
    }


def canned_failure(phase: str, exception_type: str | None = None,
                   traceback: str = "", case_results: list | None = None) -> dict:
    return {
        "v": 1,
        "phase": phase,
        "exception_type": exception_type,
        "traceback": traceback or (f"Traceback (most recent call last):\n"
                                   f"  ...\n{exception_type}: canned"),
        "case_results": case_results or [],
        "wall_ms": 1,
    }


def canned_mismatch(deviation: float = 0.5) -> dict:
    return canned_failure(
        "compare",
        None,
        traceback="",
        case_results=[{"index": 0, "pass": False, "deviation": deviation}],
    )


def write_pass_runner(directory: str | Path) -> Path:
    """Runner that reads the input record and passes every case."""
    script = Path(directory) / "pass_runner.py"
    script.write_text(
        "import json, sys\n"
        "record = json.load(open(sys.argv[1]))\n"
        "cases = [{'index': i, 'pass': True, 'deviation': 0.0}\n"
        "         for i in range(len(record['cases']))]\n"
        "print(json.dumps({'v': 1, 'phase': 'none', 'exception_type': None,\n"
        "                  'traceback': '', 'case_results': cases, 'wall_ms': 1}))\n",
        encoding="utf-8",
    )
    return script


def write_sequence_runner(directory: str | Path, outputs: list[dict]) -> Path:
    """Runner that replays `outputs` one per invocation (last one repeats).
    Invocation state lives next to the script, not in the scratch dir."""
    directory = Path(directory)
    script = directory / "sequence_runner.py"
    (directory / "outputs.json").write_text(json.dumps(outputs), encoding="utf-8")
    state = directory / "state.txt"
    if state.exists():
        state.unlink()
    script.write_text(
        "import json, pathlib, sys\n"
        f"base = pathlib.Path({str(directory)!r})\n"
        "outputs = json.loads((base / 'outputs.json').read_text())\n"
        "state = base / 'state.txt'\n"
        "i = int(state.read_text()) if state.exists() else 0\n"
        "state.write_text(str(i + 1))\n"
        "print(json.dumps(outputs[min(i, len(outputs) - 1)]))\n",
        encoding="utf-8",
    )
    return script


def write_sleep_runner(directory: str | Path, sleep_s: float) -> Path:
    script = Path(directory) / "sleep_runner.py"
    script.write_text(
        "import json, sys, time\n"
        f"time.sleep({sleep_s})\n"
        "print(json.dumps({'v': 1, 'phase': 'none', 'exception_type': None,\n"
        "                  'traceback': '', 'case_results': [], 'wall_ms': 0}))\n",
        encoding="utf-8",
    )
    return script


def write_garbage_runner(directory: str | Path) -> Path:
    script = Path(directory) / "garbage_runner.py"
    script.write_text("print('%%% not a json record %%%')\n", encoding="utf-8")
    return script
