"""Portable problem corpus: domain types, directory loading/writing with
validation, teacher exemplar selection, and domain assignment.

Directory layout (UTF-8 JSON):
    <root>/manifest.json          {"validation": [ids], "test": [ids]}
    <root>/problems/<id>.json     one record per problem, fields as the types below
"""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import (
    CorpusEmpty,
    DuplicateId,
    MissingDomainLabel,
    NonOverlapViolation,
    SchemaViolation,
    SplitOverlap,
    UnparsableClassification,
)

log = logging.getLogger(__name__)

KNOWN_DOMAINS = ("physics", "chemistry", "biology", "materials", "mathematics")
SPLIT_VALIDATION = "validation"
SPLIT_TEST = "test"
DEFAULT_RTOL = 1e-5
DEFAULT_ATOL = 1e-8

SCALAR = "scalar"
ARRAY = "array"
DTYPES = ("float", "int", "complex", "bool", "string")


# --------------------------------------------------------------------------
# Target values
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetValue:
    """Language-neutral literal: scalar or row-major array.

    Complex entries are stored as [re, im] pairs so the format stays portable.
    """

    kind: str
    dtype: str
    shape: tuple[int, ...]
    data: tuple[Any, ...]

    def __post_init__(self):
        if self.kind not in (SCALAR, ARRAY):
            raise ValueError(f"bad kind {self.kind!r}")
        if self.dtype not in DTYPES:
            raise ValueError(f"bad dtype {self.dtype!r}")
        if self.kind == SCALAR and self.shape != ():
            raise ValueError("scalar requires empty shape")
        expected = 1 if self.kind == SCALAR else math.prod(self.shape)
        if len(self.data) != expected:
            raise ValueError(f"data length {len(self.data)} != {expected}")
        for datum in self.data:
            _check_datum(self.dtype, datum)

    # -- constructors --------------------------------------------------

    @classmethod
    def from_obj(cls, value: Any) -> "TargetValue":
        """Encode a Python/NumPy value. Lists/tuples become arrays."""
        arr = np.asarray(value)
        dtype = _dtype_name(arr.dtype)
        flat = arr.reshape(-1)
        if dtype == "complex":
            data = tuple((float(v.real), float(v.imag)) for v in flat)
        elif dtype == "float":
            data = tuple(float(v) for v in flat)
        elif dtype == "int":
            data = tuple(int(v) for v in flat)
        elif dtype == "bool":
            data = tuple(bool(v) for v in flat)
        else:
            data = tuple(str(v) for v in flat)
        if arr.shape == ():
            return cls(SCALAR, dtype, (), data)
        return cls(ARRAY, dtype, tuple(int(n) for n in arr.shape), data)

    @classmethod
    def from_json(cls, obj: Any) -> "TargetValue":
        if not isinstance(obj, Mapping):
            raise ValueError("target value must be an object")
        data = tuple(
            tuple(float(x) for x in d) if isinstance(d, (list, tuple)) else d
            for d in obj["data"]
        )
        return cls(
            kind=obj["kind"],
            dtype=obj["dtype"],
            shape=tuple(int(n) for n in obj.get("shape", ())),
            data=data,
        )

    # -- views -----------------------------------------------------------

    def to_json(self) -> dict:
        data = [list(d) if isinstance(d, tuple) else d for d in self.data]
        return {"kind": self.kind, "dtype": self.dtype, "shape": list(self.shape), "data": data}

    def to_numpy(self) -> np.ndarray:
        if self.dtype == "complex":
            values = [complex(re, im) for re, im in self.data]
            arr = np.array(values, dtype=complex)
        elif self.dtype == "float":
            arr = np.array(self.data, dtype=float)
        elif self.dtype == "int":
            arr = np.array(self.data, dtype=np.int64)
        elif self.dtype == "bool":
            arr = np.array(self.data, dtype=bool)
        else:
            arr = np.array(self.data, dtype=object)
        return arr.reshape(self.shape)

    def to_python(self) -> Any:
        """Decode to plain Python (nested lists / scalar) for call arguments."""
        if self.dtype == "complex":
            values = [complex(re, im) for re, im in self.data]
        else:
            values = list(self.data)
        if self.kind == SCALAR:
            return values[0]
        return _nest(values, self.shape)


def _nest(flat: list, shape: tuple[int, ...]) -> Any:
    if not shape:
        return flat[0]
    if len(shape) == 1:
        return list(flat)
    stride = math.prod(shape[1:])
    return [_nest(flat[i * stride:(i + 1) * stride], shape[1:]) for i in range(shape[0])]


def _dtype_name(dt: np.dtype) -> str:
    if dt.kind == "b":
        return "bool"
    if dt.kind in "iu":
        return "int"
    if dt.kind == "f":
        return "float"
    if dt.kind == "c":
        return "complex"
    if dt.kind in "US":
        return "string"
    raise ValueError(f"unsupported dtype {dt}")


def _check_datum(dtype: str, datum: Any) -> None:
    ok = False
    if dtype == "float":
        ok = isinstance(datum, (int, float)) and not isinstance(datum, bool)
    elif dtype == "int":
        ok = isinstance(datum, int) and not isinstance(datum, bool)
    elif dtype == "bool":
        ok = isinstance(datum, bool)
    elif dtype == "string":
        ok = isinstance(datum, str)
    elif dtype == "complex":
        ok = (
            isinstance(datum, tuple)
            and len(datum) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in datum)
        )
    if not ok:
        raise ValueError(f"datum {datum!r} does not conform to dtype {dtype}")


# --------------------------------------------------------------------------
# Signatures, cases, problems
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionSignature:
    name: str
    header_text: str
    arity: int


def parse_header(header_text: str) -> tuple[str, int]:
    """Parse a function header (with or without a docstring stub body)."""
    source = header_text
    try:
        tree = ast.parse(source)
    except SyntaxError:
        source = header_text.rstrip("\n") + "\n    pass\n"
        tree = ast.parse(source)
    defs = [n for n in tree.body if isinstance(n, ast.FunctionDef)]
    if len(tree.body) != 1 or len(defs) != 1:
        raise ValueError("header is not a single function declaration")
    fn = defs[0]
    args = fn.args
    arity = len(args.posonlyargs) + len(args.args) + len(args.kwonlyargs)
    return fn.name, arity


def make_signature(header_text: str) -> FunctionSignature:
    name, arity = parse_header(header_text)
    return FunctionSignature(name=name, header_text=header_text, arity=arity)


@dataclass(frozen=True)
class EvalCase:
    entry: str
    args: tuple[TargetValue, ...]
    expected: TargetValue
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    setup: str | None = None

    def __post_init__(self):
        if self.rtol < 0 or self.atol < 0:
            raise ValueError("rtol and atol must be nonnegative")

    def to_json(self) -> dict:
        return {
            "entry": self.entry,
            "args": [a.to_json() for a in self.args],
            "expected": self.expected.to_json(),
            "rtol": self.rtol,
            "atol": self.atol,
            "setup": self.setup,
        }

    def call_text(self) -> str:
        """Canonical rendering of the invocation, for io_tests disjointness."""
        rendered = ", ".join(repr(a.to_python()) for a in self.args)
        return f"{self.entry}({rendered})"


@dataclass(frozen=True)
class IoPair:
    """A visible input/output example (never part of the hidden suite)."""

    call: str
    expected: str


@dataclass(frozen=True)
class SubProblem:
    id: str
    step_index: int
    step_statement: str
    background: str
    signature: FunctionSignature
    eval_suite: tuple[EvalCase, ...]
    io_tests: tuple[IoPair, ...] = ()
    ground_truth_code: str | None = None


@dataclass(frozen=True)
class Problem:
    id: str
    domain: str
    main_statement: str
    subproblems: tuple[SubProblem, ...]


@dataclass(frozen=True)
class Corpus:
    problems: tuple[Problem, ...]
    split: Mapping[str, str]  # problem id -> validation | test

    @property
    def domains(self) -> set[str]:
        return {p.domain for p in self.problems}

    @property
    def problem_count(self) -> int:
        return len(self.problems)

    @property
    def subproblem_count(self) -> int:
        return sum(len(p.subproblems) for p in self.problems)

    def problems_in(self, split: str) -> tuple[Problem, ...]:
        return tuple(p for p in self.problems if self.split[p.id] == split)

    def validation_problems(self) -> tuple[Problem, ...]:
        return self.problems_in(SPLIT_VALIDATION)

    def test_problems(self) -> tuple[Problem, ...]:
        return self.problems_in(SPLIT_TEST)

    def counts(self) -> dict:
        per_domain: dict[str, dict[str, int]] = {}
        for p in self.problems:
            entry = per_domain.setdefault(p.domain, {"problems": 0, "subproblems": 0})
            entry["problems"] += 1
            entry["subproblems"] += len(p.subproblems)
        return {
            "problems": self.problem_count,
            "subproblems": self.subproblem_count,
            "domains": len(self.domains),
            "per_domain": per_domain,
        }

    def parent_of(self, subproblem_id: str) -> Problem:
        for p in self.problems:
            for s in p.subproblems:
                if s.id == subproblem_id:
                    return p
        raise KeyError(subproblem_id)


# --------------------------------------------------------------------------
# Loading / writing
# --------------------------------------------------------------------------

def _require(obj: Mapping, key: str, kind, file: str):
    if key not in obj:
        raise SchemaViolation("missing field", file=file, field=key)
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaViolation(f"field has type {type(value).__name__}", file=file, field=key)
    return value


def _parse_subproblem(obj: Mapping, file: str, validation: bool,
                      seen_signatures: dict[str, int]) -> SubProblem:
    sid = _require(obj, "id", str, file)
    step_index = _require(obj, "step_index", int, file)
    statement = _require(obj, "step_statement", str, file)
    background = obj.get("background", "")
    if not isinstance(background, str):
        raise SchemaViolation("background must be text", file=file, field="background")

    sig_obj = _require(obj, "signature", dict, file)
    header = _require(sig_obj, "header_text", str, file)
    try:
        name, arity = parse_header(header)
    except (SyntaxError, ValueError) as exc:
        raise SchemaViolation(f"unparsable header: {exc}", file=file, field="signature") from exc
    if sig_obj.get("name", name) != name:
        raise SchemaViolation("declared name differs from header", file=file, field="signature")
    if sig_obj.get("arity", arity) != arity:
        raise SchemaViolation("declared arity differs from header", file=file, field="signature")
    signature = FunctionSignature(name=name, header_text=header, arity=arity)

    cases = []
    raw_suite = _require(obj, "eval_suite", list, file)
    if not raw_suite:
        raise SchemaViolation("eval_suite must be non-empty", file=file, field="eval_suite")
    for i, case_obj in enumerate(raw_suite):
        try:
            entry = case_obj["entry"]
            case = EvalCase(
                entry=entry,
                args=tuple(TargetValue.from_json(a) for a in case_obj.get("args", [])),
                expected=TargetValue.from_json(case_obj["expected"]),
                rtol=float(case_obj.get("rtol", DEFAULT_RTOL)),
                atol=float(case_obj.get("atol", DEFAULT_ATOL)),
                setup=case_obj.get("setup"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(
                f"bad eval case {i}: {exc}", file=file, field="eval_suite"
            ) from exc
        if case.entry not in seen_signatures or seen_signatures[case.entry] > step_index:
            raise SchemaViolation(
                f"case entry {case.entry!r} is not defined at or before step {step_index}",
                file=file, field="eval_suite",
            )
        cases.append(case)

    io_tests = []
    for i, pair in enumerate(obj.get("io_tests") or []):
        try:
            io_tests.append(IoPair(call=pair["call"], expected=pair["expected"]))
        except (KeyError, TypeError) as exc:
            raise SchemaViolation(f"bad io_test {i}", file=file, field="io_tests") from exc
    suite_calls = {(c.call_text(), repr(c.expected.to_python())) for c in cases}
    for pair in io_tests:
        if (pair.call, pair.expected) in suite_calls:
            raise SchemaViolation(
                f"io_test duplicates hidden case {pair.call}", file=file, field="io_tests"
            )

    ground_truth = obj.get("ground_truth_code")
    if ground_truth is not None and not isinstance(ground_truth, str):
        raise SchemaViolation("ground_truth_code must be text", file=file, field="ground_truth_code")
    if validation and ground_truth is None:
        raise SchemaViolation(
            "validation subproblem lacks ground_truth_code", file=file, field="ground_truth_code"
        )
    if not validation and ground_truth is not None:
        raise SchemaViolation(
            "test subproblem must not carry ground_truth_code", file=file, field="ground_truth_code"
        )

    return SubProblem(
        id=sid,
        step_index=step_index,
        step_statement=statement,
        background=background,
        signature=signature,
        eval_suite=tuple(cases),
        io_tests=tuple(io_tests),
        ground_truth_code=ground_truth,
    )


def _parse_problem(obj: Mapping, file: str, validation: bool) -> Problem:
    pid = _require(obj, "id", str, file)
    domain = _require(obj, "domain", str, file)
    if not domain or domain != domain.strip().lower():
        raise SchemaViolation(f"domain {domain!r} must be non-empty lowercase", file=file, field="domain")
    statement = _require(obj, "main_statement", str, file)
    raw_subs = _require(obj, "subproblems", list, file)
    if not raw_subs:
        raise SchemaViolation("subproblems must be non-empty", file=file, field="subproblems")

    seen_signatures: dict[str, int] = {}
    parsed = []
    for raw in raw_subs:
        step_index = raw.get("step_index")
        if isinstance(step_index, int):
            name_probe = (raw.get("signature") or {}).get("header_text", "")
            try:
                name, _ = parse_header(name_probe)
                seen_signatures.setdefault(name, step_index)
            except (SyntaxError, ValueError):
                pass
        parsed.append(raw)

    subs = [_parse_subproblem(raw, file, validation, seen_signatures) for raw in parsed]
    subs.sort(key=lambda s: s.step_index)
    indices = [s.step_index for s in subs]
    if indices != list(range(1, len(subs) + 1)):
        raise SchemaViolation(
            f"step indices {indices} are not contiguous from 1", file=file, field="subproblems"
        )
    return Problem(id=pid, domain=domain, main_statement=statement, subproblems=tuple(subs))


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a corpus directory. Order-stable: problems sorted
    by id, subproblems by step_index."""
    root = Path(path)
    problems_dir = root / "problems"
    files = sorted(problems_dir.glob("*.json")) if problems_dir.is_dir() else []
    if not files:
        raise CorpusEmpty(f"no problem files under {problems_dir}")

    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise SchemaViolation("manifest.json missing", file=str(manifest_path), field="manifest")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    validation_ids = list(manifest.get(SPLIT_VALIDATION, []))
    test_ids = list(manifest.get(SPLIT_TEST, []))
    overlap = set(validation_ids) & set(test_ids)
    if overlap:
        raise SplitOverlap(f"ids in both splits: {sorted(overlap)}")
    split = {pid: SPLIT_VALIDATION for pid in validation_ids}
    split.update({pid: SPLIT_TEST for pid in test_ids})

    problems: list[Problem] = []
    seen_pids: set[str] = set()
    seen_sids: set[str] = set()
    for fp in files:
        obj = json.loads(fp.read_text(encoding="utf-8"))
        pid = obj.get("id")
        if pid not in split:
            raise SchemaViolation(
                f"problem {pid!r} missing from manifest splits", file=fp.name, field="id"
            )
        problem = _parse_problem(obj, fp.name, validation=split[pid] == SPLIT_VALIDATION)
        if problem.id in seen_pids:
            raise DuplicateId(f"problem id {problem.id!r} duplicated")
        seen_pids.add(problem.id)
        for sub in problem.subproblems:
            if sub.id in seen_sids:
                raise DuplicateId(f"subproblem id {sub.id!r} duplicated")
            seen_sids.add(sub.id)
        problems.append(problem)

    missing = set(split) - seen_pids
    if missing:
        raise SchemaViolation(f"manifest names unknown problems {sorted(missing)}",
                              file="manifest.json", field="splits")
    problems.sort(key=lambda p: p.id)
    return Corpus(problems=tuple(problems), split=split)


def _problem_to_json(problem: Problem) -> dict:
    subs = []
    for s in problem.subproblems:
        obj = {
            "id": s.id,
            "step_index": s.step_index,
            "step_statement": s.step_statement,
            "background": s.background,
            "signature": {
                "name": s.signature.name,
                "header_text": s.signature.header_text,
                "arity": s.signature.arity,
            },
            "eval_suite": [c.to_json() for c in s.eval_suite],
        }
        if s.io_tests:
            obj["io_tests"] = [{"call": p.call, "expected": p.expected} for p in s.io_tests]
        if s.ground_truth_code is not None:
            obj["ground_truth_code"] = s.ground_truth_code
        subs.append(obj)
    return {
        "id": problem.id,
        "domain": problem.domain,
        "main_statement": problem.main_statement,
        "subproblems": subs,
    }


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Inverse of load_corpus (round-trips the in-memory representation)."""
    root = Path(path)
    (root / "problems").mkdir(parents=True, exist_ok=True)
    manifest = {
        SPLIT_VALIDATION: sorted(p.id for p in corpus.validation_problems()),
        SPLIT_TEST: sorted(p.id for p in corpus.test_problems()),
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for problem in corpus.problems:
        fp = root / "problems" / f"{problem.id}.json"
        fp.write_text(
            json.dumps(_problem_to_json(problem), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def corpus_digest(corpus: Corpus) -> str:
    canonical = json.dumps(
        {
            "problems": [_problem_to_json(p) for p in corpus.problems],
            "split": {pid: corpus.split[pid] for pid in sorted(corpus.split)},
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# Teacher exemplar selection
# --------------------------------------------------------------------------

def select_teacher_exemplars(
    corpus: Corpus,
    fraction: float = 0.05,
    seed: int = 1993,
    unit: str = "subproblems",
) -> dict[str, list[SubProblem]]:
    """Pick the per-domain validation exemplars the Teacher distills from.

    Budget per domain = max(1, floor(fraction * validation count in that
    domain)), counted in `unit` (subproblems by default). Deterministic in
    (corpus, fraction, seed); returned lists sorted by (problem id, step).
    Domains with no validation data are omitted with a logged warning.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if unit not in ("subproblems", "problems"):
        raise ValueError("unit must be 'subproblems' or 'problems'")

    validation = corpus.validation_problems()
    test_sub_ids = {s.id for p in corpus.test_problems() for s in p.subproblems}

    by_domain: dict[str, list[tuple[str, SubProblem]]] = {}
    problems_by_domain: dict[str, list[Problem]] = {}
    for problem in validation:
        problems_by_domain.setdefault(problem.domain, []).append(problem)
        for sub in problem.subproblems:
            by_domain.setdefault(problem.domain, []).append((problem.id, sub))

    selected: dict[str, list[SubProblem]] = {}
    for domain in sorted(corpus.domains):
        candidates = by_domain.get(domain, [])
        if not candidates:
            log.warning("no validation data for domain %r; omitted from exemplars", domain)
            continue
        rng = random.Random(f"{seed}|{domain}")
        candidates = sorted(candidates, key=lambda t: (t[0], t[1].step_index))
        if unit == "subproblems":
            budget = max(1, math.floor(fraction * len(candidates)))
            chosen = rng.sample(candidates, budget)
        else:
            problems = sorted(problems_by_domain[domain], key=lambda p: p.id)
            budget = max(1, math.floor(fraction * len(problems)))
            chosen_problems = rng.sample(problems, budget)
            chosen = [(p.id, s) for p in chosen_problems for s in p.subproblems]
        chosen.sort(key=lambda t: (t[0], t[1].step_index))
        picked = [sub for _, sub in chosen]
        bad = [s.id for s in picked if s.id in test_sub_ids]
        if bad:
            raise NonOverlapViolation(f"exemplars overlap the test split: {bad}")
        selected[domain] = picked
    return selected


# --------------------------------------------------------------------------
# Domain assignment
# --------------------------------------------------------------------------

def assign_domain(
    problem: Problem,
    mode: str = "passthrough",
    backend=None,
    domains: Iterable[str] = KNOWN_DOMAINS,
) -> str:
    """Return the domain label to run a problem under.

    passthrough trusts the stored label; model_classify asks the backend and
    parses a known label out of one response.
    """
    if mode == "passthrough":
        if not problem.domain:
            raise MissingDomainLabel(f"problem {problem.id} carries no domain label")
        return problem.domain
    if mode != "model_classify":
        raise ValueError(f"unknown domain assignment mode {mode!r}")
    if backend is None:
        raise ValueError("model_classify requires a backend")

    from . import prompts

    known = sorted(set(domains))
    system, user = prompts.render(
        "domain_classify",
        domains="\n".join(f"- {d}" for d in known),
        statement=problem.main_statement,
    )
    response = backend.complete(
        backend.build_request(system, user, tag="bucketing.classify")
    )
    lowered = response.content.lower()
    hits = [(lowered.find(d), d) for d in known if d in lowered]
    if not hits:
        raise UnparsableClassification(
            f"response names no known domain (candidates: {known}): {response.content!r}"
        )
    return min(hits)[1]
