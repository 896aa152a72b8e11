"""Acceptance suite: one timed check per criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -s`` to see them).
"""

import functools
import json
import math
import random
import time

import pytest

from helpers import (
    MINI_CODE_BY_NAME,
    make_case,
    make_problem,
    make_sub,
    random_corpus,
    table1_fixture,
)
from mosaic import cli
from mosaic.backend import BackendConfig
from mosaic.corpus import select_teacher_exemplars
from mosaic.driver import PipelineConfig, run_corpus, solve_problem
from mosaic.evaluator import NUM_BINS, SubResult, deviation_bin, error_histogram, score
from mosaic.grounding import (
    TAG_DEBUG,
    Candidate,
    ErrorClass,
    ExecutionLimits,
    ground_loop,
    stat_category,
)
from mosaic.corpus import make_signature
from mosaic.teacher import TAG_CRITIQUE, Rationale, self_reflect
from mosaic.testing import (
    ResponderBackend,
    canned_failure,
    canned_mismatch,
    canned_pass,
    pipeline_responder,
    write_pass_runner,
    write_sequence_runner,
)


def criterion(number, description, budget_s):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            started = time.monotonic()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[acceptance] {number} ({description}): FAIL")
                raise
            elapsed = time.monotonic() - started
            assert elapsed < budget_s, f"criterion {number} took {elapsed:.1f}s"
            print(f"[acceptance] {number} ({description}): PASS ({elapsed:.2f}s)")
        return wrapper
    return decorate


# -- 1: deterministic end-to-end -------------------------------------------

@criterion(1, "deterministic end-to-end replay", budget_s=10.0)
def test_deterministic_end_to_end(corpus, corpus_dir, tmp_path):
    runner = write_pass_runner(tmp_path)
    config = PipelineConfig(runner=str(runner),
                            backend=BackendConfig(mode="scripted"))
    backend = ResponderBackend(pipeline_responder(MINI_CODE_BY_NAME))
    record_out = tmp_path / "record"
    run_corpus(corpus, config, "mosaic", record_out, backend=backend)
    transcript = record_out / "transcript.jsonl"

    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config.snapshot()))
    outputs = []
    for name in ("run1", "run2"):
        code = cli.main([
            "run", "--corpus", str(corpus_dir), "--config", str(config_path),
            "--strategy", "mosaic", "--replay", str(transcript),
            "--out", str(tmp_path / name),
        ])
        assert code == 0
        outputs.append(tmp_path / name)
    assert (outputs[0] / "report.json").read_bytes() == \
           (outputs[1] / "report.json").read_bytes()
    assert (outputs[0] / "report.md").read_bytes() == \
           (outputs[1] / "report.md").read_bytes()


# -- 2: CCW discipline -------------------------------------------------------

def _ccw_fixture_problem():
    subs = []
    for i in range(1, 5):
        subs.append(make_sub(
            "p_ccw", i, f"step{i}_fn", ("x",),
            f"Compute stage {i} of the chain.",
            [make_case(f"step{i}_fn", [1], 1.0)],
        ))
    return make_problem("p_ccw", "physics", "Four chained stages.", subs)


def _marker_code(i):
    return (
        f"def step{i}_fn(x):\n"
        f"    '''Stage {i} helper.'''\n"
        f"    tag = 'BODY_MARKER_STEP_{i}'\n"
        f"    return 1.0\n"
    )


@criterion(2, "CCW discipline across modes", budget_s=5.0)
def test_ccw_discipline(tmp_path):
    problem = _ccw_fixture_problem()
    code_by_name = {f"step{i}_fn": _marker_code(i) for i in range(1, 5)}
    runner = write_pass_runner(tmp_path)
    headers = [s.signature.header_text for s in problem.subproblems]

    prompts_by_mode = {}
    for mode in ("headers", "full_code", "none"):
        backend = ResponderBackend(pipeline_responder(code_by_name))
        config = PipelineConfig(runner=str(runner), ccw_mode=mode,
                                backend=BackendConfig(mode="scripted"))
        result = solve_problem(problem, config, None, backend, config.runner,
                               tmp_path)
        assert all(r.passed for r in result.sub_results)
        by_step = {"plan": [], "code": []}
        for entry in backend.transcript.entries:
            if entry.request.tag == "student.plan":
                by_step["plan"].append(entry.request.messages[1][1])
            elif entry.request.tag == "student.code":
                by_step["code"].append(entry.request.messages[1][1])
        prompts_by_mode[mode] = by_step

    for kind in ("plan", "code"):
        for i in range(4):  # step index i+1
            headers_prompt = prompts_by_mode["headers"][kind][i]
            for j in range(i):
                assert headers[j] in headers_prompt  # all prior headers
            assert "BODY_MARKER_STEP" not in headers_prompt

            full_prompt = prompts_by_mode["full_code"][kind][i]
            for j in range(i):
                assert f"BODY_MARKER_STEP_{j + 1}" in full_prompt

            none_prompt = prompts_by_mode["none"][kind][i]
            for j in range(i):
                assert headers[j] not in none_prompt
            assert "BODY_MARKER_STEP" not in none_prompt


# -- 3: grounding loop state machine ----------------------------------------

@criterion(3, "grounding loop state machine", budget_s=5.0)
def test_grounding_state_machine(tmp_path):
    sig = make_signature("def f(x):\n    '''Does f.'''")
    good = "def f(x):\n    return 1.0\n"
    suite = (make_case("f", [1], 1.0),)

    def run(outputs, directory):
        directory.mkdir()
        runner = write_sequence_runner(directory, outputs)
        backend = ResponderBackend(pipeline_responder({"f": good}))
        limits = ExecutionLimits(scratch_dir=directory, timeout_s=5.0)
        outcome = ground_loop(
            Candidate(code=good, signature=sig, subproblem="p.1"),
            [], suite, 3, backend, runner, limits,
        )
        return outcome, backend

    outcome, backend = run([canned_pass()], tmp_path / "a")
    assert outcome.terminal_reason == "passed" and outcome.rounds_used == 0
    assert backend.transcript.count_tag(TAG_DEBUG) == 0

    outcome, backend = run(
        [canned_failure("load", "SyntaxError"), canned_pass()], tmp_path / "b"
    )
    assert outcome.terminal_reason == "passed" and outcome.rounds_used == 1
    assert len(outcome.reports) == 2
    assert backend.transcript.count_tag(TAG_DEBUG) == 1

    outcome, backend = run([canned_mismatch()], tmp_path / "c")
    assert outcome.terminal_reason == "not_repairable"
    assert outcome.rounds_used == 0
    assert backend.transcript.count_tag(TAG_DEBUG) == 0

    outcome, backend = run(
        [canned_failure("load", "SyntaxError")] * 4, tmp_path / "d"
    )
    assert outcome.terminal_reason == "rounds_exhausted"
    assert outcome.rounds_used == 3
    assert len(outcome.reports) == 4


# -- 4: scoring oracle -------------------------------------------------------

def _oracle_score(results):
    groups = {}
    for r in results:
        groups.setdefault(r.problem_id, []).append(r)
    main_solved = sum(1 for subs in groups.values() if all(s.passed for s in subs))
    sub_solved = sum(1 for r in results if r.passed)
    return main_solved, len(groups), sub_solved, len(results)


@criterion(4, "scoring oracle", budget_s=5.0)
def test_scoring_oracle():
    rng = random.Random(1993)
    classes = [ec for ec in ErrorClass if ec is not ErrorClass.NONE]
    for _ in range(1000):
        results = []
        for i in range(rng.randint(1, 12)):
            pid = f"p{i}"
            domain = rng.choice(("physics", "biology"))
            for j in range(rng.randint(1, 5)):
                passed = rng.random() < 0.5
                results.append(SubResult(
                    problem_id=pid, subproblem_id=f"{pid}.{j}", domain=domain,
                    passed=passed,
                    error_class=ErrorClass.NONE if passed else rng.choice(classes),
                ))
        board = score(results)
        assert (board.total.main_solved, board.total.main_total,
                board.total.sub_solved, board.total.sub_total) == \
            _oracle_score(results)

    board = score(table1_fixture())
    assert board.total.main_solved == 12 and board.total.main_total == 65
    assert board.total.sub_solved == 113
    expected = {
        "physics": (4, 30, 56, 145),
        "chemistry": (2, 7, 14, 42),
        "biology": (0, 7, 7, 25),
        "materials": (3, 11, 26, 50),
        "mathematics": (3, 10, 10, 24),
    }
    for domain, values in expected.items():
        tally = board.per_domain[domain]
        assert (tally.main_solved, tally.main_total,
                tally.sub_solved, tally.sub_total) == values


@pytest.mark.xfail(
    strict=True,
    reason="criterion 4's stated sub total (113/283) contradicts its own "
           "per-domain splits, which sum to 286; see decisions ledger",
)
@criterion("4-stated-total", "reference row stated sub total", budget_s=5.0)
def test_scoring_oracle_stated_sub_total():
    board = score(table1_fixture())
    assert board.total.sub_total == 283


# -- 5: precision bins --------------------------------------------------------

@criterion(5, "precision bins", budget_s=5.0)
def test_precision_bins():
    ulp_below_1e7 = math.nextafter(1e-7, 0.0)
    ulp_above_10 = math.nextafter(10.0, math.inf)
    edge_expectations = {
        0.0: 0,
        1e-10: 1,
        ulp_below_1e7: 3,
        1e-7: 4,
        1.0: 11,
        10.0: 12,
        ulp_above_10: 12,
        math.inf: 12,
    }
    for value, expected in edge_expectations.items():
        assert deviation_bin(value) == expected, value

    rng = random.Random(5)
    deviations = [rng.random() * 10 ** rng.randint(-12, 2) for _ in range(10_000)]
    recount = [0] * NUM_BINS
    for d in deviations:
        if d < 1e-10:
            recount[0] += 1
        elif d >= 10.0:
            recount[12] += 1
        else:
            for e in range(-10, 1):
                if float(f"1e{e}") <= d < float(f"1e{e + 1}"):
                    recount[e + 11] += 1
                    break
    binned = [0] * NUM_BINS
    for d in deviations:
        binned[deviation_bin(d)] += 1
    assert binned == recount


# -- 6: error taxonomy --------------------------------------------------------

@criterion(6, "error taxonomy two-way split", budget_s=5.0)
def test_error_taxonomy():
    expected_category = {
        ErrorClass.NONE: "pass",
        ErrorClass.ASSERTION_MISMATCH: "semantic",
        ErrorClass.SYNTAX_ERROR: "execution_failure",
        ErrorClass.IMPORT_ERROR: "execution_failure",
        ErrorClass.RUNTIME_EXCEPTION: "execution_failure",
        ErrorClass.TIMEOUT: "execution_failure",
        ErrorClass.RUNNER_CRASH: "execution_failure",
    }
    assert set(expected_category) == set(ErrorClass)
    for error_class, category in expected_category.items():
        assert stat_category(error_class) == category

    rng = random.Random(6)
    classes = [ec for ec in ErrorClass if ec is not ErrorClass.NONE]
    for _ in range(100):
        results = []
        for i in range(rng.randint(1, 50)):
            passed = rng.random() < 0.4
            results.append(SubResult(
                problem_id=f"p{i}", subproblem_id=f"p{i}.1",
                domain=rng.choice(("physics", "chemistry")),
                passed=passed,
                error_class=ErrorClass.NONE if passed else rng.choice(classes),
            ))
        hist = error_histogram(results)
        failures = sum(1 for r in results if not r.passed)
        assert sum(hist.split.values()) == failures
        assert sum(hist.fine.values()) == failures


# -- 7: teacher properties ----------------------------------------------------

@criterion(7, "teacher non-overlap and reflection accounting", budget_s=10.0)
def test_teacher_properties():
    for seed in range(200):
        rng = random.Random(seed)
        corpus = random_corpus(rng)
        fraction = rng.choice((0.05, 0.2, 0.5, 1.0))
        selected = select_teacher_exemplars(corpus, fraction=fraction, seed=seed)
        test_ids = {s.id for p in corpus.test_problems() for s in p.subproblems}
        for subs in selected.values():
            assert not {s.id for s in subs} & test_ids

    exemplar = make_sub(
        "p_val", 1, "g", ("x",), "Compute g.",
        [make_case("g", [1], 1.0)],
        ground_truth="def g(x):\n    return 1.0\n",
    )
    rationale = Rationale(steps=("a", "b", "c"), source="p_val.1")

    def reflect_backend():
        def respond(request):
            return ("REVISE: keep going" if request.tag == TAG_CRITIQUE
                    else "pseudocode")
        return ResponderBackend(respond)

    backend = reflect_backend()
    self_reflect(rationale, exemplar, mode="whole", max_iters=3, backend=backend)
    assert backend.transcript.count_tag(TAG_CRITIQUE) == 3

    backend = reflect_backend()
    self_reflect(rationale, exemplar, mode="stepwise", max_iters=2, backend=backend)
    assert backend.transcript.count_tag(TAG_CRITIQUE) == 2 * 3
