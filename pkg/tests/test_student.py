import pytest

from helpers import make_case, make_sub
from mosaic.corpus import make_signature
from mosaic.errors import CodeExtraction, PlanParse, SignatureMismatch
from mosaic.student import (
    CCW_EMPTY_MARKER,
    Candidate,
    ConsolidatedContextWindow,
    append_ccw,
    generate_code,
    plan_subproblem,
    render_ccw,
    summarize_function,
)
from mosaic.teacher import GuidanceTemplate, GuidanceExemplar
from mosaic.testing import ResponderBackend


SIG_KET = make_signature("def ket(dim, args):\n    '''Basis vector ket.'''")
SIG_NORM = make_signature("def vnorm(a):\n    '''Euclidean norm.'''")


def scripted(text):
    return ResponderBackend(lambda request: text)


def ket_sub(io_tests=()):
    return make_sub("p", 1, "ket", ("dim", "args"),
                    "Return a standard basis vector.",
                    [make_case("ket", [2, 1], [0.0, 1.0])],
                    background="A ket is a column of zeros with a single one.",
                    io_tests=io_tests)


class TestRenderCcw:
    def test_empty_renders_marker_only(self):
        assert render_ccw(ConsolidatedContextWindow()) == CCW_EMPTY_MARKER

    def test_headers_mode_has_headers_and_summaries_only(self):
        ccw = ConsolidatedContextWindow(mode="headers")
        ccw = append_ccw(ccw, SIG_KET, "Builds a basis vector.",
                         body="def ket(dim, args):\n    BODY_MARKER_1 = 0\n")
        ccw = append_ccw(ccw, SIG_NORM, "Computes the norm.",
                         body="def vnorm(a):\n    BODY_MARKER_2 = 0\n")
        rendered = render_ccw(ccw)
        assert SIG_KET.header_text in rendered
        assert SIG_NORM.header_text in rendered
        assert "# Builds a basis vector." in rendered
        assert "# Computes the norm." in rendered
        assert "BODY_MARKER" not in rendered

    def test_full_code_mode_emits_bodies_verbatim(self):
        body_1 = "def ket(dim, args):\n    BODY_MARKER_1 = 0\n    return args"
        body_2 = "def vnorm(a):\n    BODY_MARKER_2 = 0\n    return a"
        ccw = ConsolidatedContextWindow(mode="full_code")
        ccw = append_ccw(ccw, SIG_KET, "s1.", body=body_1)
        ccw = append_ccw(ccw, SIG_NORM, "s2.", body=body_2)
        rendered = render_ccw(ccw)
        assert body_1 in rendered and body_2 in rendered

    def test_none_mode_is_marker_even_with_entries(self):
        ccw = ConsolidatedContextWindow(mode="none")
        ccw = append_ccw(ccw, SIG_KET, "s1.")
        assert render_ccw(ccw) == CCW_EMPTY_MARKER

    def test_headers_output_independent_of_body_size(self):
        small = append_ccw(ConsolidatedContextWindow(), SIG_KET, "s.", body="x = 1")
        large = append_ccw(ConsolidatedContextWindow(), SIG_KET, "s.",
                           body="x = 1\n" * 10_000)
        assert render_ccw(small) == render_ccw(large)


class TestAppendCcw:
    def test_single_append(self):
        ccw = append_ccw(ConsolidatedContextWindow(), SIG_KET, "s.")
        assert ccw.names() == ["ket"]

    def test_latest_wins_for_same_name(self):
        ccw = append_ccw(ConsolidatedContextWindow(), SIG_KET, "first.")
        ccw = append_ccw(ccw, SIG_KET, "second.")
        assert len(ccw.entries) == 1
        assert ccw.entries[0].summary == "second."

    def test_append_order_preserved(self):
        ccw = ConsolidatedContextWindow()
        sigs = [make_signature(f"def f{i}(x):\n    '''f{i}.'''") for i in range(4)]
        for sig in sigs:
            ccw = append_ccw(ccw, sig, f"does f thing.")
        assert ccw.names() == [f"f{i}" for i in range(4)]

    def test_non_destructive(self):
        before = append_ccw(ConsolidatedContextWindow(), SIG_KET, "s.")
        rendered_before = render_ccw(before)
        append_ccw(before, SIG_NORM, "t.")
        assert render_ccw(before) == rendered_before
        assert before.names() == ["ket"]

    def test_rejects_multiline_summary(self):
        with pytest.raises(ValueError):
            append_ccw(ConsolidatedContextWindow(), SIG_KET, "two\nlines")


class TestPlanSubproblem:
    def test_three_step_plan(self):
        backend = scripted("1. Zero a vector.\n2. Set index j.\n3. Return it.")
        plan = plan_subproblem(ket_sub(), None, ConsolidatedContextWindow(), backend)
        assert len(plan.steps) == 3
        assert plan.subproblem == "p.1"
        assert plan.warnings == ()

    def test_references_prior_function_in_ccw(self):
        ccw = append_ccw(ConsolidatedContextWindow(), SIG_NORM, "Norm.")
        backend = scripted("1. Use vnorm(a) to get the length.\n2. Divide.")
        plan = plan_subproblem(ket_sub(), None, ccw, backend)
        assert "vnorm" in plan.referenced_functions

    def test_unknown_dependency_is_warning_not_error(self):
        backend = scripted("1. Call mystery_helper(x) for the result.")
        plan = plan_subproblem(ket_sub(), None, ConsolidatedContextWindow(), backend)
        assert plan.warnings and "mystery_helper" in plan.warnings[0]

    def test_prose_response_raises(self):
        backend = scripted("no enumerated steps here")
        with pytest.raises(PlanParse):
            plan_subproblem(ket_sub(), None, ConsolidatedContextWindow(), backend)

    def test_prompt_section_order(self):
        template = GuidanceTemplate(
            domain="physics",
            exemplars=(GuidanceExemplar("EXEMPLAR-STATEMENT", "EXEMPLAR-PC", SIG_NORM),),
            provenance=(),
        )
        ccw = append_ccw(ConsolidatedContextWindow(), SIG_NORM, "CCW-SUMMARY.")
        backend = scripted("1. ok")
        plan_subproblem(ket_sub(), template, ccw, backend)
        user = backend.transcript.entries[0].request.messages[1][1]
        i_exemplar = user.index("EXEMPLAR-STATEMENT")
        i_ccw = user.index("CCW-SUMMARY")
        i_statement = user.index("Return a standard basis vector.")
        i_header = user.index("def ket(dim, args):")
        assert i_exemplar < i_ccw < i_statement
        assert i_statement < user.index("A ket is a column") < i_header


class TestGenerateCode:
    def _plan(self, sub):
        from mosaic.student import Plan

        return Plan(steps=("do it",), referenced_functions=frozenset(),
                    subproblem=sub.id)

    def test_happy_path(self):
        sub = ket_sub()
        backend = scripted(
            "Here you go:\n```python\ndef ket(dim, args):\n    return [0, 1]\n```"
        )
        candidate = generate_code(self._plan(sub), sub, ConsolidatedContextWindow(),
                                  backend)
        assert candidate.generation_round == 0
        assert candidate.code.startswith("def ket")

    def test_prose_only_raises_code_extraction(self):
        sub = ket_sub()
        backend = scripted("I would use numpy for this.")
        with pytest.raises(CodeExtraction):
            generate_code(self._plan(sub), sub, ConsolidatedContextWindow(), backend)

    def test_wrong_name_raises_signature_mismatch(self):
        sub = ket_sub()
        backend = scripted(
            "```python\ndef ket_vector(dim, args):\n    return [0, 1]\n```"
        )
        with pytest.raises(SignatureMismatch):
            generate_code(self._plan(sub), sub, ConsolidatedContextWindow(), backend)

    def test_wrong_arity_raises_signature_mismatch(self):
        sub = ket_sub()
        backend = scripted("```python\ndef ket(dim):\n    return [0, 1]\n```")
        with pytest.raises(SignatureMismatch):
            generate_code(self._plan(sub), sub, ConsolidatedContextWindow(), backend)

    def test_first_fenced_block_wins(self):
        sub = ket_sub()
        backend = scripted(
            "```python\ndef ket(dim, args):\n    return [1]\n```\n"
            "```python\ndef ket(dim, args):\n    return [2]\n```"
        )
        candidate = generate_code(self._plan(sub), sub, ConsolidatedContextWindow(),
                                  backend)
        assert "return [1]" in candidate.code

    def test_io_tests_enter_prompt_but_eval_suite_never_does(self):
        sub = ket_sub(io_tests=[("ket(2, 0)", "[1.0, 0.0]")])
        backend = scripted("```python\ndef ket(dim, args):\n    return [0, 1]\n```")
        generate_code(self._plan(sub), sub, ConsolidatedContextWindow(), backend)
        user = backend.transcript.entries[0].request.messages[1][1]
        assert "ket(2, 0)" in user
        # the hidden case calls ket(2, 1); its expected value must not leak
        assert "ket(2, 1)" not in user
        assert "[0.0, 1.0]" not in user


class TestSummarize:
    def test_docstring_first_sentence(self):
        candidate = Candidate(
            code="def ket(dim, args):\n"
                 "    '''Return the j-th basis vector. Supports lists.'''\n"
                 "    return []\n",
            signature=SIG_KET, subproblem="p.1",
        )
        assert summarize_function(candidate) == "Return the j-th basis vector."

    def test_docstring_less_fallback(self):
        candidate = Candidate(code="def ket(dim, args):\n    return []\n",
                              signature=SIG_KET, subproblem="p.1")
        assert summarize_function(candidate) == "Implements ket."

    def test_backend_summary_truncated_at_word_boundary(self):
        long_sentence = "word " * 100
        backend = scripted(long_sentence)
        candidate = Candidate(code="def ket(dim, args):\n    return []\n",
                              signature=SIG_KET, subproblem="p.1")
        summary = summarize_function(candidate, backend)
        assert len(summary) <= 160
        assert "\n" not in summary
        assert not summary.endswith(" ")

    def test_backend_summary_strips_line_breaks(self):
        backend = scripted("Builds a ket\nfrom indices.")
        candidate = Candidate(code="def ket(dim, args):\n    return []\n",
                              signature=SIG_KET, subproblem="p.1")
        assert summarize_function(candidate, backend) == "Builds a ket from indices."
