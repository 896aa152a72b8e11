"""Shared builders for test corpora and canned pipeline content."""

from __future__ import annotations

import random

from mosaic.corpus import (
    Corpus,
    EvalCase,
    IoPair,
    Problem,
    SubProblem,
    TargetValue,
    make_signature,
)

DOMAIN_POOL = ("physics", "chemistry", "biology", "materials", "mathematics")


def make_case(entry, args, expected, **kwargs) -> EvalCase:
    return EvalCase(
        entry=entry,
        args=tuple(TargetValue.from_obj(a) for a in args),
        expected=TargetValue.from_obj(expected),
        **kwargs,
    )


def make_sub(problem_id, step_index, name, params, statement, cases,
             ground_truth=None, background="", io_tests=()) -> SubProblem:
    header = f"def {name}({', '.join(params)}):\n    '''{statement}'''"
    return SubProblem(
        id=f"{problem_id}.{step_index}",
        step_index=step_index,
        step_statement=statement,
        background=background,
        signature=make_signature(header),
        eval_suite=tuple(cases),
        io_tests=tuple(IoPair(*p) for p in io_tests),
        ground_truth_code=ground_truth,
    )


def make_problem(problem_id, domain, statement, subs) -> Problem:
    return Problem(id=problem_id, domain=domain, main_statement=statement,
                   subproblems=tuple(subs))


BASIS_VEC_CODE = """\
def basis_vec(d, j):
    '''Return the j-th standard basis vector in d dimensions as a list.'''
    vec = [0.0] * d
    vec[j] = 1.0
    return vec
"""

TENSOR_BASIS_CODE = """\
def tensor_basis(dims, idxs):
    '''Return the tensor product of standard basis vectors as a flat list.'''
    out = [1.0]
    for d, j in zip(dims, idxs):
        vec = basis_vec(d, j)
        out = [x * y for x in out for y in vec]
    return out
"""

MINI_CODE_BY_NAME = {
    "vdot": (
        "def vdot(a, b):\n"
        "    '''Return the dot product of two vectors.'''\n"
        "    return float(sum(x * y for x, y in zip(a, b)))\n"
    ),
    "vnorm": (
        "def vnorm(a):\n"
        "    '''Return the Euclidean norm of a vector.'''\n"
        "    return vdot(a, a) ** 0.5\n"
    ),
    "normalize": (
        "def normalize(a):\n"
        "    '''Return the unit vector parallel to a.'''\n"
        "    n = vnorm(a)\n"
        "    return [x / n for x in a]\n"
    ),
    "poly_eval": (
        "def poly_eval(coeffs, x):\n"
        "    '''Evaluate a polynomial with the given coefficients at x.'''\n"
        "    return float(sum(c * x ** i for i, c in enumerate(coeffs)))\n"
    ),
    "poly_deriv_at": (
        "def poly_deriv_at(coeffs, x):\n"
        "    '''Evaluate the derivative of a polynomial at x.'''\n"
        "    return poly_eval([i * c for i, c in enumerate(coeffs)][1:], x)\n"
    ),
}


def mini_corpus() -> Corpus:
    """3 problems / 7 subproblems / 2 domains; physics has validation data,
    mathematics does not (exercises the zero-shot fallback)."""
    p_basis = make_problem(
        "p_basis", "physics", "Construct tensor products of basis vectors.",
        [
            make_sub("p_basis", 1, "basis_vec", ("d", "j"),
                     "Return the j-th standard basis vector in d dimensions.",
                     [make_case("basis_vec", [4, 1], [0.0, 1.0, 0.0, 0.0])],
                     ground_truth=BASIS_VEC_CODE),
            make_sub("p_basis", 2, "tensor_basis", ("dims", "idxs"),
                     "Return the tensor product of basis vectors as a flat list.",
                     [make_case("tensor_basis", [[2, 2], [1, 1]],
                                [0.0, 0.0, 0.0, 1.0])],
                     ground_truth=TENSOR_BASIS_CODE),
        ],
    )
    p_vec = make_problem(
        "p_vec", "physics", "Vector arithmetic utilities.",
        [
            make_sub("p_vec", 1, "vdot", ("a", "b"),
                     "Return the dot product of two equal-length vectors.",
                     [make_case("vdot", [[1, 2, 3], [4, 5, 6]], 32.0)],
                     background="The dot product is the sum of elementwise products.",
                     io_tests=[("vdot([1, 0], [0, 1])", "0.0")]),
            make_sub("p_vec", 2, "vnorm", ("a",),
                     "Return the Euclidean norm of a vector.",
                     [make_case("vnorm", [[3, 4]], 5.0)]),
            make_sub("p_vec", 3, "normalize", ("a",),
                     "Return the unit vector parallel to a.",
                     [make_case("normalize", [[3, 4]], [0.6, 0.8])]),
        ],
    )
    p_poly = make_problem(
        "p_poly", "mathematics", "Polynomial evaluation utilities.",
        [
            make_sub("p_poly", 1, "poly_eval", ("coeffs", "x"),
                     "Evaluate a polynomial with coefficients in ascending order.",
                     [make_case("poly_eval", [[1, 2, 3], 2], 17.0)]),
            make_sub("p_poly", 2, "poly_deriv_at", ("coeffs", "x"),
                     "Evaluate the derivative of the polynomial at x.",
                     [make_case("poly_deriv_at", [[1, 2, 3], 2], 14.0)]),
        ],
    )
    problems = (p_basis, p_poly, p_vec)
    split = {"p_basis": "validation", "p_vec": "test", "p_poly": "test"}
    return Corpus(problems=tuple(sorted(problems, key=lambda p: p.id)), split=split)


# Published reference row: per-domain (mains, mains solved, subs, subs solved).
TABLE1_ROW = {
    "physics": (30, 4, 145, 56),
    "chemistry": (7, 2, 42, 14),
    "biology": (7, 0, 25, 7),
    "materials": (11, 3, 50, 26),
    "mathematics": (10, 3, 24, 10),
}


def table1_fixture():
    """SubResults shaped exactly like the reference scoreboard row: per
    domain, exactly `mains solved` problems with every subproblem passing
    and `subs solved` passing subproblems in total."""
    from mosaic.evaluator import SubResult
    from mosaic.grounding import ErrorClass

    results = []
    for domain, (n_main, main_solved, n_sub, sub_solved) in TABLE1_ROW.items():
        base, rem = divmod(n_sub, n_main)
        sizes = [base + 1 if i < rem else base for i in range(n_main)]
        passes = [sizes[i] if i < main_solved else 0 for i in range(n_main)]
        remaining = sub_solved - sum(passes)
        assert remaining >= 0
        for i in range(main_solved, n_main):
            if remaining <= 0:
                break
            extra = min(sizes[i] - 1, remaining)  # never complete an unsolved main
            passes[i] = extra
            remaining -= extra
        assert remaining == 0, f"cannot distribute passes for {domain}"
        for i, size in enumerate(sizes):
            pid = f"{domain}_{i:03d}"
            for j in range(size):
                passed = j < passes[i]
                error = ErrorClass.NONE if passed else (
                    ErrorClass.ASSERTION_MISMATCH if j % 2 else
                    ErrorClass.RUNTIME_EXCEPTION
                )
                results.append(SubResult(
                    problem_id=pid,
                    subproblem_id=f"{pid}.{j + 1}",
                    domain=domain,
                    passed=passed,
                    error_class=error,
                ))
    return results


def random_corpus(rng: random.Random, max_problems: int = 8) -> Corpus:
    """Small random corpus for property tests; validation split non-empty."""
    domains = rng.sample(DOMAIN_POOL, rng.randint(1, 4))
    n_problems = rng.randint(2, max_problems)
    problems = []
    split = {}
    for i in range(n_problems):
        pid = f"p{i:02d}"
        domain = rng.choice(domains)
        is_validation = i == 0 or rng.random() < 0.4
        subs = []
        for step in range(1, rng.randint(1, 4) + 1):
            name = f"fn_{i}_{step}"
            subs.append(
                make_sub(pid, step, name, ("x",), f"Compute {name}.",
                         [make_case(name, [1], 1.0)],
                         ground_truth=f"def {name}(x):\n    return 1.0\n"
                         if is_validation else None)
            )
        problems.append(make_problem(pid, domain, f"Main {pid}.", subs))
        split[pid] = "validation" if is_validation else "test"
    return Corpus(problems=tuple(problems), split=split)
