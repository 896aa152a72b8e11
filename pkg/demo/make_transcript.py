#!/usr/bin/env python3
"""Record demo/transcript.jsonl for fully offline replay runs.

The responder backend answers every agent request deterministically (the
generated code below genuinely solves the demo corpus), and the real shim
executes it. Afterwards:

    mosaic run --corpus demo/corpus --config demo/config.json \
        --strategy mosaic --replay demo/transcript.jsonl --out runs/demo
"""

from pathlib import Path

from mosaic.backend import BackendConfig
from mosaic.corpus import load_corpus
from mosaic.driver import PipelineConfig, run_corpus
from mosaic.testing import ResponderBackend, pipeline_responder

ROOT = Path(__file__).resolve().parent

CODE_BY_NAME = {
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


def main() -> int:
    corpus = load_corpus(ROOT / "corpus")
    config = PipelineConfig(
        runner=str(ROOT.parent / "shim" / "mosaic_shim.py"),
        timeout_s=30,
        backend=BackendConfig(mode="scripted"),
    )
    backend = ResponderBackend(pipeline_responder(CODE_BY_NAME))
    output = run_corpus(corpus, config, "mosaic",
                        ROOT.parent / "runs" / "demo-record", backend=backend)
    target = ROOT / "transcript.jsonl"
    target.write_bytes((output.out_dir / "transcript.jsonl").read_bytes())
    total = output.scoreboard.total
    print(f"recorded {target} ({len(backend.transcript)} exchanges)")
    print(f"recording run scored main {total.main_solved}/{total.main_total}, "
          f"sub {total.sub_solved}/{total.sub_total}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
