"""End-to-end smoke across the engine/runner wire contract: the real shim
executable (shim/mosaic_shim.py) executes genuinely correct generated code
for the mini corpus, so every stage from planning to scoring runs for real.
"""

from pathlib import Path

import pytest

from helpers import MINI_CODE_BY_NAME
from mosaic.backend import BackendConfig
from mosaic.driver import PipelineConfig, run_corpus
from mosaic.grounding import ErrorClass
from mosaic.testing import ResponderBackend, pipeline_responder

SHIM = Path(__file__).resolve().parent.parent / "shim" / "mosaic_shim.py"

pytestmark = pytest.mark.skipif(not SHIM.exists(), reason="shim not present")


def test_real_runner_executes_generated_chain(corpus, tmp_path):
    config = PipelineConfig(runner=str(SHIM), timeout_s=30,
                            backend=BackendConfig(mode="scripted"))
    backend = ResponderBackend(pipeline_responder(MINI_CODE_BY_NAME))
    output = run_corpus(corpus, config, "mosaic", tmp_path / "out",
                        backend=backend)
    assert output.scoreboard.total.main_solved == 2
    assert output.scoreboard.total.sub_solved == 5
    for result in output.results:
        assert result.passed
        assert result.deviations and max(result.deviations) == 0.0


def test_real_runner_classifies_broken_generation(corpus, tmp_path):
    # sabotage one function: wrong constant -> compare-phase mismatch
    code = dict(MINI_CODE_BY_NAME)
    code["vnorm"] = (
        "def vnorm(a):\n"
        "    '''Return the Euclidean norm of a vector.'''\n"
        "    return vdot(a, a) ** 0.5 + 1.0\n"
    )
    config = PipelineConfig(runner=str(SHIM), timeout_s=30,
                            backend=BackendConfig(mode="scripted"))
    backend = ResponderBackend(pipeline_responder(code))
    output = run_corpus(corpus, config, "mosaic", tmp_path / "out",
                        backend=backend)
    by_id = {r.subproblem_id: r for r in output.results}
    assert not by_id["p_vec.2"].passed
    assert by_id["p_vec.2"].error_class is ErrorClass.ASSERTION_MISMATCH
    # downstream step keeps running with the broken chain member
    assert not by_id["p_vec.3"].passed
    # debugger must not have touched a semantic failure
    assert backend.transcript.count_tag("debugger.") == 0
