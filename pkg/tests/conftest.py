from __future__ import annotations

import pytest
from hypothesis import settings

from helpers import MINI_CODE_BY_NAME, mini_corpus
from mosaic.corpus import write_corpus
from mosaic.testing import ResponderBackend, pipeline_responder

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")


@pytest.fixture
def corpus():
    return mini_corpus()


@pytest.fixture
def corpus_dir(tmp_path, corpus):
    root = tmp_path / "corpus"
    write_corpus(corpus, root)
    return root


@pytest.fixture
def responder_backend():
    return ResponderBackend(pipeline_responder(MINI_CODE_BY_NAME))
