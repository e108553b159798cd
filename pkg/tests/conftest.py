from __future__ import annotations

from pathlib import Path

import pytest

from tmlpredict.config import load_run_config
from tmlpredict.corpus import ViewRole, load_corpus
from tmlpredict.langsim import build_split, load_typology
from tmlpredict.pipeline import build_runtime

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def typology():
    return load_typology(FIXTURES / "typology.json")


@pytest.fixture(scope="session")
def split(typology):
    return build_split(list(typology.vectors.values()))


@pytest.fixture(scope="session")
def corpus(split):
    return load_corpus(FIXTURES / "manifest.json", is_close=split.is_close_or_none)


@pytest.fixture(scope="session")
def reduced_view(corpus):
    return corpus.view(ViewRole.REDUCED_ONLY)


@pytest.fixture(scope="session")
def combined_view(corpus):
    return corpus.view(ViewRole.COMBINED)


@pytest.fixture(scope="session")
def runtime():
    config = load_run_config(FIXTURES / "runconfig.json")
    return build_runtime(config)


@pytest.fixture()
def tmp_runtime(tmp_path):
    config = load_run_config(
        FIXTURES / "runconfig.json", overrides={"out_dir": str(tmp_path / "out")}
    )
    return build_runtime(config)
