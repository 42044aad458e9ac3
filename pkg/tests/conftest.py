# tests/conftest.py
import os
from pathlib import Path

import hypothesis
import numpy as np
import pytest

from src.core.hilbmod import OperatorMatrix
from src.core.matalg import BlockProfile
from src.core.sampling import operator_corpus
from src.shared.config import Tolerances, reset_settings

PROBLEMS_DIR = Path(__file__).resolve().parent.parent / "problems"
CORPUS_SEED = 7
CORPUS_SIZE = 40

hypothesis.settings.register_profile("dev", deadline=None, max_examples=40)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=5)
hypothesis.settings.register_profile("debugger", deadline=None, report_multiple_bugs=False)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    monkeypatch.delenv("POLAR_TOL", raising=False)
    monkeypatch.delenv("POLAR_LOG_LEVEL", raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tol():
    return Tolerances()


@pytest.fixture(scope="session")
def corpus():
    return operator_corpus(CORPUS_SEED, CORPUS_SIZE)


@pytest.fixture
def problems_dir():
    return PROBLEMS_DIR


@pytest.fixture
def scalar_operator():
    """Operator over A = C from a plain complex matrix."""

    def build(matrix):
        block = np.array(matrix, dtype=complex)
        return OperatorMatrix(
            profile=BlockProfile.of(1),
            domain_rank=block.shape[0],
            codomain_rank=block.shape[1],
            blocks=(block,),
        )

    return build
