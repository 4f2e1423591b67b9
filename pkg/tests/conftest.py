"""
Pytest fixtures for the clumped nuclei splitter
"""

import os
import sys

import pytest

# Path fix for tests/ directory
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
sys.path.append(parent_dir)

from config.settings import PipelineConfig
from pipeline.orchestrator import run_pipeline
from services.synthetic import generate_synthetic_clump, single_ellipse_spec, synthetic_corpus, two_nucleus_spec


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end runs over many synthetic images")


@pytest.fixture
def default_config():
    return PipelineConfig()


@pytest.fixture(scope="session")
def two_nucleus_case():
    """(image, ground truth) of two overlapping ellipses side by side"""
    return generate_synthetic_clump(two_nucleus_spec())


@pytest.fixture(scope="session")
def single_ellipse_case():
    return generate_synthetic_clump(single_ellipse_spec())


@pytest.fixture(scope="session")
def corpus_runs():
    """(spec, ground truth, PipelineResult) for a seeded slice of the benchmark corpus"""
    runs = []
    for spec in synthetic_corpus(n=20, seed=7):
        img, gt = generate_synthetic_clump(spec)
        runs.append((spec, gt, run_pipeline(img)))
    return runs
