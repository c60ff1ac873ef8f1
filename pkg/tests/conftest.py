"""Shared test fixtures for bsl."""

from __future__ import annotations

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

from bsl.dictgen import generate_dictionary
from bsl.models import BlockedDictionary, BlockSparseVector


@pytest.fixture
def tmp_dir():
    """Create a temporary directory for tests."""
    d = tempfile.mkdtemp(prefix="bsl-test-")
    yield Path(d)
    shutil.rmtree(d, ignore_errors=True)


@pytest.fixture
def identity_dict():
    """4 x 4 identity split into two blocks of two atoms."""
    return BlockedDictionary(np.eye(4), 2)


@pytest.fixture
def small_dict():
    """Seeded 20 x 16 dictionary, M=8 blocks of d=2."""
    return generate_dictionary(20, 8, 2, seed=7)


@pytest.fixture
def tall_dict():
    """Seeded 400 x 20 dictionary (M=10, d=2) with small block coherence."""
    return generate_dictionary(400, 10, 2, seed=3)


@pytest.fixture
def normalized_dict():
    """Factory: a dictionary from an arbitrary matrix with every column scaled to unit norm."""

    def _make(matrix, block_size: int) -> BlockedDictionary:
        matrix = np.asarray(matrix, dtype=float)
        return BlockedDictionary(matrix / np.linalg.norm(matrix, axis=0), block_size)

    return _make


@pytest.fixture
def make_signal():
    """Factory for a block-sparse vector with given block values."""

    def _make(M: int, d: int, blocks: dict[int, list[float]]) -> BlockSparseVector:
        values = np.zeros((M, d))
        for i, block in blocks.items():
            values[i] = block
        return BlockSparseVector(values.reshape(-1), d)

    return _make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
