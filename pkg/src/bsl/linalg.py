"""Blocked views, restricted least squares and spectral norms.

Block indices are 0-based in this API; messages report them 1-based.
"""

from __future__ import annotations

import logging
from typing import Iterable

import numpy as np
from scipy import linalg as sla

from .errors import ArgumentError, SingularityError, format_blocks
from .models import BlockedDictionary, BlockSparseVector

logger = logging.getLogger(__name__)

# Smallest singular value relative to the largest below which D_I counts as singular.
RANK_TOLERANCE = 1e-10


def block_columns(D: BlockedDictionary, i: int) -> np.ndarray:
    """The L x d submatrix D[i] holding the columns of block i."""
    M = D.num_blocks
    if not 0 <= i < M:
        raise ArgumentError(f"block {i + 1} out of range 1..{M}")
    d = D.block_size
    return D.entries[:, i * d:(i + 1) * d]


def column_indices(D: BlockedDictionary, blocks: Iterable[int]) -> np.ndarray:
    """Atom indices covered by the given blocks, block by block in the given order."""
    d = D.block_size
    blocks = np.asarray(list(blocks), dtype=int)
    return (blocks[:, None] * d + np.arange(d)).reshape(-1)


def _check_index_set(D: BlockedDictionary, blocks: Iterable[int]) -> list[int]:
    blocks = [int(i) for i in blocks]
    M = D.num_blocks
    for i in blocks:
        if not 0 <= i < M:
            raise ArgumentError(f"block {i + 1} out of range 1..{M}")
    if any(b <= a for a, b in zip(blocks, blocks[1:])):
        raise ArgumentError(f"block set {format_blocks(blocks)} must be sorted and free of duplicates")
    return blocks


def subdictionary(D: BlockedDictionary, blocks: Iterable[int]) -> np.ndarray:
    """D_I: the blocks of I side by side, in ascending block order."""
    blocks = _check_index_set(D, blocks)
    return D.entries[:, column_indices(D, blocks)]


def _factor(D: BlockedDictionary, blocks: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Economic QR of D_I after checking it has full column rank."""
    DI = D.entries[:, column_indices(D, blocks)]
    if DI.shape[1] > DI.shape[0]:
        raise ArgumentError(
            f"block set {format_blocks(blocks)} spans {DI.shape[1]} columns but L = {DI.shape[0]}"
        )
    Q, R = sla.qr(DI, mode="economic")
    singular_values = sla.svdvals(R)
    if singular_values[-1] < RANK_TOLERANCE * singular_values[0]:
        raise SingularityError(
            f"subdictionary on blocks {format_blocks(blocks)} is rank deficient "
            f"(smallest/largest singular value {singular_values[-1] / singular_values[0]:.3g})"
        )
    return Q, R


def restricted_least_squares(D: BlockedDictionary, blocks: Iterable[int], y) -> BlockSparseVector:
    """Least-squares fit of y using only the blocks in I; zero elsewhere.

    The blocks may be given in any order (BOMP passes selection order);
    duplicates are rejected.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != D.L:
        raise ArgumentError(f"measurement length {y.size} does not match L = {D.L}")
    blocks = _check_index_set(D, sorted(int(i) for i in blocks))

    values = np.zeros(D.N)
    if blocks:
        Q, R = _factor(D, blocks)
        values[column_indices(D, blocks)] = sla.solve_triangular(R, Q.T @ y)
    return BlockSparseVector(values, D.block_size)


def restricted_gram_inverse(D: BlockedDictionary, blocks: Iterable[int]) -> np.ndarray:
    """(D_I^T D_I)^{-1}, formed from the triangular factor of D_I."""
    blocks = _check_index_set(D, sorted(int(i) for i in blocks))
    if not blocks:
        raise ArgumentError("block set must not be empty")
    _, R = _factor(D, blocks)
    R_inv = sla.solve_triangular(R, np.eye(R.shape[0]))
    return R_inv @ R_inv.T


def block_correlations(D: BlockedDictionary, r) -> np.ndarray:
    """rho_i = ||D[i]^T r||_2 for every block i."""
    r = np.asarray(r, dtype=float).reshape(-1)
    return np.linalg.norm((D.entries.T @ r).reshape(D.num_blocks, D.block_size), axis=1)


def spectral_norm(A) -> float:
    """Largest singular value of A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        raise ArgumentError("spectral norm of an empty matrix is undefined")
    return float(sla.svdvals(A)[0])
